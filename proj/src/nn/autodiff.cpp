#include "splatflow/nn/autodiff.hpp"

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <unordered_set>

namespace splatflow::nn {

namespace {

thread_local bool g_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using MapM = Eigen::Map<RowMat>;
using StrideMapC = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using StrideMapM = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

Var make(std::vector<int> shape, std::vector<double> value, std::vector<Var> parents,
         std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool needs = false;
  for (const auto& p : parents) needs = needs || p->requires_grad;
  if (g_grad_enabled && needs) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(fn);
  }
  return n;
}

void require(bool ok, const char* what) {
  if (!ok) throw ShapeMismatch(what);
}

std::vector<int> mat_shape(int r, int c) { return {r, c}; }

}  // namespace

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

Var constant(const Tensor& t) { return constant(t.shape, t.data); }

Var constant(std::vector<int> shape, std::vector<double> value) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

Var parameter(std::vector<int> shape, std::vector<double> value) {
  auto n = constant(std::move(shape), std::move(value));
  n->requires_grad = true;
  return n;
}

Tensor to_tensor(const Var& v) {
  Tensor t;
  t.shape = v->shape;
  t.data = v->value;
  return t;
}

void backward(const Var& root) {
  if (!root->requires_grad) return;
  // iterative post-order DFS
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (n->backward_fn) n->grad.assign(n->value.size(), 0.0);
  }
  root->ensure_grad();
  std::fill(root->grad.begin(), root->grad.end(), 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

Var add(const Var& a, const Var& b) {
  require(a->size() == b->size(), "add: size mismatch");
  std::vector<double> v(a->size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = a->value[i] + b->value[i];
  return make(a->shape, std::move(v), {a, b}, [](Node& n) {
    for (int k = 0; k < 2; ++k) {
      auto& p = *n.parents[k];
      if (!p.requires_grad) continue;
      auto& g = p.ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) { return add(a, scale(b, -1.0)); }

Var mul(const Var& a, const Var& b) {
  require(a->size() == b->size(), "mul: size mismatch");
  std::vector<double> v(a->size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = a->value[i] * b->value[i];
  return make(a->shape, std::move(v), {a, b}, [](Node& n) {
    auto& a = *n.parents[0];
    auto& b = *n.parents[1];
    if (a.requires_grad) {
      auto& g = a.ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * b.value[i];
    }
    if (b.requires_grad) {
      auto& g = b.ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * a.value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  std::vector<double> v(a->size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = a->value[i] * s;
  return make(a->shape, std::move(v), {a}, [s](Node& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += s * n.grad[i];
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require(w->shape.size() == 2, "linear: weight must be 2-d");
  const int t = x->rows(), din = w->shape[0], dout = w->shape[1];
  require(x->cols() == din, "linear: input width mismatch");
  if (b) require(static_cast<int>(b->size()) == dout, "linear: bias size mismatch");
  std::vector<double> v(static_cast<size_t>(t) * dout);
  MapM y(v.data(), t, dout);
  y.noalias() = MapC(x->value.data(), t, din) * MapC(w->value.data(), din, dout);
  if (b) y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b->value.data(), dout);
  std::vector<Var> parents{x, w};
  if (b) parents.push_back(b);
  return make(mat_shape(t, dout), std::move(v), std::move(parents), [t, din, dout](Node& n) {
    MapC dy(n.grad.data(), t, dout);
    auto& x = *n.parents[0];
    auto& w = *n.parents[1];
    if (x.requires_grad) MapM(x.ensure_grad().data(), t, din).noalias() += dy * MapC(w.value.data(), din, dout).transpose();
    if (w.requires_grad) MapM(w.ensure_grad().data(), din, dout).noalias() += MapC(x.value.data(), t, din).transpose() * dy;
    if (n.parents.size() > 2 && n.parents[2]->requires_grad) {
      Eigen::Map<Eigen::RowVectorXd>(n.parents[2]->ensure_grad().data(), dout) += dy.colwise().sum();
    }
  });
}

Var add_rows(const Var& x, const Var& v, int group) {
  const int t = x->rows(), d = x->cols();
  require(group > 0 && t % group == 0 && v->rows() * group == t && v->cols() == d, "add_rows: shape mismatch");
  std::vector<double> out(x->value);
  for (int r = 0; r < t; ++r)
    for (int c = 0; c < d; ++c) out[r * d + c] += v->value[(r / group) * d + c];
  return make(x->shape, std::move(out), {x, v}, [t, d, group](Node& n) {
    auto& x = *n.parents[0];
    auto& v = *n.parents[1];
    if (x.requires_grad) {
      auto& g = x.ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (v.requires_grad) {
      auto& g = v.ensure_grad();
      for (int r = 0; r < t; ++r)
        for (int c = 0; c < d; ++c) g[(r / group) * d + c] += n.grad[r * d + c];
    }
  });
}

Var modulate(const Var& x, const Var& shift, const Var& scl, int group) {
  const int t = x->rows(), d = x->cols();
  require(group > 0 && t % group == 0 && shift->rows() * group == t && shift->cols() == d &&
              scl->size() == shift->size(),
          "modulate: shape mismatch");
  std::vector<double> out(x->size());
  for (int r = 0; r < t; ++r) {
    const int f = r / group;
    for (int c = 0; c < d; ++c) {
      out[r * d + c] = x->value[r * d + c] * (1.0 + scl->value[f * d + c]) + shift->value[f * d + c];
    }
  }
  return make(x->shape, std::move(out), {x, shift, scl}, [t, d, group](Node& n) {
    auto& x = *n.parents[0];
    auto& sh = *n.parents[1];
    auto& sc = *n.parents[2];
    for (int r = 0; r < t; ++r) {
      const int f = r / group;
      for (int c = 0; c < d; ++c) {
        const double g = n.grad[r * d + c];
        if (x.requires_grad) x.ensure_grad()[r * d + c] += g * (1.0 + sc.value[f * d + c]);
        if (sh.requires_grad) sh.ensure_grad()[f * d + c] += g;
        if (sc.requires_grad) sc.ensure_grad()[f * d + c] += g * x.value[r * d + c];
      }
    }
  });
}

Var gate(const Var& x, const Var& gv, int group) {
  const int t = x->rows(), d = x->cols();
  require(group > 0 && t % group == 0 && gv->rows() * group == t && gv->cols() == d, "gate: shape mismatch");
  std::vector<double> out(x->size());
  for (int r = 0; r < t; ++r)
    for (int c = 0; c < d; ++c) out[r * d + c] = x->value[r * d + c] * gv->value[(r / group) * d + c];
  return make(x->shape, std::move(out), {x, gv}, [t, d, group](Node& n) {
    auto& x = *n.parents[0];
    auto& gv = *n.parents[1];
    for (int r = 0; r < t; ++r) {
      const int f = r / group;
      for (int c = 0; c < d; ++c) {
        const double g = n.grad[r * d + c];
        if (x.requires_grad) x.ensure_grad()[r * d + c] += g * gv.value[f * d + c];
        if (gv.requires_grad) gv.ensure_grad()[f * d + c] += g * x.value[r * d + c];
      }
    }
  });
}

Var layer_norm(const Var& x, double eps) {
  const int t = x->rows(), d = x->cols();
  std::vector<double> out(x->size());
  auto inv_std = std::make_shared<std::vector<double>>(t);
  for (int r = 0; r < t; ++r) {
    const double* row = &x->value[r * d];
    double mu = 0.0;
    for (int c = 0; c < d; ++c) mu += row[c];
    mu /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (int c = 0; c < d; ++c) out[r * d + c] = (row[c] - mu) * is;
  }
  return make(x->shape, std::move(out), {x}, [t, d, inv_std](Node& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (int r = 0; r < t; ++r) {
      const double* dy = &n.grad[r * d];
      const double* y = &n.value[r * d];
      double m1 = 0.0, m2 = 0.0;
      for (int c = 0; c < d; ++c) {
        m1 += dy[c];
        m2 += dy[c] * y[c];
      }
      m1 /= d;
      m2 /= d;
      for (int c = 0; c < d; ++c) g[r * d + c] += (*inv_std)[r] * (dy[c] - m1 - y[c] * m2);
    }
  });
}

Var gelu(const Var& x) {
  std::vector<double> out(x->size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double z = x->value[i];
    out[i] = 0.5 * z * (1.0 + std::erf(z / std::numbers::sqrt2));
  }
  return make(x->shape, std::move(out), {x}, [](Node& n) {
    auto& p = *n.parents[0];
    auto& g = p.ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) {
      const double z = p.value[i];
      const double cdf = 0.5 * (1.0 + std::erf(z / std::numbers::sqrt2));
      const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
      g[i] += n.grad[i] * (cdf + z * pdf);
    }
  });
}

Var silu(const Var& x) {
  std::vector<double> out(x->size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x->value[i] / (1.0 + std::exp(-x->value[i]));
  return make(x->shape, std::move(out), {x}, [](Node& n) {
    auto& p = *n.parents[0];
    auto& g = p.ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-p.value[i]));
      g[i] += n.grad[i] * s * (1.0 + p.value[i] * (1.0 - s));
    }
  });
}

Var concat_cols(const Var& a, const Var& b) {
  const int t = a->rows(), da = a->cols(), db = b->cols();
  require(b->rows() == t, "concat_cols: row mismatch");
  const int d = da + db;
  std::vector<double> out(static_cast<size_t>(t) * d);
  for (int r = 0; r < t; ++r) {
    std::copy_n(&a->value[r * da], da, &out[r * d]);
    std::copy_n(&b->value[r * db], db, &out[r * d + da]);
  }
  return make(mat_shape(t, d), std::move(out), {a, b}, [t, da, db, d](Node& n) {
    auto& a = *n.parents[0];
    auto& b = *n.parents[1];
    for (int r = 0; r < t; ++r) {
      if (a.requires_grad) {
        auto& g = a.ensure_grad();
        for (int c = 0; c < da; ++c) g[r * da + c] += n.grad[r * d + c];
      }
      if (b.requires_grad) {
        auto& g = b.ensure_grad();
        for (int c = 0; c < db; ++c) g[r * db + c] += n.grad[r * d + da + c];
      }
    }
  });
}

Var slice_cols(const Var& x, int begin, int end) {
  const int t = x->rows(), d = x->cols(), w = end - begin;
  require(begin >= 0 && end <= d && w > 0, "slice_cols: bad range");
  std::vector<double> out(static_cast<size_t>(t) * w);
  for (int r = 0; r < t; ++r) std::copy_n(&x->value[r * d + begin], w, &out[r * w]);
  return make(mat_shape(t, w), std::move(out), {x}, [t, d, w, begin](Node& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (int r = 0; r < t; ++r)
      for (int c = 0; c < w; ++c) g[r * d + begin + c] += n.grad[r * w + c];
  });
}

Var slice_rows(const Var& x, int begin, int end) {
  const int t = x->rows(), d = x->cols(), h = end - begin;
  require(begin >= 0 && end <= t && h > 0, "slice_rows: bad range");
  std::vector<double> out(x->value.begin() + static_cast<size_t>(begin) * d,
                          x->value.begin() + static_cast<size_t>(end) * d);
  return make(mat_shape(h, d), std::move(out), {x}, [d, begin](Node& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (size_t i = 0; i < n.grad.size(); ++i) g[static_cast<size_t>(begin) * d + i] += n.grad[i];
  });
}

Var attention(const Var& q, const Var& k, const Var& v, int heads, int group) {
  const int t = q->rows(), d = q->cols();
  require(k->rows() == t && v->rows() == t && k->cols() == d && v->cols() == d, "attention: shape mismatch");
  require(heads > 0 && d % heads == 0 && group > 0 && t % group == 0, "attention: bad heads or group");
  const int dh = d / heads, groups = t / group;
  const double s = 1.0 / std::sqrt(static_cast<double>(dh));
  auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(groups) * heads * group * group);
  std::vector<double> out(static_cast<size_t>(t) * d, 0.0);
  for (int gi = 0; gi < groups; ++gi) {
    for (int h = 0; h < heads; ++h) {
      const size_t off = static_cast<size_t>(gi) * group * d + h * dh;
      StrideMapC Q(q->value.data() + off, group, dh, Eigen::OuterStride<>(d));
      StrideMapC K(k->value.data() + off, group, dh, Eigen::OuterStride<>(d));
      StrideMapC V(v->value.data() + off, group, dh, Eigen::OuterStride<>(d));
      MapM P(probs->data() + (static_cast<size_t>(gi) * heads + h) * group * group, group, group);
      P.noalias() = s * (Q * K.transpose());
      for (int r = 0; r < group; ++r) {
        const double mx = P.row(r).maxCoeff();
        P.row(r) = (P.row(r).array() - mx).exp();
        P.row(r) /= P.row(r).sum();
      }
      StrideMapM O(out.data() + off, group, dh, Eigen::OuterStride<>(d));
      O.noalias() = P * V;
    }
  }
  return make(mat_shape(t, d), std::move(out), {q, k, v}, [t, d, dh, heads, group, groups, s, probs](Node& n) {
    auto& q = *n.parents[0];
    auto& k = *n.parents[1];
    auto& v = *n.parents[2];
    std::vector<double>* gq = q.requires_grad ? &q.ensure_grad() : nullptr;
    std::vector<double>* gk = k.requires_grad ? &k.ensure_grad() : nullptr;
    std::vector<double>* gv = v.requires_grad ? &v.ensure_grad() : nullptr;
    RowMat dP, dS;
    for (int gi = 0; gi < groups; ++gi) {
      for (int h = 0; h < heads; ++h) {
        const size_t off = static_cast<size_t>(gi) * group * d + h * dh;
        StrideMapC Q(q.value.data() + off, group, dh, Eigen::OuterStride<>(d));
        StrideMapC K(k.value.data() + off, group, dh, Eigen::OuterStride<>(d));
        StrideMapC V(v.value.data() + off, group, dh, Eigen::OuterStride<>(d));
        StrideMapC dO(n.grad.data() + off, group, dh, Eigen::OuterStride<>(d));
        MapC P(probs->data() + (static_cast<size_t>(gi) * heads + h) * group * group, group, group);
        if (gv) StrideMapM(gv->data() + off, group, dh, Eigen::OuterStride<>(d)).noalias() += P.transpose() * dO;
        dP.noalias() = dO * V.transpose();
        dS = P.array() * (dP.colwise() - (dP.array() * P.array()).rowwise().sum().matrix()).array();
        if (gq) StrideMapM(gq->data() + off, group, dh, Eigen::OuterStride<>(d)).noalias() += s * (dS * K);
        if (gk) StrideMapM(gk->data() + off, group, dh, Eigen::OuterStride<>(d)).noalias() += s * (dS.transpose() * Q);
      }
    }
    (void)t;
  });
}

Var patchify(const Var& x) {
  require(x->shape.size() == 4, "patchify: expected [F, H, W, C]");
  const int f = x->shape[0], h = x->shape[1], w = x->shape[2], c = x->shape[3];
  if (h % 2 || w % 2) throw OddDimensions("patchify: height and width must be even");
  const int ph = h / 2, pw = w / 2, dim = 4 * c;
  auto index = std::make_shared<std::vector<size_t>>(x->size());  // output slot -> input slot
  for (int fi = 0; fi < f; ++fi)
    for (int py = 0; py < ph; ++py)
      for (int px = 0; px < pw; ++px)
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            for (int ci = 0; ci < c; ++ci) {
              const size_t tok = (static_cast<size_t>(fi) * ph + py) * pw + px;
              const size_t o = tok * dim + (dy * 2 + dx) * c + ci;
              (*index)[o] = ((static_cast<size_t>(fi) * h + 2 * py + dy) * w + 2 * px + dx) * c + ci;
            }
  std::vector<double> out(x->size());
  for (size_t o = 0; o < out.size(); ++o) out[o] = x->value[(*index)[o]];
  return make(mat_shape(f * ph * pw, dim), std::move(out), {x}, [index](Node& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (size_t o = 0; o < n.grad.size(); ++o) g[(*index)[o]] += n.grad[o];
  });
}

Var unpatchify(const Var& tokens, int frames, int height, int width, int channels) {
  if (height % 2 || width % 2) throw OddDimensions("unpatchify: height and width must be even");
  const int ph = height / 2, pw = width / 2, dim = 4 * channels;
  require(tokens->rows() == frames * ph * pw && tokens->cols() == dim, "unpatchify: shape mismatch");
  auto index = std::make_shared<std::vector<size_t>>(tokens->size());  // output slot -> token slot
  for (int fi = 0; fi < frames; ++fi)
    for (int py = 0; py < ph; ++py)
      for (int px = 0; px < pw; ++px)
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            for (int ci = 0; ci < channels; ++ci) {
              const size_t tok = (static_cast<size_t>(fi) * ph + py) * pw + px;
              const size_t o = ((static_cast<size_t>(fi) * height + 2 * py + dy) * width + 2 * px + dx) * channels + ci;
              (*index)[o] = tok * dim + (dy * 2 + dx) * channels + ci;
            }
  std::vector<double> out(tokens->size());
  for (size_t o = 0; o < out.size(); ++o) out[o] = tokens->value[(*index)[o]];
  return make({frames, height, width, channels}, std::move(out), {tokens}, [index](Node& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (size_t o = 0; o < n.grad.size(); ++o) g[(*index)[o]] += n.grad[o];
  });
}

Var mse(const Var& pred, const Tensor& target) {
  require(pred->size() == target.size(), "mse: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < target.size(); ++i) {
    const double d = pred->value[i] - target.data[i];
    s += d * d;
  }
  const double inv_n = 1.0 / static_cast<double>(target.size());
  auto tgt = std::make_shared<std::vector<double>>(target.data);
  return make({1}, {s * inv_n}, {pred}, [tgt, inv_n](Node& n) {
    auto& p = *n.parents[0];
    auto& g = p.ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[0] * 2.0 * (p.value[i] - (*tgt)[i]) * inv_n;
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x->value) s += v;
  return make({1}, {s}, {x}, [](Node& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (double& v : g) v += n.grad[0];
  });
}

}  // namespace splatflow::nn
