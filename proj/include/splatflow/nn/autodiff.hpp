#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "splatflow/core/tensor.hpp"

namespace splatflow::nn {

/// One value in the recorded computation. Leaves with requires_grad are
/// parameters; interior nodes keep a closure that pushes their gradient to
/// their parents.
struct Node {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until touched by backward()
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;

  size_t size() const { return value.size(); }
  int rows() const { return shape.empty() ? 1 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : static_cast<int>(value.size() / shape[0]); }
  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

using Var = std::shared_ptr<Node>;

/// Disables recording while alive (forward values only).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};
bool grad_enabled();

Var constant(const Tensor& t);
Var constant(std::vector<int> shape, std::vector<double> value);
Var parameter(std::vector<int> shape, std::vector<double> value);
Tensor to_tensor(const Var& v);

/// Reverse sweep from a scalar root; gradients accumulate into every
/// reachable node that requires them.
void backward(const Var& root);

// ---- ops on row-major [rows, cols] matrices unless noted ----

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// x [T, Din] times w [Din, Dout] plus b [Dout] (b may be null).
Var linear(const Var& x, const Var& w, const Var& b);
/// Adds row f of v [F, D] to every row of x [T, D] in group f (T = F * group).
Var add_rows(const Var& x, const Var& v, int group);
/// x (1 + scale_f) + shift_f per group of rows.
Var modulate(const Var& x, const Var& shift, const Var& scale, int group);
/// x * g_f per group of rows.
Var gate(const Var& x, const Var& g, int group);
/// Per-row normalisation to zero mean and unit variance, no affine part.
Var layer_norm(const Var& x, double eps = 1e-6);
Var gelu(const Var& x);
Var silu(const Var& x);
Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& x, int begin, int end);
Var slice_rows(const Var& x, int begin, int end);
/// Multi-head softmax attention on q, k, v [T, D]. Tokens attend only within
/// consecutive blocks of `group` rows (group = T for full attention).
Var attention(const Var& q, const Var& k, const Var& v, int heads, int group);
/// [F, H, W, C] -> [F * (H/2) * (W/2), 4 C]. Tokens are in raster order of
/// patches per frame; a token lists (dy, dx, c) with c fastest.
Var patchify(const Var& x);
/// Inverse of patchify for `frames` frames of size H x W x C.
Var unpatchify(const Var& tokens, int frames, int height, int width, int channels);
/// Mean squared difference to a constant target.
Var mse(const Var& pred, const Tensor& target);
Var sum(const Var& x);

}  // namespace splatflow::nn
