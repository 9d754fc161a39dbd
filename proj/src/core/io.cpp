#include "splatflow/core/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cctype>
#include <cstring>
#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "splatflow/core/error.hpp"

namespace splatflow {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

namespace {

constexpr char kSceneMagic[5] = {'F', 'L', 'W', 'R', '1'};

class ByteWriter {
 public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_bytes(const char* p, size_t n) { buf_.insert(buf_.end(), p, p + n); }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> data) : data_(std::move(data)) {}

  template <typename T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > data_.size()) {
      throw FormatError(std::string("truncated file while reading ") + what, pos_);
    }
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  size_t pos() const { return pos_; }
  size_t remaining() const { return data_.size() - pos_; }
  const char* cur() const { return data_.data() + pos_; }
  void skip(size_t n) { pos_ += n; }

 private:
  std::vector<char> data_;
  size_t pos_ = 0;
};

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

void write_all(const std::filesystem::path& path, const std::vector<char>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

// Reads a whitespace-separated ASCII token from a PNM-style header, skipping comments.
std::string header_token(ByteReader& r) {
  std::string tok;
  while (r.remaining() > 0) {
    const char c = *r.cur();
    if (c == '#') {
      while (r.remaining() > 0 && *r.cur() != '\n') r.skip(1);
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      r.skip(1);
    } else {
      tok.push_back(c);
      r.skip(1);
    }
  }
  if (tok.empty()) throw FormatError("unexpected end of header", r.pos());
  return tok;
}

int header_int(ByteReader& r) {
  const size_t at = r.pos();
  const std::string tok = header_token(r);
  try {
    size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw FormatError("bad integer '" + tok + "'", at);
    return v;
  } catch (const std::logic_error&) {
    throw FormatError("bad integer '" + tok + "'", at);
  }
}

}  // namespace

void save_scene(const GaussianScene& scene, const std::filesystem::path& path) {
  scene.validate();
  ByteWriter w;
  w.put_bytes(kSceneMagic, sizeof(kSceneMagic));
  w.put(static_cast<uint32_t>(scene.sh_degree));
  w.put(static_cast<uint64_t>(scene.primitives.size()));
  w.put(scene.scene_scale);
  for (const auto& g : scene.primitives) {
    for (float v : g.position) w.put(v);
    for (float v : g.log_scale) w.put(v);
    for (float v : g.rotation) w.put(v);
    w.put(g.opacity_logit);
    for (float v : g.sh) w.put(v);
  }
  write_all(path, w.bytes());
}

GaussianScene load_scene(const std::filesystem::path& path) {
  ByteReader r(read_all(path));
  if (r.remaining() < sizeof(kSceneMagic) || std::memcmp(r.cur(), kSceneMagic, sizeof(kSceneMagic)) != 0) {
    throw FormatError("missing FLWR1 magic", 0);
  }
  r.skip(sizeof(kSceneMagic));
  GaussianScene scene;
  const size_t degree_at = r.pos();
  const auto degree = r.get<uint32_t>("sh degree");
  if (degree > static_cast<uint32_t>(kMaxShDegree)) {
    throw FormatError("unsupported sh degree " + std::to_string(degree), degree_at);
  }
  scene.sh_degree = static_cast<int>(degree);
  const auto count = r.get<uint64_t>("primitive count");
  scene.scene_scale = r.get<double>("scene scale");
  const size_t n_sh = static_cast<size_t>(sh_coeff_count(scene.sh_degree)) * 3;
  const size_t per_prim = (11 + n_sh) * sizeof(float);
  if (count > r.remaining() / per_prim) {
    throw FormatError("file too short for " + std::to_string(count) + " primitives", r.pos());
  }
  scene.primitives.resize(count);
  for (auto& g : scene.primitives) {
    for (float& v : g.position) v = r.get<float>("position");
    for (float& v : g.log_scale) v = r.get<float>("log_scale");
    for (float& v : g.rotation) v = r.get<float>("rotation");
    g.opacity_logit = r.get<float>("opacity");
    g.sh.resize(n_sh);
    for (float& v : g.sh) v = r.get<float>("sh");
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after scene data", r.pos());
  return scene;
}

void write_ppm(const ImageBuffer& img, const std::filesystem::path& path) {
  if (img.channels != 3 && img.channels != 1) throw InvalidArgument("write_ppm: need 1 or 3 channels");
  ByteWriter w;
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  w.put_bytes(header.data(), header.size());
  for (size_t p = 0; p < img.pixel_count(); ++p) {
    for (int c = 0; c < 3; ++c) {
      const double v = img.data[p * img.channels + (img.channels == 3 ? c : 0)];
      const double clamped = std::isfinite(v) ? std::min(1.0, std::max(0.0, v)) : 0.0;
      w.put(static_cast<uint8_t>(std::lround(clamped * 255.0)));
    }
  }
  write_all(path, w.bytes());
}

ImageBuffer read_ppm(const std::filesystem::path& path) {
  ByteReader r(read_all(path));
  if (header_token(r) != "P6") throw FormatError("not a binary PPM (P6)", 0);
  const int width = header_int(r);
  const int height = header_int(r);
  const size_t maxval_at = r.pos();
  const int maxval = header_int(r);
  if (width <= 0 || height <= 0) throw FormatError("invalid PPM size", maxval_at);
  if (maxval != 255) throw FormatError("only 8-bit PPM supported", maxval_at);
  r.skip(1);  // single whitespace after maxval
  ImageBuffer img(height, width, 3);
  if (r.remaining() < img.size()) throw FormatError("truncated PPM pixel data", r.pos());
  for (double& v : img.data) v = r.get<uint8_t>("pixel") / 255.0;
  return img;
}

void write_pfm(const ImageBuffer& img, const std::filesystem::path& path) {
  if (img.channels != 1) throw InvalidArgument("write_pfm: single-channel only");
  ByteWriter w;
  const std::string header = "Pf\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n-1.0\n";
  w.put_bytes(header.data(), header.size());
  for (double v : img.data) w.put(static_cast<float>(v));
  write_all(path, w.bytes());
}

ImageBuffer read_pfm(const std::filesystem::path& path) {
  ByteReader r(read_all(path));
  if (header_token(r) != "Pf") throw FormatError("not a single-channel PFM", 0);
  const int width = header_int(r);
  const int height = header_int(r);
  const size_t scale_at = r.pos();
  const std::string scale = header_token(r);
  if (scale.empty() || scale[0] != '-') throw FormatError("only little-endian PFM supported", scale_at);
  if (width <= 0 || height <= 0) throw FormatError("invalid PFM size", scale_at);
  r.skip(1);
  ImageBuffer img(height, width, 1);
  for (double& v : img.data) v = r.get<float>("pfm value");
  return img;
}

void write_camera_list(const std::vector<CameraRecord>& cams, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# id r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz fx fy cx cy image\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& rec : cams) {
    const auto& v = rec.view;
    out << v.id;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) out << ' ' << v.rotation(i, j);
    }
    for (int i = 0; i < 3; ++i) out << ' ' << v.translation[i];
    out << ' ' << v.intrinsics(0, 0) << ' ' << v.intrinsics(1, 1) << ' ' << v.intrinsics(0, 2) << ' '
        << v.intrinsics(1, 2) << ' ' << rec.image_path << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<CameraRecord> read_camera_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<CameraRecord> cams;
  std::string line;
  size_t offset = 0;
  while (std::getline(in, line)) {
    const size_t line_start = offset;
    offset += line.size() + 1;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    CameraRecord rec;
    auto& v = rec.view;
    double fx, fy, cx, cy;
    ls >> v.id;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) ls >> v.rotation(i, j);
    }
    for (int i = 0; i < 3; ++i) ls >> v.translation[i];
    ls >> fx >> fy >> cx >> cy >> rec.image_path;
    if (!ls) throw FormatError("malformed camera line", line_start);
    v.intrinsics = Intrinsics{fx, fy, cx, cy, 0, 0}.matrix();
    cams.push_back(std::move(rec));
  }
  return cams;
}

std::vector<CameraView> load_views(const std::filesystem::path& camera_list) {
  std::vector<CameraView> views;
  const auto base = camera_list.parent_path();
  for (auto& rec : read_camera_list(camera_list)) {
    CameraView v = std::move(rec.view);
    v.image = read_ppm(base / rec.image_path);
    v.width = v.image.width;
    v.height = v.image.height;
    views.push_back(std::move(v));
  }
  return views;
}

void save_views(const std::vector<CameraView>& views, const std::filesystem::path& dir,
                const std::string& list_name, const std::string& prefix) {
  std::filesystem::create_directories(dir);
  std::vector<CameraRecord> recs;
  for (const auto& v : views) {
    const std::string name = prefix + std::to_string(v.id) + ".ppm";
    write_ppm(v.image, dir / name);
    CameraRecord rec;
    rec.view = v;
    rec.view.image = {};
    rec.image_path = name;
    recs.push_back(std::move(rec));
  }
  write_camera_list(recs, dir / list_name);
}

}  // namespace splatflow
