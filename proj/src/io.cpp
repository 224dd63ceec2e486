#include "bevkit/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bevkit/error.hpp"

namespace bevkit::io {

using nlohmann::json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

namespace {

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, what + ": " + e.what());
  }
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorCode::kParse, where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

std::vector<double> numbers(const json& j, std::size_t n, const std::string& where) {
  if (!j.is_array() || j.size() != n) {
    throw Error(ErrorCode::kParse, where + ": expected an array of " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw Error(ErrorCode::kParse, where + ": non-numeric entry");
    out.push_back(v.get<double>());
  }
  return out;
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw Error(ErrorCode::kParse, where + ": expected an integer");
  return j.get<int>();
}

Rig rig_from_json(const json& doc) {
  const json& cams = require(doc, "cameras", "rig");
  if (!cams.is_array()) throw Error(ErrorCode::kParse, "rig: 'cameras' must be an array");
  std::vector<Camera> out;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const json& c = cams[i];
    std::string where = "rig.cameras[" + std::to_string(i) + "]";
    const json& name_j = require(c, "name", where);
    if (!name_j.is_string()) throw Error(ErrorCode::kParse, where + ".name: expected a string");
    const std::string name = name_j.get<std::string>();
    where += " (" + name + ")";
    const int width = integer(require(c, "width", where), where + ".width");
    const int height = integer(require(c, "height", where), where + ".height");
    const int stride = integer(require(c, "stride", where), where + ".stride");
    const auto k = numbers(require(c, "K", where), 9, where + ".K");
    const auto r = numbers(require(c, "R", where), 9, where + ".R");
    const auto t = numbers(require(c, "t", where), 3, where + ".t");
    Eigen::Matrix3d K, R;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        K(a, b) = k[a * 3 + b];
        R(a, b) = r[a * 3 + b];
      }
    }
    out.emplace_back(name, width, height, K, R, Eigen::Vector3d(t[0], t[1], t[2]), stride);
  }
  return Rig(std::move(out));
}

json rig_json(const Rig& rig) {
  json cams = json::array();
  for (const auto& cam : rig.cameras()) {
    json k = json::array(), r = json::array();
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        k.push_back(cam.intrinsics()(a, b));
        r.push_back(cam.rotation()(a, b));
      }
    }
    const auto& t = cam.translation();
    cams.push_back({{"name", cam.name()},
                    {"width", cam.width()},
                    {"height", cam.height()},
                    {"stride", cam.feature_stride()},
                    {"K", k},
                    {"R", r},
                    {"t", {t.x(), t.y(), t.z()}}});
  }
  return {{"cameras", cams}};
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  return v;
}

constexpr char kMagic[4] = {'F', 'B', 'B', 'T'};

}  // namespace

Rig parse_rig(const std::string& json_text) { return rig_from_json(parse_json(json_text, "rig")); }

Rig load_rig(const fs::path& path) {
  try {
    return parse_rig(read_text(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string rig_to_json(const Rig& rig) { return rig_json(rig).dump(2) + "\n"; }

void save_rig(const fs::path& path, const Rig& rig) { write_text(path, rig_to_json(rig)); }

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.data.size() != t.element_count()) {
    throw Error(ErrorCode::kShapeMismatch, "tensor: payload size does not match dims");
  }
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kTensorVersion);
  put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) put_u32(out, d);
  out.reserve(out.size() + 4 * t.data.size());
  for (float f : t.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12) throw Error(ErrorCode::kFormat, "tensor: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kFormat, "tensor: bad magic (expected FBBT)");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kTensorVersion) {
    throw Error(ErrorCode::kFormat, "tensor: unsupported version " + std::to_string(version));
  }
  const std::uint32_t rank = get_u32(bytes, 8);
  if (bytes.size() < 12 + 4ull * rank) throw Error(ErrorCode::kFormat, "tensor: truncated dims");
  Tensor t;
  for (std::uint32_t i = 0; i < rank; ++i) t.dims.push_back(get_u32(bytes, 12 + 4 * i));
  const std::size_t header = 12 + 4ull * rank;
  const std::size_t expected = t.element_count() * 4;
  if (bytes.size() - header != expected) {
    throw Error(ErrorCode::kFormat, "tensor: payload length " + std::to_string(bytes.size() - header) +
                                        " bytes, expected " + std::to_string(expected));
  }
  t.data.resize(t.element_count());
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    t.data[i] = std::bit_cast<float>(get_u32(bytes, header + 4 * i));
  }
  return t;
}

void save_tensor(const fs::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

Tensor load_tensor(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return decode_tensor(std::vector<std::uint8_t>(text.begin(), text.end()));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

Tensor to_tensor(const FeatureMap& map) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(map.height()), static_cast<std::uint32_t>(map.width()),
            static_cast<std::uint32_t>(map.channels())};
  for (double v : map.data()) t.data.push_back(static_cast<float>(v));
  return t;
}

Tensor to_tensor(const Array2D<double>& a) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(a.rows()), static_cast<std::uint32_t>(a.cols())};
  for (double v : a.data()) t.data.push_back(static_cast<float>(v));
  return t;
}

Tensor to_tensor(const Array2D<std::uint8_t>& a) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(a.rows()), static_cast<std::uint32_t>(a.cols())};
  for (auto v : a.data()) t.data.push_back(static_cast<float>(v));
  return t;
}

namespace {

void expect_dims(const Tensor& t, const std::vector<std::uint32_t>& dims, const std::string& name) {
  if (t.dims != dims) {
    std::string want, got;
    for (auto d : dims) want += std::to_string(d) + " ";
    for (auto d : t.dims) got += std::to_string(d) + " ";
    throw Error(ErrorCode::kShapeMismatch, name + ": dims [" + got + "] expected [" + want + "]");
  }
}

LinearMap map_from(const Tensor& w, const Tensor& b, int out, int in, const std::string& name) {
  expect_dims(w, {static_cast<std::uint32_t>(out), static_cast<std::uint32_t>(in)}, name + "_weight");
  expect_dims(b, {static_cast<std::uint32_t>(out)}, name + "_bias");
  LinearMap m = LinearMap::zeros(out, in);
  std::copy(w.data.begin(), w.data.end(), m.weight.begin());
  std::copy(b.data.begin(), b.data.end(), m.bias.begin());
  return m;
}

Tensor tensor_of(const LinearMap& m, bool bias) {
  Tensor t;
  if (bias) {
    t.dims = {static_cast<std::uint32_t>(m.out)};
    t.data.assign(m.bias.begin(), m.bias.end());
  } else {
    t.dims = {static_cast<std::uint32_t>(m.out), static_cast<std::uint32_t>(m.in)};
    t.data.assign(m.weight.begin(), m.weight.end());
  }
  return t;
}

}  // namespace

MaskHeadWeights load_mask_weights(const fs::path& dir) {
  const Tensor k = load_tensor(dir / "mask_kernel.fbbt");
  const Tensor b = load_tensor(dir / "mask_bias.fbbt");
  if (k.dims.size() != 3 || k.dims[0] != 3 || k.dims[1] != 3 || k.dims[2] < 1) {
    throw Error(ErrorCode::kShapeMismatch, "mask_kernel: expected dims [3, 3, C]");
  }
  expect_dims(b, {1}, "mask_bias");
  MaskHeadWeights w(static_cast<int>(k.dims[2]));
  std::copy(k.data.begin(), k.data.end(), w.kernel.begin());
  w.bias = b.data[0];
  w.validate();
  return w;
}

void save_mask_weights(const fs::path& dir, const MaskHeadWeights& w) {
  fs::create_directories(dir);
  Tensor k{{3, 3, static_cast<std::uint32_t>(w.channels)}, {}};
  k.data.assign(w.kernel.begin(), w.kernel.end());
  save_tensor(dir / "mask_kernel.fbbt", k);
  save_tensor(dir / "mask_bias.fbbt", Tensor{{1}, {static_cast<float>(w.bias)}});
}

DeformableParams load_deformable_params(const fs::path& dir) {
  const auto get = [&](const char* name) { return load_tensor(dir / (std::string(name) + ".fbbt")); };
  const Tensor ow = get("offset_weight");
  if (ow.dims.size() != 4 || ow.dims[2] != 2) {
    throw Error(ErrorCode::kShapeMismatch, "offset_weight: expected dims [heads, points, 2, C]");
  }
  DeformableParams p;
  p.heads = static_cast<int>(ow.dims[0]);
  p.points_per_head = static_cast<int>(ow.dims[1]);
  p.channels = static_cast<int>(ow.dims[3]);
  const int c = p.channels, hp = p.heads * p.points_per_head;
  Tensor ow_flat = ow;
  ow_flat.dims = {static_cast<std::uint32_t>(hp * 2), static_cast<std::uint32_t>(c)};
  p.offset_map = map_from(ow_flat, get("offset_bias"), hp * 2, c, "offset");
  p.weight_map = map_from(get("attn_weight"), get("attn_bias"), hp, c, "attn");
  p.value_map = map_from(get("value_weight"), get("value_bias"), c, c, "value");
  p.output_map = map_from(get("output_weight"), get("output_bias"), c, c, "output");
  p.validate();
  return p;
}

void save_deformable_params(const fs::path& dir, const DeformableParams& p) {
  p.validate();
  fs::create_directories(dir);
  Tensor ow = tensor_of(p.offset_map, false);
  ow.dims = {static_cast<std::uint32_t>(p.heads), static_cast<std::uint32_t>(p.points_per_head), 2,
             static_cast<std::uint32_t>(p.channels)};
  save_tensor(dir / "offset_weight.fbbt", ow);
  save_tensor(dir / "offset_bias.fbbt", tensor_of(p.offset_map, true));
  save_tensor(dir / "attn_weight.fbbt", tensor_of(p.weight_map, false));
  save_tensor(dir / "attn_bias.fbbt", tensor_of(p.weight_map, true));
  save_tensor(dir / "value_weight.fbbt", tensor_of(p.value_map, false));
  save_tensor(dir / "value_bias.fbbt", tensor_of(p.value_map, true));
  save_tensor(dir / "output_weight.fbbt", tensor_of(p.output_map, false));
  save_tensor(dir / "output_bias.fbbt", tensor_of(p.output_map, true));
}

std::string encode_pgm(const Array2D<double>& image) {
  std::string out = "P5\n" + std::to_string(image.cols()) + " " + std::to_string(image.rows()) +
                    "\n255\n";
  for (double v : image.data()) {
    const double x = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(255.0 * x))));
  }
  return out;
}

void save_pgm(const fs::path& path, const Array2D<double>& image) {
  write_text(path, encode_pgm(image));
}

Scene parse_scene(const std::string& json_text, const fs::path& base_dir, int* channels_out) {
  const json doc = parse_json(json_text, "scene");
  const json& rig_j = require(doc, "rig", "scene");
  Rig rig = rig_j.is_string() ? load_rig(base_dir / rig_j.get<std::string>()) : rig_from_json(rig_j);

  const std::uint64_t seed = doc.value("seed", std::uint64_t{0});
  const int channels = doc.contains("channels") ? integer(doc.at("channels"), "scene.channels") : 16;
  if (channels < 1) throw Error(ErrorCode::kValidation, "scene.channels: must be >= 1");

  std::optional<double> ground = 0.0;
  if (doc.contains("ground_z")) {
    const json& g = doc.at("ground_z");
    if (g.is_null()) {
      ground.reset();
    } else if (g.is_number()) {
      ground = g.get<double>();
    } else {
      throw Error(ErrorCode::kParse, "scene.ground_z: expected a number or null");
    }
  }

  Scene scene{std::move(rig), {}, ground, seed};
  if (doc.contains("random_boxes")) {
    SceneGenOptions opts;
    opts.boxes = integer(doc.at("random_boxes"), "scene.random_boxes");
    opts.channels = channels;
    opts.ground_z = ground.value_or(0.0);
    scene = generate_scene(scene.rig, opts, seed);
    scene.ground_z = ground;
  }
  if (doc.contains("boxes")) {
    const json& boxes = doc.at("boxes");
    if (!boxes.is_array()) throw Error(ErrorCode::kParse, "scene.boxes: expected an array");
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const std::string where = "scene.boxes[" + std::to_string(i) + "]";
      const json& b = boxes[i];
      const auto c = numbers(require(b, "center", where), 3, where + ".center");
      const auto s = numbers(require(b, "size", where), 3, where + ".size");
      SceneObject obj;
      obj.box.center = {c[0], c[1], c[2]};
      obj.box.size = {s[0], s[1], s[2]};
      obj.box.yaw = b.value("yaw", 0.0);
      try {
        obj.box.validate();
      } catch (const Error& e) {
        throw Error(ErrorCode::kValidation, where + ": " + e.what());
      }
      obj.feature = b.contains("feature")
                        ? numbers(b.at("feature"), static_cast<std::size_t>(channels), where + ".feature")
                        : seeded_feature(channels, seed, 1000 + i);
      scene.objects.push_back(std::move(obj));
    }
  }
  if (channels_out) *channels_out = channels;
  return scene;
}

Scene load_scene(const fs::path& path, int* channels_out) {
  try {
    return parse_scene(read_text(path), path.parent_path(), channels_out);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace bevkit::io
