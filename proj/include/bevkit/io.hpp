#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bevkit/array.hpp"
#include "bevkit/bvtm.hpp"
#include "bevkit/frpn.hpp"
#include "bevkit/fvtm.hpp"
#include "bevkit/geometry.hpp"
#include "bevkit/pipeline.hpp"

namespace bevkit::io {

namespace fs = std::filesystem;

// Rig JSON:
//   {"cameras":[{"name","width","height","stride","K":[9],"R":[9],"t":[3]}]}
// with K and R row-major.
Rig parse_rig(const std::string& json_text);
Rig load_rig(const fs::path& path);
std::string rig_to_json(const Rig& rig);
void save_rig(const fs::path& path, const Rig& rig);

// Binary tensor: "FBBT", u32 version (1), u32 rank, u32 dims[rank], then
// little-endian f32 payload in row-major order.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline constexpr std::uint32_t kTensorVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);
void save_tensor(const fs::path& path, const Tensor& t);
Tensor load_tensor(const fs::path& path);

Tensor to_tensor(const FeatureMap& map);
Tensor to_tensor(const Array2D<double>& a);
Tensor to_tensor(const Array2D<std::uint8_t>& a);

// Directory holding mask_kernel.fbbt ([3,3,C]) and mask_bias.fbbt ([1]).
MaskHeadWeights load_mask_weights(const fs::path& dir);
void save_mask_weights(const fs::path& dir, const MaskHeadWeights& w);

// Directory holding offset_{weight,bias}, attn_{weight,bias},
// value_{weight,bias}, output_{weight,bias}. Head and point counts come
// from offset_weight dims [heads, points, 2, C].
DeformableParams load_deformable_params(const fs::path& dir);
void save_deformable_params(const fs::path& dir, const DeformableParams& p);

// Binary PGM (P5, maxval 255), value = round(255 * clamp(x, 0, 1)).
std::string encode_pgm(const Array2D<double>& image);
void save_pgm(const fs::path& path, const Array2D<double>& image);

// Scene JSON:
//   {"rig": <rig object or path relative to the scene file>,
//    "ground_z": number | null, "seed": int, "channels": int,
//    "boxes": [{"center":[3], "size":[3], "yaw": rad, "feature":[C]?}],
//    "random_boxes": int?}
// Missing box features are derived from the seed.
Scene parse_scene(const std::string& json_text, const fs::path& base_dir, int* channels_out);
Scene load_scene(const fs::path& path, int* channels_out = nullptr);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace bevkit::io
