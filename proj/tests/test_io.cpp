#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include <json.hpp>

#include "bevkit/error.hpp"
#include "bevkit/io.hpp"

using namespace bevkit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "bevkit_test_io" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

nlohmann::json reference_rig_json() {
  return nlohmann::json::parse(io::read_text(BEVKIT_DATA_DIR "/reference_rig.json"));
}

}  // namespace

TEST(Tensor, RoundTripBitExact) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> n(0, 100);
  io::Tensor t{{3, 4, 5}, std::vector<float>(60)};
  for (auto& v : t.data) v = n(rng);
  t.data[0] = -0.0f;
  t.data[1] = std::numeric_limits<float>::denorm_min();
  const auto bytes = io::encode_tensor(t);
  EXPECT_EQ(bytes.size(), 4u + 4 + 4 + 12 + 240);
  EXPECT_EQ(std::memcmp(bytes.data(), "FBBT", 4), 0);
  const auto back = io::decode_tensor(bytes);
  EXPECT_EQ(back.dims, t.dims);
  ASSERT_EQ(back.data.size(), t.data.size());
  EXPECT_EQ(std::memcmp(back.data.data(), t.data.data(), 240), 0);

  const auto dir = scratch("tensor");
  io::save_tensor(dir / "t.fbbt", t);
  EXPECT_EQ(io::load_tensor(dir / "t.fbbt"), t);
}

TEST(Tensor, LittleEndianLayout) {
  const auto bytes = io::encode_tensor({{1}, {1.0f}});
  const std::vector<std::uint8_t> expected{'F', 'B', 'B', 'T', 1, 0, 0, 0, 1, 0, 0, 0,
                                           1, 0, 0, 0, 0x00, 0x00, 0x80, 0x3f};
  EXPECT_EQ(bytes, expected);
}

TEST(Tensor, Errors) {
  auto bytes = io::encode_tensor({{2, 2}, {1, 2, 3, 4}});
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_EQ(code_of([&] { io::decode_tensor(truncated); }), ErrorCode::kFormat);
  EXPECT_NE(message_of([&] { io::decode_tensor(truncated); }).find("length"), std::string::npos);
  EXPECT_EQ(code_of([&] { io::decode_tensor({'F', 'B'}); }), ErrorCode::kFormat);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_NE(message_of([&] { io::decode_tensor(magic); }).find("magic"), std::string::npos);
  auto version = bytes;
  version[4] = 2;
  EXPECT_EQ(code_of([&] { io::decode_tensor(version); }), ErrorCode::kFormat);
  EXPECT_EQ(code_of([] { io::encode_tensor({{2, 2}, {1, 2, 3}}); }), ErrorCode::kShapeMismatch);
  EXPECT_EQ(code_of([] { io::load_tensor("/nonexistent/x.fbbt"); }), ErrorCode::kIo);
}

TEST(Tensor, FromFeatureMap) {
  FeatureMap m(2, 3, 4);
  m.at(1, 2)[3] = 7.0;
  const auto t = io::to_tensor(m);
  EXPECT_EQ(t.dims, (std::vector<std::uint32_t>{2, 3, 4}));
  EXPECT_EQ(t.data.back(), 7.0f);
}

TEST(Rig, ReferenceRigLoads) {
  const Rig rig = io::load_rig(BEVKIT_DATA_DIR "/reference_rig.json");
  ASSERT_EQ(rig.size(), 6u);
  for (const auto& cam : rig.cameras()) {
    EXPECT_EQ(cam.width(), 704);
    EXPECT_EQ(cam.height(), 256);
    EXPECT_EQ(cam.feature_stride(), 16);
  }
  EXPECT_EQ(rig[0].name(), "CAM_FRONT");
}

TEST(Rig, RoundTripValueExact) {
  const Rig rig = io::load_rig(BEVKIT_DATA_DIR "/reference_rig.json");
  const Rig back = io::parse_rig(io::rig_to_json(rig));
  for (std::size_t i = 0; i < rig.size(); ++i) {
    EXPECT_EQ(back[i].name(), rig[i].name());
    EXPECT_EQ(back[i].intrinsics(), rig[i].intrinsics());
    EXPECT_EQ(back[i].rotation(), rig[i].rotation());
    EXPECT_EQ(back[i].translation(), rig[i].translation());
  }
}

TEST(Rig, MissingIntrinsicsNamesField) {
  auto j = reference_rig_json();
  j["cameras"][2].erase("K");
  const auto msg = message_of([&] { io::parse_rig(j.dump()); });
  EXPECT_NE(msg.find("'K'"), std::string::npos);
  EXPECT_NE(msg.find("cameras[2]"), std::string::npos);
  EXPECT_EQ(code_of([&] { io::parse_rig(j.dump()); }), ErrorCode::kParse);
}

TEST(Rig, NonOrthonormalRotation) {
  auto j = reference_rig_json();
  j["cameras"][0]["R"][0] = 1.5;
  EXPECT_EQ(code_of([&] { io::parse_rig(j.dump()); }), ErrorCode::kValidation);
  EXPECT_NE(message_of([&] { io::parse_rig(j.dump()); }).find("R"), std::string::npos);
}

TEST(Rig, EmptyAndMalformed) {
  EXPECT_EQ(code_of([] { io::parse_rig(R"({"cameras": []})"); }), ErrorCode::kValidation);
  EXPECT_EQ(code_of([] { io::parse_rig("{not json"); }), ErrorCode::kParse);
  EXPECT_EQ(code_of([] { io::load_rig("/nonexistent/rig.json"); }), ErrorCode::kIo);
}

TEST(Pgm, HeaderAndScaling) {
  Array2D<double> img(2, 3);
  img(0, 0) = 1.0;
  img(0, 1) = 0.5;
  img(1, 2) = 2.0;
  img(1, 1) = -1.0;
  const auto pgm = io::encode_pgm(img);
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(pgm.size(), header.size() + 6);
  EXPECT_EQ(pgm.substr(0, header.size()), header);
  const auto px = [&](int i) { return static_cast<unsigned char>(pgm[header.size() + i]); };
  EXPECT_EQ(px(0), 255);
  EXPECT_EQ(px(1), 128);
  EXPECT_EQ(px(2), 0);
  EXPECT_EQ(px(4), 0);
  EXPECT_EQ(px(5), 255);
}

TEST(MaskWeights, RoundTrip) {
  MaskHeadWeights w(3);
  for (std::size_t i = 0; i < w.kernel.size(); ++i) w.kernel[i] = 0.25 * i;
  w.bias = -1.5;
  const auto dir = scratch("mask");
  io::save_mask_weights(dir, w);
  const auto back = io::load_mask_weights(dir);
  EXPECT_EQ(back.channels, 3);
  EXPECT_EQ(back.kernel, w.kernel);
  EXPECT_EQ(back.bias, w.bias);
}

TEST(DeformableParams, RoundTrip) {
  auto p = DeformableParams::identity(4, 2, 3);
  for (std::size_t i = 0; i < p.offset_map.weight.size(); ++i) p.offset_map.weight[i] = 0.5 * (i % 5);
  p.weight_map.bias[1] = 2.0;
  const auto dir = scratch("params");
  io::save_deformable_params(dir, p);
  const auto back = io::load_deformable_params(dir);
  EXPECT_EQ(back.heads, 2);
  EXPECT_EQ(back.points_per_head, 3);
  EXPECT_EQ(back.offset_map.weight, p.offset_map.weight);
  EXPECT_EQ(back.weight_map.bias, p.weight_map.bias);
  EXPECT_EQ(back.value_map.weight, p.value_map.weight);
  EXPECT_EQ(back.output_map.weight, p.output_map.weight);
}

TEST(Scene, ParsesBundledScenes) {
  int channels = 0;
  const Scene one = io::load_scene(BEVKIT_DATA_DIR "/scene_one_box.json", &channels);
  EXPECT_EQ(channels, 16);
  ASSERT_EQ(one.objects.size(), 1u);
  EXPECT_EQ(one.objects[0].feature.size(), 16u);
  EXPECT_EQ(one.rig.size(), 6u);
  ASSERT_TRUE(one.ground_z.has_value());

  const Scene empty = io::load_scene(BEVKIT_DATA_DIR "/scene_empty.json");
  EXPECT_TRUE(empty.objects.empty());
  EXPECT_FALSE(empty.ground_z.has_value());

  const Scene rnd = io::load_scene(BEVKIT_DATA_DIR "/scene_random.json");
  EXPECT_EQ(rnd.objects.size(), 6u);
}

TEST(Scene, InlineRigAndErrors) {
  nlohmann::json j;
  j["rig"] = reference_rig_json();
  j["seed"] = 3;
  j["channels"] = 2;
  j["boxes"] = nlohmann::json::array(
      {{{"center", {10, 0, 1}}, {"size", {4, 2, 1.5}}, {"yaw", 0.1}, {"feature", {0.5, 0.25}}}});
  int channels = 0;
  const Scene s = io::parse_scene(j.dump(), ".", &channels);
  EXPECT_EQ(channels, 2);
  EXPECT_EQ(s.objects[0].feature, (std::vector<double>{0.5, 0.25}));

  auto bad = j;
  bad["boxes"][0]["size"] = {4, -2, 1};
  EXPECT_EQ(code_of([&] { io::parse_scene(bad.dump(), ".", nullptr); }), ErrorCode::kValidation);
  bad = j;
  bad["boxes"][0].erase("center");
  EXPECT_NE(message_of([&] { io::parse_scene(bad.dump(), ".", nullptr); }).find("center"),
            std::string::npos);
  bad = j;
  bad["boxes"][0]["feature"] = {1.0};
  EXPECT_THROW(io::parse_scene(bad.dump(), ".", nullptr), Error);
}
