#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "fvs/scene_io.hpp"
#include "fvs/synthetic_scene.hpp"

using namespace fvs;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "fvs-test-scene-io";
  std::filesystem::create_directories(dir);
  return dir / name;
}

FramePlane checker(int w, int h) {
  FramePlane p(w, h);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) p.at(i, j) = static_cast<std::uint8_t>(((i / 8 + j / 8) % 2) ? 200 : 30);
  }
  return p;
}

SyntheticSceneSpec flat_scene(int w, int h, int frames, int level) {
  SyntheticSceneSpec s;
  s.width = w;
  s.height = h;
  s.frame_count = frames;
  s.background = TextureSpec{TextureStyle::kFlat, level, 0, 255, 8, false, 0};
  return s;
}

}  // namespace

TEST_CASE("psnr of identical planes is the cap") {
  FramePlane a(32, 32, 77);
  CHECK(psnr(a, a) == 99.0);
}

TEST_CASE("psnr of a uniform 16-level error") {
  FramePlane a(32, 32, 0);
  FramePlane b(32, 32, 16);
  CHECK(mse(a, b) == 256.0);
  CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(255.0 * 255.0 / 256.0)).epsilon(1e-12));
  CHECK(psnr(a, b) == doctest::Approx(24.05).epsilon(1e-3));
}

TEST_CASE("psnr of a full-scale error is zero") {
  FramePlane a(16, 16, 0);
  FramePlane b(16, 16, 255);
  CHECK(psnr(a, b) == 0.0);
}

TEST_CASE("mean absolute error and sequence averages") {
  FramePlane a(16, 16, 10);
  FramePlane b(16, 16, 13);
  CHECK(mean_abs_error(a, b) == 3.0);
  std::vector<FramePlane> test{a, b};
  std::vector<FramePlane> ref{a, a};
  const auto q = evaluate_sequence(test, ref);
  REQUIRE(q.psnr_db.size() == 2);
  CHECK(q.psnr_db[0] == 99.0);
  CHECK(q.average_psnr_db == doctest::Approx((99.0 + psnr(b, a)) / 2.0));
  CHECK(q.average_mae == 1.5);
}

TEST_CASE("pgm round trip is bit exact") {
  const auto p = checker(64, 64);
  save_plane(p, scratch("checker.pgm"));
  CHECK(load_plane(scratch("checker.pgm")) == p);
}

TEST_CASE("raw yuv420 round trip keeps luma") {
  const auto p = checker(48, 32);
  save_plane(p, scratch("checker.yuv"), PlaneFormat::kYuv420);
  CHECK(std::filesystem::file_size(scratch("checker.yuv")) == 48u * 32u * 3u / 2u);
  CHECK(load_plane(scratch("checker.yuv"), {PlaneFormat::kYuv420, 48, 32, 0}) == p);
}

TEST_CASE("pgm with an 8-bit header is accepted") {
  const auto path = scratch("hand.pgm");
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5 64 64 255\n";
    for (int k = 0; k < 4096; ++k) out.put(static_cast<char>(k % 251));
  }
  const auto p = load_plane(path);
  CHECK(p.width() == 64);
  CHECK(p.height() == 64);
  CHECK(p.at(0, 5) == 5);
  CHECK(p.at(63, 63) == 4095 % 251);
}

TEST_CASE("pgm with a 16-bit maxval is rejected") {
  const auto path = scratch("deep.pgm");
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5 16 16 65535\n";
    for (int k = 0; k < 512; ++k) out.put('\0');
  }
  CHECK_THROWS(load_plane(path));
}

TEST_CASE("plane dimensions must be macroblock aligned") {
  CHECK_THROWS_AS(FramePlane(20, 16), std::invalid_argument);
  CHECK_THROWS_AS(FramePlane(16, 0), std::invalid_argument);
  ViewFrame v;
  v.texture = FramePlane(32, 16);
  v.disparity = FramePlane(16, 16);
  CHECK_THROWS(v.validate());
}

TEST_CASE("an object-free flat scene is constant everywhere") {
  const auto s = generate_synthetic_stereo(flat_scene(32, 32, 3, 91));
  for (int t = 0; t < 3; ++t) {
    CHECK(s.left[t].texture == FramePlane(32, 32, 91));
    CHECK(s.right[t].texture == FramePlane(32, 32, 91));
    CHECK(s.middle_truth[t] == FramePlane(32, 32, 91));
  }
}

TEST_CASE("an object at disparity 8 shifts by 4 in the middle view") {
  auto spec = flat_scene(64, 32, 1, 20);
  spec.background_disparity = 0;
  SceneObject o;
  o.width = 12;
  o.height = 8;
  o.disparity = 8;
  o.texture = TextureSpec{TextureStyle::kFlat, 200, 0, 255, 8, false, 0};
  o.trajectory = {{30, 10}};
  spec.objects = {o};
  const auto s = generate_synthetic_stereo(spec);
  const auto& left = s.left[0].texture;
  const auto& mid = s.middle_truth[0];
  CHECK(left.at(12, 30) == 200);
  CHECK(left.at(12, 29) == 20);
  CHECK(mid.at(12, 26) == 200);
  CHECK(mid.at(12, 25) == 20);
  CHECK(mid.at(12, 37) == 200);
  CHECK(mid.at(12, 38) == 20);
  CHECK(s.right[0].texture.at(12, 22) == 200);
  CHECK(s.right[0].texture.at(12, 21) == 20);
}

TEST_CASE("the default scene is Lambertian across views") {
  const auto spec = default_scene_spec();
  const auto s = generate_synthetic_stereo(spec);
  long checked = 0;
  for (std::size_t t = 0; t < s.left.size(); t += 7) {
    const auto& l = s.left[t];
    const auto& r = s.right[t];
    for (int i = 0; i < l.texture.height(); ++i) {
      for (int j = 0; j < l.texture.width(); ++j) {
        const int y = l.disparity.at(i, j);
        const int target = j - y * spec.eta;
        if (target < 0 || r.disparity.at(i, target) != y) continue;
        REQUIRE(l.texture.at(i, j) == r.texture.at(i, target));
        ++checked;
      }
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("scene generation is deterministic") {
  auto spec = default_scene_spec();
  spec.frame_count = 6;
  for (auto& o : spec.objects) o.trajectory.resize(6);
  spec.objects[0].texture = TextureSpec{TextureStyle::kNoise, 128, 0, 255, 8, false, 42};
  const auto a = generate_synthetic_stereo(spec);
  const auto b = generate_synthetic_stereo(spec);
  for (int t = 0; t < 6; ++t) {
    CHECK(a.left[t].texture == b.left[t].texture);
    CHECK(a.right[t].disparity == b.right[t].disparity);
    CHECK(a.middle_truth[t] == b.middle_truth[t]);
  }
}

TEST_CASE("scene invariants are enforced") {
  auto spec = default_scene_spec();
  SUBCASE("foreground must be nearer than the background") {
    spec.objects[0].disparity = spec.background_disparity;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
  SUBCASE("objects must stay visible in both views") {
    spec.objects[0].trajectory[3] = {1, 20};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
  SUBCASE("one trajectory entry per frame") {
    spec.objects[1].trajectory.pop_back();
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
  SUBCASE("aligned dimensions") {
    spec.width = 120;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
}

TEST_CASE("scene spec survives a json round trip") {
  const auto spec = default_scene_spec();
  const nlohmann::json j = spec;
  const auto back = j.get<SyntheticSceneSpec>();
  CHECK(nlohmann::json(back) == j);
  const auto a = generate_synthetic_stereo(spec);
  const auto b = generate_synthetic_stereo(back);
  CHECK(a.middle_truth.back() == b.middle_truth.back());
}

TEST_CASE("a shorter frame count replays the start of each trajectory") {
  const auto spec = default_scene_spec();
  nlohmann::json j = spec;
  j["frames"] = 10;
  const auto short_spec = j.get<SyntheticSceneSpec>();
  CHECK_NOTHROW(short_spec.validate());
  const auto full = generate_synthetic_stereo(spec);
  const auto head = generate_synthetic_stereo(short_spec);
  REQUIRE(head.middle_truth.size() == 10);
  for (int t = 0; t < 10; ++t) CHECK(head.middle_truth[t] == full.middle_truth[t]);
  j["frames"] = 61;
  CHECK_THROWS_AS(j.get<SyntheticSceneSpec>().validate(), std::invalid_argument);
}

TEST_CASE("bouncing trajectories stay inside the frame for both views") {
  const auto path = bouncing_trajectory({10, 5}, {7, -3}, 80, 20, 16, 6, 1, 96, 64);
  REQUIRE(path.size() == 80);
  for (const auto& p : path) {
    CHECK(p.x - 6 >= 0);
    CHECK(p.x + 20 <= 96);
    CHECK(p.y >= 0);
    CHECK(p.y + 16 <= 64);
  }
}
