#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fvs/scene_io.hpp"

namespace fvs {

enum class TextureStyle { kFlat, kGradient, kChecker, kNoise };

struct TextureSpec {
  TextureStyle style = TextureStyle::kFlat;
  int level = 128;         // flat
  int low = 0;             // gradient / checker / noise range
  int high = 255;
  int cell = 8;            // checker cell size in pixels
  bool horizontal = false; // gradient direction; vertical ramps are constant along each row
  std::uint64_t seed = 0;  // noise
};

struct Offset {
  int x = 0;
  int y = 0;
  bool operator==(const Offset&) const = default;
};

struct SceneObject {
  int width = 16;
  int height = 16;
  int disparity = 4;
  TextureSpec texture;
  // Top-left position in left-view coordinates, one entry per frame.
  std::vector<Offset> trajectory;
};

// A layered Lambertian scene: a background plane plus rectangular objects,
// each at a constant disparity. Every layer looks the same from any
// viewpoint; only its horizontal position shifts with disparity.
struct SyntheticSceneSpec {
  int width = 128;
  int height = 128;
  int frame_count = 60;
  int eta = 1;
  int background_disparity = 2;
  TextureSpec background;
  // Background illumination drift: triangle wave of the given amplitude
  // (intensity levels) and period (frames). Zero amplitude disables it.
  int drift_amplitude = 0;
  int drift_period = 0;
  std::vector<SceneObject> objects;

  // Throws std::invalid_argument with a diagnostic when an invariant fails.
  void validate() const;
};

struct SyntheticStereo {
  std::vector<ViewFrame> left;
  std::vector<ViewFrame> right;
  std::vector<FramePlane> middle_truth;
  std::vector<FramePlane> middle_disparity;
};

SyntheticStereo generate_synthetic_stereo(const SyntheticSceneSpec& spec);

// Renders a single frame at virtual position `half_steps / 2` (0 = left,
// 1 = middle, 2 = right). Fills texture and disparity.
void render_view(const SyntheticSceneSpec& spec, int frame, int half_steps, FramePlane& texture,
                 FramePlane& disparity);

// Moves from `start` by `velocity` each frame, reflecting off the bounds that
// keep the object visible in both captured views.
std::vector<Offset> bouncing_trajectory(Offset start, Offset velocity, int frames, int object_width,
                                        int object_height, int disparity, int eta, int scene_width,
                                        int scene_height);

// The desk-scale scene used by the experiment harness when no scene is given.
SyntheticSceneSpec default_scene_spec();

void to_json(nlohmann::json& j, const TextureSpec& t);
void from_json(const nlohmann::json& j, TextureSpec& t);
void to_json(nlohmann::json& j, const SyntheticSceneSpec& s);
void from_json(const nlohmann::json& j, SyntheticSceneSpec& s);

}  // namespace fvs
