#include "fvs/synthetic_scene.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fvs {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int clamp_level(int v) { return std::clamp(v, 0, 255); }

// Texture value at layer-local coordinates (x, y). Coordinates may be
// negative or exceed the frame for the background of off-center views.
int texture_value(const TextureSpec& tex, int x, int y, int layer_height, int layer_width) {
  switch (tex.style) {
    case TextureStyle::kFlat:
      return tex.level;
    case TextureStyle::kGradient: {
      const int span = tex.horizontal ? std::max(1, layer_width - 1) : std::max(1, layer_height - 1);
      const int pos = std::clamp(tex.horizontal ? x : y, 0, span);
      return tex.low + (tex.high - tex.low) * pos / span;
    }
    case TextureStyle::kChecker: {
      const int cx = (x >= 0 ? x : x - tex.cell + 1) / tex.cell;
      const int cy = (y >= 0 ? y : y - tex.cell + 1) / tex.cell;
      return ((cx + cy) & 1) ? tex.high : tex.low;
    }
    case TextureStyle::kNoise: {
      const std::uint64_t key = tex.seed * 0x100000001b3ULL ^
                                (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 32) ^
                                static_cast<std::uint32_t>(y);
      const auto range = static_cast<std::uint64_t>(tex.high - tex.low + 1);
      return tex.low + static_cast<int>(splitmix64(key) % range);
    }
  }
  return 0;
}

int drift_offset(const SyntheticSceneSpec& spec, int frame) {
  if (spec.drift_amplitude == 0 || spec.drift_period <= 0) return 0;
  const int p = spec.drift_period;
  const int phase = frame % p;
  return spec.drift_amplitude * (2 * std::abs(2 * phase - p) - p) / p;
}

void check_texture(const TextureSpec& t, const std::string& where) {
  auto in_range = [](int v) { return v >= 0 && v <= 255; };
  if (!in_range(t.level) || !in_range(t.low) || !in_range(t.high)) {
    throw std::invalid_argument(where + ": texture levels must lie in [0,255]");
  }
  if (t.style == TextureStyle::kChecker && t.cell <= 0) throw std::invalid_argument(where + ": checker cell must be positive");
  if (t.style == TextureStyle::kNoise && t.high < t.low) throw std::invalid_argument(where + ": noise range inverted");
}

}  // namespace

void SyntheticSceneSpec::validate() const {
  std::ostringstream msg;
  if (width <= 0 || height <= 0 || width % kMbSize != 0 || height % kMbSize != 0) {
    msg << "scene: dimensions " << width << "x" << height << " must be positive multiples of " << kMbSize;
    throw std::invalid_argument(msg.str());
  }
  if (frame_count < 1) throw std::invalid_argument("scene: frame_count must be >= 1");
  if (eta < 1) throw std::invalid_argument("scene: eta must be a positive integer");
  if (background_disparity < 0 || (background_disparity * eta) % 2 != 0) {
    throw std::invalid_argument("scene: background disparity*eta must be a non-negative even number");
  }
  if (drift_amplitude != 0 && drift_period <= 0) throw std::invalid_argument("scene: drift needs a positive period");
  check_texture(background, "scene background");
  for (std::size_t k = 0; k < objects.size(); ++k) {
    const auto& obj = objects[k];
    const std::string where = "scene object " + std::to_string(k);
    check_texture(obj.texture, where);
    if (obj.width <= 0 || obj.height <= 0) throw std::invalid_argument(where + ": empty object");
    if (obj.disparity <= background_disparity) {
      throw std::invalid_argument(where + ": disparity must exceed the background disparity");
    }
    if ((obj.disparity * eta) % 2 != 0) throw std::invalid_argument(where + ": disparity*eta must be even");
    if (static_cast<int>(obj.trajectory.size()) != frame_count) {
      throw std::invalid_argument(where + ": trajectory length differs from frame_count");
    }
    for (std::size_t t = 0; t < obj.trajectory.size(); ++t) {
      const auto& p = obj.trajectory[t];
      const int shift = obj.disparity * eta;
      if (p.x - shift < 0 || p.x + obj.width > width || p.y < 0 || p.y + obj.height > height) {
        msg << where << ": leaves the frame at t=" << t << " (" << p.x << "," << p.y << ")";
        throw std::invalid_argument(msg.str());
      }
    }
  }
}

void render_view(const SyntheticSceneSpec& spec, int frame, int half_steps, FramePlane& texture,
                 FramePlane& disparity) {
  texture = FramePlane(spec.width, spec.height);
  disparity = FramePlane(spec.width, spec.height);
  std::vector<std::size_t> order(spec.objects.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Nearest first; stable so equal disparities keep declaration order.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return spec.objects[a].disparity > spec.objects[b].disparity;
  });
  const int drift = drift_offset(spec, frame);
  for (int i = 0; i < spec.height; ++i) {
    for (int j = 0; j < spec.width; ++j) {
      bool hit = false;
      for (std::size_t k : order) {
        const auto& obj = spec.objects[k];
        const int x = j + obj.disparity * spec.eta * half_steps / 2 - obj.trajectory[frame].x;
        const int y = i - obj.trajectory[frame].y;
        if (x >= 0 && x < obj.width && y >= 0 && y < obj.height) {
          texture.at(i, j) = static_cast<std::uint8_t>(clamp_level(texture_value(obj.texture, x, y, obj.height, obj.width)));
          disparity.at(i, j) = static_cast<std::uint8_t>(obj.disparity);
          hit = true;
          break;
        }
      }
      if (!hit) {
        const int x = j + spec.background_disparity * spec.eta * half_steps / 2;
        const int v = texture_value(spec.background, x, i, spec.height, spec.width) + drift;
        texture.at(i, j) = static_cast<std::uint8_t>(clamp_level(v));
        disparity.at(i, j) = static_cast<std::uint8_t>(spec.background_disparity);
      }
    }
  }
}

SyntheticStereo generate_synthetic_stereo(const SyntheticSceneSpec& spec) {
  spec.validate();
  SyntheticStereo out;
  for (int t = 0; t < spec.frame_count; ++t) {
    ViewFrame left{ViewId::kLeft, t, {}, {}};
    ViewFrame right{ViewId::kRight, t, {}, {}};
    FramePlane mid_tex;
    FramePlane mid_disp;
    render_view(spec, t, 0, left.texture, left.disparity);
    render_view(spec, t, 2, right.texture, right.disparity);
    render_view(spec, t, 1, mid_tex, mid_disp);
    out.left.push_back(std::move(left));
    out.right.push_back(std::move(right));
    out.middle_truth.push_back(std::move(mid_tex));
    out.middle_disparity.push_back(std::move(mid_disp));
  }
  return out;
}

std::vector<Offset> bouncing_trajectory(Offset start, Offset velocity, int frames, int object_width,
                                        int object_height, int disparity, int eta, int scene_width,
                                        int scene_height) {
  const int min_x = disparity * eta;
  const int max_x = scene_width - object_width;
  const int max_y = scene_height - object_height;
  if (max_x < min_x || max_y < 0) throw std::invalid_argument("bouncing_trajectory: object does not fit the scene");
  std::vector<Offset> path;
  Offset p = start;
  Offset v = velocity;
  p.x = std::clamp(p.x, min_x, max_x);
  p.y = std::clamp(p.y, 0, max_y);
  for (int t = 0; t < frames; ++t) {
    path.push_back(p);
    Offset next{p.x + v.x, p.y + v.y};
    if (next.x < min_x || next.x > max_x) {
      v.x = -v.x;
      next.x = std::clamp(p.x + v.x, min_x, max_x);
    }
    if (next.y < 0 || next.y > max_y) {
      v.y = -v.y;
      next.y = std::clamp(p.y + v.y, 0, max_y);
    }
    p = next;
  }
  return path;
}

SyntheticSceneSpec default_scene_spec() {
  SyntheticSceneSpec s;
  s.width = 128;
  s.height = 128;
  s.frame_count = 60;
  s.eta = 1;
  s.background_disparity = 2;
  s.background = TextureSpec{TextureStyle::kGradient, 128, 60, 190, 8, false, 0};
  s.drift_amplitude = 6;
  s.drift_period = 30;

  SceneObject a;
  a.width = 32;
  a.height = 32;
  a.disparity = 4;
  a.texture = TextureSpec{TextureStyle::kGradient, 128, 40, 200, 8, false, 0};
  a.trajectory = bouncing_trajectory({30, 20}, {2, 1}, s.frame_count, a.width, a.height, a.disparity, s.eta,
                                     s.width, s.height);
  SceneObject b;
  b.width = 24;
  b.height = 40;
  b.disparity = 8;
  b.texture = TextureSpec{TextureStyle::kGradient, 128, 50, 210, 8, false, 0};
  b.trajectory = bouncing_trajectory({84, 70}, {-3, 1}, s.frame_count, b.width, b.height, b.disparity, s.eta,
                                     s.width, s.height);
  s.objects = {a, b};
  return s;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

const char* style_name(TextureStyle s) {
  switch (s) {
    case TextureStyle::kFlat:
      return "flat";
    case TextureStyle::kGradient:
      return "gradient";
    case TextureStyle::kChecker:
      return "checker";
    case TextureStyle::kNoise:
      return "noise";
  }
  return "flat";
}

TextureStyle parse_style(const std::string& s) {
  if (s == "flat") return TextureStyle::kFlat;
  if (s == "gradient") return TextureStyle::kGradient;
  if (s == "checker") return TextureStyle::kChecker;
  if (s == "noise") return TextureStyle::kNoise;
  throw std::invalid_argument("scene: unknown texture style '" + s + "'");
}

}  // namespace

void to_json(nlohmann::json& j, const TextureSpec& t) {
  j = nlohmann::json{{"style", style_name(t.style)}, {"level", t.level}, {"low", t.low},   {"high", t.high},
                     {"cell", t.cell},               {"horizontal", t.horizontal},         {"seed", t.seed}};
}

void from_json(const nlohmann::json& j, TextureSpec& t) {
  t = TextureSpec{};
  t.style = parse_style(j.value("style", std::string("flat")));
  t.level = j.value("level", t.level);
  t.low = j.value("low", t.low);
  t.high = j.value("high", t.high);
  t.cell = j.value("cell", t.cell);
  t.horizontal = j.value("horizontal", t.horizontal);
  t.seed = j.value("seed", t.seed);
}

void to_json(nlohmann::json& j, const SyntheticSceneSpec& s) {
  j = nlohmann::json{{"width", s.width},
                     {"height", s.height},
                     {"frames", s.frame_count},
                     {"eta", s.eta},
                     {"background_disparity", s.background_disparity},
                     {"background", s.background},
                     {"drift_amplitude", s.drift_amplitude},
                     {"drift_period", s.drift_period}};
  auto objects = nlohmann::json::array();
  for (const auto& o : s.objects) {
    auto path = nlohmann::json::array();
    for (const auto& p : o.trajectory) path.push_back({p.x, p.y});
    objects.push_back({{"width", o.width},
                       {"height", o.height},
                       {"disparity", o.disparity},
                       {"texture", o.texture},
                       {"trajectory", path}});
  }
  j["objects"] = objects;
}

void from_json(const nlohmann::json& j, SyntheticSceneSpec& s) {
  s = SyntheticSceneSpec{};
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  s.frame_count = j.value("frames", s.frame_count);
  s.eta = j.value("eta", s.eta);
  s.background_disparity = j.value("background_disparity", s.background_disparity);
  if (j.contains("background")) s.background = j.at("background").get<TextureSpec>();
  s.drift_amplitude = j.value("drift_amplitude", 0);
  s.drift_period = j.value("drift_period", 0);
  if (j.contains("objects")) {
    for (const auto& jo : j.at("objects")) {
      SceneObject o;
      o.width = jo.value("width", o.width);
      o.height = jo.value("height", o.height);
      o.disparity = jo.value("disparity", o.disparity);
      if (jo.contains("texture")) o.texture = jo.at("texture").get<TextureSpec>();
      if (jo.contains("trajectory")) {
        for (const auto& p : jo.at("trajectory")) o.trajectory.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
        // A shorter sequence replays a prefix of the path; a short path stays an error.
        if (static_cast<int>(o.trajectory.size()) > s.frame_count) o.trajectory.resize(static_cast<std::size_t>(s.frame_count));
      } else {
        const auto start = jo.at("start");
        const auto vel = jo.value("velocity", nlohmann::json::array({0, 0}));
        o.trajectory = bouncing_trajectory({start.at(0).get<int>(), start.at(1).get<int>()},
                                           {vel.at(0).get<int>(), vel.at(1).get<int>()}, s.frame_count, o.width,
                                           o.height, o.disparity, s.eta, s.width, s.height);
      }
      s.objects.push_back(std::move(o));
    }
  }
}

}  // namespace fvs
