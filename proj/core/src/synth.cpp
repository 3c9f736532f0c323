#include "pgait/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "json.hpp"
#include "pgait/errors.hpp"
#include "pgait/parallel.hpp"

namespace pgait {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kReferenceHeight = 64.0;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool chance(std::mt19937_64& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return std::bernoulli_distribution(p)(rng);
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must be in [0, 1]");
}

void check_fraction_range(double lo, double hi, const char* name) {
  if (!(lo >= 0.0 && lo <= hi && hi <= 1.0)) throw ConfigError(std::string(name) + " must satisfy 0 <= min <= max <= 1");
}

struct Vec {
  double x = 0.0, y = 0.0;
};

Vec operator+(Vec a, Vec b) { return {a.x + b.x, a.y + b.y}; }
Vec operator-(Vec a, Vec b) { return {a.x - b.x, a.y - b.y}; }
Vec operator*(double s, Vec a) { return {s * a.x, s * a.y}; }

// A capsule (segment a-b swept by radius r) or a convex quad, in figure
// coordinates: origin at the hip joint, x forward, y down.
struct Primitive {
  std::uint8_t label = 0;
  bool quad = false;
  Vec a, b;
  double r = 0.0;
  std::array<Vec, 4> corners{};
  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;

  void finish_bounds() {
    if (quad) {
      min_x = max_x = corners[0].x;
      min_y = max_y = corners[0].y;
      for (const auto& c : corners) {
        min_x = std::min(min_x, c.x);
        max_x = std::max(max_x, c.x);
        min_y = std::min(min_y, c.y);
        max_y = std::max(max_y, c.y);
      }
    } else {
      min_x = std::min(a.x, b.x) - r;
      max_x = std::max(a.x, b.x) + r;
      min_y = std::min(a.y, b.y) - r;
      max_y = std::max(a.y, b.y) + r;
    }
  }

  bool contains(Vec p) const {
    if (p.x < min_x || p.x > max_x || p.y < min_y || p.y > max_y) return false;
    if (quad) {
      // Convex, corners in a consistent winding.
      bool pos = false, neg = false;
      for (std::size_t i = 0; i < 4; ++i) {
        const Vec e = corners[(i + 1) % 4] - corners[i];
        const Vec q = p - corners[i];
        const double cross = e.x * q.y - e.y * q.x;
        pos |= cross > 0;
        neg |= cross < 0;
      }
      return !(pos && neg);
    }
    const Vec ab = b - a, ap = p - a;
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    const double t = len2 > 0 ? std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0) : 0.0;
    const Vec d = ap - t * ab;
    return d.x * d.x + d.y * d.y <= r * r;
  }
};

Primitive capsule(Part label, Vec a, Vec b, double r) {
  Primitive p;
  p.label = static_cast<std::uint8_t>(label);
  p.a = a;
  p.b = b;
  p.r = r;
  p.finish_bounds();
  return p;
}

Vec direction(double angle) { return {std::sin(angle), std::cos(angle)}; }  // angle from straight down, forward positive

void add_leg(std::vector<Primitive>& out, const IdentityProfile& p, double phase, double depth, Part leg, Part foot) {
  const double thigh = p.stride_amplitude * std::sin(phase);
  const double knee = 0.08 + p.knee_amplitude * std::max(0.0, std::cos(phase));
  const double shin = thigh - knee;
  const double w = p.leg_width * depth;
  const Vec hip{0.0, 0.0};
  const Vec knee_pt = hip + p.thigh_length * direction(thigh);
  const Vec ankle = knee_pt + p.shin_length * direction(shin);
  const Vec foot_dir{std::cos(shin), -std::sin(shin)};
  out.push_back(capsule(leg, hip, knee_pt, 0.5 * w));
  out.push_back(capsule(leg, knee_pt, ankle, 0.45 * w));
  out.push_back(capsule(foot, ankle - (0.15 * p.foot_length) * foot_dir, ankle + p.foot_length * foot_dir, 0.33 * w));
}

void add_arm(std::vector<Primitive>& out, const IdentityProfile& p, Vec shoulder, double phase, double depth, Part arm,
             Part hand) {
  const double upper = -p.arm_swing * std::sin(phase);
  const double fore = upper + 0.2 + 0.3 * std::max(0.0, -std::sin(phase));
  const double w = p.arm_width * depth;
  const Vec elbow = shoulder + p.upper_arm_length * direction(upper);
  const Vec wrist = elbow + p.forearm_length * direction(fore);
  out.push_back(capsule(arm, shoulder, elbow, 0.5 * w));
  out.push_back(capsule(arm, elbow, wrist, 0.45 * w));
  out.push_back(capsule(hand, wrist, wrist + p.hand_length * direction(fore), 0.55 * w));
}

// Figure primitives for one frame in back-to-front painter's order.
std::vector<Primitive> pose(const IdentityProfile& p, double phase, double arm_phase) {
  constexpr double kDepth = 0.12;
  const double near = 1.0 + kDepth * std::sin(phase);
  const double far = 1.0 - kDepth * std::sin(phase);
  const Vec up{std::sin(p.lean), -std::cos(p.lean)};
  const double tr = 0.5 * p.torso_width;
  const Vec shoulder = (p.torso_length - tr) * up;

  std::vector<Primitive> prims;
  add_arm(prims, p, shoulder, arm_phase + kPi, far, Part::kLeftArm, Part::kLeftHand);
  add_leg(prims, p, phase + kPi, far, Part::kLeftLeg, Part::kLeftFoot);
  prims.push_back(capsule(Part::kTorso, (0.5 * tr) * up, shoulder, tr));
  if (p.dress) {
    Primitive d;
    d.label = static_cast<std::uint8_t>(Part::kDress);
    d.quad = true;
    const double top = -0.35 * p.torso_length, bottom = p.dress_length;
    const double flare = tr + 0.3 * p.dress_length;
    d.corners = {Vec{-tr, top}, Vec{tr, top}, Vec{flare, bottom}, Vec{-flare, bottom}};
    d.finish_bounds();
    prims.push_back(d);
  }
  add_leg(prims, p, phase, near, Part::kRightLeg, Part::kRightFoot);
  add_arm(prims, p, shoulder, arm_phase, near, Part::kRightArm, Part::kRightHand);
  prims.push_back(capsule(Part::kHead, (p.torso_length + 0.85 * p.head_radius) * up,
                          (p.torso_length + 0.85 * p.head_radius) * up, p.head_radius));
  return prims;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string subject_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "S%03d", i);
  return buf;
}

std::string sequence_name(int subject, int seq) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "S%03d-%02d", subject, seq);
  return buf;
}

}  // namespace

void OcclusionSpec::validate() const {
  check_probability(probability, "occlusion.probability");
  check_fraction_range(rect_min, rect_max, "occlusion.rect");
  check_probability(bottom_crop_probability, "occlusion.bottom_crop_probability");
  check_fraction_range(bottom_crop_min, bottom_crop_max, "occlusion.bottom_crop");
  if (!(frame_drop_probability >= 0.0 && frame_drop_probability < 1.0)) {
    throw ConfigError("occlusion.frame_drop_probability must be in [0, 1)");
  }
}

void SynthConfig::validate() const {
  if (num_subjects < 2) throw ConfigError("num_subjects must be >= 2 (train and test)");
  if (sequences_per_subject < 2) throw ConfigError("sequences_per_subject must be >= 2 (query and gallery)");
  if (frames_per_sequence < 1) throw ConfigError("frames_per_sequence must be >= 1");
  if (height < 32 || width < 22) throw ConfigError("frame size must be at least 32 x 22");
  if (!(scale_range >= 0.0 && scale_range < 0.5)) throw ConfigError("scale_range must be in [0, 0.5)");
  if (!(shear_range >= 0.0 && shear_range < 0.5)) throw ConfigError("shear_range must be in [0, 0.5)");
  check_probability(mirror_probability, "mirror_probability");
  check_probability(dress_fraction, "dress_fraction");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0, 1)");
  occlusion.validate();
}

std::string to_json(const SynthConfig& c) {
  const auto& o = c.occlusion;
  json j = {{"num_subjects", c.num_subjects},
            {"sequences_per_subject", c.sequences_per_subject},
            {"frames_per_sequence", c.frames_per_sequence},
            {"frame_size", {c.height, c.width}},
            {"scale_range", c.scale_range},
            {"shear_range", c.shear_range},
            {"mirror_probability", c.mirror_probability},
            {"occlusion",
             {{"probability", o.probability},
              {"rect_min", o.rect_min},
              {"rect_max", o.rect_max},
              {"bottom_crop_probability", o.bottom_crop_probability},
              {"bottom_crop_min", o.bottom_crop_min},
              {"bottom_crop_max", o.bottom_crop_max},
              {"frame_drop_probability", o.frame_drop_probability}}},
            {"dress_fraction", c.dress_fraction},
            {"train_fraction", c.train_fraction},
            {"silhouette_only", c.silhouette_only},
            {"seed", c.seed}};
  return j.dump(2);
}

SynthConfig synth_config_from_json(const std::string& text) {
  SynthConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("synth config must be a JSON object");
    const json defaults = json::parse(to_json(c));
    for (const auto& [key, value] : j.items()) {
      if (!defaults.contains(key)) throw ConfigError("unknown synth config field '" + key + "'");
    }
    auto get = [](const json& obj, const char* key, auto& field) {
      if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
    };
    get(j, "num_subjects", c.num_subjects);
    get(j, "sequences_per_subject", c.sequences_per_subject);
    get(j, "frames_per_sequence", c.frames_per_sequence);
    if (j.contains("frame_size")) {
      const auto hw = j.at("frame_size").get<std::vector<int>>();
      if (hw.size() != 2) throw ConfigError("frame_size must be [H, W]");
      c.height = hw[0];
      c.width = hw[1];
    }
    get(j, "scale_range", c.scale_range);
    get(j, "shear_range", c.shear_range);
    get(j, "mirror_probability", c.mirror_probability);
    if (j.contains("occlusion")) {
      const auto& o = j.at("occlusion");
      for (const auto& [key, value] : o.items()) {
        if (!defaults.at("occlusion").contains(key)) throw ConfigError("unknown occlusion field '" + key + "'");
      }
      get(o, "probability", c.occlusion.probability);
      get(o, "rect_min", c.occlusion.rect_min);
      get(o, "rect_max", c.occlusion.rect_max);
      get(o, "bottom_crop_probability", c.occlusion.bottom_crop_probability);
      get(o, "bottom_crop_min", c.occlusion.bottom_crop_min);
      get(o, "bottom_crop_max", c.occlusion.bottom_crop_max);
      get(o, "frame_drop_probability", c.occlusion.frame_drop_probability);
    }
    get(j, "dress_fraction", c.dress_fraction);
    get(j, "train_fraction", c.train_fraction);
    get(j, "silhouette_only", c.silhouette_only);
    get(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

IdentityProfile generate_identity(std::uint64_t seed, int subject_index, double dress_fraction) {
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(subject_index) + 1)));
  IdentityProfile p;
  p.head_radius = uniform(rng, 3.6, 5.0);
  p.torso_length = uniform(rng, 14.0, 19.0);
  p.torso_width = uniform(rng, 7.0, 11.0);
  p.thigh_length = uniform(rng, 10.5, 13.5);
  p.shin_length = uniform(rng, 10.0, 12.5);
  p.foot_length = uniform(rng, 3.0, 5.5);
  p.leg_width = uniform(rng, 3.5, 5.5);
  p.upper_arm_length = uniform(rng, 7.0, 9.5);
  p.forearm_length = uniform(rng, 5.5, 8.0);
  p.hand_length = uniform(rng, 1.0, 4.0);
  p.arm_width = uniform(rng, 2.5, 3.8);
  p.lean = uniform(rng, -0.06, 0.12);
  p.gait_period = uniform(rng, 9.0, 15.0);
  p.stride_amplitude = uniform(rng, 0.26, 0.46);
  p.arm_swing = uniform(rng, 0.12, 0.6);
  p.knee_amplitude = uniform(rng, 0.35, 0.9);
  p.phase_offset = uniform(rng, -0.6, 0.6);
  p.dress = chance(rng, dress_fraction);
  p.dress_length = uniform(rng, 9.0, 14.0);
  p.height_scale = uniform(rng, 0.9, 1.0);
  return p;
}

Viewpoint sample_viewpoint(const SynthConfig& config, std::mt19937_64& rng) {
  Viewpoint v;
  v.scale_x = uniform(rng, 1.0 - config.scale_range, 1.0 + config.scale_range + 1e-12);
  v.shear = uniform(rng, -config.shear_range, config.shear_range + 1e-12);
  v.mirror = chance(rng, config.mirror_probability);
  return v;
}

ParsingFrame mirror_frame(const ParsingFrame& frame) {
  const int h = frame.height(), w = frame.width();
  std::vector<std::uint8_t> out(frame.labels().size());
  const auto in = frame.labels();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out[static_cast<std::size_t>(y * w + (w - 1 - x))] = swap_side(in[static_cast<std::size_t>(y * w + x)]);
    }
  }
  return ParsingFrame(h, w, std::move(out));
}

GaitParsingSequence render_walk_sequence(const IdentityProfile& profile, const Viewpoint& view, int n_frames,
                                         const OcclusionSpec& occlusion, std::mt19937_64& rng, int height,
                                         int width) {
  if (height < 32 || width < 22) throw InvalidArgument("frame size must be at least 32 x 22");
  if (n_frames < 1) throw InvalidArgument("render_walk_sequence needs at least one frame");
  if (profile.gait_period < 4.0) throw InvalidArgument("gait period must be >= 4 frames");

  // Sequence-level variation of one subject's walk.
  const double start = uniform(rng, 0.0, 2.0 * kPi);
  IdentityProfile p = profile;
  p.gait_period *= uniform(rng, 0.97, 1.03);
  p.stride_amplitude *= uniform(rng, 0.95, 1.05);
  p.arm_swing *= uniform(rng, 0.95, 1.05);

  // Occluders.
  const bool has_rect = chance(rng, occlusion.probability);
  const double rw = uniform(rng, occlusion.rect_min, occlusion.rect_max + 1e-12) * width;
  const double rh = uniform(rng, occlusion.rect_min, occlusion.rect_max + 1e-12) * height;
  const double ry = uniform(rng, 0.0, std::max(1e-9, height - rh));
  const double rx0 = uniform(rng, -rw, static_cast<double>(width));
  const double rx1 = uniform(rng, -rw, static_cast<double>(width));
  const bool has_crop = chance(rng, occlusion.bottom_crop_probability);
  const int crop_rows = static_cast<int>(std::lround(
      uniform(rng, occlusion.bottom_crop_min, occlusion.bottom_crop_max + 1e-12) * height));

  const double s = height / kReferenceHeight * p.height_scale;
  const double ground = height - 1.5 * height / kReferenceHeight;
  const double ox = 0.5 * width;

  GaitParsingSequence seq;
  for (int t = 0; t < n_frames; ++t) {
    const double phase = start + 2.0 * kPi * t / p.gait_period;
    const auto prims = pose(p, phase, phase + p.phase_offset);
    double lowest = 0.0;
    for (const auto& pr : prims) lowest = std::max(lowest, pr.max_y);
    const double oy = ground - s * lowest;

    // Forward map u = ox + s*sx*(X + shear*Y), v = oy + s*Y must keep every
    // primitive inside the frame.
    for (const auto& pr : prims) {
      for (double X : {pr.min_x, pr.max_x}) {
        for (double Y : {pr.min_y, pr.max_y}) {
          const double u = ox + s * view.scale_x * (X + view.shear * Y);
          const double v = oy + s * Y;
          if (u < 0.0 || u > width || v < 0.0 || v > height) {
            throw InvalidArgument("figure exceeds the " + std::to_string(height) + "x" + std::to_string(width) +
                                  " frame at frame " + std::to_string(t));
          }
        }
      }
    }

    std::vector<std::uint8_t> labels(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0);
    for (int py = 0; py < height; ++py) {
      const double Y = (py + 0.5 - oy) / s;
      for (int px = 0; px < width; ++px) {
        const Vec q{(px + 0.5 - ox) / (s * view.scale_x) - view.shear * Y, Y};
        for (auto it = prims.rbegin(); it != prims.rend(); ++it) {
          if (it->contains(q)) {
            labels[static_cast<std::size_t>(py * width + px)] = it->label;
            break;
          }
        }
      }
    }
    ParsingFrame frame(height, width, std::move(labels));
    if (view.mirror) frame = mirror_frame(frame);

    if (has_rect || has_crop) {
      auto out = frame.labels_mut();
      const double rx = n_frames > 1 ? rx0 + (rx1 - rx0) * t / (n_frames - 1) : rx0;
      for (int py = 0; py < height; ++py) {
        for (int px = 0; px < width; ++px) {
          const double cx = px + 0.5, cy = py + 0.5;
          const bool in_rect = has_rect && cx >= rx && cx < rx + rw && cy >= ry && cy < ry + rh;
          const bool cropped = has_crop && py >= height - crop_rows;
          if (in_rect || cropped) out[static_cast<std::size_t>(py * width + px)] = 0;
        }
      }
    }
    seq.frames.push_back(std::move(frame));
  }

  if (occlusion.frame_drop_probability > 0.0) {
    std::vector<ParsingFrame> kept;
    for (auto& f : seq.frames) {
      if (!chance(rng, occlusion.frame_drop_probability)) kept.push_back(std::move(f));
    }
    if (kept.empty()) kept.push_back(std::move(seq.frames.front()));
    seq.frames = std::move(kept);
  }
  return seq;
}

std::uint64_t sequence_seed(std::uint64_t seed, const std::string& sequence_id) {
  return splitmix64(seed ^ splitmix64(fnv1a(sequence_id)));
}

DatasetManifest generate_dataset(const SynthConfig& config, const std::filesystem::path& out_dir, unsigned threads) {
  config.validate();
  const auto seq_dir = out_dir / "sequences";
  std::error_code ec;
  std::filesystem::create_directories(seq_dir, ec);
  if (ec) throw IoError("cannot create " + seq_dir.string() + ": " + ec.message());

  DatasetManifest m;
  m.root = out_dir;
  for (int s = 0; s < config.num_subjects; ++s) {
    for (int q = 0; q < config.sequences_per_subject; ++q) {
      ManifestEntry e;
      e.sequence_id = sequence_name(s, q);
      e.subject_id = subject_name(s);
      e.path = std::filesystem::path("sequences") / (e.sequence_id + ".gpsq");
      m.entries.push_back(std::move(e));
    }
  }

  std::vector<IdentityProfile> profiles;
  for (int s = 0; s < config.num_subjects; ++s) profiles.push_back(generate_identity(config.seed, s, config.dress_fraction));

  parallel_for(m.entries.size(), threads, [&](std::size_t i) {
    auto& e = m.entries[i];
    std::mt19937_64 rng(sequence_seed(config.seed, e.sequence_id));
    const auto view = sample_viewpoint(config, rng);
    auto seq = render_walk_sequence(profiles[i / static_cast<std::size_t>(config.sequences_per_subject)], view,
                                    config.frames_per_sequence, config.occlusion, rng, config.height, config.width);
    if (config.silhouette_only) seq = binarize(seq);
    e.camera_id = view.mirror ? "cam1" : "cam0";
    e.num_frames = static_cast<std::uint32_t>(seq.frames.size());
    seq.sequence_id = e.sequence_id;
    seq.subject_id = e.subject_id;
    seq.camera_id = e.camera_id;
    write_gps_file(seq, out_dir / e.path);
  });

  std::vector<int> order(static_cast<std::size_t>(config.num_subjects));
  for (int i = 0; i < config.num_subjects; ++i) order[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 split_rng(splitmix64(config.seed ^ 0x5eed5eed5eedULL));
  std::shuffle(order.begin(), order.end(), split_rng);
  int n_train = static_cast<int>(std::lround(config.train_fraction * config.num_subjects));
  n_train = std::clamp(n_train, 1, config.num_subjects - 1);
  std::vector<int> train(order.begin(), order.begin() + n_train), test(order.begin() + n_train, order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  for (int s : train) m.split.train_subjects.push_back(subject_name(s));
  for (int s : test) {
    m.split.test_subjects.push_back(subject_name(s));
    const int q = std::uniform_int_distribution<int>(0, config.sequences_per_subject - 1)(split_rng);
    m.split.query_sequences.push_back(sequence_name(s, q));
  }
  m.validate();
  save_dataset_index(m, out_dir);
  return m;
}

}  // namespace pgait
