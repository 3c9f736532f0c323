#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "pgait/dataset.hpp"
#include "pgait/gps.hpp"

namespace pgait {

/// Body geometry and gait dynamics of one synthetic subject. Lengths are in
/// pixels for a 64-row frame and scale with the frame height.
struct IdentityProfile {
  double head_radius = 4.5;
  double torso_length = 16.0;
  double torso_width = 9.0;
  double thigh_length = 12.5;
  double shin_length = 11.5;
  double foot_length = 4.5;
  double leg_width = 4.5;
  double upper_arm_length = 8.5;
  double forearm_length = 7.5;
  double hand_length = 2.5;
  double arm_width = 3.0;
  double lean = 0.0;               // torso tilt, radians (forward positive)
  double gait_period = 12.0;       // frames per stride cycle
  double stride_amplitude = 0.4;   // thigh swing, radians
  double arm_swing = 0.35;         // upper-arm swing, radians
  double knee_amplitude = 0.6;     // peak knee flexion during swing, radians
  double phase_offset = 0.0;       // arm phase lag relative to the legs
  bool dress = false;
  double dress_length = 12.0;
  double height_scale = 1.0;

  bool operator==(const IdentityProfile&) const = default;
};

/// Per-sequence 2D viewpoint: horizontal scale, shear and mirroring.
struct Viewpoint {
  double scale_x = 1.0;
  double shear = 0.0;
  bool mirror = false;
};

/// Occluders applied to a rendered sequence; pixels they cover become
/// background.
struct OcclusionSpec {
  double probability = 0.0;              // chance a sequence gets a moving rectangle
  double rect_min = 0.2, rect_max = 0.45;  // rectangle side as a fraction of H and W
  double bottom_crop_probability = 0.0;
  double bottom_crop_min = 0.15, bottom_crop_max = 0.35;  // fraction of rows
  /// Frame-loss mode: each frame is dropped with this probability (at least
  /// one frame is always kept).
  double frame_drop_probability = 0.0;

  void validate() const;
  bool operator==(const OcclusionSpec&) const = default;
};

struct SynthConfig {
  int num_subjects = 32;
  int sequences_per_subject = 4;
  int frames_per_sequence = 30;
  int height = 64;
  int width = 44;
  double scale_range = 0.06;  // scale_x drawn from [1 - r, 1 + r]
  double shear_range = 0.08;  // shear drawn from [-r, r]
  double mirror_probability = 0.5;
  OcclusionSpec occlusion;
  double dress_fraction = 0.1;
  double train_fraction = 0.75;
  /// Write binarised silhouettes instead of parsing labels.
  bool silhouette_only = false;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SynthConfig&) const = default;
};

std::string to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const std::string& text);

/// Deterministic in (seed, subject_index).
IdentityProfile generate_identity(std::uint64_t seed, int subject_index, double dress_fraction = 0.1);

Viewpoint sample_viewpoint(const SynthConfig& config, std::mt19937_64& rng);

/// Renders `n_frames` of a side-view walk at the given frame size. Painter's
/// order is far (left) limbs, torso and dress, near (right) limbs, head.
/// Throws InvalidArgument if the figure leaves the frame or the frame is
/// smaller than 32 x 22.
GaitParsingSequence render_walk_sequence(const IdentityProfile& profile, const Viewpoint& viewpoint, int n_frames,
                                         const OcclusionSpec& occlusion, std::mt19937_64& rng, int height = 64,
                                         int width = 44);

/// Left/right mirror of a frame: columns reversed and side labels swapped.
ParsingFrame mirror_frame(const ParsingFrame& frame);

/// Seed of the sequence-level RNG for `sequence_id` under `seed`.
std::uint64_t sequence_seed(std::uint64_t seed, const std::string& sequence_id);

/// Writes one GPSQ file per sequence under out_dir/sequences plus the
/// manifest and split. Subjects are shuffled by seed; the first
/// train_fraction become train, and one random sequence per test subject is
/// the query.
DatasetManifest generate_dataset(const SynthConfig& config, const std::filesystem::path& out_dir,
                                 unsigned threads = 0);

}  // namespace pgait
