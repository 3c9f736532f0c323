#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pgait/tensor.hpp"

namespace pgait {

/// Part-label codes. 0 is background; 1..11 are the body parts.
enum class Part : std::uint8_t {
  kBackground = 0,
  kHead = 1,
  kTorso = 2,
  kLeftArm = 3,
  kRightArm = 4,
  kLeftHand = 5,
  kRightHand = 6,
  kLeftLeg = 7,
  kRightLeg = 8,
  kLeftFoot = 9,
  kRightFoot = 10,
  kDress = 11,
};

inline constexpr int kNumLabels = 12;
inline constexpr int kNumParts = 11;

const char* part_name(int label) noexcept;

/// Left/right mirror of a label code (left-arm <-> right-arm, ...).
std::uint8_t swap_side(std::uint8_t label) noexcept;

/// One H x W grid of part labels, row-major.
class ParsingFrame {
 public:
  ParsingFrame() = default;
  /// Background-filled frame. Throws InvalidArgument on a zero dimension.
  ParsingFrame(int height, int width);
  /// Takes ownership of `labels`; throws if its size is not height*width or
  /// any label is >= num_labels.
  ParsingFrame(int height, int width, std::vector<std::uint8_t> labels, int num_labels = kNumLabels);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return labels_.size(); }

  std::uint8_t at(int y, int x) const { return labels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)]; }
  void set(int y, int x, std::uint8_t label) { labels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)] = label; }

  std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  std::span<std::uint8_t> labels_mut() noexcept { return labels_; }

  bool operator==(const ParsingFrame&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> labels_;
};

/// Ordered parsing frames plus identity metadata.
struct GaitParsingSequence {
  std::vector<ParsingFrame> frames;
  std::string subject_id;
  std::string sequence_id;
  std::string camera_id;
  int num_labels = kNumLabels;

  std::size_t length() const noexcept { return frames.size(); }
  int height() const { return frames.empty() ? 0 : frames.front().height(); }
  int width() const { return frames.empty() ? 0 : frames.front().width(); }

  /// Throws InvalidArgument if empty, if frame sizes differ, or if a label
  /// is out of range.
  void validate() const;

  bool operator==(const GaitParsingSequence&) const = default;
};

struct LabelHistogram {
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  double probability(std::size_t label) const;
  std::size_t support() const;
  LabelHistogram& operator+=(const LabelHistogram& other);
  bool operator==(const LabelHistogram&) const = default;
};

LabelHistogram label_histogram(const ParsingFrame& frame, int num_labels = kNumLabels);
LabelHistogram label_histogram(const GaitParsingSequence& sequence);

/// Shannon entropy in bits, -sum p_k log2 p_k over the labels with p_k > 0.
/// Throws InvalidArgument on an empty histogram.
double entropy_bits(const LabelHistogram& hist);

/// Nearest-neighbour resampling: output (y, x) reads input
/// (floor(y * H / out_h), floor(x * W / out_w)).
ParsingFrame resize_mask(const ParsingFrame& frame, int out_h, int out_w);

/// Collapses every part label to 1 (silhouette).
ParsingFrame binarize(const ParsingFrame& frame);
GaitParsingSequence binarize(const GaitParsingSequence& sequence);

/// K x H x W one-hot encoding; throws InvalidArgument if a label >= K.
ad::Tensor<float> one_hot(const ParsingFrame& frame, int num_classes);

enum class InputEncoding { kOneHot, kScalar };

/// Network input for a stack of frames: [N, K, H, W] (one-hot) or
/// [N, 1, H, W] with label / (K - 1) (scalar).
ad::Tensor<float> encode_frames(std::span<const ParsingFrame* const> frames, int num_classes,
                                InputEncoding encoding);

using Rgb = std::array<std::uint8_t, 3>;
using Palette = std::map<int, Rgb>;

/// Default colours for the 12-label taxonomy.
Palette default_palette();

/// Binary PPM (P6) bytes; throws InvalidArgument if a present label has no
/// palette entry.
std::vector<std::uint8_t> render_ppm(const ParsingFrame& frame, const Palette& palette);
void render(const ParsingFrame& frame, const Palette& palette, const std::filesystem::path& path);

// GPSQ binary container -------------------------------------------------------

/// Encodes a sequence. Layout (little-endian): "GPSQ", u8 version=1, u8 K,
/// u16 H, u16 W, u32 N, then per frame u32 run_count followed by
/// run_count x (u8 label, u32 length); footer u32 CRC32 over every byte
/// after the magic. Throws CodecError on an invalid sequence.
std::vector<std::uint8_t> encode_gps(const GaitParsingSequence& sequence);

/// Inverse of encode_gps. Identity fields (subject/sequence/camera) are not
/// part of the stream and come back empty. Throws DecodeError.
GaitParsingSequence decode_gps(std::span<const std::uint8_t> bytes);

void write_gps_file(const GaitParsingSequence& sequence, const std::filesystem::path& path);
GaitParsingSequence read_gps_file(const std::filesystem::path& path);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace pgait
