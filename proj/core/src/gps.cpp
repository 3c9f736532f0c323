#include "pgait/gps.hpp"

#include <cmath>
#include <fstream>

#include "pgait/errors.hpp"

namespace pgait {

const char* to_string(DecodeErrc code) noexcept {
  switch (code) {
    case DecodeErrc::kBadMagic: return "bad magic";
    case DecodeErrc::kUnsupportedVersion: return "unsupported version";
    case DecodeErrc::kTruncated: return "truncated stream";
    case DecodeErrc::kMalformed: return "malformed stream";
    case DecodeErrc::kCrcMismatch: return "CRC mismatch";
  }
  return "decode error";
}

const char* part_name(int label) noexcept {
  static constexpr const char* kNames[kNumLabels] = {
      "background", "head",      "torso",    "left-arm",  "right-arm",  "left-hand",
      "right-hand", "left-leg",  "right-leg", "left-foot", "right-foot", "dress"};
  return (label >= 0 && label < kNumLabels) ? kNames[label] : "unknown";
}

std::uint8_t swap_side(std::uint8_t label) noexcept {
  switch (static_cast<Part>(label)) {
    case Part::kLeftArm: return static_cast<std::uint8_t>(Part::kRightArm);
    case Part::kRightArm: return static_cast<std::uint8_t>(Part::kLeftArm);
    case Part::kLeftHand: return static_cast<std::uint8_t>(Part::kRightHand);
    case Part::kRightHand: return static_cast<std::uint8_t>(Part::kLeftHand);
    case Part::kLeftLeg: return static_cast<std::uint8_t>(Part::kRightLeg);
    case Part::kRightLeg: return static_cast<std::uint8_t>(Part::kLeftLeg);
    case Part::kLeftFoot: return static_cast<std::uint8_t>(Part::kRightFoot);
    case Part::kRightFoot: return static_cast<std::uint8_t>(Part::kLeftFoot);
    default: return label;
  }
}

ParsingFrame::ParsingFrame(int height, int width) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) {
    throw InvalidArgument("frame dimensions must be positive, got " + std::to_string(height) + "x" +
                          std::to_string(width));
  }
  labels_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0);
}

ParsingFrame::ParsingFrame(int height, int width, std::vector<std::uint8_t> labels, int num_labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  if (height <= 0 || width <= 0) {
    throw InvalidArgument("frame dimensions must be positive, got " + std::to_string(height) + "x" +
                          std::to_string(width));
  }
  if (labels_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw InvalidArgument("label buffer size does not match frame dimensions");
  }
  for (auto v : labels_) {
    if (v >= num_labels) {
      throw InvalidArgument("label " + std::to_string(v) + " >= K=" + std::to_string(num_labels));
    }
  }
}

void GaitParsingSequence::validate() const {
  if (frames.empty()) throw InvalidArgument("sequence '" + sequence_id + "' has no frames");
  if (num_labels < 1 || num_labels > 256) throw InvalidArgument("K must lie in [1, 256]");
  const int h = frames.front().height(), w = frames.front().width();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.height() != h || f.width() != w) {
      throw InvalidArgument("frame " + std::to_string(i) + " is " + std::to_string(f.height()) + "x" +
                            std::to_string(f.width()) + ", expected " + std::to_string(h) + "x" +
                            std::to_string(w));
    }
    for (auto v : f.labels()) {
      if (v >= num_labels) throw InvalidArgument("frame " + std::to_string(i) + " holds label >= K");
    }
  }
}

double LabelHistogram::probability(std::size_t label) const {
  if (total == 0 || label >= counts.size()) return 0.0;
  return static_cast<double>(counts[label]) / static_cast<double>(total);
}

std::size_t LabelHistogram::support() const {
  std::size_t n = 0;
  for (auto c : counts) n += c > 0 ? 1 : 0;
  return n;
}

LabelHistogram& LabelHistogram::operator+=(const LabelHistogram& other) {
  if (counts.size() < other.counts.size()) counts.resize(other.counts.size(), 0);
  for (std::size_t i = 0; i < other.counts.size(); ++i) counts[i] += other.counts[i];
  total += other.total;
  return *this;
}

LabelHistogram label_histogram(const ParsingFrame& frame, int num_labels) {
  LabelHistogram h;
  h.counts.assign(static_cast<std::size_t>(std::max(num_labels, 1)), 0);
  for (auto v : frame.labels()) {
    if (v >= h.counts.size()) h.counts.resize(static_cast<std::size_t>(v) + 1, 0);
    ++h.counts[v];
  }
  h.total = frame.size();
  return h;
}

LabelHistogram label_histogram(const GaitParsingSequence& sequence) {
  LabelHistogram h;
  h.counts.assign(static_cast<std::size_t>(sequence.num_labels), 0);
  for (const auto& f : sequence.frames) h += label_histogram(f, sequence.num_labels);
  return h;
}

double entropy_bits(const LabelHistogram& hist) {
  if (hist.total == 0) throw InvalidArgument("entropy of an empty histogram");
  double h = 0.0;
  const double total = static_cast<double>(hist.total);
  for (auto c : hist.counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h > 0.0 ? h : 0.0;
}

ParsingFrame resize_mask(const ParsingFrame& frame, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw InvalidArgument("resize_mask target must be at least 1x1, got " + std::to_string(out_h) + "x" +
                          std::to_string(out_w));
  }
  if (out_h == frame.height() && out_w == frame.width()) return frame;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(out_h) * static_cast<std::size_t>(out_w));
  for (int y = 0; y < out_h; ++y) {
    const int sy = static_cast<int>(static_cast<std::int64_t>(y) * frame.height() / out_h);
    for (int x = 0; x < out_w; ++x) {
      const int sx = static_cast<int>(static_cast<std::int64_t>(x) * frame.width() / out_w);
      out[static_cast<std::size_t>(y) * static_cast<std::size_t>(out_w) + static_cast<std::size_t>(x)] =
          frame.at(sy, sx);
    }
  }
  return ParsingFrame(out_h, out_w, std::move(out), 256);
}

ParsingFrame binarize(const ParsingFrame& frame) {
  std::vector<std::uint8_t> out(frame.labels().begin(), frame.labels().end());
  for (auto& v : out) v = v > 0 ? 1 : 0;
  return ParsingFrame(frame.height(), frame.width(), std::move(out), 2);
}

GaitParsingSequence binarize(const GaitParsingSequence& sequence) {
  GaitParsingSequence out = sequence;
  for (auto& f : out.frames) f = binarize(f);
  return out;
}

ad::Tensor<float> one_hot(const ParsingFrame& frame, int num_classes) {
  const ParsingFrame* ptr = &frame;
  auto t = encode_frames(std::span<const ParsingFrame* const>(&ptr, 1), num_classes, InputEncoding::kOneHot);
  return ad::Tensor<float>::from_data({num_classes, frame.height(), frame.width()},
                                      std::vector<float>(t.data().begin(), t.data().end()));
}

ad::Tensor<float> encode_frames(std::span<const ParsingFrame* const> frames, int num_classes,
                                InputEncoding encoding) {
  if (frames.empty()) throw InvalidArgument("encode_frames: no frames");
  if (num_classes < 2) throw InvalidArgument("encode_frames: need at least 2 classes");
  const int h = frames.front()->height(), w = frames.front()->width();
  const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  const std::size_t channels = encoding == InputEncoding::kOneHot ? static_cast<std::size_t>(num_classes) : 1;
  std::vector<float> data(frames.size() * channels * plane, 0.0f);
  const float inv = 1.0f / static_cast<float>(num_classes - 1);
  for (std::size_t n = 0; n < frames.size(); ++n) {
    const ParsingFrame& f = *frames[n];
    if (f.height() != h || f.width() != w) throw ShapeError("encode_frames: frame size mismatch");
    float* base = data.data() + n * channels * plane;
    const auto labels = f.labels();
    for (std::size_t i = 0; i < plane; ++i) {
      const int v = labels[i];
      if (v >= num_classes) {
        throw InvalidArgument("label " + std::to_string(v) + " >= K=" + std::to_string(num_classes));
      }
      if (encoding == InputEncoding::kOneHot) {
        base[static_cast<std::size_t>(v) * plane + i] = 1.0f;
      } else {
        base[i] = static_cast<float>(v) * inv;
      }
    }
  }
  return ad::Tensor<float>::from_data(
      {static_cast<std::int64_t>(frames.size()), static_cast<std::int64_t>(channels), h, w}, std::move(data));
}

Palette default_palette() {
  return {
      {0, {0, 0, 0}},       {1, {220, 20, 60}},   {2, {255, 140, 0}},  {3, {30, 144, 255}},
      {4, {0, 206, 209}},   {5, {138, 43, 226}},  {6, {255, 105, 180}}, {7, {34, 139, 34}},
      {8, {154, 205, 50}},  {9, {139, 69, 19}},   {10, {210, 180, 140}}, {11, {255, 215, 0}},
  };
}

std::vector<std::uint8_t> render_ppm(const ParsingFrame& frame, const Palette& palette) {
  const std::string header =
      "P6\n" + std::to_string(frame.width()) + " " + std::to_string(frame.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + frame.size() * 3);
  for (auto v : frame.labels()) {
    auto it = palette.find(v);
    if (it == palette.end()) throw InvalidArgument("palette has no colour for label " + std::to_string(v));
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

void render(const ParsingFrame& frame, const Palette& palette, const std::filesystem::path& path) {
  const auto bytes = render_ppm(frame, palette);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace pgait
