#include <zlib.h>

#include <fstream>
#include <iterator>
#include <limits>

#include "pgait/errors.hpp"
#include "pgait/gps.hpp"

namespace pgait {

namespace {

constexpr std::uint8_t kMagic[4] = {'G', 'P', 'S', 'Q'};
constexpr std::uint8_t kVersion = 1;

class Writer {
 public:
  void bytes(const std::uint8_t* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw DecodeError(DecodeErrc::kTruncated, "needed " + std::to_string(n) + " bytes at offset " +
                                                    std::to_string(pos_) + ", stream has " +
                                                    std::to_string(bytes_.size()));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes a uInt length; feed in chunks for very large buffers.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, std::numeric_limits<uInt>::max());
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_gps(const GaitParsingSequence& sequence) {
  try {
    sequence.validate();
  } catch (const InvalidArgument& e) {
    throw CodecError(std::string("cannot encode: ") + e.what());
  }
  if (sequence.height() > 0xFFFF || sequence.width() > 0xFFFF) throw CodecError("frame too large for GPSQ");
  if (sequence.num_labels > 255) throw CodecError("K does not fit in one byte");
  if (sequence.frames.size() > std::numeric_limits<std::uint32_t>::max()) throw CodecError("too many frames");

  Writer w;
  w.bytes(kMagic, 4);
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(sequence.num_labels));
  w.u16(static_cast<std::uint16_t>(sequence.height()));
  w.u16(static_cast<std::uint16_t>(sequence.width()));
  w.u32(static_cast<std::uint32_t>(sequence.frames.size()));

  std::vector<std::pair<std::uint8_t, std::uint32_t>> runs;
  for (const auto& frame : sequence.frames) {
    runs.clear();
    for (auto v : frame.labels()) {
      if (!runs.empty() && runs.back().first == v) {
        ++runs.back().second;
      } else {
        runs.emplace_back(v, 1u);
      }
    }
    w.u32(static_cast<std::uint32_t>(runs.size()));
    for (const auto& [label, len] : runs) {
      w.u8(label);
      w.u32(len);
    }
  }
  auto& buf = w.buffer();
  w.u32(crc32(std::span<const std::uint8_t>(buf).subspan(4)));
  return std::move(buf);
}

GaitParsingSequence decode_gps(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw DecodeError(DecodeErrc::kTruncated, "stream shorter than the magic");
  for (int i = 0; i < 4; ++i) {
    if (bytes[static_cast<std::size_t>(i)] != kMagic[i]) throw DecodeError(DecodeErrc::kBadMagic, "expected 'GPSQ'");
  }
  Reader r(bytes.subspan(4));
  const std::uint8_t version = r.u8();
  if (version != kVersion) {
    throw DecodeError(DecodeErrc::kUnsupportedVersion, "version " + std::to_string(version));
  }
  const int k = r.u8();
  const int h = r.u16();
  const int w = r.u16();
  const std::uint32_t n = r.u32();
  if (k < 1 || h < 1 || w < 1 || n < 1) throw DecodeError(DecodeErrc::kMalformed, "zero-sized header field");
  const std::uint64_t plane = static_cast<std::uint64_t>(h) * static_cast<std::uint64_t>(w);

  GaitParsingSequence seq;
  seq.num_labels = k;
  seq.frames.reserve(std::min<std::uint32_t>(n, 1u << 16));
  for (std::uint32_t f = 0; f < n; ++f) {
    const std::uint32_t run_count = r.u32();
    if (run_count == 0 || run_count > plane) {
      throw DecodeError(DecodeErrc::kMalformed, "frame " + std::to_string(f) + " declares " +
                                                    std::to_string(run_count) + " runs");
    }
    std::vector<std::uint8_t> labels;
    labels.reserve(static_cast<std::size_t>(plane));
    for (std::uint32_t i = 0; i < run_count; ++i) {
      const std::uint8_t label = r.u8();
      const std::uint32_t len = r.u32();
      if (label >= k) throw DecodeError(DecodeErrc::kMalformed, "label " + std::to_string(label) + " >= K");
      if (len == 0 || labels.size() + len > plane) {
        throw DecodeError(DecodeErrc::kMalformed, "run lengths of frame " + std::to_string(f) + " exceed H*W");
      }
      labels.insert(labels.end(), len, label);
    }
    if (labels.size() != plane) {
      throw DecodeError(DecodeErrc::kMalformed, "run lengths of frame " + std::to_string(f) + " sum to " +
                                                    std::to_string(labels.size()) + ", expected " +
                                                    std::to_string(plane));
    }
    seq.frames.emplace_back(h, w, std::move(labels), k);
  }
  const std::size_t payload_end = 4 + r.position();
  const std::uint32_t stored = r.u32();
  if (r.remaining() != 0) throw DecodeError(DecodeErrc::kMalformed, "trailing bytes after CRC footer");
  const std::uint32_t actual = crc32(bytes.subspan(4, payload_end - 4));
  if (stored != actual) throw DecodeError(DecodeErrc::kCrcMismatch, "stored CRC does not match payload");
  return seq;
}

void write_gps_file(const GaitParsingSequence& sequence, const std::filesystem::path& path) {
  const auto bytes = encode_gps(sequence);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

GaitParsingSequence read_gps_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_gps(bytes);
}

}  // namespace pgait
