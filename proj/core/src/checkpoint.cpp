#include "pgait/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "pgait/errors.hpp"

namespace pgait {

namespace {

constexpr std::uint8_t kMagic[4] = {'P', 'G', 'C', 'K'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct Cursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (bytes.size() - pos < n) throw DecodeError(DecodeErrc::kTruncated, "checkpoint ends early at " + std::to_string(pos));
  }
  std::uint8_t u8() {
    need(1);
    return bytes[pos++];
  }
  std::uint16_t u16() {
    need(2);
    auto v = static_cast<std::uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 4;
    return v;
  }
};

}  // namespace

const CheckpointRecord* CheckpointData::find(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kVersion);
  if (data.config_json.size() > std::numeric_limits<std::uint32_t>::max()) throw CodecError("config blob too large");
  put_u32(out, static_cast<std::uint32_t>(data.config_json.size()));
  out.insert(out.end(), data.config_json.begin(), data.config_json.end());
  for (const auto& r : data.records) {
    if (r.name.size() > 0xFFFF) throw CodecError("record name too long: " + r.name);
    if (r.dims.size() > 0xFF) throw CodecError("too many dims in record " + r.name);
    std::uint64_t count = 1;
    for (auto d : r.dims) count *= d;
    if (count != r.values.size()) throw CodecError("record " + r.name + " has inconsistent dims");
    put_u16(out, static_cast<std::uint16_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    out.push_back(kDtypeF32);
    out.push_back(static_cast<std::uint8_t>(r.dims.size()));
    for (auto d : r.dims) put_u32(out, d);
    const auto* raw = reinterpret_cast<const std::uint8_t*>(r.values.data());
    out.insert(out.end(), raw, raw + r.values.size() * sizeof(float));
  }
  return out;
}

CheckpointData decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DecodeError(DecodeErrc::kBadMagic, "expected 'PGCK'");
  }
  Cursor c{bytes, 4};
  const auto version = c.u8();
  if (version != kVersion) throw DecodeError(DecodeErrc::kUnsupportedVersion, "checkpoint version " + std::to_string(version));
  CheckpointData data;
  const auto json_len = c.u32();
  c.need(json_len);
  data.config_json.assign(reinterpret_cast<const char*>(bytes.data() + c.pos), json_len);
  c.pos += json_len;
  while (c.pos < bytes.size()) {
    CheckpointRecord r;
    const auto name_len = c.u16();
    c.need(name_len);
    r.name.assign(reinterpret_cast<const char*>(bytes.data() + c.pos), name_len);
    c.pos += name_len;
    const auto dtype = c.u8();
    if (dtype != kDtypeF32) throw DecodeError(DecodeErrc::kMalformed, "unsupported dtype in record " + r.name);
    const auto ndim = c.u8();
    std::uint64_t count = 1;
    for (int i = 0; i < ndim; ++i) {
      r.dims.push_back(c.u32());
      count *= r.dims.back();
    }
    if (count > (bytes.size() - c.pos) / sizeof(float)) {
      throw DecodeError(DecodeErrc::kTruncated, "record " + r.name + " payload truncated");
    }
    r.values.resize(static_cast<std::size_t>(count));
    std::memcpy(r.values.data(), bytes.data() + c.pos, r.values.size() * sizeof(float));
    c.pos += r.values.size() * sizeof(float);
    data.records.push_back(std::move(r));
  }
  return data;
}

void write_checkpoint(const CheckpointData& data, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(data);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace pgait
