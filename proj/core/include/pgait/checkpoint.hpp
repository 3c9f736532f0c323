#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pgait {

/// One named array in a checkpoint. Only f32 payloads (dtype code 0) are
/// written.
struct CheckpointRecord {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  bool operator==(const CheckpointRecord&) const = default;
};

/// Contents of a PGCK file: a UTF-8 JSON blob followed by named records.
struct CheckpointData {
  std::string config_json;
  std::vector<CheckpointRecord> records;

  const CheckpointRecord* find(const std::string& name) const;
  bool operator==(const CheckpointData&) const = default;
};

/// Layout: "PGCK", u8 version=1, u32 JSON length + bytes, then repeated
/// records until end of stream: u16 name length + UTF-8 name, u8 dtype,
/// u8 ndim, ndim x u32 dims, raw little-endian values.
std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data);
/// Throws DecodeError on malformed input.
CheckpointData decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const CheckpointData& data, const std::filesystem::path& path);
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace pgait
