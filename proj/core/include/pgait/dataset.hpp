#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pgait/gps.hpp"

namespace pgait {

struct ManifestEntry {
  std::string sequence_id;
  std::string subject_id;
  std::string camera_id;
  std::filesystem::path path;  // relative paths resolve against DatasetManifest::root
  std::uint32_t num_frames = 0;
};

struct DatasetSplit {
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
  std::vector<std::string> query_sequences;
};

/// Index of a GPS dataset: one entry per sequence plus the subject split.
/// On disk this is `manifest.jsonl` (one JSON object per line) and
/// `split.json` in the dataset directory.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  DatasetSplit split;
  std::filesystem::path root;

  /// Throws InvalidArgument on duplicate sequence ids, on a query sequence
  /// that is unknown or not from a test subject, or on a subject listed in
  /// both halves of the split.
  void validate() const;

  const ManifestEntry& find(const std::string& sequence_id) const;
  std::filesystem::path resolve(const ManifestEntry& entry) const;

  std::vector<const ManifestEntry*> train_entries() const;
  std::vector<const ManifestEntry*> query_entries() const;
  /// Test-subject sequences that are not queries.
  std::vector<const ManifestEntry*> gallery_entries() const;

  /// Decodes one sequence and fills its identity fields. Errors name the
  /// sequence.
  GaitParsingSequence load(const ManifestEntry& entry) const;
};

inline constexpr const char* kManifestFile = "manifest.jsonl";
inline constexpr const char* kSplitFile = "split.json";

DatasetManifest load_dataset(const std::filesystem::path& dir);
void save_dataset_index(const DatasetManifest& manifest, const std::filesystem::path& dir);

std::string manifest_to_jsonl(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> manifest_from_jsonl(const std::string& text);
std::string split_to_json(const DatasetSplit& split);
DatasetSplit split_from_json(const std::string& text);

/// Per-dataset part statistics, indexed by label code (index 0 unused for
/// the per-part arrays).
struct DatasetStats {
  std::uint64_t num_sequences = 0;
  std::uint64_t total_frames = 0;
  /// Number of frames in which each part appears at least once.
  std::array<std::uint64_t, kNumLabels> part_frame_counts{};
  /// distinct_part_histogram[n] = frames containing exactly n distinct parts.
  std::array<std::uint64_t, kNumParts + 1> distinct_part_histogram{};
  /// Mean over sequences of the percentage of a sequence's frames that
  /// contain the part.
  std::array<double, kNumLabels> mean_part_proportion{};
};

/// Accumulator for a single sequence; exposed so the reduction can be tested.
DatasetStats sequence_stats(const GaitParsingSequence& sequence);

DatasetStats dataset_stats(const DatasetManifest& manifest, unsigned threads = 1);
std::string to_json(const DatasetStats& stats);

}  // namespace pgait
