#include "pgait/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "pgait/errors.hpp"
#include "pgait/parallel.hpp"

namespace pgait {

using nlohmann::json;

void DatasetManifest::validate() const {
  std::unordered_map<std::string, const ManifestEntry*> by_id;
  for (const auto& e : entries) {
    if (!by_id.emplace(e.sequence_id, &e).second) {
      throw InvalidArgument("duplicate sequence_id '" + e.sequence_id + "' in manifest");
    }
  }
  std::unordered_set<std::string> test(split.test_subjects.begin(), split.test_subjects.end());
  for (const auto& s : split.train_subjects) {
    if (test.count(s)) throw InvalidArgument("subject '" + s + "' is in both train and test splits");
  }
  for (const auto& q : split.query_sequences) {
    auto it = by_id.find(q);
    if (it == by_id.end()) throw InvalidArgument("query sequence '" + q + "' is not in the manifest");
    if (!test.count(it->second->subject_id)) {
      throw InvalidArgument("query sequence '" + q + "' does not belong to a test subject");
    }
  }
}

const ManifestEntry& DatasetManifest::find(const std::string& sequence_id) const {
  for (const auto& e : entries) {
    if (e.sequence_id == sequence_id) return e;
  }
  throw InvalidArgument("unknown sequence '" + sequence_id + "'");
}

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& entry) const {
  return entry.path.is_absolute() ? entry.path : root / entry.path;
}

std::vector<const ManifestEntry*> DatasetManifest::train_entries() const {
  std::unordered_set<std::string> train(split.train_subjects.begin(), split.train_subjects.end());
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (train.count(e.subject_id)) out.push_back(&e);
  }
  return out;
}

std::vector<const ManifestEntry*> DatasetManifest::query_entries() const {
  std::vector<const ManifestEntry*> out;
  for (const auto& q : split.query_sequences) out.push_back(&find(q));
  return out;
}

std::vector<const ManifestEntry*> DatasetManifest::gallery_entries() const {
  std::unordered_set<std::string> test(split.test_subjects.begin(), split.test_subjects.end());
  std::unordered_set<std::string> query(split.query_sequences.begin(), split.query_sequences.end());
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (test.count(e.subject_id) && !query.count(e.sequence_id)) out.push_back(&e);
  }
  return out;
}

GaitParsingSequence DatasetManifest::load(const ManifestEntry& entry) const {
  GaitParsingSequence seq;
  try {
    seq = read_gps_file(resolve(entry));
  } catch (const Error& e) {
    throw IoError("sequence '" + entry.sequence_id + "': " + e.what());
  }
  seq.sequence_id = entry.sequence_id;
  seq.subject_id = entry.subject_id;
  seq.camera_id = entry.camera_id;
  return seq;
}

std::string manifest_to_jsonl(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    json j = {{"sequence_id", e.sequence_id},
              {"subject_id", e.subject_id},
              {"camera_id", e.camera_id},
              {"path", e.path.generic_string()},
              {"num_frames", e.num_frames}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<ManifestEntry> manifest_from_jsonl(const std::string& text) {
  std::vector<ManifestEntry> entries;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ManifestEntry e;
      e.sequence_id = j.at("sequence_id").get<std::string>();
      e.subject_id = j.at("subject_id").get<std::string>();
      e.camera_id = j.at("camera_id").get<std::string>();
      e.path = j.at("path").get<std::string>();
      e.num_frames = j.at("num_frames").get<std::uint32_t>();
      entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw InvalidArgument("manifest line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return entries;
}

std::string split_to_json(const DatasetSplit& split) {
  json j = {{"train_subjects", split.train_subjects},
            {"test_subjects", split.test_subjects},
            {"query_sequences", split.query_sequences}};
  return j.dump(2) + "\n";
}

DatasetSplit split_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    DatasetSplit s;
    s.train_subjects = j.at("train_subjects").get<std::vector<std::string>>();
    s.test_subjects = j.at("test_subjects").get<std::vector<std::string>>();
    s.query_sequences = j.at("query_sequences").get<std::vector<std::string>>();
    return s;
  } catch (const json::exception& ex) {
    throw InvalidArgument(std::string("split file: ") + ex.what());
  }
}

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace

DatasetManifest load_dataset(const std::filesystem::path& dir) {
  DatasetManifest m;
  m.root = dir;
  m.entries = manifest_from_jsonl(read_text(dir / kManifestFile));
  m.split = split_from_json(read_text(dir / kSplitFile));
  m.validate();
  return m;
}

void save_dataset_index(const DatasetManifest& manifest, const std::filesystem::path& dir) {
  write_text(dir / kManifestFile, manifest_to_jsonl(manifest.entries));
  write_text(dir / kSplitFile, split_to_json(manifest.split));
}

DatasetStats sequence_stats(const GaitParsingSequence& sequence) {
  DatasetStats s;
  s.num_sequences = 1;
  s.total_frames = sequence.frames.size();
  std::array<std::uint64_t, kNumLabels> present_frames{};
  for (const auto& frame : sequence.frames) {
    std::array<bool, 256> seen{};
    for (auto v : frame.labels()) seen[v] = true;
    int distinct = 0;
    for (int k = 1; k < kNumLabels; ++k) {
      if (seen[static_cast<std::size_t>(k)]) {
        ++distinct;
        ++present_frames[static_cast<std::size_t>(k)];
      }
    }
    ++s.distinct_part_histogram[static_cast<std::size_t>(distinct)];
  }
  s.part_frame_counts = present_frames;
  for (int k = 1; k < kNumLabels; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    s.mean_part_proportion[ks] =
        s.total_frames ? 100.0 * static_cast<double>(present_frames[ks]) / static_cast<double>(s.total_frames) : 0.0;
  }
  return s;
}

DatasetStats dataset_stats(const DatasetManifest& manifest, unsigned threads) {
  std::vector<DatasetStats> per_sequence(manifest.entries.size());
  parallel_for(manifest.entries.size(), threads, [&](std::size_t i) {
    per_sequence[i] = sequence_stats(manifest.load(manifest.entries[i]));
  });
  // Ordered reduction keeps the floating-point sums independent of threads.
  DatasetStats total;
  std::array<double, kNumLabels> proportion_sum{};
  for (const auto& s : per_sequence) {
    total.num_sequences += s.num_sequences;
    total.total_frames += s.total_frames;
    for (std::size_t k = 0; k < total.part_frame_counts.size(); ++k) total.part_frame_counts[k] += s.part_frame_counts[k];
    for (std::size_t k = 0; k < total.distinct_part_histogram.size(); ++k) {
      total.distinct_part_histogram[k] += s.distinct_part_histogram[k];
    }
    for (std::size_t k = 0; k < proportion_sum.size(); ++k) proportion_sum[k] += s.mean_part_proportion[k];
  }
  if (total.num_sequences > 0) {
    for (std::size_t k = 0; k < proportion_sum.size(); ++k) {
      total.mean_part_proportion[k] = proportion_sum[k] / static_cast<double>(total.num_sequences);
    }
  }
  return total;
}

std::string to_json(const DatasetStats& stats) {
  json parts = json::object();
  for (int k = 1; k < kNumLabels; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    parts[part_name(k)] = {{"frame_count", stats.part_frame_counts[ks]},
                           {"mean_sequence_proportion", stats.mean_part_proportion[ks]}};
  }
  json j = {{"num_sequences", stats.num_sequences},
            {"total_frames", stats.total_frames},
            {"parts", parts},
            {"distinct_part_histogram", stats.distinct_part_histogram}};
  return j.dump(2) + "\n";
}

}  // namespace pgait
