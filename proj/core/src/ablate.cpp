#include "pgait/ablate.hpp"

#include <sstream>

#include "json.hpp"
#include "pgait/errors.hpp"

namespace pgait {

using nlohmann::json;

namespace {

// Full-model figures on the real benchmark, kept for side-by-side reading.
constexpr double kReferenceRank1 = 76.20;
constexpr double kReferenceMap = 68.15;

json row_json(const AblationRow& r) {
  return {{"graph", to_string(r.graph)},
          {"gcn", r.gcn},
          {"gamma_mode", r.gamma.describe()},
          {"binarized", r.binarized},
          {"rank1", r.metrics.rank1},
          {"rank5", r.metrics.rank5},
          {"mAP", r.metrics.mAP},
          {"num_query", r.metrics.num_query},
          {"num_gallery", r.metrics.num_gallery},
          {"excluded_queries", r.metrics.excluded_queries}};
}

GaitParsingSequence wrap_to_length(const GaitParsingSequence& s, std::size_t n) {
  GaitParsingSequence out = s;
  out.frames.clear();
  for (std::size_t i = 0; i < n; ++i) out.frames.push_back(s.frames[i % s.frames.size()]);
  return out;
}

}  // namespace

std::string to_json(const AblationConfig& c) {
  json j = {{"model", json::parse(to_json(c.model))},
            {"train", json::parse(to_json(c.train))},
            {"fixed_gammas", c.fixed_gammas},
            {"include_binarized", c.include_binarized},
            {"mask_check_sequences", c.mask_check_sequences},
            {"metric", to_string(c.metric)}};
  return j.dump(2);
}

AblationConfig ablation_config_from_json(const std::string& text) {
  AblationConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("ablation config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key != "model" && key != "train" && key != "fixed_gammas" && key != "include_binarized" &&
          key != "mask_check_sequences" && key != "metric") {
        throw ConfigError("unknown ablation config field '" + key + "'");
      }
    }
    if (j.contains("model")) c.model = model_config_from_json(j.at("model").dump());
    if (j.contains("train")) c.train = train_config_from_json(j.at("train").dump());
    if (j.contains("fixed_gammas")) c.fixed_gammas = j.at("fixed_gammas").get<std::vector<double>>();
    if (j.contains("include_binarized")) c.include_binarized = j.at("include_binarized").get<bool>();
    if (j.contains("mask_check_sequences")) c.mask_check_sequences = j.at("mask_check_sequences").get<int>();
    if (j.contains("metric")) c.metric = distance_metric_from_string(j.at("metric").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("ablation config: ") + e.what());
  }
  return c;
}

bool masks_do_not_matter(const ParsingGaitModel& model, const GaitParsingSequence& sequence,
                         const std::vector<GaitParsingSequence>& mask_donors) {
  const auto reference = model.embed(sequence);
  for (const auto& donor : mask_donors) {
    if (donor.frames.empty()) continue;
    const auto swapped = model.embed_with_masks(sequence, wrap_to_length(donor, sequence.frames.size()));
    if (!(swapped == reference)) return false;
  }
  return true;
}

AblationReport ablate(const DatasetManifest& manifest, const AblationConfig& config, unsigned threads,
                      const std::function<void(const std::string&)>& progress) {
  config.train.validate();
  const auto pool = TrainPool::from_manifest(manifest, threads);
  EvalOptions eval;
  eval.metric = config.metric;
  eval.threads = threads;

  auto run = [&](ModelConfig m, const std::string& label, ParsingGaitModel* keep = nullptr) {
    if (progress) progress("training " + label);
    auto result = train_run(config.train, m, pool);
    AblationRow row;
    row.graph = m.part_graph;
    row.gcn = m.use_gcn;
    row.gamma = m.gamma;
    row.binarized = m.binarize_input;
    row.metrics = evaluate(result.model, manifest, eval);
    if (keep) *keep = std::move(result.model);
    if (progress) progress(label + ": rank1 " + std::to_string(row.metrics.rank1));
    return row;
  };

  AblationReport report;
  for (auto graph : {GraphKind::kFine, GraphKind::kCoarse}) {
    for (bool gcn : {false, true}) {
      ModelConfig m = config.model;
      m.part_graph = graph;
      m.use_gcn = gcn;
      m.binarize_input = false;
      m.gamma = GammaMode::Learnable(config.model.gamma.value);
      report.graph_rows.push_back(run(m, std::string(to_string(graph)) + (gcn ? "+gcn" : "")));
    }
  }

  std::optional<ParsingGaitModel> half_model;
  for (double g : config.fixed_gammas) {
    ModelConfig m = config.model;
    m.part_graph = GraphKind::kCoarse;
    m.use_gcn = true;
    m.binarize_input = false;
    m.gamma = GammaMode::Fixed(g);
    if (g == 0.5) {
      ParsingGaitModel kept(m, 0);
      report.gamma_rows.push_back(run(m, "gamma " + m.gamma.describe(), &kept));
      half_model.emplace(std::move(kept));
    } else {
      report.gamma_rows.push_back(run(m, "gamma " + m.gamma.describe()));
    }
  }
  report.gamma_rows.push_back(report.graph_rows[3]);

  if (config.include_binarized) {
    ModelConfig m = config.model;
    m.part_graph = GraphKind::kCoarse;
    m.use_gcn = true;
    m.binarize_input = true;
    m.gamma = GammaMode::Learnable(config.model.gamma.value);
    report.binarized = run(m, "binarized coarse+gcn");
  }

  if (half_model) {
    std::vector<GaitParsingSequence> test;
    const auto queries = manifest.query_entries();
    const auto gallery = manifest.gallery_entries();
    std::vector<const ManifestEntry*> entries(queries.begin(), queries.end());
    entries.insert(entries.end(), gallery.begin(), gallery.end());
    const auto n = std::min<std::size_t>(entries.size(), static_cast<std::size_t>(std::max(2, config.mask_check_sequences)));
    for (std::size_t i = 0; i < n; ++i) test.push_back(manifest.load(*entries[i]));
    // An all-background mask set is the most extreme donor.
    GaitParsingSequence empty = test.front();
    for (auto& f : empty.frames) f = ParsingFrame(f.height(), f.width());
    bool ok = true;
    int checks = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      std::vector<GaitParsingSequence> donors{empty};
      for (std::size_t j = 0; j < test.size(); ++j) {
        if (j != i) donors.push_back(test[j]);
      }
      ok = ok && masks_do_not_matter(*half_model, test[i], donors);
      checks += static_cast<int>(donors.size());
    }
    report.gamma_half_mask_independent = ok;
    report.mask_swaps_checked = checks;
  }

  const auto& r = report.graph_rows;
  report.coarse_gcn_ge_coarse = r[3].metrics.rank1 >= r[2].metrics.rank1;
  report.gcn_on_ge_off_fine = r[1].metrics.rank1 >= r[0].metrics.rank1;
  report.gcn_on_ge_off_coarse = r[3].metrics.rank1 >= r[2].metrics.rank1;
  if (report.binarized) report.parsing_ge_binarized = r[3].metrics.rank1 >= report.binarized->metrics.rank1;
  return report;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "graph,gcn,gamma_mode,rank1,rank5,mAP\n";
  for (const auto& r : rows) {
    os << to_string(r.graph) << ',' << (r.gcn ? "on" : "off") << ',' << r.gamma.describe() << ',' << r.metrics.rank1
       << ',' << r.metrics.rank5 << ',' << r.metrics.mAP << '\n';
  }
  return os.str();
}

std::string to_json(const AblationReport& report) {
  json graph = json::array(), gamma = json::array();
  for (const auto& r : report.graph_rows) graph.push_back(row_json(r));
  for (const auto& r : report.gamma_rows) gamma.push_back(row_json(r));
  json j = {{"reference", {{"model", "coarse+gcn"}, {"rank1", kReferenceRank1}, {"mAP", kReferenceMap}}},
            {"graph_rows", graph},
            {"gamma_rows", gamma},
            {"binarized", report.binarized ? row_json(*report.binarized) : json(nullptr)},
            {"checks",
             {{"gamma_half_mask_independent", report.gamma_half_mask_independent},
              {"mask_swaps_checked", report.mask_swaps_checked}}},
            {"directions",
             {{"coarse_gcn_ge_coarse", report.coarse_gcn_ge_coarse},
              {"gcn_on_ge_off_fine", report.gcn_on_ge_off_fine},
              {"gcn_on_ge_off_coarse", report.gcn_on_ge_off_coarse},
              {"parsing_ge_binarized", report.parsing_ge_binarized}}}};
  return j.dump(2) + "\n";
}

}  // namespace pgait
