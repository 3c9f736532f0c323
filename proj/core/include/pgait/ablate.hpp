#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pgait/dataset.hpp"
#include "pgait/evaluate.hpp"
#include "pgait/model.hpp"
#include "pgait/train.hpp"

namespace pgait {

struct AblationConfig {
  /// Shared model settings; graph, GCN and gamma are overridden per run.
  ModelConfig model;
  TrainConfig train;
  std::vector<double> fixed_gammas{0.0, 0.25, 0.5, 0.75, 1.0};
  /// Also train the binarised-input counterpart of the coarse + GCN model.
  bool include_binarized = true;
  /// Test sequences used by the gamma = 0.5 mask-swap check.
  int mask_check_sequences = 6;
  DistanceMetric metric = DistanceMetric::kEuclidean;
};

std::string to_json(const AblationConfig& config);
AblationConfig ablation_config_from_json(const std::string& text);

struct AblationRow {
  GraphKind graph = GraphKind::kCoarse;
  bool gcn = true;
  GammaMode gamma;
  bool binarized = false;
  MetricsReport metrics;
};

struct AblationReport {
  /// (fine, off), (fine, on), (coarse, off), (coarse, on); learnable gamma.
  std::vector<AblationRow> graph_rows;
  /// Coarse + GCN with each fixed gamma, then the learnable entry.
  std::vector<AblationRow> gamma_rows;
  std::optional<AblationRow> binarized;

  /// Every mask swap on the gamma = 0.5 model left the embedding unchanged.
  bool gamma_half_mask_independent = false;
  int mask_swaps_checked = 0;

  // Expected directions; informative only at toy scale.
  bool coarse_gcn_ge_coarse = false;
  bool gcn_on_ge_off_fine = false;
  bool gcn_on_ge_off_coarse = false;
  bool parsing_ge_binarized = false;
};

/// Trains and evaluates every configuration from the same seed.
AblationReport ablate(const DatasetManifest& manifest, const AblationConfig& config, unsigned threads = 0,
                      const std::function<void(const std::string&)>& progress = {});

/// CSV with header graph,gcn,gamma_mode,rank1,rank5,mAP.
std::string ablation_csv(const std::vector<AblationRow>& rows);
/// Full report including the reference numbers of the full model on the
/// real benchmark.
std::string to_json(const AblationReport& report);

/// True if embedding `sequence` with the masks of every sequence in
/// `mask_donors` (length-matched by wrapping) gives bitwise the same
/// embedding as with its own masks.
bool masks_do_not_matter(const ParsingGaitModel& model, const GaitParsingSequence& sequence,
                         const std::vector<GaitParsingSequence>& mask_donors);

}  // namespace pgait
