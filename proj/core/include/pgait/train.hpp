#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "pgait/checkpoint.hpp"
#include "pgait/dataset.hpp"
#include "pgait/losses.hpp"
#include "pgait/model.hpp"

namespace pgait {

struct TrainConfig {
  int batch_ids = 32;         // P_b
  int samples_per_id = 2;     // K_b
  int frames_per_sample = 30; // T_b
  int epochs = 40;
  /// Iterations per epoch; 0 means ceil(train sequences / (P_b * K_b)).
  int iterations_per_epoch = 0;
  double base_lr = 0.1;
  /// Fractions of the total epoch count, strictly increasing in (0, 1).
  std::vector<double> milestones{0.3375, 0.675, 0.8375};
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double triplet_margin = 0.2;
  double alpha = 1.0;
  double beta = 1.0;
  std::uint64_t seed = 0;
  /// Write a checkpoint every this many epochs (0: final checkpoint only).
  int checkpoint_every = 0;

  void validate() const;
  LossWeights loss_weights() const { return {alpha, beta, triplet_margin}; }
  bool operator==(const TrainConfig&) const = default;
};

std::string to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

/// base_lr * 0.1^(number of milestones already passed). A milestone m is
/// passed at epoch e when e >= round(m * total_epochs).
double lr_at(int epoch, const TrainConfig& config);

/// Training sequences grouped by subject, held in memory. Subject order (and
/// so the class index used by the identity loss) is sorted by subject id.
struct TrainPool {
  std::vector<std::string> subjects;
  std::vector<std::vector<GaitParsingSequence>> sequences;  // per subject

  static TrainPool from_manifest(const DatasetManifest& manifest, unsigned threads = 0);
  std::size_t num_sequences() const;
};

struct Batch {
  int batch = 0;   // P_b * K_b
  int frames = 0;  // T_b
  /// batch * frames frame pointers into the pool, sample-major.
  std::vector<const ParsingFrame*> frame_ptrs;
  std::vector<std::int64_t> labels;
  /// (subject index, sequence index, window start) per sample.
  struct Source {
    int subject = 0;
    int sequence = 0;
    int start = 0;
    bool operator==(const Source&) const = default;
  };
  std::vector<Source> sources;
};

/// Picks P_b distinct subjects, K_b sequences each (with replacement only if
/// a subject has fewer than K_b), and a random contiguous T_b window per
/// sequence; windows longer than the sequence wrap around.
Batch pk_sample(const TrainPool& pool, int batch_ids, int samples_per_id, int frames_per_sample,
                std::mt19937_64& rng);

/// SGD with momentum and L2 weight decay:
/// v <- mu v + g + wd p, p <- p - lr v.
class Sgd {
 public:
  Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

  /// Throws InvalidArgument if a parameter has no gradient.
  void step(std::vector<NamedTensor>& params, double lr);

  std::map<std::string, std::vector<float>>& velocity() { return velocity_; }
  const std::map<std::string, std::vector<float>>& velocity() const { return velocity_; }

 private:
  double momentum_;
  double weight_decay_;
  std::map<std::string, std::vector<float>> velocity_;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

/// Stateful training loop: owns the model, optimizer, sampler RNG and loss
/// history. Checkpoints capture all of it, so a resumed trainer continues
/// bit-identically.
class Trainer {
 public:
  Trainer(const TrainConfig& train, ModelConfig model, const TrainPool& pool);

  /// One optimisation step on a freshly sampled batch; returns the loss.
  /// Throws NumericError naming the step if the loss is not finite.
  double step();
  /// Runs one full epoch and appends its record to the history.
  EpochRecord run_epoch();

  int epoch() const noexcept { return epoch_; }
  int iterations_per_epoch() const noexcept { return iters_per_epoch_; }
  const std::vector<EpochRecord>& history() const noexcept { return history_; }
  ParsingGaitModel& model() noexcept { return model_; }
  const ParsingGaitModel& model() const noexcept { return model_; }
  const TrainConfig& config() const noexcept { return config_; }

  CheckpointData checkpoint() const;
  static Trainer resume(const CheckpointData& data, const TrainPool& pool);

 private:
  TrainConfig config_;
  ParsingGaitModel model_;
  const TrainPool* pool_;
  Sgd optimizer_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
  int iteration_ = 0;  // within the current epoch
  std::int64_t global_step_ = 0;
  int iters_per_epoch_ = 1;
  double epoch_loss_sum_ = 0.0;
  std::vector<EpochRecord> history_;
};

std::string history_to_csv(const std::vector<EpochRecord>& history);

struct TrainResult {
  ParsingGaitModel model;
  std::vector<EpochRecord> history;
  CheckpointData checkpoint;
};

struct TrainRunOptions {
  /// When non-empty: loss_history.csv, periodic checkpoint_epochN.pgck and
  /// final.pgck are written here.
  std::filesystem::path out_dir;
  unsigned threads = 0;
  /// Called after every epoch.
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Full training run; `model` num_ids is set to the number of train subjects.
TrainResult train_run(const TrainConfig& train, const ModelConfig& model, const DatasetManifest& manifest,
                      const TrainRunOptions& options = {});
TrainResult train_run(const TrainConfig& train, const ModelConfig& model, const TrainPool& pool,
                      const TrainRunOptions& options = {});

}  // namespace pgait
