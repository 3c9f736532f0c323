#include "pgait/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pgait/errors.hpp"
#include "pgait/parallel.hpp"

namespace pgait {

using nlohmann::json;

void TrainConfig::validate() const {
  if (batch_ids < 2) throw ConfigError("batch_ids must be >= 2 for triplet mining");
  if (samples_per_id < 2) throw ConfigError("samples_per_id must be >= 2 for triplet mining");
  if (frames_per_sample < 1) throw ConfigError("frames_per_sample must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (iterations_per_epoch < 0) throw ConfigError("iterations_per_epoch must be >= 0");
  if (!(base_lr > 0.0)) throw ConfigError("base_lr must be > 0");
  double prev = 0.0;
  for (double m : milestones) {
    if (!(m > prev) || !(m < 1.0)) throw ConfigError("milestones must be strictly increasing in (0, 1)");
    prev = m;
  }
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (triplet_margin < 0.0) throw ConfigError("triplet_margin must be >= 0");
  if (alpha < 0.0 || beta < 0.0 || (alpha == 0.0 && beta == 0.0)) {
    throw ConfigError("loss weights must be >= 0 and not both zero");
  }
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

std::string to_json(const TrainConfig& c) {
  json j = {{"batch_ids", c.batch_ids},
            {"samples_per_id", c.samples_per_id},
            {"frames_per_sample", c.frames_per_sample},
            {"epochs", c.epochs},
            {"iterations_per_epoch", c.iterations_per_epoch},
            {"base_lr", c.base_lr},
            {"milestones", c.milestones},
            {"momentum", c.momentum},
            {"weight_decay", c.weight_decay},
            {"triplet_margin", c.triplet_margin},
            {"alpha", c.alpha},
            {"beta", c.beta},
            {"seed", c.seed},
            {"checkpoint_every", c.checkpoint_every}};
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  TrainConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    const json defaults = json::parse(to_json(c));
    for (const auto& [key, value] : j.items()) {
      if (!defaults.contains(key)) throw ConfigError("unknown train config field '" + key + "'");
    }
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("batch_ids", c.batch_ids);
    get("samples_per_id", c.samples_per_id);
    get("frames_per_sample", c.frames_per_sample);
    get("epochs", c.epochs);
    get("iterations_per_epoch", c.iterations_per_epoch);
    get("base_lr", c.base_lr);
    get("milestones", c.milestones);
    get("momentum", c.momentum);
    get("weight_decay", c.weight_decay);
    get("triplet_margin", c.triplet_margin);
    get("alpha", c.alpha);
    get("beta", c.beta);
    get("seed", c.seed);
    get("checkpoint_every", c.checkpoint_every);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

double lr_at(int epoch, const TrainConfig& config) {
  double lr = config.base_lr;
  for (double m : config.milestones) {
    if (epoch >= std::lround(m * static_cast<double>(config.epochs))) lr *= 0.1;
  }
  return lr;
}

TrainPool TrainPool::from_manifest(const DatasetManifest& manifest, unsigned threads) {
  const auto entries = manifest.train_entries();
  if (entries.empty()) throw InvalidArgument("train split is empty");
  std::vector<GaitParsingSequence> loaded(entries.size());
  parallel_for(entries.size(), threads, [&](std::size_t i) { loaded[i] = manifest.load(*entries[i]); });

  TrainPool pool;
  std::set<std::string> ids;
  for (const auto* e : entries) ids.insert(e->subject_id);
  pool.subjects.assign(ids.begin(), ids.end());
  pool.sequences.resize(pool.subjects.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto it = std::lower_bound(pool.subjects.begin(), pool.subjects.end(), entries[i]->subject_id);
    pool.sequences[static_cast<std::size_t>(it - pool.subjects.begin())].push_back(std::move(loaded[i]));
  }
  return pool;
}

std::size_t TrainPool::num_sequences() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

namespace {

int uniform_index(std::mt19937_64& rng, int n) {
  return std::uniform_int_distribution<int>(0, n - 1)(rng);
}

// First `k` entries of a partial Fisher-Yates shuffle of [0, n).
std::vector<int> choose_distinct(std::mt19937_64& rng, int n, int k) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + uniform_index(rng, n - i);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace

Batch pk_sample(const TrainPool& pool, int batch_ids, int samples_per_id, int frames_per_sample,
                std::mt19937_64& rng) {
  if (pool.subjects.empty()) throw InvalidArgument("pk_sample: empty train split");
  if (batch_ids < 1 || samples_per_id < 1 || frames_per_sample < 1) {
    throw InvalidArgument("pk_sample: P, K and T must be positive");
  }
  const int num_subjects = static_cast<int>(pool.subjects.size());
  if (num_subjects < batch_ids) {
    throw InvalidArgument("pk_sample: " + std::to_string(batch_ids) + " ids per batch but only " +
                          std::to_string(num_subjects) + " train subjects");
  }
  Batch b;
  b.batch = batch_ids * samples_per_id;
  b.frames = frames_per_sample;
  b.frame_ptrs.reserve(static_cast<std::size_t>(b.batch) * static_cast<std::size_t>(b.frames));
  for (int s : choose_distinct(rng, num_subjects, batch_ids)) {
    const auto& seqs = pool.sequences[static_cast<std::size_t>(s)];
    const int n = static_cast<int>(seqs.size());
    if (n == 0) throw InvalidArgument("pk_sample: subject '" + pool.subjects[static_cast<std::size_t>(s)] + "' has no sequences");
    std::vector<int> picks;
    if (n >= samples_per_id) {
      picks = choose_distinct(rng, n, samples_per_id);
    } else {
      for (int k = 0; k < samples_per_id; ++k) picks.push_back(uniform_index(rng, n));
    }
    for (int q : picks) {
      const auto& frames = seqs[static_cast<std::size_t>(q)].frames;
      const int len = static_cast<int>(frames.size());
      if (len == 0) throw InvalidArgument("pk_sample: empty sequence in train pool");
      const int start = len >= frames_per_sample ? uniform_index(rng, len - frames_per_sample + 1) : uniform_index(rng, len);
      for (int t = 0; t < frames_per_sample; ++t) {
        b.frame_ptrs.push_back(&frames[static_cast<std::size_t>((start + t) % len)]);
      }
      b.labels.push_back(s);
      b.sources.push_back({s, q, start});
    }
  }
  return b;
}

void Sgd::step(std::vector<NamedTensor>& params, double lr) {
  for (auto& p : params) {
    auto& t = p.tensor;
    if (!t.has_grad()) throw InvalidArgument("sgd_step: parameter '" + p.name + "' has no gradient");
    auto& v = velocity_[p.name];
    if (v.size() != static_cast<std::size_t>(t.numel())) v.assign(static_cast<std::size_t>(t.numel()), 0.0f);
    const auto g = t.grad();
    auto w = t.data_mut();
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = static_cast<float>(momentum_ * v[i] + g[i] + weight_decay_ * w[i]);
      w[i] = static_cast<float>(w[i] - lr * v[i]);
    }
  }
}

namespace {

ModelConfig with_ids(ModelConfig m, const TrainPool& pool) {
  m.num_ids = static_cast<int>(pool.subjects.size());
  return m;
}

}  // namespace

Trainer::Trainer(const TrainConfig& train, ModelConfig model, const TrainPool& pool)
    : config_(train),
      model_(with_ids(std::move(model), pool), train.seed),
      pool_(&pool),
      optimizer_(train.momentum, train.weight_decay),
      rng_(train.seed ^ 0x9e3779b97f4a7c15ULL) {
  config_.validate();
  if (pool.num_sequences() == 0) throw InvalidArgument("train split is empty");
  const auto per_batch = static_cast<std::size_t>(config_.batch_ids) * static_cast<std::size_t>(config_.samples_per_id);
  iters_per_epoch_ = config_.iterations_per_epoch > 0
                         ? config_.iterations_per_epoch
                         : static_cast<int>((pool.num_sequences() + per_batch - 1) / per_batch);
}

double Trainer::step() {
  const auto batch = pk_sample(*pool_, config_.batch_ids, config_.samples_per_id, config_.frames_per_sample, rng_);
  model_.set_training(true);
  model_.zero_grad();
  const auto weights = config_.loss_weights();
  auto out = model_.forward(batch.frame_ptrs, batch.frame_ptrs, batch.batch, batch.frames, weights.beta != 0.0);
  auto loss = combined_loss<float>(out.embeddings, out.logits, batch.labels, weights);
  const double value = loss.item();
  if (!std::isfinite(value)) {
    throw NumericError("non-finite loss at epoch " + std::to_string(epoch_) + ", iteration " +
                       std::to_string(iteration_) + " (global step " + std::to_string(global_step_) + ")");
  }
  loss.backward();
  optimizer_.step(model_.parameters(), lr_at(epoch_, config_));
  ++iteration_;
  ++global_step_;
  epoch_loss_sum_ += value;
  return value;
}

EpochRecord Trainer::run_epoch() {
  while (iteration_ < iters_per_epoch_) step();
  EpochRecord r{epoch_, epoch_loss_sum_ / static_cast<double>(iters_per_epoch_), lr_at(epoch_, config_)};
  history_.push_back(r);
  ++epoch_;
  iteration_ = 0;
  epoch_loss_sum_ = 0.0;
  return r;
}

CheckpointData Trainer::checkpoint() const {
  CheckpointData data = model_.state();
  std::ostringstream rng_state;
  rng_state << rng_;
  json history = json::array();
  for (const auto& h : history_) history.push_back({{"epoch", h.epoch}, {"mean_loss", h.mean_loss}, {"lr", h.lr}});
  json blob = json::parse(data.config_json);
  blob["train"] = json::parse(to_json(config_));
  blob["state"] = {{"epoch", epoch_},
                   {"iteration", iteration_},
                   {"global_step", global_step_},
                   {"epoch_loss_sum", epoch_loss_sum_},
                   {"rng", rng_state.str()},
                   {"history", history}};
  data.config_json = blob.dump();
  for (const auto& [name, v] : optimizer_.velocity()) {
    CheckpointRecord r;
    r.name = "optim.momentum." + name;
    r.dims = {static_cast<std::uint32_t>(v.size())};
    r.values = v;
    data.records.push_back(std::move(r));
  }
  return data;
}

Trainer Trainer::resume(const CheckpointData& data, const TrainPool& pool) {
  json blob;
  try {
    blob = json::parse(data.config_json);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint config blob: ") + e.what());
  }
  if (!blob.contains("train") || !blob.contains("state")) {
    throw ConfigError("checkpoint has no training state to resume from");
  }
  const auto model_cfg = model_config_from_json(blob.at("model").dump());
  Trainer t(train_config_from_json(blob.at("train").dump()), model_cfg, pool);
  if (t.model_.config() != model_cfg) throw ConfigError("checkpoint was trained on a different set of subjects");
  t.model_.load_state(data);
  try {
    const auto& st = blob.at("state");
    t.epoch_ = st.at("epoch").get<int>();
    t.iteration_ = st.at("iteration").get<int>();
    t.global_step_ = st.at("global_step").get<std::int64_t>();
    t.epoch_loss_sum_ = st.at("epoch_loss_sum").get<double>();
    std::istringstream is(st.at("rng").get<std::string>());
    is >> t.rng_;
    if (!is) throw ConfigError("checkpoint RNG state is unreadable");
    for (const auto& h : st.at("history")) {
      t.history_.push_back({h.at("epoch").get<int>(), h.at("mean_loss").get<double>(), h.at("lr").get<double>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint state: ") + e.what());
  }
  const std::string prefix = "optim.momentum.";
  for (const auto& r : data.records) {
    if (r.name.rfind(prefix, 0) == 0) t.optimizer_.velocity()[r.name.substr(prefix.size())] = r.values;
  }
  return t;
}

std::string history_to_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,mean_loss,lr\n";
  for (const auto& h : history) os << h.epoch << ',' << h.mean_loss << ',' << h.lr << '\n';
  return os.str();
}

TrainResult train_run(const TrainConfig& train, const ModelConfig& model, const DatasetManifest& manifest,
                      const TrainRunOptions& options) {
  const auto pool = TrainPool::from_manifest(manifest, options.threads);
  return train_run(train, model, pool, options);
}

TrainResult train_run(const TrainConfig& train, const ModelConfig& model, const TrainPool& pool,
                      const TrainRunOptions& options) {
  Trainer t(train, model, pool);
  const bool write = !options.out_dir.empty();
  if (write) std::filesystem::create_directories(options.out_dir);
  while (t.epoch() < train.epochs) {
    const auto rec = t.run_epoch();
    if (options.on_epoch) options.on_epoch(rec);
    if (write && train.checkpoint_every > 0 && t.epoch() % train.checkpoint_every == 0 && t.epoch() < train.epochs) {
      write_checkpoint(t.checkpoint(), options.out_dir / ("checkpoint_epoch" + std::to_string(t.epoch()) + ".pgck"));
    }
  }
  auto ckpt = t.checkpoint();
  if (write) {
    write_checkpoint(ckpt, options.out_dir / "final.pgck");
    std::ofstream os(options.out_dir / "loss_history.csv", std::ios::binary);
    if (!os) throw IoError("cannot write " + (options.out_dir / "loss_history.csv").string());
    os << history_to_csv(t.history());
  }
  t.model().set_training(false);
  return {std::move(t.model()), t.history(), std::move(ckpt)};
}

}  // namespace pgait
