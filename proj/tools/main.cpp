// pgait: command-line front end. Numeric settings come from JSON config
// files; flags carry only paths, seeds, thread counts and the metric.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pgait/ablate.hpp"
#include "pgait/alloc.hpp"
#include "pgait/checkpoint.hpp"
#include "pgait/dataset.hpp"
#include "pgait/errors.hpp"
#include "pgait/evaluate.hpp"
#include "pgait/gps.hpp"
#include "pgait/gradcheck.hpp"
#include "pgait/parallel.hpp"
#include "pgait/synth.hpp"
#include "pgait/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Bad or missing configuration; reported with the usage exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string checkpoint;
  std::string metric;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw pgait::IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw pgait::IoError("write failed for '" + path.string() + "'");
}

json load_config(const Options& o, bool required) {
  if (o.config.empty()) {
    if (required) throw UsageError("--config is required for this subcommand");
    return json::object();
  }
  json j;
  try {
    j = json::parse(read_text(o.config));
  } catch (const json::parse_error& e) {
    throw UsageError("config '" + o.config + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError("config '" + o.config + "' must be a JSON object");
  return j;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw UsageError("unknown config field '" + key + "'");
    }
  }
}

fs::path dataset_path(const json& j) {
  if (!j.contains("dataset") || !j["dataset"].is_string()) throw UsageError("config needs a \"dataset\" path");
  return fs::absolute(j["dataset"].get<std::string>()).lexically_normal();
}

fs::path prepare_out(const Options& o) {
  if (o.out.empty()) throw UsageError("--out is required");
  const fs::path out = fs::absolute(o.out).lexically_normal();
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw pgait::IoError("cannot create '" + out.string() + "': " + ec.message());
  return out;
}

void snapshot(const fs::path& out, const json& effective) {
  write_text(out / "effective_config.json", effective.dump(2) + "\n");
}

pgait::DistanceMetric metric_or(const Options& o, const json& j) {
  try {
    if (!o.metric.empty()) return pgait::distance_metric_from_string(o.metric);
    if (j.contains("metric")) return pgait::distance_metric_from_string(j["metric"].get<std::string>());
  } catch (const pgait::Error& e) {
    throw UsageError(e.what());
  }
  return pgait::DistanceMetric::kEuclidean;
}

void log(const std::string& line) { std::cerr << line << std::endl; }

// Subcommands ------------------------------------------------------------------

int cmd_synth(const Options& o) {
  const json j = load_config(o, true);
  pgait::SynthConfig config;
  try {
    config = pgait::synth_config_from_json(j.dump());
    if (o.seed) config.seed = *o.seed;
    config.validate();
  } catch (const pgait::ConfigError& e) {
    throw UsageError(e.what());
  }
  const fs::path out = prepare_out(o);
  snapshot(out, json::parse(pgait::to_json(config)));
  const auto manifest = pgait::generate_dataset(config, out, o.threads);
  log("wrote " + std::to_string(manifest.entries.size()) + " sequences to " + out.string());
  return 0;
}

int cmd_stats(const Options& o) {
  const json j = load_config(o, true);
  check_keys(j, {"dataset"});
  const fs::path data = dataset_path(j);
  const fs::path out = prepare_out(o);
  snapshot(out, {{"dataset", data.string()}});
  const auto manifest = pgait::load_dataset(data);
  const auto stats = pgait::dataset_stats(manifest, o.threads);
  const std::string text = pgait::to_json(stats);
  write_text(out / "stats.json", text);
  std::cout << text;
  return 0;
}

struct FrameEntropy {
  double parsing = 0.0;
  double silhouette = 0.0;
};

json summarize(const std::vector<double>& v) {
  if (v.empty()) return {{"count", 0}};
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {{"count", v.size()},
          {"mean", mean},
          {"std", std::sqrt(var / static_cast<double>(v.size()))},
          {"min", *std::min_element(v.begin(), v.end())},
          {"max", *std::max_element(v.begin(), v.end())}};
}

int cmd_entropy(const Options& o) {
  const json j = load_config(o, true);
  check_keys(j, {"dataset"});
  const fs::path data = dataset_path(j);
  const fs::path out = prepare_out(o);
  snapshot(out, {{"dataset", data.string()}});
  const auto manifest = pgait::load_dataset(data);

  const std::size_t n = manifest.entries.size();
  std::vector<std::vector<FrameEntropy>> per_seq(n);
  std::vector<pgait::LabelHistogram> parsing_hist(n), silhouette_hist(n);
  pgait::parallel_for(n, o.threads, [&](std::size_t i) {
    const auto seq = manifest.load(manifest.entries[i]);
    parsing_hist[i] = pgait::label_histogram(seq);
    silhouette_hist[i] = pgait::label_histogram(pgait::binarize(seq));
    for (const auto& f : seq.frames) {
      per_seq[i].push_back({pgait::entropy_bits(pgait::label_histogram(f)),
                            pgait::entropy_bits(pgait::label_histogram(pgait::binarize(f)))});
    }
  });

  pgait::LabelHistogram all_parsing, all_silhouette;
  std::vector<double> frame_parsing, frame_silhouette;
  std::ostringstream csv;
  csv.precision(17);
  csv << "sequence_id,frame,parsing_bits,silhouette_bits\n";
  for (std::size_t i = 0; i < n; ++i) {
    all_parsing += parsing_hist[i];
    all_silhouette += silhouette_hist[i];
    for (std::size_t f = 0; f < per_seq[i].size(); ++f) {
      frame_parsing.push_back(per_seq[i][f].parsing);
      frame_silhouette.push_back(per_seq[i][f].silhouette);
      csv << manifest.entries[i].sequence_id << ',' << f << ',' << per_seq[i][f].parsing << ','
          << per_seq[i][f].silhouette << '\n';
    }
  }
  json report = {{"num_sequences", n}};
  if (n > 0) {
    report["dataset_bits"] = {{"parsing", pgait::entropy_bits(all_parsing)},
                              {"silhouette", pgait::entropy_bits(all_silhouette)}};
  }
  report["per_frame"] = {{"parsing", summarize(frame_parsing)}, {"silhouette", summarize(frame_silhouette)}};
  write_text(out / "entropy.json", report.dump(2) + "\n");
  write_text(out / "entropy_frames.csv", csv.str());
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_render(const Options& o) {
  const json j = load_config(o, true);
  check_keys(j, {"dataset", "sequence", "input", "frames"});
  json effective = json::object();
  pgait::GaitParsingSequence seq;
  std::string stem;
  if (j.contains("input")) {
    if (j.contains("dataset") || j.contains("sequence")) throw UsageError("give either \"input\" or \"dataset\" + \"sequence\"");
    const fs::path input = fs::absolute(j["input"].get<std::string>()).lexically_normal();
    effective["input"] = input.string();
    seq = pgait::read_gps_file(input);
    stem = input.stem().string();
  } else {
    if (!j.contains("sequence")) throw UsageError("render config needs \"sequence\" (with \"dataset\") or \"input\"");
    const fs::path data = dataset_path(j);
    effective["dataset"] = data.string();
    effective["sequence"] = j["sequence"];
    const auto manifest = pgait::load_dataset(data);
    seq = manifest.load(manifest.find(j["sequence"].get<std::string>()));
    stem = seq.sequence_id;
  }
  std::vector<int> frames;
  if (j.contains("frames")) {
    frames = j["frames"].get<std::vector<int>>();
  } else {
    for (std::size_t i = 0; i < seq.frames.size(); ++i) frames.push_back(static_cast<int>(i));
  }
  effective["frames"] = frames;
  const fs::path out = prepare_out(o);
  snapshot(out, effective);
  const auto palette = pgait::default_palette();
  for (int f : frames) {
    if (f < 0 || static_cast<std::size_t>(f) >= seq.frames.size()) {
      throw pgait::InvalidArgument("frame " + std::to_string(f) + " out of range for " + stem);
    }
    char name[32];
    std::snprintf(name, sizeof name, "_f%03d.ppm", f);
    pgait::render(seq.frames[static_cast<std::size_t>(f)], palette, out / (stem + name));
  }
  log("rendered " + std::to_string(frames.size()) + " frames to " + out.string());
  return 0;
}

int cmd_train(const Options& o) {
  const json j = load_config(o, true);
  check_keys(j, {"dataset", "model", "train"});
  const fs::path data = dataset_path(j);
  pgait::ModelConfig model;
  pgait::TrainConfig train;
  try {
    if (j.contains("model")) model = pgait::model_config_from_json(j["model"].dump());
    if (j.contains("train")) train = pgait::train_config_from_json(j["train"].dump());
    if (o.seed) train.seed = *o.seed;
    train.validate();
  } catch (const pgait::ConfigError& e) {
    throw UsageError(e.what());
  }
  const fs::path out = prepare_out(o);
  snapshot(out, {{"dataset", data.string()},
                 {"model", json::parse(pgait::to_json(model))},
                 {"train", json::parse(pgait::to_json(train))}});
  const auto manifest = pgait::load_dataset(data);
  pgait::TrainRunOptions opts;
  opts.out_dir = out;
  opts.threads = o.threads;
  opts.on_epoch = [](const pgait::EpochRecord& r) {
    std::ostringstream s;
    s << "epoch " << r.epoch << " loss " << r.mean_loss << " lr " << r.lr;
    log(s.str());
  };
  pgait::train_run(train, model, manifest, opts);
  log("wrote " + (out / "final.pgck").string());
  return 0;
}

int cmd_eval(const Options& o) {
  if (o.checkpoint.empty()) throw UsageError("eval requires --checkpoint");
  const json j = load_config(o, true);
  check_keys(j, {"dataset", "metric", "mode"});
  const fs::path data = dataset_path(j);
  pgait::EvalOptions eval;
  eval.metric = metric_or(o, j);
  eval.threads = o.threads;
  const std::string mode = j.value("mode", std::string("per_part"));
  if (mode == "per_part") {
    eval.mode = pgait::DistanceMode::kPerPart;
  } else if (mode == "concatenated") {
    eval.mode = pgait::DistanceMode::kConcatenated;
  } else {
    throw UsageError("mode must be \"per_part\" or \"concatenated\"");
  }
  const fs::path ckpt = fs::absolute(o.checkpoint).lexically_normal();
  const fs::path out = prepare_out(o);
  snapshot(out, {{"dataset", data.string()},
                 {"checkpoint", ckpt.string()},
                 {"metric", pgait::to_string(eval.metric)},
                 {"mode", mode}});
  const auto model = pgait::ParsingGaitModel::from_checkpoint(pgait::read_checkpoint(ckpt));
  const auto manifest = pgait::load_dataset(data);
  const auto report = pgait::evaluate(model, manifest, eval);
  const std::string text = pgait::to_json(report);
  write_text(out / "metrics.json", text);
  std::cout << text;
  return 0;
}

int cmd_ablate(const Options& o) {
  json j = load_config(o, true);
  const fs::path data = dataset_path(j);
  j.erase("dataset");
  pgait::AblationConfig config;
  try {
    if (!o.checkpoint.empty()) {
      // The checkpoint's architecture becomes the shared base model.
      if (j.contains("model")) throw UsageError("give the base model either in the config or via --checkpoint");
      const auto data_ck = pgait::read_checkpoint(fs::absolute(o.checkpoint));
      j["model"] = json::parse(data_ck.config_json).at("model");
    }
    config = pgait::ablation_config_from_json(j.dump());
    if (o.seed) config.train.seed = *o.seed;
    config.metric = metric_or(o, j);
    config.train.validate();
    config.model.validate();
  } catch (const pgait::ConfigError& e) {
    throw UsageError(e.what());
  }
  const fs::path out = prepare_out(o);
  json effective = json::parse(pgait::to_json(config));
  effective["dataset"] = data.string();
  snapshot(out, effective);
  const auto manifest = pgait::load_dataset(data);
  const auto report = pgait::ablate(manifest, config, o.threads, log);
  write_text(out / "ablation.csv", pgait::ablation_csv(report.graph_rows));
  write_text(out / "gamma_sweep.csv", pgait::ablation_csv(report.gamma_rows));
  const std::string text = pgait::to_json(report);
  write_text(out / "ablation.json", text);
  std::cout << text;
  return 0;
}

int cmd_gradcheck(const Options& o) {
  const json j = load_config(o, false);
  check_keys(j, {"seed", "tolerance"});
  std::uint64_t seed = j.value("seed", std::uint64_t{0});
  if (o.seed) seed = *o.seed;
  const double tol = j.value("tolerance", 1e-4);
  const fs::path out = prepare_out(o);
  snapshot(out, {{"seed", seed}, {"tolerance", tol}});
  const auto cases = pgait::run_gradcheck_suite(seed, tol);
  json rows = json::array();
  int failed = 0;
  for (const auto& c : cases) {
    if (!c.result.passed) ++failed;
    rows.push_back({{"name", c.name},
                    {"shape", c.shape},
                    {"passed", c.result.passed},
                    {"max_rel_error", c.result.max_rel_error}});
    std::cout << (c.result.passed ? "ok   " : "FAIL ") << c.name << " " << c.shape << " max_rel_error "
              << c.result.max_rel_error << "\n";
  }
  const json report = {{"seed", seed}, {"tolerance", tol}, {"cases", rows}, {"failed", failed}};
  write_text(out / "gradcheck.json", report.dump(2) + "\n");
  std::cout << cases.size() - static_cast<std::size_t>(failed) << "/" << cases.size() << " passed\n";
  if (failed > 0) {
    std::cerr << "error: " << failed << " gradient checks failed\n";
    return kExitRuntime;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  pgait::tune_allocator();
  CLI::App app{"ParsingGait toolkit: synthetic GPS data, training and retrieval evaluation"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool seed, bool checkpoint, bool metric) {
    sub->add_option("--config", o.config, "JSON config file");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--threads", o.threads, "Worker threads (0: all cores)");
    if (seed) sub->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { o.seed = s; }, "Seed override");
    if (checkpoint) sub->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
    if (metric) {
      sub->add_option("--metric", o.metric, "Distance metric")->check(CLI::IsMember({"euclidean", "cosine"}));
    }
  };

  struct Entry {
    CLI::App* app;
    int (*run)(const Options&);
  };
  std::vector<Entry> commands{
      {app.add_subcommand("synth", "Generate a synthetic GPS dataset"), cmd_synth},
      {app.add_subcommand("stats", "Part statistics of a dataset"), cmd_stats},
      {app.add_subcommand("entropy", "Pixel entropy of parsing vs silhouettes"), cmd_entropy},
      {app.add_subcommand("render", "Render frames as PPM images"), cmd_render},
      {app.add_subcommand("train", "Train a model"), cmd_train},
      {app.add_subcommand("eval", "Evaluate a checkpoint on the test split"), cmd_eval},
      {app.add_subcommand("ablate", "Graph, GCN, gamma and input ablations"), cmd_ablate},
      {app.add_subcommand("gradcheck", "Finite-difference gradient suite"), cmd_gradcheck},
  };
  add_common(commands[0].app, true, false, false);
  add_common(commands[1].app, false, false, false);
  add_common(commands[2].app, false, false, false);
  add_common(commands[3].app, false, false, false);
  add_common(commands[4].app, true, false, false);
  add_common(commands[5].app, false, true, true);
  add_common(commands[6].app, true, true, true);
  add_common(commands[7].app, true, false, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    for (const auto& c : commands) {
      if (c.app->parsed()) return c.run(o);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
