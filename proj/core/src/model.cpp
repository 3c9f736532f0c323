#include "pgait/model.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pgait/errors.hpp"
#include "pgait/heads.hpp"
#include "pgait/ops.hpp"

namespace pgait {

using nlohmann::json;
using Tensor = ad::Tensor<float>;

namespace {

int halve_ceil(int v) { return (v + 1) / 2; }

const char* encoding_name(InputEncoding e) { return e == InputEncoding::kOneHot ? "one_hot" : "scalar"; }

InputEncoding encoding_from_string(const std::string& s) {
  if (s == "one_hot") return InputEncoding::kOneHot;
  if (s == "scalar") return InputEncoding::kScalar;
  throw ConfigError("unknown input_encoding '" + s + "' (expected one_hot or scalar)");
}

std::vector<float> kaiming_normal(std::mt19937_64& rng, std::size_t count, int fan_in) {
  std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
  std::vector<float> v(count);
  for (auto& x : v) x = dist(rng);
  return v;
}

std::vector<float> xavier_uniform(std::mt19937_64& rng, std::size_t count, int fan_in, int fan_out) {
  const float a = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
  std::uniform_real_distribution<float> dist(-a, a);
  std::vector<float> v(count);
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace

std::string GammaMode::describe() const {
  if (learnable) return "learnable";
  std::ostringstream os;
  os << value;
  return os.str();
}

int ModelConfig::feature_height() const { return halve_ceil(halve_ceil(input_height)); }
int ModelConfig::feature_width() const { return halve_ceil(halve_ceil(input_width)); }
int ModelConfig::num_strips() const { return std::accumulate(hpp_bins.begin(), hpp_bins.end(), 0); }

void ModelConfig::validate() const {
  if (input_height < 1 || input_width < 1) throw ConfigError("input size must be positive");
  if (num_labels < 2 || num_labels > 255) throw ConfigError("num_labels must be in [2, 255]");
  if (widths.size() != 4) throw ConfigError("widths must list the 4 residual stage widths");
  for (int w : widths) {
    if (w < 1) throw ConfigError("stage widths must be positive");
  }
  if (hpp_bins.empty()) throw ConfigError("hpp_bins must not be empty");
  const int h = feature_height();
  for (int b : hpp_bins) {
    if (b < 1 || h % b != 0) {
      throw ConfigError("HPP bin " + std::to_string(b) + " does not divide backbone output height " +
                        std::to_string(h));
    }
  }
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be > 0");
  if (num_ids < 0) throw ConfigError("num_ids must be >= 0");
  if (!std::isfinite(gamma.value)) throw ConfigError("gamma must be finite");
}

std::string to_json(const ModelConfig& c) {
  json j = {{"input_size", {c.input_height, c.input_width}},
            {"num_labels", c.num_labels},
            {"input_encoding", encoding_name(c.input_encoding)},
            {"binarize_input", c.binarize_input},
            {"widths", c.widths},
            {"hpp_bins", c.hpp_bins},
            {"part_graph", to_string(c.part_graph)},
            {"use_gcn", c.use_gcn},
            {"gamma_mode", c.gamma.learnable ? "learnable" : "fixed"},
            {"gamma", c.gamma.value},
            {"embedding_dim", c.embedding_dim},
            {"num_ids", c.num_ids}};
  return j.dump(2);
}

ModelConfig model_config_from_json(const std::string& text) {
  static const std::set<std::string> known{"input_size", "num_labels", "input_encoding", "binarize_input",
                                           "widths",     "hpp_bins",   "part_graph",     "use_gcn",
                                           "gamma_mode", "gamma",      "embedding_dim",  "num_ids"};
  ModelConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (!known.count(key)) throw ConfigError("unknown model config field '" + key + "'");
    }
    if (j.contains("input_size")) {
      const auto hw = j.at("input_size").get<std::vector<int>>();
      if (hw.size() != 2) throw ConfigError("input_size must be [H, W]");
      c.input_height = hw[0];
      c.input_width = hw[1];
    }
    if (j.contains("num_labels")) c.num_labels = j.at("num_labels").get<int>();
    if (j.contains("input_encoding")) c.input_encoding = encoding_from_string(j.at("input_encoding").get<std::string>());
    if (j.contains("binarize_input")) c.binarize_input = j.at("binarize_input").get<bool>();
    if (j.contains("widths")) c.widths = j.at("widths").get<std::vector<int>>();
    if (j.contains("hpp_bins")) c.hpp_bins = j.at("hpp_bins").get<std::vector<int>>();
    if (j.contains("part_graph")) c.part_graph = graph_kind_from_string(j.at("part_graph").get<std::string>());
    if (j.contains("use_gcn")) c.use_gcn = j.at("use_gcn").get<bool>();
    if (j.contains("gamma_mode")) {
      const auto mode = j.at("gamma_mode").get<std::string>();
      if (mode != "learnable" && mode != "fixed") throw ConfigError("gamma_mode must be learnable or fixed");
      c.gamma.learnable = mode == "learnable";
    }
    if (j.contains("gamma")) c.gamma.value = j.at("gamma").get<double>();
    if (j.contains("embedding_dim")) c.embedding_dim = j.at("embedding_dim").get<int>();
    if (j.contains("num_ids")) c.num_ids = j.at("num_ids").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

ParsingGaitModel::ParsingGaitModel(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)), graph_(make_graph(config_.part_graph)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const int k_in = config_.input_encoding == InputEncoding::kOneHot ? config_.num_labels : 1;
  const auto& w = config_.widths;

  auto conv = [&](const std::string& name, int out, int in, int k) {
    const auto count = static_cast<std::size_t>(out) * static_cast<std::size_t>(in * k * k);
    return make_param(name, {out, in, k, k}, kaiming_normal(rng, count, in * k * k));
  };

  stem_conv_ = conv("backbone.stem.conv.weight", w[0], k_in, 3);
  stem_bn_ = make_bn("backbone.stem.bn", w[0]);
  const int strides[4] = {1, 1, 2, 2};
  int in = w[0];
  for (int s = 0; s < 4; ++s) {
    const std::string prefix = "backbone.layer" + std::to_string(s + 1);
    ResidualBlock b;
    b.stride = strides[s];
    b.conv1 = conv(prefix + ".conv1.weight", w[static_cast<std::size_t>(s)], in, 3);
    b.bn1 = make_bn(prefix + ".bn1", w[static_cast<std::size_t>(s)]);
    b.conv2 = conv(prefix + ".conv2.weight", w[static_cast<std::size_t>(s)], w[static_cast<std::size_t>(s)], 3);
    b.bn2 = make_bn(prefix + ".bn2", w[static_cast<std::size_t>(s)]);
    b.has_shortcut = in != w[static_cast<std::size_t>(s)] || b.stride != 1;
    if (b.has_shortcut) {
      b.shortcut_conv = conv(prefix + ".shortcut.conv.weight", w[static_cast<std::size_t>(s)], in, 1);
      b.shortcut_bn = make_bn(prefix + ".shortcut.bn", w[static_cast<std::size_t>(s)]);
    }
    blocks_.push_back(std::move(b));
    in = w[static_cast<std::size_t>(s)];
  }

  const int c = config_.feature_channels();
  const int nodes = config_.num_graph_nodes();
  const auto& norm = graph_.normalized;
  adjacency_ = Tensor::from_data({nodes, nodes}, std::vector<float>(norm.values.begin(), norm.values.end()));

  std::vector<float> g(static_cast<std::size_t>(nodes), static_cast<float>(config_.gamma.value));
  if (config_.gamma.learnable) {
    gamma_ = make_param("cross_part.gamma", {nodes}, std::move(g));
  } else {
    gamma_ = Tensor::from_data({nodes}, std::move(g));
  }
  if (config_.use_gcn) {
    const auto cc = static_cast<std::size_t>(c) * static_cast<std::size_t>(c);
    gcn1_ = make_param("cross_part.gcn1.weight", {c, c}, xavier_uniform(rng, cc, c, c));
    gcn2_ = make_param("cross_part.gcn2.weight", {c, c}, xavier_uniform(rng, cc, c, c));
  }

  const int parts = config_.num_parts();
  const int d = config_.embedding_dim;
  fc_ = make_param("head.fc.weight", {parts, c, d},
                   xavier_uniform(rng, static_cast<std::size_t>(parts) * static_cast<std::size_t>(c * d), c, d));
  if (config_.num_ids > 0) {
    bnneck_ = make_bn("head.bnneck", parts * d);
    std::normal_distribution<float> dist(0.0f, 0.001f);
    std::vector<float> cls(static_cast<std::size_t>(parts) * static_cast<std::size_t>(d) *
                           static_cast<std::size_t>(config_.num_ids));
    for (auto& v : cls) v = dist(rng);
    classifier_ = make_param("head.classifier.weight", {parts, d, config_.num_ids}, std::move(cls));
  }
}

Tensor ParsingGaitModel::make_param(const std::string& name, ad::Shape shape, std::vector<float> values) {
  auto t = Tensor::from_data(std::move(shape), std::move(values), true);
  params_.push_back({name, t});
  return t;
}

ParsingGaitModel::BatchNormParams ParsingGaitModel::make_bn(const std::string& prefix, int channels) {
  BatchNormParams bn;
  bn.weight = make_param(prefix + ".weight", {channels}, std::vector<float>(static_cast<std::size_t>(channels), 1.0f));
  bn.bias = make_param(prefix + ".bias", {channels}, std::vector<float>(static_cast<std::size_t>(channels), 0.0f));
  bn.running_mean = Tensor::zeros({channels});
  bn.running_var = Tensor::full({channels}, 1.0f);
  buffers_.push_back({prefix + ".running_mean", bn.running_mean});
  buffers_.push_back({prefix + ".running_var", bn.running_var});
  return bn;
}

Tensor& ParsingGaitModel::parameter(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw InvalidArgument("model has no parameter '" + name + "'");
}

void ParsingGaitModel::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Tensor ParsingGaitModel::apply_bn(const Tensor& x, const BatchNormParams& bn, bool training) const {
  ad::BatchNormOptions opt;
  opt.training = training;
  // The running buffers are shared handles, so training mode updates them in place.
  return ad::batch_norm(x, bn.weight, bn.bias, bn.running_mean, bn.running_var, opt);
}

Tensor ParsingGaitModel::block_forward(const Tensor& x, const ResidualBlock& b, bool training) const {
  auto y = ad::conv2d(x, b.conv1, {b.stride, 1});
  y = ad::relu(apply_bn(y, b.bn1, training));
  y = apply_bn(ad::conv2d(y, b.conv2, {1, 1}), b.bn2, training);
  Tensor shortcut = x;
  if (b.has_shortcut) shortcut = apply_bn(ad::conv2d(x, b.shortcut_conv, {b.stride, 0}), b.shortcut_bn, training);
  return ad::relu(ad::add(y, shortcut));
}

std::vector<const ParsingFrame*> ParsingGaitModel::prepared(std::span<const ParsingFrame* const> frames,
                                                            std::vector<ParsingFrame>& storage) const {
  std::vector<const ParsingFrame*> out(frames.begin(), frames.end());
  for (const auto* f : out) {
    if (f->height() != config_.input_height || f->width() != config_.input_width) {
      throw ShapeError("frame is " + std::to_string(f->height()) + "x" + std::to_string(f->width()) +
                       ", model expects " + std::to_string(config_.input_height) + "x" +
                       std::to_string(config_.input_width));
    }
  }
  if (config_.binarize_input) {
    storage.clear();
    storage.reserve(out.size());
    for (const auto* f : out) storage.push_back(binarize(*f));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = &storage[i];
  }
  return out;
}

Tensor ParsingGaitModel::encode_input(std::span<const ParsingFrame* const> frames) const {
  std::vector<ParsingFrame> storage;
  const auto ptrs = prepared(frames, storage);
  return encode_frames(ptrs, config_.num_labels, config_.input_encoding);
}

Tensor ParsingGaitModel::node_masks(std::span<const ParsingFrame* const> frames) const {
  std::vector<ParsingFrame> storage;
  const auto ptrs = prepared(frames, storage);
  const int h = config_.feature_height(), w = config_.feature_width();
  const int nodes = graph_.node_count();
  const auto plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  std::vector<float> data(ptrs.size() * static_cast<std::size_t>(nodes) * plane, 0.0f);
  for (std::size_t n = 0; n < ptrs.size(); ++n) {
    const auto small = resize_mask(*ptrs[n], h, w);
    const auto labels = small.labels();
    float* base = data.data() + n * static_cast<std::size_t>(nodes) * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const int node = graph_.node_of(labels[i]);
      if (node >= 0) base[static_cast<std::size_t>(node) * plane + i] = 1.0f;
    }
  }
  return Tensor::from_data({static_cast<std::int64_t>(ptrs.size()), nodes, h, w}, std::move(data));
}

Tensor ParsingGaitModel::backbone_forward(const Tensor& input) { return backbone_impl(input, training_); }

Tensor ParsingGaitModel::backbone_impl(const Tensor& input, bool training) const {
  const int k_in = config_.input_encoding == InputEncoding::kOneHot ? config_.num_labels : 1;
  if (input.ndim() != 4 || input.dim(1) != k_in || input.dim(2) != config_.input_height ||
      input.dim(3) != config_.input_width) {
    throw ShapeError("backbone input " + ad::to_string(input.shape()) + " does not match [N, " +
                     std::to_string(k_in) + ", " + std::to_string(config_.input_height) + ", " +
                     std::to_string(config_.input_width) + "]");
  }
  auto x = ad::relu(apply_bn(ad::conv2d(input, stem_conv_, {1, 1}), stem_bn_, training));
  for (const auto& b : blocks_) x = block_forward(x, b, training);
  return x;
}

Tensor ParsingGaitModel::global_head(const Tensor& features, int batch, int frames) const {
  return heads::horizontal_pyramid_pool(heads::temporal_max(features, batch, frames), config_.hpp_bins);
}

Tensor ParsingGaitModel::cross_part_head(const Tensor& features, const Tensor& masks, int batch, int frames) const {
  if (masks.ndim() != 4 || features.ndim() != 4 || masks.dim(0) != features.dim(0)) {
    throw ShapeError("cross_part_head: " + ad::to_string(masks.shape()) + " masks for " +
                     ad::to_string(features.shape()) + " features");
  }
  auto regions = heads::regional_feature_maps(features, masks, gamma_);  // [BN, C, c, S]
  auto x = heads::regional_pooling(regions);                              // [BN, C, c]
  if (config_.use_gcn) {
    x = heads::gcn_layer(x, adjacency_, gcn1_);
    x = heads::gcn_layer(x, adjacency_, gcn2_);
  }
  const std::int64_t nodes = x.dim(1), c = x.dim(2);
  return ad::max_over(ad::reshape(x, {batch, frames, nodes, c}), 1);
}

Tensor ParsingGaitModel::gammas() const { return gamma_; }

ParsingGaitModel::Output ParsingGaitModel::forward(std::span<const ParsingFrame* const> inputs,
                                                   std::span<const ParsingFrame* const> masks, int batch, int frames,
                                                   bool with_logits) {
  return forward_impl(inputs, masks, batch, frames, with_logits, training_);
}

ParsingGaitModel::Output ParsingGaitModel::forward_impl(std::span<const ParsingFrame* const> inputs,
                                                        std::span<const ParsingFrame* const> masks, int batch,
                                                        int frames, bool with_logits, bool training) const {
  if (batch < 1 || frames < 1) throw InvalidArgument("forward needs at least one sequence and one frame");
  const auto expected = static_cast<std::size_t>(batch) * static_cast<std::size_t>(frames);
  if (inputs.size() != expected || masks.size() != expected) {
    throw ShapeError("forward: expected " + std::to_string(expected) + " frames and masks, got " +
                     std::to_string(inputs.size()) + " and " + std::to_string(masks.size()));
  }
  const auto features = backbone_impl(encode_input(inputs), training);
  const auto strips = global_head(features, batch, frames);
  const auto nodes = cross_part_head(features, node_masks(masks), batch, frames);
  const auto parts = ad::concat<float>({strips, nodes}, 1);  // [B, P, c]
  Output out;
  out.embeddings = heads::separate_fc(parts, fc_);
  if (with_logits) {
    if (config_.num_ids < 1) throw ConfigError("logits requested but num_ids is 0");
    const std::int64_t p = config_.num_parts(), d = config_.embedding_dim;
    auto flat = ad::reshape(out.embeddings, {batch, p * d});
    auto normed = ad::reshape(apply_bn(flat, bnneck_, training), {batch, p, d});
    auto per_part = ad::matmul(ad::permute(normed, {1, 0, 2}), classifier_);  // [P, B, ids]
    out.logits = ad::permute(per_part, {1, 0, 2});
  }
  return out;
}

Embedding ParsingGaitModel::embed(const GaitParsingSequence& sequence) const {
  return embed_with_masks(sequence, sequence);
}

Embedding ParsingGaitModel::embed_with_masks(const GaitParsingSequence& sequence,
                                             const GaitParsingSequence& masks) const {
  if (sequence.frames.empty()) throw InvalidArgument("cannot embed an empty sequence");
  if (masks.frames.size() != sequence.frames.size()) {
    throw ShapeError("embed: " + std::to_string(masks.frames.size()) + " masks for " +
                     std::to_string(sequence.frames.size()) + " frames");
  }
  ad::NoGradGuard guard;
  std::vector<const ParsingFrame*> in, mk;
  for (const auto& f : sequence.frames) in.push_back(&f);
  for (const auto& f : masks.frames) mk.push_back(&f);
  const auto out = forward_impl(in, mk, 1, static_cast<int>(in.size()), false, false);
  Embedding e;
  e.parts = config_.num_parts();
  e.dim = config_.embedding_dim;
  e.values.assign(out.embeddings.data().begin(), out.embeddings.data().end());
  return e;
}

namespace {

CheckpointRecord to_record(const NamedTensor& t) {
  CheckpointRecord r;
  r.name = t.name;
  for (auto d : t.tensor.shape()) r.dims.push_back(static_cast<std::uint32_t>(d));
  r.values.assign(t.tensor.data().begin(), t.tensor.data().end());
  return r;
}

void load_record(const CheckpointData& data, NamedTensor& t) {
  const auto* r = data.find(t.name);
  if (!r) throw InvalidArgument("checkpoint is missing tensor '" + t.name + "'");
  std::vector<std::uint32_t> dims;
  for (auto d : t.tensor.shape()) dims.push_back(static_cast<std::uint32_t>(d));
  if (r->dims != dims) throw ShapeError("checkpoint tensor '" + t.name + "' has a different shape");
  std::copy(r->values.begin(), r->values.end(), t.tensor.data_mut().begin());
}

}  // namespace

CheckpointData ParsingGaitModel::state() const {
  CheckpointData data;
  data.config_json = json{{"model", json::parse(to_json(config_))}}.dump();
  for (const auto& p : params_) data.records.push_back(to_record(p));
  for (const auto& b : buffers_) data.records.push_back(to_record(b));
  return data;
}

void ParsingGaitModel::load_state(const CheckpointData& data) {
  for (auto& p : params_) load_record(data, p);
  for (auto& b : buffers_) load_record(data, b);
}

ParsingGaitModel ParsingGaitModel::from_checkpoint(const CheckpointData& data) {
  json j;
  try {
    j = json::parse(data.config_json);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint config blob: ") + e.what());
  }
  if (!j.contains("model")) throw ConfigError("checkpoint config blob has no 'model' entry");
  ParsingGaitModel m(model_config_from_json(j.at("model").dump()), 0);
  m.load_state(data);
  m.set_training(false);
  return m;
}

}  // namespace pgait
