#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgait/checkpoint.hpp"
#include "pgait/gps.hpp"
#include "pgait/partgraph.hpp"
#include "pgait/tensor.hpp"

namespace pgait {

/// How the per-part blend factor of the cross-part head behaves.
struct GammaMode {
  bool learnable = true;
  /// Initial value when learnable, the constant otherwise.
  double value = 0.75;

  static GammaMode Learnable(double init = 0.75) { return {true, init}; }
  static GammaMode Fixed(double v) { return {false, v}; }
  std::string describe() const;
  bool operator==(const GammaMode&) const = default;
};

struct ModelConfig {
  int input_height = 64;
  int input_width = 44;
  int num_labels = kNumLabels;
  InputEncoding input_encoding = InputEncoding::kOneHot;
  /// Collapse parsing labels to a silhouette before both the backbone and the
  /// cross-part masks (the binary-silhouette baseline).
  bool binarize_input = false;
  /// Stem width followed by the four residual stages: stem uses widths[0].
  std::vector<int> widths{32, 64, 128, 256};
  std::vector<int> hpp_bins{1, 2, 4, 8, 16};
  GraphKind part_graph = GraphKind::kCoarse;
  bool use_gcn = true;
  GammaMode gamma;
  int embedding_dim = 128;
  /// Classifier size for the identity loss; 0 disables the classifier.
  int num_ids = 0;

  /// Throws ConfigError if any invariant is broken.
  void validate() const;

  int feature_height() const;
  int feature_width() const;
  int feature_channels() const { return widths.back(); }
  int num_graph_nodes() const { return part_graph == GraphKind::kFine ? kNumParts : 5; }
  int num_strips() const;
  /// Parts per embedding: HPP strips followed by graph nodes.
  int num_parts() const { return num_strips() + num_graph_nodes(); }

  bool operator==(const ModelConfig&) const = default;
};

std::string to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

/// P part-features of dimension d, row-major [P, d]. Layout: HPP strips in
/// pyramid order, then graph nodes in node order.
struct Embedding {
  int parts = 0;
  int dim = 0;
  std::vector<float> values;

  std::span<const float> part(int p) const {
    return std::span<const float>(values).subspan(static_cast<std::size_t>(p) * static_cast<std::size_t>(dim),
                                                  static_cast<std::size_t>(dim));
  }
  bool operator==(const Embedding&) const = default;
};

struct NamedTensor {
  std::string name;
  ad::Tensor<float> tensor;
};

/// ParsingGait: residual CNN backbone, global (temporal max + HPP) head and
/// cross-part (masked regional pooling + two-layer GCN) head, followed by
/// one independent linear map per part. A BN-neck classifier on top of the
/// embeddings feeds the identity loss.
class ParsingGaitModel {
 public:
  using Tensor = ad::Tensor<float>;

  ParsingGaitModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  const PartGraph& graph() const noexcept { return graph_; }

  /// Learnable tensors in registration order; names are unique and stable.
  std::vector<NamedTensor>& parameters() noexcept { return params_; }
  const std::vector<NamedTensor>& parameters() const noexcept { return params_; }
  /// Non-learnable state (batch-norm running statistics).
  std::vector<NamedTensor>& buffers() noexcept { return buffers_; }
  const std::vector<NamedTensor>& buffers() const noexcept { return buffers_; }
  Tensor& parameter(const std::string& name);

  void set_training(bool on) noexcept { training_ = on; }
  bool training() const noexcept { return training_; }
  void zero_grad();

  struct Output {
    Tensor embeddings;  // [B, P, d]
    Tensor logits;      // [B, P, num_ids]; undefined unless requested
  };

  /// Full forward pass over `batch` sequences of `frames` frames each,
  /// sequence-major. `masks` supplies the parsing maps for the cross-part
  /// head and is normally the same as `inputs`.
  Output forward(std::span<const ParsingFrame* const> inputs, std::span<const ParsingFrame* const> masks,
                 int batch, int frames, bool with_logits = false);

  /// Stacked network input after the configured binarisation and encoding.
  Tensor encode_input(std::span<const ParsingFrame* const> frames) const;
  /// Node masks resized to the feature map: [B*N, C, h, w] of 0/1 values.
  Tensor node_masks(std::span<const ParsingFrame* const> frames) const;

  /// [B*N, K, H, W] -> [B*N, c, h, w].
  Tensor backbone_forward(const Tensor& input);
  /// [B*N, c, h, w] -> [B, sum(bins), c].
  Tensor global_head(const Tensor& features, int batch, int frames) const;
  /// [B*N, c, h, w] plus node masks -> [B, C, c].
  Tensor cross_part_head(const Tensor& features, const Tensor& masks, int batch, int frames) const;
  /// Current gamma per node (learnable or fixed).
  Tensor gammas() const;

  /// Eval-mode, no-grad embedding of a whole sequence. Safe to call
  /// concurrently on a frozen model.
  Embedding embed(const GaitParsingSequence& sequence) const;
  /// As embed(), with the cross-part masks taken from `masks` instead.
  Embedding embed_with_masks(const GaitParsingSequence& sequence, const GaitParsingSequence& masks) const;

  /// Serialisable snapshot: config JSON under "model" plus every parameter
  /// and buffer as a named f32 record.
  CheckpointData state() const;
  /// Copies tensor values from `data`; throws if a name or shape is missing.
  void load_state(const CheckpointData& data);
  static ParsingGaitModel from_checkpoint(const CheckpointData& data);

 private:
  struct BatchNormParams {
    Tensor weight, bias, running_mean, running_var;
  };
  struct ResidualBlock {
    Tensor conv1, conv2, shortcut_conv;
    BatchNormParams bn1, bn2, shortcut_bn;
    int stride = 1;
    bool has_shortcut = false;
  };

  Tensor make_param(const std::string& name, ad::Shape shape, std::vector<float> values);
  BatchNormParams make_bn(const std::string& prefix, int channels);
  Tensor apply_bn(const Tensor& x, const BatchNormParams& bn, bool training) const;
  Tensor block_forward(const Tensor& x, const ResidualBlock& block, bool training) const;
  Tensor backbone_impl(const Tensor& input, bool training) const;
  /// Size-checks the frames and applies the optional binarisation; binarised
  /// copies live in `storage`.
  std::vector<const ParsingFrame*> prepared(std::span<const ParsingFrame* const> frames,
                                            std::vector<ParsingFrame>& storage) const;
  Output forward_impl(std::span<const ParsingFrame* const> inputs, std::span<const ParsingFrame* const> masks,
                      int batch, int frames, bool with_logits, bool training) const;

  ModelConfig config_;
  PartGraph graph_;
  Tensor adjacency_;  // normalized, [C, C]
  bool training_ = true;

  Tensor stem_conv_;
  BatchNormParams stem_bn_;
  std::vector<ResidualBlock> blocks_;
  Tensor gamma_;        // [C], learnable or constant
  Tensor gcn1_, gcn2_;  // [c, c]
  Tensor fc_;           // [P, c, d]
  BatchNormParams bnneck_;
  Tensor classifier_;   // [P, d, num_ids]

  std::vector<NamedTensor> params_;
  std::vector<NamedTensor> buffers_;
};

}  // namespace pgait
