#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgait/gps.hpp"

namespace pgait {

enum class GraphKind { kFine, kCoarse };

const char* to_string(GraphKind kind) noexcept;
GraphKind graph_kind_from_string(const std::string& name);

/// Dense square matrix, row-major.
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  DenseMatrix() = default;
  DenseMatrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), values(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  double& operator()(int i, int j) { return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(j)]; }
  double operator()(int i, int j) const { return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(j)]; }
  bool operator==(const DenseMatrix&) const = default;
};

/// Body-part graph: node grouping, 0/1 adjacency and the self-loop
/// renormalised adjacency D^-1/2 (A + I) D^-1/2.
struct PartGraph {
  GraphKind kind = GraphKind::kFine;
  std::vector<std::string> node_names;
  std::vector<std::vector<std::uint8_t>> node_labels;
  DenseMatrix adjacency;
  DenseMatrix normalized;

  int node_count() const noexcept { return static_cast<int>(node_labels.size()); }
  /// Node owning `label`, or -1 for background / unknown labels.
  int node_of(std::uint8_t label) const noexcept;
};

/// 11 single-part nodes in label order (node i holds label i + 1).
/// Edges: head-torso; torso to both arms, both legs and dress; arm-hand and
/// leg-foot on each side; dress to both legs.
PartGraph fine_graph();

/// 5 nodes: {head, torso, dress}, {left-arm, left-hand}, {right-arm,
/// right-hand}, {left-leg, left-foot}, {right-leg, right-foot}; the trunk
/// node is connected to each limb node.
PartGraph coarse_graph();

PartGraph make_graph(GraphKind kind);

/// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I. Throws
/// InvalidArgument if A is not square and symmetric.
DenseMatrix normalize_adjacency(const DenseMatrix& adjacency);

/// Binary mask (0/1 per pixel) of the labels grouped under `node`.
std::vector<std::uint8_t> group_mask(const ParsingFrame& frame, const PartGraph& graph, int node);

}  // namespace pgait
