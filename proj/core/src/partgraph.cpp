#include "pgait/partgraph.hpp"

#include <cmath>

#include "pgait/errors.hpp"

namespace pgait {

const char* to_string(GraphKind kind) noexcept { return kind == GraphKind::kFine ? "fine" : "coarse"; }

GraphKind graph_kind_from_string(const std::string& name) {
  if (name == "fine") return GraphKind::kFine;
  if (name == "coarse") return GraphKind::kCoarse;
  throw ConfigError("part_graph must be 'fine' or 'coarse', got '" + name + "'");
}

int PartGraph::node_of(std::uint8_t label) const noexcept {
  for (std::size_t n = 0; n < node_labels.size(); ++n) {
    for (auto l : node_labels[n]) {
      if (l == label) return static_cast<int>(n);
    }
  }
  return -1;
}

DenseMatrix normalize_adjacency(const DenseMatrix& adjacency) {
  if (adjacency.rows != adjacency.cols) throw InvalidArgument("adjacency must be square");
  const int c = adjacency.rows;
  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < c; ++j) {
      if (adjacency(i, j) != adjacency(j, i)) throw InvalidArgument("adjacency must be symmetric");
    }
  }
  std::vector<double> deg(static_cast<std::size_t>(c));
  for (int i = 0; i < c; ++i) {
    double d = 1.0;  // self-loop
    for (int j = 0; j < c; ++j) d += adjacency(i, j);
    deg[static_cast<std::size_t>(i)] = d;
  }
  DenseMatrix out(c, c);
  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < c; ++j) {
      const double a = adjacency(i, j) + (i == j ? 1.0 : 0.0);
      // one rounding for the product of degrees keeps e.g. 1/sqrt(2*2) exactly 0.5
      out(i, j) = a / std::sqrt(deg[static_cast<std::size_t>(i)] * deg[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

namespace {

std::uint8_t code(Part p) { return static_cast<std::uint8_t>(p); }

void connect(DenseMatrix& a, int i, int j) {
  a(i, j) = 1.0;
  a(j, i) = 1.0;
}

}  // namespace

PartGraph fine_graph() {
  PartGraph g;
  g.kind = GraphKind::kFine;
  for (int label = 1; label <= kNumParts; ++label) {
    g.node_names.emplace_back(part_name(label));
    g.node_labels.push_back({static_cast<std::uint8_t>(label)});
  }
  g.adjacency = DenseMatrix(kNumParts, kNumParts);
  auto node = [](Part p) { return static_cast<int>(p) - 1; };
  const std::pair<Part, Part> edges[] = {
      {Part::kHead, Part::kTorso},        {Part::kTorso, Part::kLeftArm},      {Part::kTorso, Part::kRightArm},
      {Part::kTorso, Part::kLeftLeg},     {Part::kTorso, Part::kRightLeg},     {Part::kTorso, Part::kDress},
      {Part::kLeftArm, Part::kLeftHand},  {Part::kRightArm, Part::kRightHand}, {Part::kLeftLeg, Part::kLeftFoot},
      {Part::kRightLeg, Part::kRightFoot}, {Part::kDress, Part::kLeftLeg},     {Part::kDress, Part::kRightLeg},
  };
  for (const auto& [a, b] : edges) connect(g.adjacency, node(a), node(b));
  g.normalized = normalize_adjacency(g.adjacency);
  return g;
}

PartGraph coarse_graph() {
  PartGraph g;
  g.kind = GraphKind::kCoarse;
  g.node_names = {"trunk", "left-arm", "right-arm", "left-leg", "right-leg"};
  g.node_labels = {
      {code(Part::kHead), code(Part::kTorso), code(Part::kDress)},
      {code(Part::kLeftArm), code(Part::kLeftHand)},
      {code(Part::kRightArm), code(Part::kRightHand)},
      {code(Part::kLeftLeg), code(Part::kLeftFoot)},
      {code(Part::kRightLeg), code(Part::kRightFoot)},
  };
  g.adjacency = DenseMatrix(5, 5);
  for (int limb = 1; limb < 5; ++limb) connect(g.adjacency, 0, limb);
  g.normalized = normalize_adjacency(g.adjacency);
  return g;
}

PartGraph make_graph(GraphKind kind) { return kind == GraphKind::kFine ? fine_graph() : coarse_graph(); }

std::vector<std::uint8_t> group_mask(const ParsingFrame& frame, const PartGraph& graph, int node) {
  if (node < 0 || node >= graph.node_count()) {
    throw InvalidArgument("node " + std::to_string(node) + " out of range for a " +
                          std::to_string(graph.node_count()) + "-node graph");
  }
  std::array<std::uint8_t, 256> member{};
  for (auto l : graph.node_labels[static_cast<std::size_t>(node)]) member[l] = 1;
  std::vector<std::uint8_t> mask(frame.size());
  const auto labels = frame.labels();
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = member[labels[i]];
  return mask;
}

}  // namespace pgait
