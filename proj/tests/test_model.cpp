#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "pgait/errors.hpp"
#include "pgait/model.hpp"
#include "pgait/ops.hpp"
#include "support.hpp"

namespace pgait {
namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.input_height = 32;
  c.input_width = 22;
  c.widths = {4, 4, 8, 8};
  c.hpp_bins = {1, 2, 4};
  c.embedding_dim = 6;
  c.num_ids = 3;
  return c;
}

std::vector<const ParsingFrame*> ptrs(const GaitParsingSequence& s) {
  std::vector<const ParsingFrame*> p;
  for (const auto& f : s.frames) p.push_back(&f);
  return p;
}

TEST(ModelConfig, JsonRoundTripAndUnknownKey) {
  auto c = tiny_config();
  c.part_graph = GraphKind::kFine;
  c.gamma = GammaMode::Fixed(0.25);
  c.use_gcn = false;
  c.input_encoding = InputEncoding::kScalar;
  EXPECT_EQ(model_config_from_json(to_json(c)), c);
  EXPECT_THROW(model_config_from_json(R"({"widthz":[1,2,3,4]})"), ConfigError);
}

TEST(ModelConfig, ValidateRejectsBadShapes) {
  auto c = tiny_config();
  c.hpp_bins = {3};
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.widths = {4, 4};
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(tiny_config().validate());
}

TEST(Model, OutputShapes) {
  std::mt19937_64 rng(1);
  for (auto kind : {GraphKind::kFine, GraphKind::kCoarse}) {
    auto c = tiny_config();
    c.part_graph = kind;
    ParsingGaitModel m(c, 3);
    auto s = testing::random_sequence(rng, 6, 32, 22);
    const auto p = ptrs(s);
    auto out = m.forward(p, p, 2, 3, true);
    EXPECT_EQ(out.embeddings.shape(), (ad::Shape{2, c.num_parts(), 6}));
    EXPECT_EQ(out.logits.shape(), (ad::Shape{2, c.num_parts(), 3}));
    const auto e = m.embed(s);
    EXPECT_EQ(e.parts, c.num_parts());
    EXPECT_EQ(e.values.size(), static_cast<std::size_t>(c.num_parts() * 6));
  }
}

TEST(Model, WrongFrameSizeThrows) {
  ParsingGaitModel m(tiny_config(), 0);
  GaitParsingSequence s;
  s.frames.push_back(ParsingFrame(16, 22));
  EXPECT_ANY_THROW(m.embed(s));
}

TEST(Model, SameSeedSameWeights) {
  ParsingGaitModel a(tiny_config(), 7), b(tiny_config(), 7), c(tiny_config(), 8);
  EXPECT_EQ(a.state(), b.state());
  EXPECT_NE(a.state(), c.state());
}

TEST(Model, EmbedIsFramePermutationInvariant) {
  std::mt19937_64 rng(2);
  ParsingGaitModel m(tiny_config(), 5);
  for (int t = 0; t < 5; ++t) {
    auto s = testing::random_sequence(rng, 7, 32, 22);
    auto shuffled = s;
    std::shuffle(shuffled.frames.begin(), shuffled.frames.end(), rng);
    EXPECT_EQ(m.embed(s), m.embed(shuffled));
  }
}

TEST(Model, HalfGammaEmbeddingIgnoresMasks) {
  std::mt19937_64 rng(3);
  auto c = tiny_config();
  c.gamma = GammaMode::Fixed(0.5);
  ParsingGaitModel m(c, 5);
  auto s = testing::random_sequence(rng, 4, 32, 22);
  auto other = testing::random_sequence(rng, 4, 32, 22);
  EXPECT_EQ(m.embed(s), m.embed_with_masks(s, other));
}

TEST(Model, CheckpointRoundTripIsExact) {
  std::mt19937_64 rng(4);
  ParsingGaitModel m(tiny_config(), 9);
  // one training forward to move the running statistics
  auto s = testing::random_sequence(rng, 4, 32, 22);
  const auto p = ptrs(s);
  m.forward(p, p, 2, 2);
  const auto data = decode_checkpoint(encode_checkpoint(m.state()));
  EXPECT_EQ(data, m.state());
  auto back = ParsingGaitModel::from_checkpoint(data);
  EXPECT_EQ(back.config(), m.config());
  EXPECT_EQ(back.embed(s), m.embed(s));
}

TEST(Model, LoadStateRejectsMismatch) {
  ParsingGaitModel m(tiny_config(), 1);
  auto c = tiny_config();
  c.embedding_dim = 7;
  ParsingGaitModel other(c, 1);
  EXPECT_ANY_THROW(m.load_state(other.state()));
}

TEST(Model, GradientsReachEveryParameter) {
  std::mt19937_64 rng(6);
  ParsingGaitModel m(tiny_config(), 2);
  auto s = testing::random_sequence(rng, 4, 32, 22);
  const auto p = ptrs(s);
  auto out = m.forward(p, p, 2, 2, true);
  ad::sum(ad::add(ad::mul(out.embeddings, out.embeddings), ad::sum(out.logits))).backward();
  for (const auto& [name, t] : m.parameters()) {
    bool any = false;
    for (float g : t.grad()) any = any || g != 0.0f;
    EXPECT_TRUE(any) << name;
  }
}

}  // namespace
}  // namespace pgait
