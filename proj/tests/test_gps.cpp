#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pgait/errors.hpp"
#include "pgait/gps.hpp"
#include "support.hpp"

namespace pgait {
namespace {

using testing::random_frame;
using testing::random_sequence;

// Bitwise reflected CRC-32 (poly 0xEDB88320), independent of the library's.
std::uint32_t crc_oracle(const std::vector<std::uint8_t>& bytes, std::size_t from) {
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = from; i < bytes.size(); ++i) {
    c ^= bytes[i];
    for (int k = 0; k < 8; ++k) c = (c >> 1) ^ (0xEDB88320u & (0u - (c & 1u)));
  }
  return ~c;
}

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xFF));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

LabelHistogram hist_of(std::vector<std::uint64_t> counts) {
  LabelHistogram h;
  h.counts = std::move(counts);
  for (auto c : h.counts) h.total += c;
  return h;
}

TEST(Entropy, UniformSixteenIsFourBits) {
  EXPECT_EQ(entropy_bits(hist_of(std::vector<std::uint64_t>(16, 7))), 4.0);
}

TEST(Entropy, BinaryUniformIsOneBit) { EXPECT_EQ(entropy_bits(hist_of({5, 5})), 1.0); }

TEST(Entropy, SingleLabelIsZero) { EXPECT_EQ(entropy_bits(hist_of({0, 9, 0})), 0.0); }

TEST(Entropy, EmptyHistogramThrows) { EXPECT_THROW(entropy_bits(hist_of({0, 0})), InvalidArgument); }

TEST(Entropy, RandomHistogramsStayWithinBounds) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(1, 20), cnt(0, 50);
  for (int t = 0; t < 1000; ++t) {
    std::vector<std::uint64_t> c(static_cast<std::size_t>(len(rng)));
    for (auto& x : c) x = static_cast<std::uint64_t>(cnt(rng));
    c[0] += 1;
    const auto h = hist_of(c);
    const double e = entropy_bits(h);
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, std::log2(static_cast<double>(h.support())) + 1e-12);
    // direct formula
    double ref = 0.0;
    for (auto x : c) {
      if (x == 0) continue;
      const double p = static_cast<double>(x) / static_cast<double>(h.total);
      ref -= p * std::log2(p);
    }
    EXPECT_NEAR(e, ref, 1e-12);
  }
}

TEST(Entropy, SilhouetteNeverExceedsOneBit) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto f = random_frame(rng, 9, 7);
    EXPECT_LE(entropy_bits(label_histogram(binarize(f))), 1.0);
  }
}

TEST(Histogram, CountsMatchFrame) {
  ParsingFrame f(2, 3, {0, 1, 1, 2, 11, 0});
  const auto h = label_histogram(f);
  ASSERT_EQ(h.counts.size(), static_cast<std::size_t>(kNumLabels));
  EXPECT_EQ(h.total, 6u);
  EXPECT_EQ(h.counts[0], 2u);
  EXPECT_EQ(h.counts[1], 2u);
  EXPECT_EQ(h.counts[2], 1u);
  EXPECT_EQ(h.counts[11], 1u);
  EXPECT_EQ(h.support(), 4u);
  EXPECT_DOUBLE_EQ(h.probability(1), 2.0 / 6.0);
}

TEST(Frame, RejectsBadLabelsAndSizes) {
  EXPECT_THROW(ParsingFrame(2, 2, {0, 1, 12, 0}), InvalidArgument);
  EXPECT_THROW(ParsingFrame(2, 2, {0, 1, 1}), InvalidArgument);
  EXPECT_THROW(ParsingFrame(0, 3), InvalidArgument);
}

TEST(Frame, SideSwapIsAnInvolution) {
  for (int l = 0; l < kNumLabels; ++l) EXPECT_EQ(swap_side(swap_side(static_cast<std::uint8_t>(l))), l);
  EXPECT_EQ(swap_side(3), 4);
  EXPECT_EQ(swap_side(9), 10);
  EXPECT_EQ(swap_side(1), 1);
  EXPECT_EQ(swap_side(11), 11);
}

TEST(ResizeMask, MatchesNearestNeighbourOracle) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto f = random_frame(rng, 13, 9);
    const int oh = 1 + t % 7, ow = 1 + (t * 3) % 11;
    const auto r = resize_mask(f, oh, ow);
    ASSERT_EQ(r.height(), oh);
    ASSERT_EQ(r.width(), ow);
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) EXPECT_EQ(r.at(y, x), f.at(y * 13 / oh, x * 9 / ow));
    }
  }
}

TEST(ResizeMask, IdentitySizeIsNoOp) {
  std::mt19937_64 rng(6);
  const auto f = random_frame(rng, 8, 5);
  EXPECT_EQ(resize_mask(f, 8, 5), f);
}

TEST(Binarize, CollapsesParts) {
  ParsingFrame f(1, 4, {0, 3, 11, 0});
  EXPECT_EQ(binarize(f), ParsingFrame(1, 4, {0, 1, 1, 0}));
}

TEST(Encoding, OneHotPlacesOnes) {
  ParsingFrame f(1, 3, {0, 2, 1});
  const auto t = one_hot(f, 3);
  ASSERT_EQ(t.shape(), (ad::Shape{3, 1, 3}));
  const std::vector<float> want{1, 0, 0, 0, 0, 1, 0, 1, 0};
  EXPECT_EQ(std::vector<float>(t.data().begin(), t.data().end()), want);
  EXPECT_THROW(one_hot(f, 2), InvalidArgument);
}

TEST(Encoding, ScalarDividesByMaxLabel) {
  ParsingFrame f(1, 2, {0, 11});
  const ParsingFrame* ptrs[] = {&f};
  const auto t = encode_frames(ptrs, kNumLabels, InputEncoding::kScalar);
  ASSERT_EQ(t.shape(), (ad::Shape{1, 1, 1, 2}));
  EXPECT_EQ(t.data()[0], 0.0f);
  EXPECT_EQ(t.data()[1], 1.0f);
}

TEST(Codec, KnownByteLayout) {
  GaitParsingSequence s;
  s.frames.push_back(ParsingFrame(1, 3, {2, 2, 0}));
  std::vector<std::uint8_t> want{'G', 'P', 'S', 'Q', 1, 12};
  put_u16(want, 1);
  put_u16(want, 3);
  put_u32(want, 1);
  put_u32(want, 2);  // runs
  want.push_back(2);
  put_u32(want, 2);
  want.push_back(0);
  put_u32(want, 1);
  put_u32(want, crc_oracle(want, 4));
  EXPECT_EQ(encode_gps(s), want);
}

TEST(Codec, Crc32KnownVector) {
  const std::string msg = "123456789";
  const std::vector<std::uint8_t> b(msg.begin(), msg.end());
  EXPECT_EQ(crc32(b), 0xCBF43926u);
  EXPECT_EQ(crc32(b), crc_oracle(b, 0));
}

TEST(Codec, RandomSequencesRoundTrip) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> n(1, 6), dim(1, 40);
  for (int t = 0; t < 100; ++t) {
    auto s = random_sequence(rng, n(rng), dim(rng), dim(rng), t % 2 == 0);
    const auto back = decode_gps(encode_gps(s));
    EXPECT_EQ(back.frames, s.frames);
    EXPECT_EQ(back.num_labels, s.num_labels);
  }
}

TEST(Codec, DecodeErrors) {
  std::mt19937_64 rng(2);
  const auto bytes = encode_gps(random_sequence(rng, 2, 6, 5));

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  try {
    decode_gps(bad_magic);
    FAIL();
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.code(), DecodeErrc::kBadMagic);
  }

  auto bad_version = bytes;
  bad_version[4] = 9;
  try {
    decode_gps(bad_version);
    FAIL();
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.code(), DecodeErrc::kUnsupportedVersion);
  }

  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, bytes.size() - 1}) {
    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    try {
      decode_gps(truncated);
      FAIL() << "cut " << cut;
    } catch (const DecodeError& e) {
      EXPECT_EQ(e.code(), DecodeErrc::kTruncated);
    }
  }

  auto bad_crc = bytes;
  bad_crc.back() ^= 0x01;
  try {
    decode_gps(bad_crc);
    FAIL();
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.code(), DecodeErrc::kCrcMismatch);
  }
}

TEST(Codec, FileRoundTrip) {
  std::mt19937_64 rng(8);
  const auto s = random_sequence(rng, 3, 12, 8);
  const auto dir = testing::scratch_dir("gps_file");
  write_gps_file(s, dir / "a.gpsq");
  EXPECT_EQ(read_gps_file(dir / "a.gpsq").frames, s.frames);
  EXPECT_THROW(read_gps_file(dir / "missing.gpsq"), IoError);
}

TEST(Render, PpmBytes) {
  ParsingFrame f(1, 2, {0, 1});
  Palette p{{0, {1, 2, 3}}, {1, {4, 5, 6}}};
  const auto bytes = render_ppm(f, p);
  const std::string header = "P6\n2 1\n255\n";
  std::vector<std::uint8_t> want(header.begin(), header.end());
  for (std::uint8_t v : {1, 2, 3, 4, 5, 6}) want.push_back(v);
  EXPECT_EQ(bytes, want);
  EXPECT_THROW(render_ppm(ParsingFrame(1, 1, {7}), p), InvalidArgument);
}

TEST(Render, DefaultPaletteCoversAllLabelsAndIsDeterministic) {
  const auto p = default_palette();
  for (int l = 0; l < kNumLabels; ++l) EXPECT_TRUE(p.count(l));
  std::mt19937_64 rng(4);
  const auto f = random_frame(rng, 10, 10);
  const auto s = decode_gps(encode_gps(GaitParsingSequence{{f}, "", "", "", kNumLabels}));
  EXPECT_EQ(render_ppm(s.frames[0], p), render_ppm(f, p));
}

}  // namespace
}  // namespace pgait
