#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "driftlab/monte_carlo.hpp"
#include "driftlab/philox.hpp"

using namespace driftlab;

// Known-answer vectors from the Random123 distribution.
TEST(Philox, KnownAnswerZero) {
  constexpr auto r = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(r[0], 0x6627e8d5u);
  EXPECT_EQ(r[1], 0xe169c58du);
  EXPECT_EQ(r[2], 0xbc57ac4cu);
  EXPECT_EQ(r[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
  const auto r = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                      {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(r[0], 0x408f276du);
  EXPECT_EQ(r[1], 0x41c83b0eu);
  EXPECT_EQ(r[2], 0xa20bc7c6u);
  EXPECT_EQ(r[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
  const auto r = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                      {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(r[0], 0xd16cfe09u);
  EXPECT_EQ(r[1], 0x94fdccebu);
  EXPECT_EQ(r[2], 0x5001e420u);
  EXPECT_EQ(r[3], 0x24126ea1u);
}

TEST(NormalStream, PrefixIndependentOfLength) {
  const NormalStream s(42, Stream::noise, 7);
  const auto a = s.draw(5);
  const auto b = s.draw(1024);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(s[i], b[i]);
}

TEST(NormalStream, OffsetFill) {
  const NormalStream s(3, Stream::prior, 11);
  const auto full = s.draw(20);
  std::vector<double> part(7);
  s.fill(part, 5);
  for (std::size_t i = 0; i < part.size(); ++i) EXPECT_EQ(part[i], full[5 + i]);
}

TEST(NormalStream, StreamsAndReplicatesDiffer) {
  const auto a = NormalStream(1, Stream::noise, 0).draw(8);
  const auto b = NormalStream(1, Stream::prior, 0).draw(8);
  const auto c = NormalStream(1, Stream::noise, 1).draw(8);
  const auto d = NormalStream(2, Stream::noise, 0).draw(8);
  EXPECT_NE(a, b);
  EXPECT_NE(a, c);
  EXPECT_NE(a, d);
}

TEST(NormalStream, MomentsOfStandardNormal) {
  const auto z = NormalStream(9, Stream::noise, 0).draw(400000);
  Moments m(2);
  for (double v : z) {
    const double row[2] = {v, v * v};
    m.add(row);
  }
  EXPECT_NEAR(m.mean(0), 0.0, 5 * std::sqrt(1.0 / 400000));
  EXPECT_NEAR(m.mean(1), 1.0, 5 * std::sqrt(2.0 / 400000));
  double kurt = 0.0;
  for (double v : z) kurt += v * v * v * v;
  EXPECT_NEAR(kurt / 400000, 3.0, 5 * std::sqrt(96.0 / 400000));
}

TEST(Moments, MergeMatchesSequential) {
  const auto z = NormalStream(5, Stream::noise, 0).draw(1000);
  Moments all(1), left(1), right(1);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double v[1] = {z[i]};
    all.add(v);
    (i < 377 ? left : right).add(v);
  }
  left.merge(right);
  EXPECT_EQ(left.count(), all.count());
  EXPECT_NEAR(left.mean(0), all.mean(0), 1e-14);
  EXPECT_NEAR(left.variance(0), all.variance(0), 1e-12);
  EXPECT_EQ(left.max_abs(0), all.max_abs(0));
}

TEST(RunReplicates, IndependentOfWorkerCount) {
  auto make = [] {
    return [](std::uint64_t r, std::span<double> out) {
      out[0] = NormalStream(1, Stream::noise, r)[0];
      out[1] = out[0] * out[0];
    };
  };
  const auto one = run_replicates(5000, 2, {1, 256}, make);
  const auto four = run_replicates(5000, 2, {4, 256}, make);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(one.mean(k), four.mean(k));
    EXPECT_EQ(one.variance(k), four.variance(k));
  }
  EXPECT_EQ(one.count(), 5000u);
}

TEST(RunReplicates, DegenerateReplicateReported) {
  auto make = [] {
    return [](std::uint64_t r, std::span<double> out) {
      if (r == 1234) throw DegenerateSampleError("zero radius");
      out[0] = 1.0;
    };
  };
  try {
    run_replicates(3000, 1, {3, 100}, make);
    FAIL() << "expected DegenerateSampleError";
  } catch (const DegenerateSampleError& e) {
    EXPECT_EQ(e.replicate(), 1234u);
  }
}

TEST(RunReplicates, KernelSetupFailurePropagates) {
  auto make = []() -> void (*)(std::uint64_t, std::span<double>) {
    throw std::invalid_argument("bad setup");
  };
  EXPECT_THROW(run_replicates(10, 1, {2, 4}, make), std::invalid_argument);
}
