#include <gtest/gtest.h>

#include <random>

#include "shmd/fixed_point.hpp"
#include "shmd/rng.hpp"

using namespace shmd;

TEST(Rng, DeriveSeedDependsOnTagAndIndex) {
  EXPECT_EQ(derive_seed(7, "corpus"), derive_seed(7, "corpus"));
  EXPECT_NE(derive_seed(7, "corpus"), derive_seed(7, "train"));
  EXPECT_NE(derive_seed(7, "rep", 0), derive_seed(7, "rep", 1));
  EXPECT_NE(derive_seed(7, "corpus"), derive_seed(8, "corpus"));
}

TEST(Rng, Fnv1aKnownVectors) {
  // published FNV-1a 64 test vectors
  EXPECT_EQ(fnv1a64(""), 0xCBF29CE484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xAF63DC4C8601EC8CULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171F73967E8ULL);
}

TEST(Rng, Uniform01InUnitInterval) {
  Rng rng(3);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform01(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_LT(lo, 1e-3);
  EXPECT_GT(hi, 1 - 1e-3);
  EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(FixedPoint, FormatBounds) {
  FixedPointFormat f;
  EXPECT_EQ(f.raw_max(), 2147483647);
  EXPECT_EQ(f.raw_min(), -2147483648LL);
  EXPECT_DOUBLE_EQ(f.scale(), 65536.0);
  EXPECT_TRUE(f.representable(1.5));
  EXPECT_FALSE(f.representable(40000.0));
  EXPECT_FALSE(f.representable(std::nan("")));
  EXPECT_EQ(f.to_raw(1.0), 65536);
  EXPECT_EQ(f.to_raw_saturating(1e9), f.raw_max());
  EXPECT_EQ(f.to_raw_saturating(-1e9), f.raw_min());
}

TEST(FixedPoint, ValidateRejectsBadLayouts) {
  EXPECT_THROW((FixedPointFormat{1, 0, 64}.validate()), Error);
  EXPECT_THROW((FixedPointFormat{16, 16, 64}.validate()), Error);
  EXPECT_THROW((FixedPointFormat{32, 16, 16}.validate()), Error);
  EXPECT_NO_THROW((FixedPointFormat{16, 8, 32}.validate()));
}

// multiply against a wide-integer reference: round half up then clamp
TEST(FixedPoint, MultiplyMatchesWideReference) {
  FixedPointFormat f;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int32_t> d(std::numeric_limits<std::int32_t>::min(),
                                                std::numeric_limits<std::int32_t>::max());
  for (int i = 0; i < 20000; ++i) {
    const std::int32_t a = i % 2 ? d(rng) : d(rng) >> 12;
    const std::int32_t b = i % 3 ? d(rng) >> 14 : d(rng);
    const __int128 p = static_cast<__int128>(a) * b;
    __int128 r = p + (__int128{1} << 15);
    r = r >= 0 ? r / 65536 : -((-r + 65535) / 65536);  // floor division
    if (r > f.raw_max()) r = f.raw_max();
    if (r < f.raw_min()) r = f.raw_min();
    ASSERT_EQ(f.multiply(a, b), static_cast<std::int32_t>(r)) << a << " * " << b;
  }
}

TEST(FixedPoint, AccumulatorSaturatesWithoutWrapping) {
  FixedPointFormat f{32, 16, 40};
  SaturationCounters sat;
  std::int64_t acc = f.acc_max() - 5;
  acc = saturating_accumulate(acc, 10, f, sat);
  EXPECT_EQ(acc, f.acc_max());
  EXPECT_EQ(sat.accumulator, 1u);
  acc = saturating_accumulate(f.acc_min() + 1, -2, f, sat);
  EXPECT_EQ(acc, f.acc_min());
  EXPECT_EQ(sat.accumulator, 2u);

  FixedPointFormat w;
  SaturationCounters s2;
  EXPECT_EQ(saturating_accumulate(std::numeric_limits<std::int64_t>::max(), 1, w, s2), w.acc_max());
  EXPECT_EQ(s2.accumulator, 1u);
}

TEST(FixedPoint, NarrowCountsActivationClips) {
  FixedPointFormat f;
  SaturationCounters sat;
  EXPECT_EQ(narrow(std::int64_t{1} << 40, f, sat), f.raw_max());
  EXPECT_EQ(narrow(-(std::int64_t{1} << 40), f, sat), f.raw_min());
  EXPECT_EQ(narrow(123, f, sat), 123);
  EXPECT_EQ(sat.activation, 2u);
  EXPECT_EQ(sat.total(), 2u);
}
