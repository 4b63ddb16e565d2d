#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "kmemir/data.hpp"
#include "oracles.hpp"

namespace kmemir {
namespace {

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return read_canonical_csv(in, "test.csv");
}

ErrorKind error_kind_of(const std::function<void()>& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::io;
}

TEST(CanonicalCsv, GroupsRowsByBagInFirstAppearanceOrder) {
  const Dataset d = parse("bag_id,label,f1,f2\na,2.0,1,2\na,2.0,3,4\nb,5.0,5,6\n");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.dim(), 2u);
  EXPECT_EQ(d[0].id, "a");
  EXPECT_EQ(d[0].size(), 2u);
  EXPECT_EQ(d[1].size(), 1u);
  EXPECT_EQ(d[0].label, 2.0);
  EXPECT_EQ(d[1].label, 5.0);
  EXPECT_EQ(d[0].instances(1, 0), 3.0);
}

TEST(CanonicalCsv, InterleavedRowsKeepInstanceOrder) {
  const Dataset d = parse("bag_id,label,f1\nx,1,10\ny,2,20\nx,1,11\n");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].instances(0, 0), 10.0);
  EXPECT_EQ(d[0].instances(1, 0), 11.0);
}

TEST(CanonicalCsv, ConflictingLabelReportsOffendingLine) {
  std::string msg;
  EXPECT_EQ(error_kind_of([] { parse("bag_id,label,f1\na,2.0,1\na,2.1,1\n"); }, &msg), ErrorKind::parse);
  EXPECT_NE(msg.find("test.csv:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("conflicting label"), std::string::npos) << msg;
}

TEST(CanonicalCsv, EmptyBodyIsNoBags) {
  std::string msg;
  EXPECT_EQ(error_kind_of([] { parse("bag_id,label,f1\n"); }, &msg), ErrorKind::parse);
  EXPECT_NE(msg.find("no bags"), std::string::npos) << msg;
}

TEST(CanonicalCsv, RaggedAndNonNumericRowsAreDistinctErrors) {
  std::string ragged, non_numeric, bad_label;
  EXPECT_EQ(error_kind_of([] { parse("bag_id,label,f1,f2\na,1,2\n"); }, &ragged), ErrorKind::parse);
  EXPECT_EQ(error_kind_of([] { parse("bag_id,label,f1\na,1,2\na,1,abc\n"); }, &non_numeric), ErrorKind::parse);
  EXPECT_EQ(error_kind_of([] { parse("bag_id,label,f1\na,x,2\n"); }, &bad_label), ErrorKind::parse);
  EXPECT_NE(ragged.find("test.csv:2"), std::string::npos) << ragged;
  EXPECT_NE(ragged.find("expected 4 fields"), std::string::npos) << ragged;
  EXPECT_NE(non_numeric.find("test.csv:3"), std::string::npos) << non_numeric;
  EXPECT_NE(non_numeric.find("f1"), std::string::npos) << non_numeric;
  EXPECT_NE(bad_label.find("label"), std::string::npos) << bad_label;
}

TEST(CanonicalCsv, RejectsNonFiniteValuesAndBadHeader) {
  EXPECT_EQ(error_kind_of([] { parse("bag_id,label,f1\na,1,nan\n"); }), ErrorKind::parse);
  EXPECT_EQ(error_kind_of([] { parse("bag_id,label,f1\na,inf,1\n"); }), ErrorKind::parse);
  EXPECT_EQ(error_kind_of([] { parse("id,label,f1\na,1,1\n"); }), ErrorKind::parse);
  EXPECT_EQ(error_kind_of([] { parse("bag_id,label\na,1\n"); }), ErrorKind::parse);
}

TEST(CanonicalCsv, MissingFileIsAnIoError) {
  EXPECT_EQ(error_kind_of([] { load_canonical_csv("/nonexistent/data.csv"); }), ErrorKind::io);
}

TEST(CanonicalCsv, AcceptsCrlfLineEndings) {
  const Dataset d = parse("bag_id,label,f1\r\na,1.5,2\r\n");
  EXPECT_EQ(d[0].label, 1.5);
}

TEST(CanonicalCsv, WriteThenReadReproducesDataset) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SyntheticConfig c;
    c.num_bags = 1 + seed * 3;
    c.instances_min = 1;
    c.instances_max = 1 + seed % 5;
    c.dim = 1 + seed % 4;
    c.noise_scale = 0.3;
    c.noise_skew = static_cast<double>(seed) - 10.0;
    c.seed = seed;
    const Dataset original = generate_synthetic(c);
    std::stringstream buffer;
    write_canonical_csv(buffer, original);
    EXPECT_EQ(read_canonical_csv(buffer), original) << "seed " << seed;
  }
}

TEST(Dataset, EnforcesInvariants) {
  InstanceMatrix one(1, 2);
  one << 1, 2;
  EXPECT_THROW(Dataset({}, 2), Error);
  EXPECT_THROW(Dataset({{"a", 1.0, one}, {"a", 2.0, one}}, 2), Error);
  EXPECT_THROW(Dataset({{"a", 1.0, InstanceMatrix(0, 2)}}, 2), Error);
  EXPECT_THROW(Dataset({{"a", 1.0, one}}, 3), Error);
  EXPECT_THROW(Dataset({{"a", std::nan(""), one}}, 2), Error);
}

TEST(Synthetic, ZeroNoiseFeatureEqualsLabel) {
  SyntheticConfig c;
  c.noise_scale = 0.0;
  c.noise_skew = 3.0;
  c.num_bags = 50;
  c.seed = 11;
  const Dataset d = generate_synthetic(c);
  for (const Bag& bag : d.bags()) {
    for (std::size_t l = 0; l < bag.size(); ++l) EXPECT_EQ(bag.instances(l, 0), bag.label);
  }
}

TEST(Synthetic, SameSeedIsBitIdenticalAndDifferentSeedDiffers) {
  SyntheticConfig c;
  c.seed = 42;
  EXPECT_EQ(generate_synthetic(c), generate_synthetic(c));
  SyntheticConfig other = c;
  other.seed = 43;
  EXPECT_FALSE(generate_synthetic(c) == generate_synthetic(other));
}

TEST(Synthetic, InstanceCountsAndLabelsInRange) {
  SyntheticConfig c;
  c.num_bags = 300;
  c.instances_min = 3;
  c.instances_max = 7;
  c.seed = 5;
  const Dataset d = generate_synthetic(c);
  std::set<std::size_t> counts;
  for (const Bag& bag : d.bags()) {
    counts.insert(bag.size());
    EXPECT_GE(bag.label, 0.0);
    EXPECT_LT(bag.label, 1.0);
  }
  EXPECT_EQ(*counts.begin(), 3u);
  EXPECT_EQ(*counts.rbegin(), 7u);
}

TEST(Synthetic, RightSkewedNoiseBiasesFeatureAboveLabel) {
  SyntheticConfig c;
  c.num_bags = 200;
  c.noise_scale = 0.2;
  c.noise_skew = 3.0;
  c.seed = 2024;
  const Dataset d = generate_synthetic(c);
  double bias = 0.0;
  for (const Bag& bag : d.bags()) bias += bag.instances.col(0).mean() - bag.label;
  bias /= static_cast<double>(d.size());

  const double reference = oracle::skew_normal_mean_mc(0.2, 3.0, 2'000'000, 7);
  EXPECT_GT(reference, 0.0);
  EXPECT_GT(bias, 0.0);
  // 200 bag means of ~10 draws each with sd ~0.12: standard error ~0.003.
  EXPECT_NEAR(bias, reference, 0.02);
}

TEST(Synthetic, RejectsInvalidConfig) {
  SyntheticConfig c;
  c.num_bags = 0;
  EXPECT_THROW(generate_synthetic(c), Error);
  c = {};
  c.instances_min = 0;
  EXPECT_THROW(generate_synthetic(c), Error);
  c = {};
  c.instances_min = 9;
  c.instances_max = 3;
  EXPECT_THROW(generate_synthetic(c), Error);
  c = {};
  c.noise_scale = -1.0;
  EXPECT_THROW(generate_synthetic(c), Error);
}

TEST(FoldPlan, EvenSplit) {
  const FoldPlan plan = make_folds(10, 5, 1);
  EXPECT_EQ(plan.num_folds, 5u);
  EXPECT_EQ(plan.sizes(), std::vector<std::size_t>(5, 2));
}

TEST(FoldPlan, RemainderGoesToEarlierFolds) {
  const FoldPlan plan = make_folds(7, 5, 1);
  EXPECT_EQ(plan.sizes(), (std::vector<std::size_t>{2, 2, 1, 1, 1}));
}

TEST(FoldPlan, ClampsFoldCountToBagCount) {
  const FoldPlan plan = make_folds(3, 50, 9);
  EXPECT_EQ(plan.num_folds, 3u);
  EXPECT_EQ(plan.sizes(), std::vector<std::size_t>(3, 1));
}

TEST(FoldPlan, RejectsNonPositiveFoldCount) {
  EXPECT_THROW(make_folds(10, 0, 1), Error);
  EXPECT_THROW(make_folds(10, -3, 1), Error);
}

TEST(FoldPlan, PartitionPropertyOverRandomShapes) {
  std::mt19937_64 gen(123);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t bags = 1 + gen() % 120;
    const std::int64_t folds = 1 + static_cast<std::int64_t>(gen() % 60);
    const std::uint64_t seed = gen();
    const FoldPlan plan = make_folds(bags, folds, seed);
    EXPECT_EQ(plan, make_folds(bags, folds, seed));

    ASSERT_EQ(plan.assignment.size(), bags);
    const auto sizes = plan.sizes();
    EXPECT_EQ(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}), bags);
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    EXPECT_LE(*hi - *lo, 1u);
    EXPECT_GE(*lo, 1u);
    EXPECT_TRUE(std::is_sorted(sizes.rbegin(), sizes.rend()));

    std::vector<int> seen(bags, 0);
    for (std::size_t f = 0; f < plan.num_folds; ++f) {
      for (std::size_t i : plan.members(f)) ++seen[i];
      EXPECT_EQ(plan.members(f).size() + plan.complement(f).size(), bags);
    }
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
  }
}

TEST(FoldPlan, SeedChangesAssignment) {
  EXPECT_NE(make_folds(40, 5, 1).assignment, make_folds(40, 5, 2).assignment);
}

}  // namespace
}  // namespace kmemir
