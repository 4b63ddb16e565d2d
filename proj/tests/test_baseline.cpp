#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "kmemir/baseline.hpp"
#include "kmemir/eval.hpp"

namespace kmemir {
namespace {

Dataset zero_noise(std::size_t bags, std::uint64_t seed, std::size_t min = 5, std::size_t max = 15) {
  SyntheticConfig c;
  c.num_bags = bags;
  c.instances_min = min;
  c.instances_max = max;
  c.noise_scale = 0.0;
  c.seed = seed;
  return generate_synthetic(c);
}

TEST(Aggregate, MeanAndMedianExamples) {
  const std::vector<double> odd = {1.0, 2.0, 10.0};
  EXPECT_NEAR(aggregate(odd, Aggregator::mean), 13.0 / 3.0, 1e-15);
  EXPECT_EQ(aggregate(odd, Aggregator::median), 2.0);
  const std::vector<double> even = {10.0, 1.0, 3.0, 2.0};
  EXPECT_EQ(aggregate(even, Aggregator::median), 2.5);
  EXPECT_THROW(aggregate(std::vector<double>{}, Aggregator::mean), Error);
}

TEST(Aggregate, SingleValueIsItsOwnMeanAndMedian) {
  const std::vector<double> one = {-3.5};
  EXPECT_EQ(aggregate(one, Aggregator::mean), -3.5);
  EXPECT_EQ(aggregate(one, Aggregator::median), -3.5);
}

TEST(Aggregate, AffineEquivarianceOrderInvarianceAndMonotonicity) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> v(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> xs(1 + trial % 9);
    for (double& x : xs) x = v(gen);
    for (auto agg : {Aggregator::mean, Aggregator::median}) {
      const double base = aggregate(xs, agg);
      std::vector<double> mapped = xs;
      for (double& x : mapped) x = 2.0 * x + 1.0;
      EXPECT_NEAR(aggregate(mapped, agg), 2.0 * base + 1.0, 1e-12);

      std::vector<double> shuffled = xs;
      std::shuffle(shuffled.begin(), shuffled.end(), gen);
      EXPECT_NEAR(aggregate(shuffled, agg), base, 1e-12);

      std::vector<double> raised = xs;
      raised[trial % raised.size()] += 1.0;
      EXPECT_GE(aggregate(raised, agg), base);
    }
  }
}

TEST(Aggregate, SymmetricListsHaveEqualMeanAndMedian) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> v(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double centre = v(gen);
    std::vector<double> xs = {centre};
    for (int k = 0; k < trial % 5; ++k) {
      const double offset = std::abs(v(gen));
      xs.push_back(centre + offset);
      xs.push_back(centre - offset);
    }
    EXPECT_NEAR(aggregate(xs, Aggregator::mean), aggregate(xs, Aggregator::median), 1e-12);
  }
}

TEST(InstanceMir, RecoversZeroNoiseLabels) {
  const Dataset train = zero_noise(60, 1);
  const Dataset held = zero_noise(25, 2);
  for (auto agg : {Aggregator::mean, Aggregator::median}) {
    const Eigen::VectorXd pred = run_instance_mir(train, held, RidgeConfig{1e-10}, agg, 3);
    EXPECT_LT(rmse(pred, held.labels()), 1e-3) << to_string(agg);
  }
}

TEST(InstanceMir, SingleInstanceBagsMakeMeanAndMedianAgree) {
  SyntheticConfig c;
  c.num_bags = 30;
  c.instances_min = 1;
  c.instances_max = 1;
  c.seed = 4;
  const Dataset train = generate_synthetic(c);
  c.seed = 5;
  c.num_bags = 10;
  const Dataset held = generate_synthetic(c);
  MlpConfig mlp;
  mlp.hidden_units = 8;
  mlp.epochs = 20;
  EXPECT_EQ(run_instance_mir(train, held, mlp, Aggregator::mean, 6),
            run_instance_mir(train, held, mlp, Aggregator::median, 6));
}

TEST(InstanceMir, SharesTheHeldOutInstanceModelWithTheKmePipeline) {
  const Dataset train = zero_noise(20, 7);
  const Dataset held = zero_noise(5, 8);
  const FirstStageConfig config = RidgeConfig{1e-3};
  const auto lists = predict_bags(train_final_model(train, config, 9), held);
  const Eigen::VectorXd pred = run_instance_mir(train, held, config, Aggregator::mean, 9);
  for (std::size_t i = 0; i < lists.size(); ++i) {
    EXPECT_EQ(pred[static_cast<Eigen::Index>(i)], aggregate(lists[i], Aggregator::mean));
  }
}

TEST(InstanceMir, RejectsDimensionMismatch) {
  const Dataset a = zero_noise(10, 1);
  SyntheticConfig c;
  c.dim = 5;
  c.num_bags = 3;
  EXPECT_THROW(run_instance_mir(a, generate_synthetic(c), RidgeConfig{}, Aggregator::mean, 0), Error);
}

}  // namespace
}  // namespace kmemir
