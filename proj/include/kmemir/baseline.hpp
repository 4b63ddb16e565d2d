#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kmemir/data.hpp"
#include "kmemir/error.hpp"
#include "kmemir/first_stage.hpp"
#include "kmemir/stacking.hpp"

namespace kmemir {

enum class Aggregator { mean, median };

inline std::string to_string(Aggregator a) { return a == Aggregator::mean ? "mean" : "median"; }

// Mean, or median with even counts resolved to the midpoint of the two
// central order statistics.
inline double aggregate(std::span<const double> predictions, Aggregator agg) {
  if (predictions.empty()) throw usage_error("cannot aggregate an empty prediction list");
  if (agg == Aggregator::mean) {
    double sum = 0.0;
    for (double p : predictions) sum += p;
    return sum / static_cast<double>(predictions.size());
  }
  std::vector<double> sorted(predictions.begin(), predictions.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  if (sorted.size() % 2 == 1) return sorted[mid];
  return 0.5 * (sorted[mid - 1] + sorted[mid]);
}

// Instance-level regressor on all training pairs, aggregated per held-out
// bag. Uses the same seed derivation as the held-out side of the kme
// pipeline, so both methods see an identical instance model.
inline Eigen::VectorXd run_instance_mir(const Dataset& train, const Dataset& heldout,
                                        const FirstStageConfig& config, Aggregator agg, std::uint64_t seed) {
  if (train.dim() != heldout.dim()) {
    throw usage_error("training data has dimension " + std::to_string(train.dim()) +
                      ", held-out data has " + std::to_string(heldout.dim()));
  }
  const InstanceRegressor model = train_final_model(train, config, seed);
  const auto per_bag = predict_bags(model, heldout);
  Eigen::VectorXd out(static_cast<Eigen::Index>(per_bag.size()));
  for (std::size_t i = 0; i < per_bag.size(); ++i) out[static_cast<Eigen::Index>(i)] = aggregate(per_bag[i], agg);
  return out;
}

}  // namespace kmemir
