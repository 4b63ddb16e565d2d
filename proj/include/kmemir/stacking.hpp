#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "kmemir/data.hpp"
#include "kmemir/error.hpp"
#include "kmemir/first_stage.hpp"
#include "kmemir/parallel.hpp"
#include "kmemir/random.hpp"

namespace kmemir {

// Scalar predictions grouped by bag, one list per bag in instance order.
struct BagPredictions {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> values;

  std::size_t size() const { return ids.size(); }

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& v : values) n += v.size();
    return n;
  }

  friend bool operator==(const BagPredictions&, const BagPredictions&) = default;
};

// Out-of-fold predictions for every training instance.
struct StackedPredictions {
  BagPredictions bags;
  FoldPlan fold_plan;
  FirstStageConfig first_stage;
  std::uint64_t seed = 0;
};

// Which trained regressor predicts instances of held-out bags.
enum class HeldoutModel {
  final_retrain,  // one model on all training bags
  fold_average,   // mean of the fold models' predictions
};

inline std::string to_string(HeldoutModel m) {
  return m == HeldoutModel::final_retrain ? "final-retrain" : "fold-average";
}

inline HeldoutModel parse_heldout_model(std::string_view name) {
  if (name == "final-retrain") return HeldoutModel::final_retrain;
  if (name == "fold-average") return HeldoutModel::fold_average;
  throw usage_error("unknown held-out model '" + std::string(name) + "'");
}

inline std::uint64_t fold_model_seed(std::uint64_t seed, std::size_t fold) {
  return derive_seed(seed, {tag("fold-model"), fold});
}

inline std::uint64_t final_model_seed(std::uint64_t seed) { return derive_seed(seed, {tag("final-model")}); }

struct StackOutput {
  StackedPredictions stacked;
  std::vector<InstanceRegressor> fold_models;
};

// For each fold k, trains on the bags of every other fold and predicts the
// instances of fold k. Fold trainings are independent; each writes only its
// own bags' slots.
inline StackOutput stack_with_models(const Dataset& data, const FoldPlan& plan,
                                     const FirstStageConfig& config, std::uint64_t seed,
                                     unsigned threads = 1) {
  if (plan.assignment.size() != data.size()) {
    throw usage_error("fold plan covers " + std::to_string(plan.assignment.size()) +
                      " bags, dataset has " + std::to_string(data.size()));
  }
  if (plan.num_folds < 2) throw usage_error("stacking needs at least 2 folds");

  StackOutput out;
  out.stacked.fold_plan = plan;
  out.stacked.first_stage = config;
  out.stacked.seed = seed;
  out.stacked.bags.ids.reserve(data.size());
  for (const Bag& bag : data.bags()) out.stacked.bags.ids.push_back(bag.id);
  out.stacked.bags.values.resize(data.size());
  out.fold_models.resize(plan.num_folds);

  parallel_for(plan.num_folds, threads, [&](std::size_t fold) {
    const auto heldout = plan.members(fold);
    if (heldout.empty()) throw numeric_error("fold " + std::to_string(fold) + " has no bags");
    const auto training = plan.complement(fold);
    with_context("fold " + std::to_string(fold), [&] {
      out.fold_models[fold] = train_first_stage(instance_pairs(data, training), config,
                                                fold_model_seed(seed, fold));
    });
    for (std::size_t i : heldout) {
      const Bag& bag = data[i];
      auto& slot = out.stacked.bags.values[i];
      slot.resize(bag.size());
      for (std::size_t l = 0; l < bag.size(); ++l) {
        slot[l] = predict_instance(out.fold_models[fold], bag.instance(l));
      }
    }
  });
  return out;
}

inline StackedPredictions stack(const Dataset& data, const FoldPlan& plan, const FirstStageConfig& config,
                                std::uint64_t seed, unsigned threads = 1) {
  return stack_with_models(data, plan, config, seed, threads).stacked;
}

inline InstanceRegressor train_final_model(const Dataset& data, const FirstStageConfig& config,
                                           std::uint64_t seed) {
  return with_context("final model", [&] {
    return train_first_stage(instance_pairs(data), config, final_model_seed(seed));
  });
}

// Held-out instance predictions averaged over the fold models.
inline std::vector<std::vector<double>> predict_bags_fold_average(
    const std::vector<InstanceRegressor>& models, const Dataset& data) {
  std::vector<std::vector<double>> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Bag& bag = data[i];
    out[i].assign(bag.size(), 0.0);
    for (std::size_t l = 0; l < bag.size(); ++l) {
      double sum = 0.0;
      for (const auto& m : models) sum += predict_instance(m, bag.instance(l));
      out[i][l] = sum / static_cast<double>(models.size());
    }
  }
  return out;
}

// ----------------------------------------------------------------------------
// `bag_id,instance_index,prediction` audit format

inline void write_bag_predictions_csv(std::ostream& out, const BagPredictions& preds) {
  out << "bag_id,instance_index,prediction\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t l = 0; l < preds.values[i].size(); ++l) {
      out << preds.ids[i] << ',' << l << ',' << format_double(preds.values[i][l]) << '\n';
    }
  }
}

inline BagPredictions read_bag_predictions_csv(std::istream& in, const std::string& source = "<stream>") {
  auto fail = [&](std::size_t line_no, const std::string& msg) {
    return parse_error(source + ":" + std::to_string(line_no) + ": " + msg);
  };
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw fail(1, "missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "bag_id,instance_index,prediction") {
    throw fail(1, "header must be 'bag_id,instance_index,prediction'");
  }

  BagPredictions preds;
  std::unordered_map<std::string, std::size_t> index_of;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_row(line);
    if (fields.size() != 3) throw fail(line_no, "expected 3 fields");
    double index = 0.0;
    double value = 0.0;
    if (!detail::parse_double(fields[1], index)) throw fail(line_no, "bad instance_index");
    if (!detail::parse_double(fields[2], value) || !std::isfinite(value)) {
      throw fail(line_no, "prediction is not a finite number");
    }
    auto [it, inserted] = index_of.emplace(std::string(fields[0]), preds.size());
    if (inserted) {
      preds.ids.emplace_back(fields[0]);
      preds.values.emplace_back();
    }
    auto& list = preds.values[it->second];
    if (index != static_cast<double>(list.size())) {
      throw fail(line_no, "instance_index out of sequence for bag '" + std::string(fields[0]) + "'");
    }
    list.push_back(value);
  }
  return preds;
}

// Reorders parsed predictions to the dataset's bag order and checks that each
// bag has one prediction per instance.
inline BagPredictions align_to_dataset(const BagPredictions& preds, const Dataset& data) {
  std::unordered_map<std::string_view, std::size_t> index_of;
  for (std::size_t i = 0; i < preds.size(); ++i) index_of.emplace(preds.ids[i], i);
  if (preds.size() != data.size()) {
    throw usage_error("predictions cover " + std::to_string(preds.size()) + " bags, dataset has " +
                      std::to_string(data.size()));
  }
  BagPredictions out;
  for (const Bag& bag : data.bags()) {
    const auto it = index_of.find(bag.id);
    if (it == index_of.end()) throw usage_error("no predictions for bag '" + bag.id + "'");
    if (preds.values[it->second].size() != bag.size()) {
      throw usage_error("bag '" + bag.id + "' has " + std::to_string(bag.size()) + " instances but " +
                        std::to_string(preds.values[it->second].size()) + " predictions");
    }
    out.ids.push_back(bag.id);
    out.values.push_back(preds.values[it->second]);
  }
  return out;
}

}  // namespace kmemir
