#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "kmemir/data.hpp"
#include "kmemir/error.hpp"
#include "kmemir/kernels.hpp"
#include "kmemir/stacking.hpp"

namespace kmemir {

// ----------------------------------------------------------------------------
// Regularized linear solve (K + lambda I) alpha = y

struct RidgeSolution {
  Eigen::VectorXd alpha;
  double jitter = 0.0;       // diagonal shift of the preconditioning factor
  std::string method;        // "cholesky", "lu" or "cholesky+jitter"
  double residual = 0.0;     // |(K + lambda I) alpha - y|_inf
};

inline double solve_tolerance(const Eigen::VectorXd& y) {
  return 1e-8 * std::max(1.0, y.lpNorm<Eigen::Infinity>());
}

namespace detail {

template <typename Factorization>
Eigen::VectorXd solve_refined(const Factorization& f, const Eigen::MatrixXd& a, const Eigen::VectorXd& y) {
  Eigen::VectorXd x = f.solve(y);
  for (int step = 0; step < 2 && x.allFinite(); ++step) x += f.solve(y - a * x);
  return x;
}

inline double residual_inf(const Eigen::MatrixXd& a, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (!x.allFinite()) return std::numeric_limits<double>::infinity();
  return (a * x - y).lpNorm<Eigen::Infinity>();
}

}  // namespace detail

// Cholesky first. If that fails or misses the residual tolerance, partial-pivot
// LU on the same system (covers indefinite Gram matrices). Last, Cholesky with
// a diagonal jitter of 1e-12 * trace(K)/B escalated by 10x up to 1e-6.
inline RidgeSolution solve_regularized(const Eigen::MatrixXd& gram, const Eigen::VectorXd& y, double lambda) {
  if (gram.rows() != gram.cols() || gram.rows() != y.size()) {
    throw usage_error("Gram matrix and label vector sizes disagree");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw usage_error("lambda must be finite and >= 0");
  const Eigen::Index n = gram.rows();
  const double tol = solve_tolerance(y);

  Eigen::MatrixXd a = gram;
  a.diagonal().array() += lambda;

  const Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) {
    Eigen::VectorXd x = detail::solve_refined(llt, a, y);
    const double r = detail::residual_inf(a, x, y);
    if (r < tol) return {std::move(x), 0.0, "cholesky", r};
  }

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  {
    Eigen::VectorXd x = detail::solve_refined(lu, a, y);
    const double r = detail::residual_inf(a, x, y);
    if (r < tol) return {std::move(x), 0.0, "lu", r};
  }

  const double trace = gram.trace();
  const double base = trace > 0.0 ? trace / static_cast<double>(n) : 1.0;
  double best = std::numeric_limits<double>::infinity();
  for (double factor = 1e-12; factor <= 1e-6 * 1.000001; factor *= 10.0) {
    const double jitter = factor * base;
    Eigen::MatrixXd aj = a;
    aj.diagonal().array() += jitter;
    const Eigen::LLT<Eigen::MatrixXd> jllt(aj);
    if (jllt.info() != Eigen::Success) continue;
    // The jittered factor only preconditions; refinement and the acceptance
    // check use the unjittered system.
    Eigen::VectorXd x = detail::solve_refined(jllt, a, y);
    const double r = detail::residual_inf(a, x, y);
    if (r < tol) return {std::move(x), jitter, "cholesky+jitter", r};
    best = std::min(best, r);
  }
  throw numeric_error("kernel ridge system is singular or too ill-conditioned at lambda=" +
                      format_double(lambda) + " (best residual " + format_double(best) + ")");
}

// ----------------------------------------------------------------------------
// Kernel ridge regression on mean embeddings of per-bag predictions

template <ScalarKernel Kernel = KernelConfig>
struct KmeKrrModel {
  BagPredictions train;
  Eigen::VectorXd labels;
  Kernel kernel;
  double lambda = 0.0;
  RidgeSolution solution;

  const Eigen::VectorXd& alpha() const { return solution.alpha; }
};

template <ScalarKernel Kernel>
KmeKrrModel<Kernel> fit(const BagPredictions& train, const Eigen::VectorXd& labels, const Kernel& kernel,
                        double lambda, unsigned threads = 1) {
  if constexpr (requires { kernel.validate(); }) kernel.validate();
  if (train.size() == 0) throw usage_error("no training bags");
  if (static_cast<Eigen::Index>(train.size()) != labels.size()) {
    throw usage_error("training predictions cover " + std::to_string(train.size()) + " bags but " +
                      std::to_string(labels.size()) + " labels were given");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw usage_error("lambda must be finite and >= 0");

  KmeKrrModel<Kernel> model{train, labels, kernel, lambda, {}};
  const GramMatrix k_train = gram_symmetric(kernel, train.values, threads);
  model.solution = solve_regularized(k_train.values, labels, lambda);
  return model;
}

template <ScalarKernel Kernel>
KmeKrrModel<Kernel> fit(const StackedPredictions& stacked, const Dataset& data, const Kernel& kernel,
                        double lambda, unsigned threads = 1) {
  return fit(align_to_dataset(stacked.bags, data), data.labels(), kernel, lambda, threads);
}

// One prediction per held-out bag: sum_i alpha_i K(i, j).
template <ScalarKernel Kernel>
Eigen::VectorXd predict(const KmeKrrModel<Kernel>& model, const std::vector<std::vector<double>>& heldout,
                        unsigned threads = 1) {
  if (heldout.empty()) return Eigen::VectorXd(0);
  const GramMatrix k_val = gram_between(model.kernel, model.train.values, heldout, threads);
  return k_val.values.transpose() * model.alpha();
}

// The same prediction from a precomputed train x held-out Gram matrix.
inline Eigen::VectorXd predict_from_gram(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& k_val) {
  return k_val.transpose() * alpha;
}

inline constexpr const char* kKmeKrrSchema = "kmemir.kme_krr_model/1";

inline nlohmann::json model_to_json(const KmeKrrModel<KernelConfig>& m) {
  return {{"schema", kKmeKrrSchema},
          {"kernel", m.kernel},
          {"lambda", m.lambda},
          {"jitter", m.solution.jitter},
          {"solver", m.solution.method},
          {"residual", m.solution.residual},
          {"train_bag_ids", m.train.ids},
          {"train_predictions", m.train.values},
          {"labels", std::vector<double>(m.labels.data(), m.labels.data() + m.labels.size())},
          {"alpha", std::vector<double>(m.alpha().data(), m.alpha().data() + m.alpha().size())}};
}

inline KmeKrrModel<KernelConfig> kme_krr_from_json(const nlohmann::json& j) {
  if (j.at("schema") != kKmeKrrSchema) throw parse_error("not a kme-krr model record");
  KmeKrrModel<KernelConfig> m;
  j.at("kernel").get_to(m.kernel);
  j.at("lambda").get_to(m.lambda);
  j.at("jitter").get_to(m.solution.jitter);
  j.at("solver").get_to(m.solution.method);
  j.at("residual").get_to(m.solution.residual);
  j.at("train_bag_ids").get_to(m.train.ids);
  j.at("train_predictions").get_to(m.train.values);
  const auto labels = j.at("labels").get<std::vector<double>>();
  const auto alpha = j.at("alpha").get<std::vector<double>>();
  m.labels = Eigen::Map<const Eigen::VectorXd>(labels.data(), static_cast<Eigen::Index>(labels.size()));
  m.solution.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
  if (m.alpha().size() != m.labels.size() || static_cast<Eigen::Index>(m.train.size()) != m.labels.size() ||
      m.train.values.size() != m.train.ids.size()) {
    throw parse_error("kme-krr model record has inconsistent sizes");
  }
  return m;
}

// ----------------------------------------------------------------------------
// End-to-end: stacking, embedding regression, held-out prediction

struct PipelineConfig {
  FirstStageConfig first_stage = MlpConfig{};
  std::int64_t stacking_folds = 50;
  HeldoutModel heldout_model = HeldoutModel::final_retrain;
};

inline nlohmann::json pipeline_to_json(const PipelineConfig& c) {
  return {{"first_stage", first_stage_to_json(c.first_stage)},
          {"stacking_folds", c.stacking_folds},
          {"heldout_model", to_string(c.heldout_model)}};
}

// Everything the second stage needs; independent of kernel and lambda.
struct FirstStageOutput {
  BagPredictions train;                         // out-of-fold
  Eigen::VectorXd train_labels;
  std::vector<std::vector<double>> heldout;     // from the held-out-side model
};

inline FirstStageOutput run_first_stage(const Dataset& train, const Dataset& heldout,
                                        const PipelineConfig& config, std::uint64_t seed,
                                        unsigned threads = 1) {
  if (train.dim() != heldout.dim()) {
    throw usage_error("training data has dimension " + std::to_string(train.dim()) +
                      ", held-out data has " + std::to_string(heldout.dim()));
  }
  return with_context("stacking", [&] {
    const FoldPlan plan = make_folds(train, config.stacking_folds, derive_seed(seed, {tag("stacking-folds")}));
    StackOutput stacked = stack_with_models(train, plan, config.first_stage, seed, threads);
    FirstStageOutput out{std::move(stacked.stacked.bags), train.labels(), {}};
    if (config.heldout_model == HeldoutModel::final_retrain) {
      out.heldout = predict_bags(train_final_model(train, config.first_stage, seed), heldout);
    } else {
      out.heldout = predict_bags_fold_average(stacked.fold_models, heldout);
    }
    return out;
  });
}

template <ScalarKernel Kernel>
Eigen::VectorXd run_pipeline(const Dataset& train, const Dataset& heldout, const PipelineConfig& config,
                             const Kernel& kernel, double lambda, std::uint64_t seed, unsigned threads = 1) {
  const FirstStageOutput first = run_first_stage(train, heldout, config, seed, threads);
  const auto model = with_context("kme-krr fit", [&] {
    return fit(first.train, first.train_labels, kernel, lambda, threads);
  });
  return with_context("kme-krr predict", [&] { return predict(model, first.heldout, threads); });
}

}  // namespace kmemir
