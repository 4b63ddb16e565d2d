#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kmemir/baseline.hpp"
#include "kmemir/data.hpp"
#include "kmemir/error.hpp"
#include "kmemir/kernels.hpp"
#include "kmemir/krr.hpp"
#include "kmemir/parallel.hpp"
#include "kmemir/random.hpp"

namespace kmemir {

inline double rmse(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.size() != labels.size()) {
    throw usage_error("rmse: " + std::to_string(predictions.size()) + " predictions vs " +
                      std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) throw usage_error("rmse of an empty vector");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - labels[i];
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(predictions.size()));
}

inline double rmse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& labels) {
  return rmse(std::span<const double>(predictions.data(), static_cast<std::size_t>(predictions.size())),
              std::span<const double>(labels.data(), static_cast<std::size_t>(labels.size())));
}

// Repeated k-fold cross-validation over bags.
struct CvProtocol {
  std::size_t outer_folds = 5;
  std::size_t repetitions = 10;
  std::uint64_t master_seed = 0;

  void validate() const {
    if (outer_folds < 2) throw usage_error("outer_folds must be at least 2");
    if (repetitions < 1) throw usage_error("repetitions must be at least 1");
  }
};

inline void to_json(nlohmann::json& j, const CvProtocol& p) {
  j = {{"outer_folds", p.outer_folds}, {"repetitions", p.repetitions}, {"master_seed", p.master_seed}};
}

enum class LossScale { raw, x100 };

inline std::string to_string(LossScale s) { return s == LossScale::raw ? "raw" : "x100"; }

inline LossScale parse_loss_scale(std::string_view name) {
  if (name == "raw") return LossScale::raw;
  if (name == "x100") return LossScale::x100;
  throw usage_error("unknown loss scale '" + std::string(name) + "'");
}

inline double scale_factor(LossScale s) { return s == LossScale::raw ? 1.0 : 100.0; }

struct CvResult {
  std::string algorithm;
  Eigen::MatrixXd per_evaluation_rmse;  // repetitions x outer_folds, raw units
  double mean_rmse = 0.0;
  nlohmann::json config_snapshot;
  LossScale loss_scale = LossScale::raw;

  double reported_mean() const { return mean_rmse * scale_factor(loss_scale); }
};

inline constexpr const char* kCvResultSchema = "kmemir.cv_result/1";

inline nlohmann::json result_to_json(const CvResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.per_evaluation_rmse.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index f = 0; f < r.per_evaluation_rmse.cols(); ++f) row.push_back(r.per_evaluation_rmse(i, f));
    rows.push_back(row);
  }
  return {{"schema", kCvResultSchema},
          {"algorithm", r.algorithm},
          {"config", r.config_snapshot},
          {"loss_scale", to_string(r.loss_scale)},
          {"per_evaluation_rmse", rows},
          {"mean_rmse", r.mean_rmse},
          {"reported_mean_rmse", r.reported_mean()}};
}

inline Eigen::MatrixXd matrix_rows_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

// ----------------------------------------------------------------------------
// Algorithms under evaluation

// (train, held-out, seed) -> one prediction per held-out bag.
using BagRegressor = std::function<Eigen::VectorXd(const Dataset&, const Dataset&, std::uint64_t)>;

enum class AlgorithmKind { instance_mean, instance_median, kme_rbf, kme_inv, label_mean };

inline std::string to_string(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::instance_mean: return "instance-mean";
    case AlgorithmKind::instance_median: return "instance-median";
    case AlgorithmKind::kme_rbf: return "kme-rbf";
    case AlgorithmKind::kme_inv: return "kme-inv";
    case AlgorithmKind::label_mean: return "label-mean";
  }
  return "?";
}

inline AlgorithmKind parse_algorithm(std::string_view name) {
  for (auto k : {AlgorithmKind::instance_mean, AlgorithmKind::instance_median, AlgorithmKind::kme_rbf,
                 AlgorithmKind::kme_inv, AlgorithmKind::label_mean}) {
    if (name == to_string(k)) return k;
  }
  throw usage_error("unknown algorithm '" + std::string(name) + "'");
}

inline std::string display_name(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::instance_mean: return "Instance-MIR (mean)";
    case AlgorithmKind::instance_median: return "Instance-MIR (median)";
    case AlgorithmKind::kme_rbf: return "Instance-kme-MIR (RBF)";
    case AlgorithmKind::kme_inv: return "Instance-kme-MIR (INV)";
    case AlgorithmKind::label_mean: return "Training label mean";
  }
  return "?";
}

inline bool is_kme(AlgorithmKind k) { return k == AlgorithmKind::kme_rbf || k == AlgorithmKind::kme_inv; }

struct AlgorithmSpec {
  AlgorithmKind kind = AlgorithmKind::kme_rbf;
  PipelineConfig pipeline;
  double theta = 10.0;
  double lambda = 1e-3;

  KernelConfig kernel() const {
    return {kind == AlgorithmKind::kme_inv ? KernelKind::inv : KernelKind::rbf, theta};
  }

  nlohmann::json snapshot() const {
    nlohmann::json j = {{"algorithm", to_string(kind)}};
    if (kind == AlgorithmKind::label_mean) return j;
    j["first_stage"] = first_stage_to_json(pipeline.first_stage);
    if (is_kme(kind)) {
      j["stacking_folds"] = pipeline.stacking_folds;
      j["heldout_model"] = to_string(pipeline.heldout_model);
      j["kernel"] = kernel();
      j["lambda"] = lambda;
    }
    return j;
  }

  BagRegressor runner() const {
    switch (kind) {
      case AlgorithmKind::label_mean:
        return [](const Dataset& train, const Dataset& heldout, std::uint64_t) {
          return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(heldout.size()), train.labels().mean()).eval();
        };
      case AlgorithmKind::instance_mean:
      case AlgorithmKind::instance_median: {
        const Aggregator agg = kind == AlgorithmKind::instance_mean ? Aggregator::mean : Aggregator::median;
        return [cfg = pipeline.first_stage, agg](const Dataset& train, const Dataset& heldout, std::uint64_t seed) {
          return run_instance_mir(train, heldout, cfg, agg, seed);
        };
      }
      case AlgorithmKind::kme_rbf:
      case AlgorithmKind::kme_inv:
        return [cfg = pipeline, k = kernel(), lambda = lambda](const Dataset& train, const Dataset& heldout,
                                                                std::uint64_t seed) {
          return run_pipeline(train, heldout, cfg, k, lambda, seed);
        };
    }
    throw usage_error("unsupported algorithm");
  }
};

// Outer folds for one repetition.
inline FoldPlan outer_plan(const Dataset& data, const CvProtocol& protocol, std::size_t repetition) {
  return make_folds(data, static_cast<std::int64_t>(protocol.outer_folds),
                    derive_seed(protocol.master_seed, {tag("outer-folds"), repetition}));
}

inline std::uint64_t evaluation_seed(const CvProtocol& protocol, std::size_t repetition, std::size_t fold) {
  return derive_seed(protocol.master_seed, {tag("evaluation"), repetition, fold});
}

namespace detail {

inline void require_foldable(const Dataset& data, const CvProtocol& protocol) {
  protocol.validate();
  if (data.size() < protocol.outer_folds) {
    throw usage_error("cross-validation needs at least " + std::to_string(protocol.outer_folds) +
                      " bags, dataset has " + std::to_string(data.size()));
  }
}

inline std::string cell_label(std::size_t repetition, std::size_t fold) {
  return "repetition " + std::to_string(repetition) + ", fold " + std::to_string(fold);
}

}  // namespace detail

// Every (repetition, fold) evaluation is an independent job seeded from its
// coordinates, so results do not depend on `threads`.
inline CvResult cross_validate(const Dataset& data, const BagRegressor& algorithm, const CvProtocol& protocol,
                               std::string name = "custom", nlohmann::json snapshot = {},
                               LossScale loss_scale = LossScale::raw, unsigned threads = 1) {
  detail::require_foldable(data, protocol);
  const std::size_t reps = protocol.repetitions;
  const std::size_t folds = protocol.outer_folds;
  std::vector<FoldPlan> plans;
  for (std::size_t r = 0; r < reps; ++r) plans.push_back(outer_plan(data, protocol, r));

  CvResult result{std::move(name), Eigen::MatrixXd(static_cast<Eigen::Index>(reps), static_cast<Eigen::Index>(folds)),
                  0.0, std::move(snapshot), loss_scale};
  parallel_for(reps * folds, threads, [&](std::size_t job) {
    const std::size_t r = job / folds;
    const std::size_t f = job % folds;
    with_context(detail::cell_label(r, f), [&] {
      const Dataset train = data.subset(plans[r].complement(f));
      const Dataset heldout = data.subset(plans[r].members(f));
      const Eigen::VectorXd predictions = algorithm(train, heldout, evaluation_seed(protocol, r, f));
      result.per_evaluation_rmse(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)) =
          rmse(predictions, heldout.labels());
    });
  });
  result.mean_rmse = result.per_evaluation_rmse.mean();
  result.config_snapshot["protocol"] = protocol;
  return result;
}

inline CvResult cross_validate(const Dataset& data, const AlgorithmSpec& spec, const CvProtocol& protocol,
                               LossScale loss_scale = LossScale::raw, unsigned threads = 1) {
  return cross_validate(data, spec.runner(), protocol, to_string(spec.kind), spec.snapshot(), loss_scale, threads);
}

// ----------------------------------------------------------------------------
// Hyperparameter grid over (theta, lambda)

struct GridSpec {
  std::vector<double> thetas;
  std::vector<double> lambdas;

  // theta in {10, 20, ..., 140}, lambda in {1e-1, ..., 1e-16}.
  static GridSpec defaults() {
    GridSpec g;
    for (int t = 10; t <= 140; t += 10) g.thetas.push_back(t);
    g.lambdas = {1e-1, 1e-2, 1e-3, 1e-4,  1e-5,  1e-6,  1e-7,  1e-8,
                 1e-9, 1e-10, 1e-11, 1e-12, 1e-13, 1e-14, 1e-15, 1e-16};
    return g;
  }

  void validate() const {
    if (thetas.empty() || lambdas.empty()) throw usage_error("grid needs at least one theta and one lambda");
    for (double t : thetas) {
      if (!(t > 0.0) || !std::isfinite(t)) throw usage_error("grid thetas must be positive");
    }
    for (double l : lambdas) {
      if (!(l >= 0.0) || !std::isfinite(l)) throw usage_error("grid lambdas must be >= 0");
    }
  }

  std::size_t size() const { return thetas.size() * lambdas.size(); }
};

struct GridCell {
  double theta = 0.0;
  double lambda = 0.0;
  std::optional<CvResult> result;  // empty when the cell failed
  std::string error;

  bool ok() const { return result.has_value(); }
};

struct GridResult {
  std::vector<GridCell> cells;  // theta-major, in grid order
  std::optional<std::size_t> best;

  // False when the search stopped before evaluating every cell.
  bool complete() const {
    return std::all_of(cells.begin(), cells.end(), [](const GridCell& c) { return c.ok() || !c.error.empty(); });
  }

  const GridCell& best_cell() const {
    if (!best) throw numeric_error("every grid cell failed");
    return cells[*best];
  }
};

struct GridHooks {
  // Cells already evaluated (e.g. recovered from a ledger); they are reused
  // as-is instead of recomputed.
  std::vector<GridCell> completed;
  // Called once per newly evaluated cell.
  std::function<void(const GridCell&)> on_cell;
  // Stop after this many new cells (0 = no limit); used to simulate interruption.
  std::size_t max_new_cells = 0;
};

// Smallest mean RMSE; ties go to the smaller lambda, then the smaller theta.
inline std::optional<std::size_t> grid_argmin(const std::vector<GridCell>& cells) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].ok()) continue;
    if (!best) {
      best = i;
      continue;
    }
    const GridCell& a = cells[i];
    const GridCell& b = cells[*best];
    const auto key_a = std::make_tuple(a.result->mean_rmse, a.lambda, a.theta);
    const auto key_b = std::make_tuple(b.result->mean_rmse, b.lambda, b.theta);
    if (key_a < key_b) best = i;
  }
  return best;
}

// Cross-validates every (theta, lambda) pair of a kme algorithm. The first
// stage depends on neither hyperparameter, so it runs once per (repetition,
// fold); the Gram matrices are then shared across lambdas.
inline GridResult grid_search(const Dataset& data, const GridSpec& grid, const AlgorithmSpec& base,
                              const CvProtocol& protocol, LossScale loss_scale = LossScale::raw,
                              unsigned threads = 1, const GridHooks& hooks = {}) {
  if (!is_kme(base.kind)) throw usage_error("grid search applies to kme algorithms only");
  grid.validate();
  detail::require_foldable(data, protocol);
  const std::size_t reps = protocol.repetitions;
  const std::size_t folds = protocol.outer_folds;
  const std::size_t jobs = reps * folds;
  const std::size_t num_lambdas = grid.lambdas.size();

  GridResult out;
  out.cells.resize(grid.size());
  std::vector<bool> done(grid.size(), false);
  for (std::size_t t = 0; t < grid.thetas.size(); ++t) {
    for (std::size_t l = 0; l < num_lambdas; ++l) {
      GridCell& cell = out.cells[t * num_lambdas + l];
      cell.theta = grid.thetas[t];
      cell.lambda = grid.lambdas[l];
      for (const GridCell& prior : hooks.completed) {
        if (prior.theta == cell.theta && prior.lambda == cell.lambda) {
          cell = prior;
          done[t * num_lambdas + l] = true;
        }
      }
    }
  }
  const bool all_done = std::all_of(done.begin(), done.end(), [](bool b) { return b; });

  std::vector<std::optional<FirstStageOutput>> first(jobs);
  std::vector<Eigen::VectorXd> heldout_labels(jobs);
  if (!all_done) {
    std::vector<FoldPlan> plans;
    for (std::size_t r = 0; r < reps; ++r) plans.push_back(outer_plan(data, protocol, r));
    parallel_for(jobs, threads, [&](std::size_t job) {
      const std::size_t r = job / folds;
      const std::size_t f = job % folds;
      with_context(detail::cell_label(r, f), [&] {
        const Dataset train = data.subset(plans[r].complement(f));
        const Dataset heldout = data.subset(plans[r].members(f));
        heldout_labels[job] = heldout.labels();
        first[job] = run_first_stage(train, heldout, base.pipeline, evaluation_seed(protocol, r, f));
      });
    });
  }

  std::size_t new_cells = 0;
  for (std::size_t t = 0; t < grid.thetas.size(); ++t) {
    std::vector<std::size_t> pending;
    for (std::size_t l = 0; l < num_lambdas; ++l) {
      if (!done[t * num_lambdas + l]) pending.push_back(l);
    }
    if (pending.empty()) continue;
    if (hooks.max_new_cells && new_cells >= hooks.max_new_cells) break;

    AlgorithmSpec spec = base;
    spec.theta = grid.thetas[t];
    const KernelConfig kernel = spec.kernel();
    kernel.validate();

    // rmse[l][job], or an error message per (l, job)
    std::vector<std::vector<double>> scores(num_lambdas, std::vector<double>(jobs, 0.0));
    std::vector<std::vector<std::string>> errors(num_lambdas, std::vector<std::string>(jobs));
    parallel_for(jobs, threads, [&](std::size_t job) {
      const FirstStageOutput& fs = *first[job];
      const Eigen::MatrixXd k_train = gram_symmetric(kernel, fs.train.values).values;
      const Eigen::MatrixXd k_val = gram_between(kernel, fs.train.values, fs.heldout).values;
      for (std::size_t l : pending) {
        try {
          const RidgeSolution sol = solve_regularized(k_train, fs.train_labels, grid.lambdas[l]);
          scores[l][job] = rmse(predict_from_gram(sol.alpha, k_val), heldout_labels[job]);
        } catch (const Error& e) {
          errors[l][job] = detail::cell_label(job / folds, job % folds) + ": " + e.what();
        }
      }
    });

    for (std::size_t l : pending) {
      if (hooks.max_new_cells && new_cells >= hooks.max_new_cells) break;
      GridCell& cell = out.cells[t * num_lambdas + l];
      const auto failed = std::find_if(errors[l].begin(), errors[l].end(),
                                       [](const std::string& s) { return !s.empty(); });
      if (failed != errors[l].end()) {
        cell.error = *failed;
      } else {
        spec.lambda = grid.lambdas[l];
        CvResult res{to_string(spec.kind),
                     Eigen::MatrixXd(static_cast<Eigen::Index>(reps), static_cast<Eigen::Index>(folds)), 0.0,
                     spec.snapshot(), loss_scale};
        for (std::size_t job = 0; job < jobs; ++job) {
          res.per_evaluation_rmse(static_cast<Eigen::Index>(job / folds), static_cast<Eigen::Index>(job % folds)) =
              scores[l][job];
        }
        res.mean_rmse = res.per_evaluation_rmse.mean();
        res.config_snapshot["protocol"] = protocol;
        cell.result = std::move(res);
      }
      done[t * num_lambdas + l] = true;
      ++new_cells;
      if (hooks.on_cell) hooks.on_cell(cell);
    }
  }

  if (std::all_of(done.begin(), done.end(), [](bool b) { return b; })) out.best = grid_argmin(out.cells);
  return out;
}

inline nlohmann::json cell_to_json(const GridCell& cell) {
  nlohmann::json j = {{"theta", cell.theta}, {"lambda", cell.lambda}};
  if (cell.ok()) {
    j["result"] = result_to_json(*cell.result);
  } else {
    j["error"] = cell.error;
  }
  return j;
}

inline GridCell cell_from_json(const nlohmann::json& j) {
  GridCell cell;
  j.at("theta").get_to(cell.theta);
  j.at("lambda").get_to(cell.lambda);
  if (j.contains("result")) {
    const auto& r = j.at("result");
    CvResult res;
    res.algorithm = r.at("algorithm").get<std::string>();
    res.config_snapshot = r.at("config");
    res.loss_scale = parse_loss_scale(r.at("loss_scale").get<std::string>());
    res.per_evaluation_rmse = matrix_rows_from_json(r.at("per_evaluation_rmse"));
    res.mean_rmse = r.at("mean_rmse").get<double>();
    cell.result = std::move(res);
  } else {
    cell.error = j.at("error").get<std::string>();
  }
  return cell;
}

// `theta,lambda,mean_rmse,reported_mean_rmse,status`; failed cells have empty scores.
inline void write_grid_csv(std::ostream& out, const GridResult& grid) {
  out << "theta,lambda,mean_rmse,reported_mean_rmse,status\n";
  for (const GridCell& cell : grid.cells) {
    out << format_double(cell.theta) << ',' << format_double(cell.lambda) << ',';
    if (cell.ok()) {
      out << format_double(cell.result->mean_rmse) << ',' << format_double(cell.result->reported_mean()) << ",ok\n";
    } else {
      out << ",,failed\n";
    }
  }
}

struct Dispersion {
  std::size_t evaluated = 0;
  std::size_t failed = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;
};

// Spread of mean RMSE over the successful cells of a grid.
inline Dispersion grid_dispersion(const GridResult& grid) {
  Dispersion d;
  std::vector<double> values;
  for (const GridCell& cell : grid.cells) {
    if (cell.ok()) {
      values.push_back(cell.result->mean_rmse);
    } else {
      ++d.failed;
    }
  }
  d.evaluated = values.size();
  if (values.empty()) return d;
  std::sort(values.begin(), values.end());
  d.min = values.front();
  d.max = values.back();
  double sum = 0.0;
  for (double v : values) sum += v;
  d.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - d.mean) * (v - d.mean);
  d.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  d.median = aggregate(values, Aggregator::median);
  return d;
}

inline nlohmann::json dispersion_to_json(const Dispersion& d) {
  return {{"evaluated", d.evaluated}, {"failed", d.failed}, {"min", d.min},     {"max", d.max},
          {"mean", d.mean},           {"median", d.median}, {"stddev", d.stddev}};
}

// Fixed-width comparison table, one row per result.
inline std::string render_table(const std::vector<CvResult>& results) {
  std::ostringstream out;
  out << std::left << std::setw(28) << "Algorithm" << std::right << std::setw(14) << "mean RMSE"
      << std::setw(14) << "reported" << std::setw(8) << "scale" << '\n';
  out << std::string(64, '-') << '\n';
  for (const CvResult& r : results) {
    std::string name = r.algorithm;
    try {
      name = display_name(parse_algorithm(r.algorithm));
    } catch (const Error&) {
    }
    out << std::left << std::setw(28) << name << std::right << std::fixed << std::setprecision(6)
        << std::setw(14) << r.mean_rmse << std::setw(14) << r.reported_mean() << std::setw(8)
        << to_string(r.loss_scale) << '\n';
  }
  return out.str();
}

}  // namespace kmemir
