#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "kmemir/data.hpp"
#include "kmemir/error.hpp"
#include "kmemir/random.hpp"

namespace kmemir {

// Flattened (instance, bag label) pairs: the training set of an instance-level
// regressor.
struct InstanceSet {
  InstanceMatrix features;
  Eigen::VectorXd labels;

  std::size_t size() const { return static_cast<std::size_t>(labels.size()); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
};

inline InstanceSet instance_pairs(const Dataset& data, std::span<const std::size_t> bag_indices) {
  std::size_t n = 0;
  for (std::size_t i : bag_indices) n += data[i].size();
  InstanceSet set{InstanceMatrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(data.dim())),
                  Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  Eigen::Index row = 0;
  for (std::size_t i : bag_indices) {
    const Bag& bag = data[i];
    set.features.middleRows(row, bag.instances.rows()) = bag.instances;
    set.labels.segment(row, bag.instances.rows()).setConstant(bag.label);
    row += bag.instances.rows();
  }
  return set;
}

inline InstanceSet instance_pairs(const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return instance_pairs(data, all);
}

namespace detail {

// Trainers see their pairs sorted lexicographically by (features, label), so
// a fitted model does not depend on the order the pairs were supplied in.
inline InstanceSet canonical_order(const InstanceSet& set) {
  std::vector<Eigen::Index> order(set.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const Eigen::Index d = set.features.cols();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index f = 0; f < d; ++f) {
      const double xa = set.features(a, f);
      const double xb = set.features(b, f);
      if (xa != xb) return xa < xb;
    }
    return set.labels[a] < set.labels[b];
  });
  InstanceSet out{InstanceMatrix(set.features.rows(), d), Eigen::VectorXd(set.labels.size())};
  for (std::size_t r = 0; r < order.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = set.features.row(order[r]);
    out.labels[static_cast<Eigen::Index>(r)] = set.labels[order[r]];
  }
  return out;
}

inline void require_trainable(const InstanceSet& set) {
  if (set.size() == 0) throw usage_error("no training pairs");
  if (set.dim() == 0) throw usage_error("training pairs have no features");
  if (!set.features.allFinite() || !set.labels.allFinite()) {
    throw usage_error("training pairs contain non-finite values");
  }
}

}  // namespace detail

// Per-feature standardization fitted on training data. Zero-variance features
// keep scale 1.
struct FeatureScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static FeatureScaler identity(std::size_t dim) {
    return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)),
            Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim))};
  }

  static FeatureScaler fit(const InstanceMatrix& x) {
    FeatureScaler s{x.colwise().mean().transpose(), Eigen::VectorXd(x.cols())};
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
      const double var = (x.col(f).array() - s.mean[f]).square().mean();
      const double sd = std::sqrt(var);
      s.scale[f] = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  Eigen::MatrixXd transform(const InstanceMatrix& x) const {
    return ((x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
  }

  Eigen::VectorXd transform(std::span<const double> x) const {
    Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
    return ((v - mean).array() / scale.array()).matrix();
  }
};

// ----------------------------------------------------------------------------
// Single-hidden-layer network

enum class Activation { relu, tanh };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw usage_error("unknown activation '" + std::string(name) + "'");
}

struct MlpConfig {
  std::size_t hidden_units = 128;
  double learning_rate = 1e-3;
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double l2_penalty = 1e-4;
  std::uint64_t seed = 0;
  bool standardize_features = true;
  Activation activation = Activation::relu;

  void validate() const {
    if (hidden_units == 0) throw usage_error("hidden_units must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw usage_error("learning_rate must be positive");
    }
    if (epochs == 0) throw usage_error("epochs must be positive");
    if (batch_size == 0) throw usage_error("batch_size must be positive");
    if (!(l2_penalty >= 0.0) || !std::isfinite(l2_penalty)) {
      throw usage_error("l2_penalty must be >= 0");
    }
  }

  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

struct MlpParams {
  Eigen::MatrixXd hidden_weights;  // H x d
  Eigen::VectorXd hidden_bias;     // H
  Eigen::VectorXd output_weights;  // H
  double output_bias = 0.0;

  static MlpParams zeros(std::size_t dim, std::size_t hidden) {
    const auto h = static_cast<Eigen::Index>(hidden);
    return {Eigen::MatrixXd::Zero(h, static_cast<Eigen::Index>(dim)), Eigen::VectorXd::Zero(h),
            Eigen::VectorXd::Zero(h), 0.0};
  }

  // Uniform in +-1/sqrt(fan_in) for every layer.
  static MlpParams initialize(std::size_t dim, std::size_t hidden, std::uint64_t seed) {
    MlpParams p = zeros(dim, hidden);
    Rng rng(derive_seed(seed, {tag("mlp-init")}));
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(dim));
    const double out_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (Eigen::Index r = 0; r < p.hidden_weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.hidden_weights.cols(); ++c) {
        p.hidden_weights(r, c) = rng.uniform(-in_bound, in_bound);
      }
    }
    for (Eigen::Index r = 0; r < p.hidden_bias.size(); ++r) p.hidden_bias[r] = rng.uniform(-in_bound, in_bound);
    for (Eigen::Index r = 0; r < p.output_weights.size(); ++r) {
      p.output_weights[r] = rng.uniform(-out_bound, out_bound);
    }
    p.output_bias = rng.uniform(-out_bound, out_bound);
    return p;
  }

  std::size_t count() const {
    return static_cast<std::size_t>(hidden_weights.size() + hidden_bias.size() + output_weights.size() + 1);
  }

  // Order: hidden weights (row-major), hidden bias, output weights, output bias.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(count());
    for (Eigen::Index r = 0; r < hidden_weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < hidden_weights.cols(); ++c) out.push_back(hidden_weights(r, c));
    }
    out.insert(out.end(), hidden_bias.data(), hidden_bias.data() + hidden_bias.size());
    out.insert(out.end(), output_weights.data(), output_weights.data() + output_weights.size());
    out.push_back(output_bias);
    return out;
  }

  void assign(std::span<const double> flat) {
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < hidden_weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < hidden_weights.cols(); ++c) hidden_weights(r, c) = flat[k++];
    }
    for (Eigen::Index r = 0; r < hidden_bias.size(); ++r) hidden_bias[r] = flat[k++];
    for (Eigen::Index r = 0; r < output_weights.size(); ++r) output_weights[r] = flat[k++];
    output_bias = flat[k];
  }

  bool all_finite() const {
    return hidden_weights.allFinite() && hidden_bias.allFinite() && output_weights.allFinite() &&
           std::isfinite(output_bias);
  }
};

namespace detail {

inline Eigen::ArrayXXd activate(const Eigen::ArrayXXd& a, Activation act) {
  if (act == Activation::relu) return a.max(0.0);
  return a.tanh();
}

inline Eigen::ArrayXXd activation_slope(const Eigen::ArrayXXd& a, Activation act) {
  if (act == Activation::relu) return (a > 0.0).cast<double>();
  return 1.0 - a.tanh().square();
}

}  // namespace detail

struct LossGradient {
  double loss = 0.0;
  MlpParams gradient;
};

// Mean squared error over the rows of `inputs` (already standardized) plus
// l2_penalty * (|W|^2 + |v|^2), and its gradient with respect to every parameter.
inline LossGradient mlp_loss_gradient(const MlpParams& p, const Eigen::MatrixXd& inputs,
                                      const Eigen::VectorXd& labels, double l2_penalty,
                                      Activation act) {
  const double n = static_cast<double>(inputs.rows());
  const Eigen::ArrayXXd pre =
      ((inputs * p.hidden_weights.transpose()).rowwise() + p.hidden_bias.transpose()).array();
  const Eigen::MatrixXd hidden = detail::activate(pre, act).matrix();
  const Eigen::VectorXd residual =
      (hidden * p.output_weights).array() + p.output_bias - labels.array();

  LossGradient out;
  out.loss = residual.squaredNorm() / n +
             l2_penalty * (p.hidden_weights.squaredNorm() + p.output_weights.squaredNorm());

  const Eigen::VectorXd d_out = (2.0 / n) * residual;
  const Eigen::MatrixXd d_pre =
      ((d_out * p.output_weights.transpose()).array() * detail::activation_slope(pre, act)).matrix();
  out.gradient.output_weights = hidden.transpose() * d_out + 2.0 * l2_penalty * p.output_weights;
  out.gradient.output_bias = d_out.sum();
  out.gradient.hidden_weights = d_pre.transpose() * inputs + 2.0 * l2_penalty * p.hidden_weights;
  out.gradient.hidden_bias = d_pre.colwise().sum().transpose();
  return out;
}

inline double mlp_loss(const MlpParams& p, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& labels,
                       double l2_penalty, Activation act) {
  const Eigen::ArrayXXd pre =
      ((inputs * p.hidden_weights.transpose()).rowwise() + p.hidden_bias.transpose()).array();
  const Eigen::VectorXd residual =
      (detail::activate(pre, act).matrix() * p.output_weights).array() + p.output_bias - labels.array();
  return residual.squaredNorm() / static_cast<double>(inputs.rows()) +
         l2_penalty * (p.hidden_weights.squaredNorm() + p.output_weights.squaredNorm());
}

struct MlpModel {
  FeatureScaler scaler;
  MlpParams params;
  MlpConfig config;

  std::size_t dim() const { return static_cast<std::size_t>(scaler.mean.size()); }

  double predict(std::span<const double> x) const {
    if (x.size() != dim()) {
      throw usage_error("instance has dimension " + std::to_string(x.size()) + ", model expects " +
                        std::to_string(dim()));
    }
    const Eigen::VectorXd z = scaler.transform(x);
    const Eigen::ArrayXd pre = (params.hidden_weights * z + params.hidden_bias).array();
    const Eigen::VectorXd hidden =
        config.activation == Activation::relu ? pre.max(0.0).matrix().eval() : pre.tanh().matrix().eval();
    return params.output_bias + params.output_weights.dot(hidden);
  }
};

inline double predict_mlp(const MlpModel& model, std::span<const double> x) { return model.predict(x); }

// Full-batch objective after initialization and after every epoch.
struct TrainingTrace {
  std::vector<double> epoch_loss;
};

// Mini-batch gradient descent with a fixed step. Deterministic given the seed.
inline MlpModel train_mlp(const InstanceSet& pairs, const MlpConfig& config,
                          TrainingTrace* trace = nullptr) {
  config.validate();
  detail::require_trainable(pairs);
  const InstanceSet data = detail::canonical_order(pairs);
  const auto n = static_cast<Eigen::Index>(data.size());

  MlpModel model;
  model.config = config;
  model.scaler = config.standardize_features ? FeatureScaler::fit(data.features)
                                             : FeatureScaler::identity(data.dim());
  model.params = MlpParams::initialize(data.dim(), config.hidden_units, config.seed);
  const Eigen::MatrixXd inputs = model.scaler.transform(data.features);

  if (trace) {
    trace->epoch_loss.clear();
    trace->epoch_loss.push_back(
        mlp_loss(model.params, inputs, data.labels, config.l2_penalty, config.activation));
  }

  Rng rng(derive_seed(config.seed, {tag("mlp-batches")}));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = std::min<Eigen::Index>(static_cast<Eigen::Index>(config.batch_size), n);
  Eigen::MatrixXd batch_inputs(batch, inputs.cols());
  Eigen::VectorXd batch_labels(batch);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (batch < n) rng.shuffle(std::span<Eigen::Index>(order));
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index rows = std::min(batch, n - start);
      batch_inputs.resize(rows, inputs.cols());
      batch_labels.resize(rows);
      for (Eigen::Index r = 0; r < rows; ++r) {
        batch_inputs.row(r) = inputs.row(order[static_cast<std::size_t>(start + r)]);
        batch_labels[r] = data.labels[order[static_cast<std::size_t>(start + r)]];
      }
      const LossGradient lg =
          mlp_loss_gradient(model.params, batch_inputs, batch_labels, config.l2_penalty, config.activation);
      epoch_loss += lg.loss;
      model.params.hidden_weights -= config.learning_rate * lg.gradient.hidden_weights;
      model.params.hidden_bias -= config.learning_rate * lg.gradient.hidden_bias;
      model.params.output_weights -= config.learning_rate * lg.gradient.output_weights;
      model.params.output_bias -= config.learning_rate * lg.gradient.output_bias;
    }
    if (!std::isfinite(epoch_loss) || !model.params.all_finite()) {
      throw numeric_error("network training diverged at epoch " + std::to_string(epoch + 1) +
                          " (loss " + format_double(epoch_loss) + ")");
    }
    if (trace) {
      trace->epoch_loss.push_back(
          mlp_loss(model.params, inputs, data.labels, config.l2_penalty, config.activation));
    }
  }
  return model;
}

// ----------------------------------------------------------------------------
// Gradient verification

using GradientFn = std::function<LossGradient(const MlpParams&, const Eigen::MatrixXd&,
                                              const Eigen::VectorXd&, double, Activation)>;

// Largest relative disagreement between `gradient` and central finite
// differences of the training objective at `model`. Components where both
// values are exactly zero contribute 0.
inline double gradient_check(const MlpModel& model, const InstanceSet& pairs,
                             const GradientFn& gradient = mlp_loss_gradient, double step = 1e-5) {
  detail::require_trainable(pairs);
  const Eigen::MatrixXd inputs = model.scaler.transform(pairs.features);
  const MlpConfig& cfg = model.config;
  const std::vector<double> analytic =
      gradient(model.params, inputs, pairs.labels, cfg.l2_penalty, cfg.activation).gradient.flatten();

  std::vector<double> flat = model.params.flatten();
  MlpParams probe = model.params;
  double worst = 0.0;
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const double saved = flat[k];
    flat[k] = saved + step;
    probe.assign(flat);
    const double up = mlp_loss(probe, inputs, pairs.labels, cfg.l2_penalty, cfg.activation);
    flat[k] = saved - step;
    probe.assign(flat);
    const double down = mlp_loss(probe, inputs, pairs.labels, cfg.l2_penalty, cfg.activation);
    flat[k] = saved;

    const double numeric = (up - down) / (2.0 * step);
    const double diff = std::abs(analytic[k] - numeric);
    if (diff == 0.0) continue;
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-8});
    worst = std::max(worst, diff / denom);
  }
  return worst;
}

// Checks the gradient at the seeded initialization the trainer would start from.
inline double gradient_check(const MlpConfig& config, const InstanceSet& pairs) {
  config.validate();
  detail::require_trainable(pairs);
  MlpModel model;
  model.config = config;
  model.scaler = config.standardize_features ? FeatureScaler::fit(pairs.features)
                                             : FeatureScaler::identity(pairs.dim());
  model.params = MlpParams::initialize(pairs.dim(), config.hidden_units, config.seed);
  return gradient_check(model, pairs);
}

// ----------------------------------------------------------------------------
// Linear ridge regression on standardized features (unpenalized intercept)

struct RidgeConfig {
  double penalty = 1e-6;

  void validate() const {
    if (!(penalty >= 0.0) || !std::isfinite(penalty)) throw usage_error("ridge penalty must be >= 0");
  }

  friend bool operator==(const RidgeConfig&, const RidgeConfig&) = default;
};

struct RidgeModel {
  FeatureScaler scaler;
  Eigen::VectorXd weights;  // in standardized units
  double intercept = 0.0;
  double penalty = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(weights.size()); }

  // Slopes in the original feature units.
  Eigen::VectorXd coefficients() const { return (weights.array() / scaler.scale.array()).matrix(); }

  double original_intercept() const { return intercept - coefficients().dot(scaler.mean); }

  double predict(std::span<const double> x) const {
    if (x.size() != dim()) {
      throw usage_error("instance has dimension " + std::to_string(x.size()) + ", model expects " +
                        std::to_string(dim()));
    }
    return intercept + weights.dot(scaler.transform(x));
  }
};

inline RidgeModel train_ridge(const InstanceSet& pairs, double penalty) {
  RidgeConfig{penalty}.validate();
  detail::require_trainable(pairs);
  const InstanceSet data = detail::canonical_order(pairs);

  RidgeModel model;
  model.penalty = penalty;
  model.scaler = FeatureScaler::fit(data.features);
  const Eigen::MatrixXd z = model.scaler.transform(data.features);
  model.intercept = data.labels.mean();
  const Eigen::VectorXd centered = data.labels.array() - model.intercept;

  Eigen::MatrixXd normal = z.transpose() * z;
  normal.diagonal().array() += penalty;
  const Eigen::LLT<Eigen::MatrixXd> llt(normal);
  if (llt.info() != Eigen::Success) {
    throw numeric_error("ridge normal matrix is singular; use a positive penalty");
  }
  model.weights = llt.solve(z.transpose() * centered);
  if (!model.weights.allFinite()) throw numeric_error("ridge solve produced non-finite weights");
  return model;
}

inline double predict_ridge(const RidgeModel& model, std::span<const double> x) { return model.predict(x); }

// ----------------------------------------------------------------------------
// Either regressor behind one interface

using FirstStageConfig = std::variant<MlpConfig, RidgeConfig>;
using InstanceRegressor = std::variant<MlpModel, RidgeModel>;

inline InstanceRegressor train_first_stage(const InstanceSet& pairs, const FirstStageConfig& config,
                                           std::uint64_t seed) {
  if (const auto* mlp = std::get_if<MlpConfig>(&config)) {
    MlpConfig seeded = *mlp;
    seeded.seed = seed;
    return train_mlp(pairs, seeded);
  }
  return train_ridge(pairs, std::get<RidgeConfig>(config).penalty);
}

inline double predict_instance(const InstanceRegressor& model, std::span<const double> x) {
  return std::visit([&](const auto& m) { return m.predict(x); }, model);
}

// Predictions for every instance of every bag, in bag and instance order.
inline std::vector<std::vector<double>> predict_bags(const InstanceRegressor& model, const Dataset& data) {
  std::vector<std::vector<double>> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Bag& bag = data[i];
    out[i].reserve(bag.size());
    for (std::size_t l = 0; l < bag.size(); ++l) out[i].push_back(predict_instance(model, bag.instance(l)));
  }
  return out;
}

// ----------------------------------------------------------------------------
// JSON records

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) throw parse_error("ragged matrix in model record");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const MlpConfig& c) {
  j = {{"hidden_units", c.hidden_units}, {"learning_rate", c.learning_rate},
       {"epochs", c.epochs},             {"batch_size", c.batch_size},
       {"l2_penalty", c.l2_penalty},     {"seed", c.seed},
       {"standardize_features", c.standardize_features},
       {"activation", to_string(c.activation)}};
}

inline void from_json(const nlohmann::json& j, MlpConfig& c) {
  j.at("hidden_units").get_to(c.hidden_units);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("epochs").get_to(c.epochs);
  j.at("batch_size").get_to(c.batch_size);
  j.at("l2_penalty").get_to(c.l2_penalty);
  j.at("seed").get_to(c.seed);
  j.at("standardize_features").get_to(c.standardize_features);
  c.activation = parse_activation(j.at("activation").get<std::string>());
}

inline void to_json(nlohmann::json& j, const RidgeConfig& c) { j = {{"penalty", c.penalty}}; }
inline void from_json(const nlohmann::json& j, RidgeConfig& c) { j.at("penalty").get_to(c.penalty); }

inline nlohmann::json first_stage_to_json(const FirstStageConfig& config) {
  if (const auto* mlp = std::get_if<MlpConfig>(&config)) return {{"kind", "mlp"}, {"mlp", *mlp}};
  return {{"kind", "ridge"}, {"ridge", std::get<RidgeConfig>(config)}};
}

inline FirstStageConfig first_stage_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "mlp") return j.at("mlp").get<MlpConfig>();
  if (kind == "ridge") return j.at("ridge").get<RidgeConfig>();
  throw parse_error("unknown first-stage kind '" + kind + "'");
}

inline void to_json(nlohmann::json& j, const FeatureScaler& s) {
  j = {{"mean", detail::vector_to_json(s.mean)}, {"scale", detail::vector_to_json(s.scale)}};
}

inline void from_json(const nlohmann::json& j, FeatureScaler& s) {
  s.mean = detail::vector_from_json(j.at("mean"));
  s.scale = detail::vector_from_json(j.at("scale"));
}

inline constexpr const char* kMlpSchema = "kmemir.mlp_model/1";
inline constexpr const char* kRidgeSchema = "kmemir.ridge_model/1";

inline void to_json(nlohmann::json& j, const MlpModel& m) {
  j = {{"schema", kMlpSchema},
       {"config", m.config},
       {"scaler", m.scaler},
       {"hidden_weights", detail::matrix_to_json(m.params.hidden_weights)},
       {"hidden_bias", detail::vector_to_json(m.params.hidden_bias)},
       {"output_weights", detail::vector_to_json(m.params.output_weights)},
       {"output_bias", m.params.output_bias}};
}

inline void from_json(const nlohmann::json& j, MlpModel& m) {
  if (j.at("schema") != kMlpSchema) throw parse_error("not an MLP model record");
  j.at("config").get_to(m.config);
  j.at("scaler").get_to(m.scaler);
  m.params.hidden_weights = detail::matrix_from_json(j.at("hidden_weights"));
  m.params.hidden_bias = detail::vector_from_json(j.at("hidden_bias"));
  m.params.output_weights = detail::vector_from_json(j.at("output_weights"));
  m.params.output_bias = j.at("output_bias").get<double>();
}

inline void to_json(nlohmann::json& j, const RidgeModel& m) {
  j = {{"schema", kRidgeSchema},
       {"penalty", m.penalty},
       {"scaler", m.scaler},
       {"weights", detail::vector_to_json(m.weights)},
       {"intercept", m.intercept}};
}

inline void from_json(const nlohmann::json& j, RidgeModel& m) {
  if (j.at("schema") != kRidgeSchema) throw parse_error("not a ridge model record");
  j.at("penalty").get_to(m.penalty);
  j.at("scaler").get_to(m.scaler);
  m.weights = detail::vector_from_json(j.at("weights"));
  j.at("intercept").get_to(m.intercept);
}

inline nlohmann::json regressor_to_json(const InstanceRegressor& model) {
  return std::visit([](const auto& m) { return nlohmann::json(m); }, model);
}

}  // namespace kmemir
