#pragma once

#include <Eigen/Core>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kmemir/error.hpp"
#include "kmemir/random.hpp"

namespace kmemir {

// Instances of one bag, one row per instance.
using InstanceMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Bag {
  std::string id;
  double label = 0.0;
  InstanceMatrix instances;

  std::size_t size() const { return static_cast<std::size_t>(instances.rows()); }
  std::span<const double> instance(std::size_t l) const {
    return {instances.data() + l * instances.cols(), static_cast<std::size_t>(instances.cols())};
  }

  friend bool operator==(const Bag& a, const Bag& b) {
    return a.id == b.id && a.label == b.label && a.instances.rows() == b.instances.rows() &&
           a.instances.cols() == b.instances.cols() && a.instances == b.instances;
  }
};

// An ordered, validated collection of bags sharing one feature dimension.
class Dataset {
 public:
  Dataset(std::vector<Bag> bags, std::size_t dim) : bags_(std::move(bags)), dim_(dim) {
    if (bags_.empty()) throw usage_error("dataset has no bags");
    if (dim_ == 0) throw usage_error("dataset feature dimension must be positive");
    std::unordered_map<std::string_view, std::size_t> seen;
    for (std::size_t i = 0; i < bags_.size(); ++i) {
      const Bag& bag = bags_[i];
      if (!seen.emplace(bag.id, i).second) throw usage_error("duplicate bag id '" + bag.id + "'");
      if (bag.size() == 0) throw usage_error("bag '" + bag.id + "' has no instances");
      if (static_cast<std::size_t>(bag.instances.cols()) != dim_) {
        throw usage_error("bag '" + bag.id + "' has dimension " +
                          std::to_string(bag.instances.cols()) + ", expected " +
                          std::to_string(dim_));
      }
      if (!std::isfinite(bag.label)) throw usage_error("bag '" + bag.id + "' has a non-finite label");
      if (!bag.instances.allFinite()) {
        throw usage_error("bag '" + bag.id + "' has non-finite features");
      }
    }
  }

  const std::vector<Bag>& bags() const { return bags_; }
  const Bag& operator[](std::size_t i) const { return bags_[i]; }
  std::size_t size() const { return bags_.size(); }
  std::size_t dim() const { return dim_; }

  std::size_t total_instances() const {
    std::size_t n = 0;
    for (const Bag& bag : bags_) n += bag.size();
    return n;
  }

  Eigen::VectorXd labels() const {
    Eigen::VectorXd y(bags_.size());
    for (std::size_t i = 0; i < bags_.size(); ++i) y[i] = bags_[i].label;
    return y;
  }

  Dataset subset(std::span<const std::size_t> indices) const {
    std::vector<Bag> picked;
    picked.reserve(indices.size());
    for (std::size_t i : indices) picked.push_back(bags_.at(i));
    return Dataset(std::move(picked), dim_);
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.dim_ == b.dim_ && a.bags_ == b.bags_;
  }

 private:
  std::vector<Bag> bags_;
  std::size_t dim_;
};

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double value) {
  char buffer[32];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, end);
}

namespace detail {

inline std::vector<std::string_view> split_csv_row(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline bool parse_double(std::string_view text, double& out) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace detail

// Reads the canonical `bag_id,label,f1,...,fd` format. Bags appear in order of
// first appearance; instances keep row order.
inline Dataset read_canonical_csv(std::istream& in, const std::string& source = "<stream>") {
  auto fail = [&](std::size_t line_no, const std::string& msg) {
    return parse_error(source + ":" + std::to_string(line_no) + ": " + msg);
  };

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw fail(1, "missing header row");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_row(line);
  if (header.size() < 3 || header[0] != "bag_id" || header[1] != "label") {
    throw fail(line_no, "header must be 'bag_id,label,f1,...,fd'");
  }
  const std::size_t dim = header.size() - 2;

  struct Pending {
    std::string id;
    double label;
    std::vector<double> values;
  };
  std::vector<Pending> pending;
  std::unordered_map<std::string, std::size_t> index_of;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_row(line);
    if (fields.size() != header.size()) {
      throw fail(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                              std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw fail(line_no, "empty bag_id");
    double label = 0.0;
    if (!detail::parse_double(fields[1], label) || !std::isfinite(label)) {
      throw fail(line_no, "label '" + std::string(fields[1]) + "' is not a finite number");
    }

    std::string id(fields[0]);
    auto [it, inserted] = index_of.emplace(id, pending.size());
    if (inserted) {
      pending.push_back({std::move(id), label, {}});
    } else if (pending[it->second].label != label) {
      throw fail(line_no, "conflicting label for bag '" + pending[it->second].id + "' (" +
                              format_double(pending[it->second].label) + " vs " +
                              format_double(label) + ")");
    }
    auto& values = pending[it->second].values;
    for (std::size_t c = 2; c < fields.size(); ++c) {
      double v = 0.0;
      if (!detail::parse_double(fields[c], v) || !std::isfinite(v)) {
        throw fail(line_no, "column " + std::string(header[c]) + ": '" + std::string(fields[c]) +
                                "' is not a finite number");
      }
      values.push_back(v);
    }
  }
  if (pending.empty()) throw fail(line_no, "no bags");

  std::vector<Bag> bags;
  bags.reserve(pending.size());
  for (auto& p : pending) {
    const auto rows = static_cast<Eigen::Index>(p.values.size() / dim);
    bags.push_back({std::move(p.id), p.label,
                    Eigen::Map<const InstanceMatrix>(p.values.data(), rows,
                                                     static_cast<Eigen::Index>(dim))});
  }
  return Dataset(std::move(bags), dim);
}

inline Dataset load_canonical_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open dataset '" + path + "'");
  return read_canonical_csv(in, path);
}

inline void write_canonical_csv(std::ostream& out, const Dataset& data) {
  out << "bag_id,label";
  for (std::size_t f = 1; f <= data.dim(); ++f) out << ",f" << f;
  out << '\n';
  for (const Bag& bag : data.bags()) {
    const std::string label = format_double(bag.label);
    for (std::size_t l = 0; l < bag.size(); ++l) {
      out << bag.id << ',' << label;
      for (double v : bag.instance(l)) out << ',' << format_double(v);
      out << '\n';
    }
  }
}

inline void save_canonical_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write dataset '" + path + "'");
  write_canonical_csv(out, data);
  if (!out) throw io_error("failed writing dataset '" + path + "'");
}

struct SyntheticConfig {
  std::size_t num_bags = 100;
  std::size_t instances_min = 5;
  std::size_t instances_max = 15;
  std::size_t dim = 3;
  double noise_scale = 0.1;
  double noise_skew = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_bags < 1) throw usage_error("num_bags must be at least 1");
    if (instances_min < 1 || instances_min > instances_max) {
      throw usage_error("instance counts need 1 <= instances_min <= instances_max");
    }
    if (dim < 1) throw usage_error("dim must be at least 1");
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
      throw usage_error("noise_scale must be finite and >= 0");
    }
    if (!std::isfinite(noise_skew)) throw usage_error("noise_skew must be finite");
  }
};

// Bag i has latent t ~ U[0,1] as its label. Feature 1 of every instance is t
// plus skew-normal noise; the remaining features are standard normal
// distractors. Each bag draws from its own stream derived from (seed, i).
inline Dataset generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  const std::size_t width = std::to_string(config.num_bags - 1).size();
  std::vector<Bag> bags;
  bags.reserve(config.num_bags);
  for (std::size_t i = 0; i < config.num_bags; ++i) {
    Rng rng(derive_seed(config.seed, {tag("synthetic"), i}));
    const double t = rng.uniform();
    const auto span = config.instances_max - config.instances_min + 1;
    const auto count = config.instances_min + static_cast<std::size_t>(rng.below(span));

    InstanceMatrix x(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(config.dim));
    for (Eigen::Index l = 0; l < x.rows(); ++l) {
      x(l, 0) = config.noise_scale == 0.0
                    ? t
                    : t + rng.skew_normal(config.noise_scale, config.noise_skew);
      for (Eigen::Index f = 1; f < x.cols(); ++f) x(l, f) = rng.normal();
    }

    std::string id = std::to_string(i);
    id.insert(0, width - id.size(), '0');
    bags.push_back({"b" + id, t, std::move(x)});
  }
  return Dataset(std::move(bags), config.dim);
}

// Assignment of bags (by index) to folds.
struct FoldPlan {
  std::uint64_t seed = 0;
  std::size_t num_folds = 0;
  std::vector<std::size_t> assignment;

  std::vector<std::size_t> members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (assignment[i] == fold) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> complement(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (assignment[i] != fold) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out(num_folds, 0);
    for (std::size_t f : assignment) ++out[f];
    return out;
  }

  friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

// Shuffles bag indices with the seed and cuts them into contiguous folds.
// Requests for more folds than bags fall back to one bag per fold; when the
// split is uneven the earlier folds take one extra bag.
inline FoldPlan make_folds(std::size_t num_bags, std::int64_t requested_folds, std::uint64_t seed) {
  if (requested_folds <= 0) throw usage_error("number of folds must be positive");
  if (num_bags == 0) throw usage_error("cannot fold an empty dataset");
  const std::size_t folds = std::min<std::size_t>(static_cast<std::size_t>(requested_folds), num_bags);

  std::vector<std::size_t> order(num_bags);
  for (std::size_t i = 0; i < num_bags; ++i) order[i] = i;
  Rng rng(derive_seed(seed, {tag("folds")}));
  rng.shuffle(std::span<std::size_t>(order));

  FoldPlan plan{seed, folds, std::vector<std::size_t>(num_bags)};
  const std::size_t base = num_bags / folds;
  const std::size_t extra = num_bags % folds;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) plan.assignment[order[pos++]] = f;
  }
  return plan;
}

inline FoldPlan make_folds(const Dataset& data, std::int64_t requested_folds, std::uint64_t seed) {
  return make_folds(data.size(), requested_folds, seed);
}

}  // namespace kmemir
