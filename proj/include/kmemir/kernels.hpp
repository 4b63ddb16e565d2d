#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kmemir/data.hpp"
#include "kmemir/error.hpp"
#include "kmemir/parallel.hpp"

namespace kmemir {

// A first-level kernel on scalar predictions.
template <typename K>
concept ScalarKernel = requires(const K& k, double a, double b) {
  { k(a, b) } -> std::convertible_to<double>;
};

enum class KernelKind { rbf, inv };

inline std::string to_string(KernelKind k) { return k == KernelKind::rbf ? "rbf" : "inv"; }

inline KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "rbf") return KernelKind::rbf;
  if (name == "inv") return KernelKind::inv;
  throw usage_error("unknown kernel '" + std::string(name) + "'");
}

//   rbf: exp(-|a-b|^2 / (2 theta^2))
//   inv: (1 - |a-b|^2) / (|a-b|^2 + theta)
// The inv form is bounded in (-1, 1/theta] but can be negative, and its Gram
// matrices are not guaranteed to be positive semi-definite.
struct KernelConfig {
  KernelKind kind = KernelKind::rbf;
  double theta = 1.0;

  void validate() const {
    if (!(theta > 0.0) || !std::isfinite(theta)) throw usage_error("kernel theta must be positive");
  }

  double operator()(double a, double b) const {
    const double sq = (a - b) * (a - b);
    if (kind == KernelKind::rbf) return std::exp(-sq / (2.0 * theta * theta));
    return (1.0 - sq) / (sq + theta);
  }

  friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

inline double kernel_eval(const KernelConfig& config, double a, double b) { return config(a, b); }

inline void to_json(nlohmann::json& j, const KernelConfig& k) {
  j = {{"kind", to_string(k.kind)}, {"theta", k.theta}};
}

inline void from_json(const nlohmann::json& j, KernelConfig& k) {
  k.kind = parse_kernel_kind(j.at("kind").get<std::string>());
  j.at("theta").get_to(k.theta);
}

struct GramMatrix {
  Eigen::MatrixXd values;
  std::string row_source;
  std::string col_source;
};

namespace detail {

// Bags flattened into one sorted-per-bag buffer. Sorting makes every Gram
// entry independent of the order of predictions inside a bag.
struct PackedBags {
  std::vector<double> values;
  std::vector<std::size_t> offsets;  // size = bags + 1

  explicit PackedBags(const std::vector<std::vector<double>>& bags) {
    offsets.reserve(bags.size() + 1);
    offsets.push_back(0);
    for (std::size_t i = 0; i < bags.size(); ++i) {
      if (bags[i].empty()) throw usage_error("bag " + std::to_string(i) + " has no predictions");
      for (double v : bags[i]) {
        if (!std::isfinite(v)) throw usage_error("bag " + std::to_string(i) + " has a non-finite prediction");
      }
      values.insert(values.end(), bags[i].begin(), bags[i].end());
      std::sort(values.begin() + static_cast<std::ptrdiff_t>(offsets.back()), values.end());
      offsets.push_back(values.size());
    }
  }

  std::size_t size() const { return offsets.size() - 1; }
  const double* begin(std::size_t i) const { return values.data() + offsets[i]; }
  std::size_t count(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
};

template <ScalarKernel Kernel>
double embedding_inner_product(const Kernel& kernel, const PackedBags& rows, std::size_t i,
                               const PackedBags& cols, std::size_t j) {
  const double* a = rows.begin(i);
  const double* b = cols.begin(j);
  std::size_t na = rows.count(i);
  std::size_t nb = cols.count(j);
  // Sum from the lexicographically smaller bag so (i, j) and (j, i) round
  // identically.
  if (std::lexicographical_compare(b, b + nb, a, a + na)) {
    std::swap(a, b);
    std::swap(na, nb);
  }
  double sum = 0.0;
  for (std::size_t l = 0; l < na; ++l) {
    double inner = 0.0;
    for (std::size_t m = 0; m < nb; ++m) inner += kernel(a[l], b[m]);
    sum += inner;
  }
  return sum / (static_cast<double>(na) * static_cast<double>(nb));
}

}  // namespace detail

// Entry (i, j) is the inner product of the empirical mean embeddings of row
// bag i and column bag j: the average of k over all prediction pairs.
template <ScalarKernel Kernel>
GramMatrix gram_between(const Kernel& kernel, const std::vector<std::vector<double>>& rows,
                        const std::vector<std::vector<double>>& cols, unsigned threads = 1) {
  const detail::PackedBags r(rows);
  const detail::PackedBags c(cols);
  GramMatrix g{Eigen::MatrixXd(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size())),
               "rows", "cols"};
  parallel_for(r.size(), threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          detail::embedding_inner_product(kernel, r, i, c, j);
    }
  });
  if (!g.values.allFinite()) throw numeric_error("Gram matrix has non-finite entries");
  return g;
}

// Train-train Gram; the upper triangle is computed and mirrored, so the
// result is exactly symmetric.
template <ScalarKernel Kernel>
GramMatrix gram_symmetric(const Kernel& kernel, const std::vector<std::vector<double>>& bags,
                          unsigned threads = 1) {
  const detail::PackedBags p(bags);
  const auto n = static_cast<Eigen::Index>(p.size());
  GramMatrix g{Eigen::MatrixXd(n, n), "train", "train"};
  parallel_for(p.size(), threads, [&](std::size_t i) {
    for (std::size_t j = i; j < p.size(); ++j) {
      g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          detail::embedding_inner_product(kernel, p, i, p, j);
    }
  });
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) g.values(i, j) = g.values(j, i);
  }
  if (!g.values.allFinite()) throw numeric_error("Gram matrix has non-finite entries");
  return g;
}

inline void write_gram_csv(std::ostream& out, const GramMatrix& g) {
  out << "# rows=" << g.row_source << " cols=" << g.col_source << '\n';
  for (Eigen::Index i = 0; i < g.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.values.cols(); ++j) {
      if (j) out << ',';
      out << format_double(g.values(i, j));
    }
    out << '\n';
  }
}

}  // namespace kmemir
