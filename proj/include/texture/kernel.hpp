#ifndef TEXTURE_KERNEL_HPP
#define TEXTURE_KERNEL_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "texture/beliefs.hpp"

namespace texture {

inline constexpr double kFusedAffinitySmoothing = 1e-8;

/// Lower-middle median: element (n-1)/2 of the sorted values.
inline double lower_median(std::vector<double> values) {
  if (values.empty()) throw InvalidInput("median of an empty set");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

/// Symmetric, zero-diagonal, non-negative ground cost on a support.
struct CostMatrix {
  SupportPtr support;
  Matrix c;
  std::vector<std::string> warnings;

  void validate() const {
    if (!support) throw InvalidInput("cost without support");
    const auto n = static_cast<Eigen::Index>(support->size());
    if (c.rows() != n || c.cols() != n) throw InvalidInput("cost matrix has the wrong shape");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (c(i, i) != 0.0) throw InvalidInput("cost diagonal must be zero");
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!(c(i, j) >= 0.0) || !std::isfinite(c(i, j))) throw InvalidInput("cost must be finite and >= 0");
        if (c(i, j) != c(j, i)) throw InvalidInput("cost matrix is not symmetric");
      }
    }
  }
};

/// Reversible row-stochastic kernel built from a symmetric positive affinity.
struct NeutralKernel {
  SupportPtr support;
  Matrix G;
  Matrix K;
  Belief pi;
  double epsilon = 0.0;  // 0 when built directly from an affinity

  std::size_t size() const noexcept { return static_cast<std::size_t>(K.rows()); }
};

/// Fills the tail row/column with the per-column median of the candidate
/// block: c(tail, s) = median_{u in C} c(u, s).
inline CostMatrix tail_geometry(CostMatrix cost) {
  const auto n = static_cast<Eigen::Index>(cost.support->size());
  const Eigen::Index tail = n - 1;
  const Eigen::Index candidates = n - 1;
  if (cost.c.rows() != n || cost.c.cols() != n) throw InvalidInput("cost matrix has the wrong shape");
  if (candidates == 1) cost.warnings.emplace_back("single-candidate support: tail cost uses degenerate median 0");
  for (Eigen::Index s = 0; s < candidates; ++s) {
    std::vector<double> column;
    column.reserve(static_cast<std::size_t>(candidates));
    for (Eigen::Index u = 0; u < candidates; ++u) column.push_back(cost.c(u, s));
    const double m = lower_median(std::move(column));
    cost.c(tail, s) = m;
    cost.c(s, tail) = m;
  }
  cost.c(tail, tail) = 0.0;
  return cost;
}

/// Candidate costs ||e(s)/|e(s)| - e(s')/|e(s')|||^2, tail by tail_geometry.
inline CostMatrix cost_from_embeddings(const SupportPtr& support,
                                       const std::map<std::string, std::vector<double>>& embeddings) {
  const std::size_t candidates = support->candidate_count();
  std::vector<Vector> unit;
  unit.reserve(candidates);
  std::size_t dim = 0;
  for (std::size_t s = 0; s < candidates; ++s) {
    auto it = embeddings.find(support->state(s));
    if (it == embeddings.end()) throw MissingEmbedding("no embedding for state " + support->state(s));
    if (s == 0) dim = it->second.size();
    if (it->second.size() != dim || dim == 0) throw InvalidInput("embeddings have inconsistent dimension");
    Vector e = Eigen::Map<const Vector>(it->second.data(), static_cast<Eigen::Index>(dim));
    const double norm = e.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw InvalidInput("zero-norm embedding for " + support->state(s));
    unit.push_back(e / norm);
  }
  const auto n = static_cast<Eigen::Index>(support->size());
  CostMatrix cost{support, Matrix::Zero(n, n), {}};
  for (std::size_t i = 0; i < candidates; ++i) {
    for (std::size_t j = i + 1; j < candidates; ++j) {
      const double d = (unit[i] - unit[j]).squaredNorm();
      cost.c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
      cost.c(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
    }
  }
  return tail_geometry(std::move(cost));
}

/// Median off-diagonal candidate-candidate cost, or 1 when that is not
/// positive (fewer than two candidates, or coincident embeddings).
inline double default_epsilon(const CostMatrix& cost) {
  const auto candidates = static_cast<Eigen::Index>(cost.support->candidate_count());
  std::vector<double> off;
  for (Eigen::Index i = 0; i < candidates; ++i)
    for (Eigen::Index j = 0; j < candidates; ++j)
      if (i != j) off.push_back(cost.c(i, j));
  if (off.empty()) return 1.0;
  const double m = lower_median(std::move(off));
  return m > 0.0 ? m : 1.0;
}

/// K = RowNorm(G), pi(s) proportional to the row sums of G.
inline NeutralKernel kernel_from_affinity(const SupportPtr& support, Matrix G, double epsilon = 0.0) {
  const auto n = static_cast<Eigen::Index>(support->size());
  if (G.rows() != n || G.cols() != n) throw InvalidInput("affinity has the wrong shape");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!(G(i, j) > 0.0) || !std::isfinite(G(i, j))) throw InvalidInput("affinity must be strictly positive");
      if (G(i, j) != G(j, i)) throw InvalidInput("affinity must be symmetric");
    }
  const Vector row_sums = G.rowwise().sum();
  Matrix K = G.array().colwise() / row_sums.array();
  Belief pi(support, row_sums / row_sums.sum());
  return NeutralKernel{support, std::move(G), std::move(K), std::move(pi), epsilon};
}

/// Gibbs kernel G = exp(-c / epsilon) + tau.
inline NeutralKernel build_kernel(const CostMatrix& cost, double epsilon, double tau = 0.0) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidInput("epsilon must be positive");
  if (!(tau >= 0.0)) throw InvalidInput("tau must be non-negative");
  cost.validate();
  Matrix G = cost.c.unaryExpr([epsilon](double c) { return std::exp(-c / epsilon); });
  G.array() += tau;
  return kernel_from_affinity(cost.support, std::move(G), epsilon);
}

/// G = sum_m alpha_m W_m + W_anchor + tau, for ready-made relational graphs.
inline NeutralKernel fused_affinity(const SupportPtr& support, std::span<const Matrix> adjacencies,
                                    std::span<const double> alphas, const Matrix& anchor_edges,
                                    double tau = kFusedAffinitySmoothing) {
  if (!(tau > 0.0)) throw InvalidInput("fused affinity requires tau > 0");
  if (adjacencies.empty() || adjacencies.size() != alphas.size())
    throw InvalidInput("one weight per adjacency required");
  const auto n = static_cast<Eigen::Index>(support->size());
  auto check = [n](const Matrix& m, const char* what) {
    if (m.rows() != n || m.cols() != n) throw InvalidInput(std::string(what) + " dimension mismatch");
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!(m(i, j) >= 0.0) || !std::isfinite(m(i, j))) throw InvalidInput(std::string(what) + " must be >= 0");
        if (m(i, j) != m(j, i)) throw InvalidInput(std::string(what) + " must be symmetric");
      }
  };
  double alpha_sum = 0.0;
  Matrix G = Matrix::Zero(n, n);
  for (std::size_t m = 0; m < adjacencies.size(); ++m) {
    check(adjacencies[m], "adjacency");
    if (!(alphas[m] >= 0.0)) throw InvalidInput("alpha must be non-negative");
    alpha_sum += alphas[m];
    G += alphas[m] * adjacencies[m];
  }
  if (std::abs(alpha_sum - 1.0) > 1e-9) throw InvalidInput("alphas must sum to one");
  check(anchor_edges, "anchor matrix");
  G += anchor_edges;
  G.array() += tau;
  // Floating-point sums are symmetric term by term, but enforce it exactly.
  G = 0.5 * (G + G.transpose()).eval();
  return kernel_from_affinity(support, std::move(G));
}

}  // namespace texture

#endif  // TEXTURE_KERNEL_HPP
