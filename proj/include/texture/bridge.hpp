#ifndef TEXTURE_BRIDGE_HPP
#define TEXTURE_BRIDGE_HPP

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "texture/beliefs.hpp"
#include "texture/kernel.hpp"

namespace texture {

inline constexpr double kBridgeTolerance = 1e-10;
inline constexpr int kBridgeMaxIterations = 10000;

struct BridgeSolution {
  Vector a;
  Vector b;
  Vector log_a;
  Vector log_b;
  Matrix gamma;
  Belief midpoint;
  double energy = 0.0;       // KL(gamma || R02)
  double dual_energy = 0.0;  // <mu_L, log a> + <mu_R, log b>
  int iterations = 0;
  double marginal_error = 0.0;
};

struct BridgeEnergy {
  double direct = 0.0;
  double dual = 0.0;
};

/// R02(s0, s2) = pi(s0) (K^2)(s0, s2).
inline Matrix endpoint_reference(const NeutralKernel& kernel) {
  const Matrix M = kernel.K * kernel.K;
  return kernel.pi.probs().asDiagonal() * M;
}

namespace detail {

// log sum_j exp(x_j) with the usual max shift.
inline double log_sum_exp(const Eigen::Ref<const Vector>& x) {
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x.array() - m).exp().sum());
}

inline Matrix coupling(const Vector& log_a, const Matrix& log_r, const Vector& log_b) {
  Matrix log_gamma = log_r;
  log_gamma.colwise() += log_a;
  log_gamma.rowwise() += log_b.transpose();
  return log_gamma.array().exp().matrix();
}

inline double marginal_error(const Matrix& gamma, const Vector& mu_l, const Vector& mu_r) {
  const double rows = (gamma.rowwise().sum() - mu_l).cwiseAbs().sum();
  const double cols = (gamma.colwise().sum().transpose() - mu_r).cwiseAbs().sum();
  return std::max(rows, cols);
}

}  // namespace detail

/// Two-step Schrodinger bridge between mu_l (time 0) and mu_r (time 2)
/// under the reference pi(s0) K(s0,s1) K(s1,s2).
///
/// Solves the endpoint scaling system by log-domain IPFP,
///   log a = log mu_l - LSE_j(log R02 + log b)
///   log b = log mu_r - LSE_i(log R02 + log a),
/// stopping once the larger L1 marginal error is <= tol. The gauge is
/// fixed by sum_s pi(s) log a(s) = 0. The midpoint is f * g with
/// f = (a pi)^T K and g = K b.
inline BridgeSolution solve_bridge(const NeutralKernel& kernel, const Belief& mu_l, const Belief& mu_r,
                                   double tol = kBridgeTolerance, int max_iter = kBridgeMaxIterations) {
  if (!mu_l.same_support(kernel.pi) || !mu_r.same_support(kernel.pi))
    throw InvalidInput("bridge: endpoints and kernel use different supports");
  if (!mu_l.strictly_positive() || !mu_r.strictly_positive())
    throw InvalidInput("bridge: endpoint beliefs must be strictly positive");
  if (!(kernel.K.array() > 0.0).all()) throw InvalidInput("bridge: kernel must be strictly positive");
  if (!(tol > 0.0) || max_iter < 1) throw InvalidInput("bridge: invalid tolerance or iteration cap");

  const auto n = static_cast<Eigen::Index>(kernel.size());
  const Matrix log_r = endpoint_reference(kernel).array().log().matrix();
  const Vector log_mu_l = mu_l.probs().array().log().matrix();
  const Vector log_mu_r = mu_r.probs().array().log().matrix();

  Vector log_a = Vector::Zero(n);
  Vector log_b = Vector::Zero(n);
  Vector scratch(n);
  Matrix gamma;
  double error = std::numeric_limits<double>::infinity();
  int iter = 0;
  while (iter < max_iter) {
    ++iter;
    for (Eigen::Index i = 0; i < n; ++i) {
      scratch = log_r.row(i).transpose() + log_b;
      log_a[i] = log_mu_l[i] - detail::log_sum_exp(scratch);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      scratch = log_r.col(j) + log_a;
      log_b[j] = log_mu_r[j] - detail::log_sum_exp(scratch);
    }
    gamma = detail::coupling(log_a, log_r, log_b);
    error = detail::marginal_error(gamma, mu_l.probs(), mu_r.probs());
    if (error <= tol) break;
  }
  if (!(error <= tol)) {
    std::ostringstream msg;
    msg << "bridge scaling did not converge in " << max_iter << " iterations (marginal error " << error << ")";
    throw ConvergenceFailure(msg.str(), error);
  }

  const double shift = kernel.pi.probs().dot(log_a);
  log_a.array() -= shift;
  log_b.array() += shift;

  const Vector log_pi = kernel.pi.probs().array().log().matrix();
  const Matrix log_k = kernel.K.array().log().matrix();
  Vector log_mid(n);
  for (Eigen::Index s1 = 0; s1 < n; ++s1) {
    scratch = log_a + log_pi + log_k.col(s1);
    const double log_f = detail::log_sum_exp(scratch);
    scratch = log_k.row(s1).transpose() + log_b;
    const double log_g = detail::log_sum_exp(scratch);
    log_mid[s1] = log_f + log_g;
  }
  const Vector mid = (log_mid.array() - log_mid.maxCoeff()).exp().matrix();

  BridgeSolution sol;
  sol.log_a = log_a;
  sol.log_b = log_b;
  sol.a = log_a.array().exp().matrix();
  sol.b = log_b.array().exp().matrix();
  sol.gamma = std::move(gamma);
  sol.midpoint = Belief::normalized(kernel.support, mid);
  sol.iterations = iter;
  sol.marginal_error = error;

  double direct = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) direct += sol.gamma(i, j) * (log_a[i] + log_b[j]);
  sol.energy = direct;
  sol.dual_energy = mu_l.probs().dot(log_a) + mu_r.probs().dot(log_b);
  return sol;
}

/// Bridge energy two ways: KL(gamma || R02) evaluated entrywise against a
/// freshly built R02, and the dual <mu_l, log a> + <mu_r, log b>.
inline BridgeEnergy bridge_energy(const BridgeSolution& sol, const NeutralKernel& kernel, const Belief& mu_l,
                                  const Belief& mu_r) {
  const Matrix r02 = endpoint_reference(kernel);
  BridgeEnergy e;
  for (Eigen::Index i = 0; i < r02.rows(); ++i)
    for (Eigen::Index j = 0; j < r02.cols(); ++j) {
      const double g = sol.gamma(i, j);
      if (g > 0.0) e.direct += g * std::log(g / r02(i, j));
    }
  e.dual = mu_l.probs().dot(sol.a.array().log().matrix()) + mu_r.probs().dot(sol.b.array().log().matrix());
  return e;
}

}  // namespace texture

#endif  // TEXTURE_BRIDGE_HPP
