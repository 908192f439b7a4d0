#ifndef TEXTURE_TEXTURE_HPP
#define TEXTURE_TEXTURE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "texture/beliefs.hpp"
#include "texture/bridge.hpp"
#include "texture/kernel.hpp"

namespace texture {

inline constexpr double kDefaultGuard = 1e-8;
inline constexpr double kLowEnergyFactor = 10.0;
inline constexpr std::size_t kDefaultStride = 4;

/// Phi(rho) = KL(rho || pi).
inline double free_energy(const Belief& rho, const Belief& pi) { return kl(rho, pi); }

struct SlotCurvature {
  std::string slot_id;
  std::size_t position = 0;
  double kappa = 0.0;
  double gap = 0.0;
  double energy = 0.0;
  Belief midpoint;
  int iterations = 0;
  double marginal_error = 0.0;
  bool low_energy = false;

  bool focus() const noexcept { return kappa > 0.0; }
  bool fan_out() const noexcept { return kappa < 0.0; }
};

/// Per-slot curvature: bridge midpoint, free-energy gap
///   gap = (Phi(mu_l) + Phi(mu_r)) / 2 - Phi(mid),
/// and kappa = 8 gap / (D^2 + eps0).
inline SlotCurvature texture_slot(const Belief& mu_l, const Belief& mu_r, const NeutralKernel& kernel,
                                  double eps0 = kDefaultGuard, double tol = kBridgeTolerance,
                                  int max_iter = kBridgeMaxIterations) {
  if (!(eps0 > 0.0)) throw InvalidInput("eps0 must be positive");
  BridgeSolution sol = solve_bridge(kernel, mu_l, mu_r, tol, max_iter);
  SlotCurvature out;
  out.energy = sol.energy;
  out.gap = 0.5 * (free_energy(mu_l, kernel.pi) + free_energy(mu_r, kernel.pi)) - free_energy(sol.midpoint, kernel.pi);
  out.kappa = 8.0 * out.gap / (out.energy + eps0);
  out.low_energy = out.energy < kLowEnergyFactor * eps0;
  out.iterations = sol.iterations;
  out.marginal_error = sol.marginal_error;
  out.midpoint = std::move(sol.midpoint);
  return out;
}

enum class Interpolation { nearest, linear };

inline const char* to_string(Interpolation mode) {
  return mode == Interpolation::nearest ? "nearest" : "linear";
}

/// Sparse curvature samples extended to every token index in [0, length).
class CurvatureField {
 public:
  CurvatureField() = default;

  CurvatureField(std::vector<std::size_t> positions, std::vector<double> kappas, std::size_t length,
                 Interpolation interpolation = Interpolation::nearest)
      : positions_(std::move(positions)), kappas_(std::move(kappas)), length_(length), mode_(interpolation) {
    if (positions_.empty()) throw InvalidInput("curvature field needs at least one evaluated slot");
    if (positions_.size() != kappas_.size()) throw InvalidInput("positions and kappas differ in length");
    for (std::size_t i = 0; i < positions_.size(); ++i) {
      if (positions_[i] >= length_) throw InvalidInput("evaluated position outside [0, length)");
      if (i > 0 && positions_[i] <= positions_[i - 1])
        throw InvalidInput("evaluated positions must be strictly increasing");
    }
    values_.resize(length_);
    for (std::size_t t = 0; t < length_; ++t) values_[t] = interpolate(t);
  }

  const std::vector<std::size_t>& positions() const noexcept { return positions_; }
  const std::vector<double>& kappas() const noexcept { return kappas_; }
  std::size_t length() const noexcept { return length_; }
  Interpolation interpolation() const noexcept { return mode_; }

  /// Interpolated kappa at token t.
  double at(std::size_t t) const {
    if (t >= length_) throw InvalidInput("token index outside the field");
    return values_[t];
  }
  const std::vector<double>& per_token() const noexcept { return values_; }

  /// Prefix sums P[t] = sum_{i < t} (w_minus [-k_i]_+ + w_plus [k_i]_+).
  std::vector<double> contribution_prefix(double w_minus, double w_plus) const {
    std::vector<double> prefix(length_ + 1, 0.0);
    for (std::size_t t = 0; t < length_; ++t) {
      const double k = values_[t];
      prefix[t + 1] = prefix[t] + w_minus * std::max(-k, 0.0) + w_plus * std::max(k, 0.0);
    }
    return prefix;
  }

 private:
  double interpolate(std::size_t t) const {
    auto right = std::lower_bound(positions_.begin(), positions_.end(), t);
    if (right == positions_.end()) return kappas_.back();
    const auto ri = static_cast<std::size_t>(right - positions_.begin());
    if (*right == t || ri == 0) return kappas_[ri];
    const std::size_t li = ri - 1;
    const double dl = static_cast<double>(t - positions_[li]);
    const double dr = static_cast<double>(positions_[ri] - t);
    if (mode_ == Interpolation::nearest) return dl <= dr ? kappas_[li] : kappas_[ri];
    const double w = dl / (dl + dr);
    return (1.0 - w) * kappas_[li] + w * kappas_[ri];
  }

  std::vector<std::size_t> positions_;
  std::vector<double> kappas_;
  std::size_t length_ = 0;
  Interpolation mode_ = Interpolation::nearest;
  std::vector<double> values_;
};

/// Builds the token-level field from per-slot results (any order; a
/// position evaluated twice keeps the first result).
inline CurvatureField estimate_field(const std::vector<SlotCurvature>& slots, std::size_t length,
                                     Interpolation interpolation = Interpolation::nearest) {
  if (slots.empty()) throw InvalidInput("estimate_field: no evaluated slots");
  std::vector<const SlotCurvature*> order;
  for (const auto& s : slots) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(),
                   [](const SlotCurvature* a, const SlotCurvature* b) { return a->position < b->position; });
  std::vector<std::size_t> positions;
  std::vector<double> kappas;
  for (const auto* s : order) {
    if (!positions.empty() && positions.back() == s->position) continue;
    positions.push_back(s->position);
    kappas.push_back(s->kappa);
  }
  return CurvatureField(std::move(positions), std::move(kappas), length, interpolation);
}

inline const std::set<std::string>& sentence_terminators() {
  static const std::set<std::string> terminators{".", "!", "?", ";"};
  return terminators;
}

/// Sparse slot set: every `stride`-th token plus every punctuation token.
inline std::vector<std::size_t> select_slots(const std::vector<std::string>& tokens,
                                             std::size_t stride = kDefaultStride,
                                             const std::set<std::string>& punctuation = sentence_terminators()) {
  if (stride == 0) throw InvalidInput("stride must be positive");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (i % stride == 0 || punctuation.count(tokens[i])) out.push_back(i);
  return out;
}

}  // namespace texture

#endif  // TEXTURE_TEXTURE_HPP
