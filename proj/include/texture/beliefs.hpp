#ifndef TEXTURE_BELIEFS_HPP
#define TEXTURE_BELIEFS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "texture/error.hpp"

namespace texture {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr const char* kTailState = "<TAIL>";
inline constexpr double kDefaultSmoothing = 1e-6;
inline constexpr double kMassTolerance = 1e-9;

/// Finite slot-local state list: candidates sorted lexicographically, then
/// the reserved tail state.
class SlotSupport {
 public:
  /// Builds a canonical support from candidate identifiers (any order, no
  /// duplicates, must not contain the tail literal).
  static std::shared_ptr<const SlotSupport> from_candidates(std::vector<std::string> candidates) {
    std::sort(candidates.begin(), candidates.end());
    if (std::adjacent_find(candidates.begin(), candidates.end()) != candidates.end())
      throw InvalidInput("duplicate candidate state in support");
    for (const auto& c : candidates)
      if (c == kTailState) throw InvalidInput("candidate list contains the reserved tail state");
    candidates.emplace_back(kTailState);
    return std::shared_ptr<const SlotSupport>(new SlotSupport(std::move(candidates)));
  }

  std::size_t size() const noexcept { return states_.size(); }
  std::size_t tail_index() const noexcept { return states_.size() - 1; }
  std::size_t candidate_count() const noexcept { return states_.size() - 1; }
  const std::vector<std::string>& states() const noexcept { return states_; }
  const std::string& state(std::size_t i) const { return states_.at(i); }

  std::optional<std::size_t> index_of(const std::string& id) const {
    if (id == kTailState) return tail_index();
    auto it = std::lower_bound(states_.begin(), states_.end() - 1, id);
    if (it == states_.end() - 1 || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - states_.begin());
  }

  bool operator==(const SlotSupport& other) const { return states_ == other.states_; }

 private:
  explicit SlotSupport(std::vector<std::string> states) : states_(std::move(states)) {}
  std::vector<std::string> states_;
};

using SupportPtr = std::shared_ptr<const SlotSupport>;

/// Probability vector over a SlotSupport.
class Belief {
 public:
  Belief() = default;

  /// Validates non-negativity, size and unit mass (1e-9 absolute).
  Belief(SupportPtr support, Vector probs) : support_(std::move(support)), probs_(std::move(probs)) {
    if (!support_) throw InvalidInput("belief without support");
    if (static_cast<std::size_t>(probs_.size()) != support_->size())
      throw InvalidInput("belief size does not match support");
    for (Eigen::Index i = 0; i < probs_.size(); ++i)
      if (!(probs_[i] >= 0.0) || !std::isfinite(probs_[i]))
        throw InvalidInput("belief entry is negative or not finite");
    if (std::abs(probs_.sum() - 1.0) > kMassTolerance)
      throw InvalidInput("belief does not sum to one");
  }

  static Belief uniform(SupportPtr support) {
    const auto n = static_cast<Eigen::Index>(support->size());
    return Belief(std::move(support), Vector::Constant(n, 1.0 / static_cast<double>(n)));
  }

  /// Normalizes a non-negative vector with positive total mass.
  static Belief normalized(SupportPtr support, const Vector& weights) {
    const double total = weights.sum();
    if (!(total > 0.0) || !std::isfinite(total)) throw InvalidInput("cannot normalize zero mass");
    return Belief(std::move(support), weights / total);
  }

  const SupportPtr& support() const noexcept { return support_; }
  const Vector& probs() const noexcept { return probs_; }
  double operator[](std::size_t i) const { return probs_[static_cast<Eigen::Index>(i)]; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(probs_.size()); }
  bool strictly_positive() const { return (probs_.array() > 0.0).all(); }

  bool same_support(const Belief& other) const {
    return support_ == other.support_ || (support_ && other.support_ && *support_ == *other.support_);
  }

 private:
  SupportPtr support_;
  Vector probs_;
};

using StateProb = std::pair<std::string, double>;

/// Union of the top-k states of each side plus the tail. Ties at the k-th
/// position go to the lexicographically smaller identifier.
inline SupportPtr build_support(std::span<const StateProb> left_topk,
                                std::span<const StateProb> right_topk, std::size_t k) {
  if (k < 1) throw InvalidInput("k must be at least 1");
  auto top = [k](std::span<const StateProb> side) {
    std::vector<StateProb> sorted(side.begin(), side.end());
    std::set<std::string> seen;
    for (const auto& [state, p] : sorted) {
      if (!seen.insert(state).second) throw InvalidInput("duplicate state within one list: " + state);
      if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("probability outside [0,1] for " + state);
    }
    std::sort(sorted.begin(), sorted.end(), [](const StateProb& a, const StateProb& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (sorted.size() > k) sorted.resize(k);
    return sorted;
  };
  std::set<std::string> merged;
  for (const auto& [state, p] : top(left_topk)) merged.insert(state);
  for (const auto& [state, p] : top(right_topk)) merged.insert(state);
  merged.erase(kTailState);
  return SlotSupport::from_candidates({merged.begin(), merged.end()});
}

/// Copies listed probabilities onto the support and sends the residual
/// mass to the tail.
inline Belief pushforward_tail(std::span<const StateProb> raw, const SupportPtr& support) {
  Vector probs = Vector::Zero(static_cast<Eigen::Index>(support->size()));
  std::vector<bool> seen(support->size(), false);
  double total = 0.0;
  for (const auto& [state, p] : raw) {
    auto idx = support->index_of(state);
    if (!idx || *idx == support->tail_index())
      throw InvalidInput("state not in support candidates: " + state);
    if (seen[*idx]) throw InvalidInput("duplicate state: " + state);
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidInput("negative probability for " + state);
    seen[*idx] = true;
    probs[static_cast<Eigen::Index>(*idx)] = p;
    total += p;
  }
  if (total > 1.0 + kMassTolerance) throw MassOverflow("raw mass exceeds one");
  double residual = 1.0 - total;
  if (residual < 0.0) {
    // Rounding overshoot within tolerance: clamp the tail and renormalize.
    probs /= total;
    residual = 0.0;
  }
  probs[static_cast<Eigen::Index>(support->tail_index())] = residual;
  return Belief(support, probs);
}

/// (1 - delta) * b + delta * uniform.
inline Belief smooth(const Belief& b, double delta = kDefaultSmoothing) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("smoothing delta must lie in (0,1)");
  const double n = static_cast<double>(b.size());
  Vector out = (1.0 - delta) * b.probs();
  out.array() += delta / n;
  return Belief(b.support(), out);
}

/// KL(mu || nu) in nats, with 0 log 0 = 0.
inline double kl(const Belief& mu, const Belief& nu) {
  if (!mu.same_support(nu)) throw InvalidInput("kl: beliefs on different supports");
  double total = 0.0;
  for (std::size_t s = 0; s < mu.size(); ++s) {
    const double p = mu[s];
    if (p == 0.0) continue;
    const double q = nu[s];
    if (q == 0.0) throw DivergenceInfinite("kl: mu not absolutely continuous w.r.t. nu");
    total += p * std::log(p / q);
  }
  return std::max(total, 0.0);
}

/// Per-slot grid of two-sided beliefs over a shared radius axis, plus
/// boundary beliefs. Cells are stored row-major by (L index, R index).
struct BeliefField {
  std::string slot_id;
  std::size_t position = 0;
  SupportPtr support;
  std::vector<int> radii;
  std::vector<Belief> grid;
  Belief left_boundary;
  Belief right_boundary;
  std::map<std::string, std::vector<double>> embeddings;
  std::optional<Matrix> cost;
  std::string condition;

  std::size_t grid_size() const noexcept { return radii.size(); }
  bool has_grid() const noexcept { return !radii.empty(); }

  const Belief& at(std::size_t l_index, std::size_t r_index) const {
    if (l_index >= radii.size() || r_index >= radii.size())
      throw InvalidInput("grid index out of range");
    return grid.at(l_index * radii.size() + r_index);
  }

  /// Checks completeness of the grid and that every belief shares `support`.
  void validate() const {
    if (!support) throw InvalidInput("field without support");
    if (grid.size() != radii.size() * radii.size())
      throw InvalidInput("grid is not complete over radii x radii");
    for (std::size_t i = 1; i < radii.size(); ++i)
      if (radii[i] <= radii[i - 1]) throw InvalidInput("radii must be strictly increasing");
    auto on_support = [this](const Belief& b) {
      return b.support() == support || (b.support() && *b.support() == *support);
    };
    for (const auto& b : grid)
      if (!on_support(b)) throw InvalidInput("grid belief on a foreign support");
    if (left_boundary.support() && !on_support(left_boundary))
      throw InvalidInput("left boundary on a foreign support");
    if (right_boundary.support() && !on_support(right_boundary))
      throw InvalidInput("right boundary on a foreign support");
  }
};

}  // namespace texture

#endif  // TEXTURE_BELIEFS_HPP
