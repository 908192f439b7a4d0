#ifndef TEXTURE_CERTIFICATES_HPP
#define TEXTURE_CERTIFICATES_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "texture/beliefs.hpp"
#include "texture/rng.hpp"

namespace texture {

/// Log-odds u(s, L, R) against a reference state, indexed by grid position.
class LogOddsField {
 public:
  LogOddsField(std::size_t states, std::size_t grid)
      : states_(states), grid_(grid), values_(states * grid * grid, 0.0) {}

  double& operator()(std::size_t s, std::size_t l, std::size_t r) {
    return values_[(s * grid_ + l) * grid_ + r];
  }
  double operator()(std::size_t s, std::size_t l, std::size_t r) const {
    return values_[(s * grid_ + l) * grid_ + r];
  }
  std::size_t states() const noexcept { return states_; }
  std::size_t grid() const noexcept { return grid_; }

 private:
  std::size_t states_;
  std::size_t grid_;
  std::vector<double> values_;
};

struct HolonomyReport {
  // Omega(s, l, r) for unit squares 0 <= l, r < grid - 1.
  LogOddsField per_cell{0, 0};
  double h = 0.0;
  bool weighted = true;
  std::string ref_state;

  double omega(std::size_t s, std::size_t l, std::size_t r) const { return per_cell(s, l, r); }
  std::size_t squares_per_axis() const noexcept { return per_cell.grid(); }
};

struct CeiReport {
  double cei = 0.0;
  Belief poe;
  Belief two_sided;
  std::pair<std::size_t, std::size_t> radii_used{0, 0};
  double log_normalizer = 0.0;  // ln Z of the PoE reconstruction
};

/// Most probable state under mu(0,0); ties go to the smaller identifier.
inline std::string default_ref_state(const BeliefField& field) {
  const Belief& base = field.at(0, 0);
  const auto& states = field.support->states();
  std::size_t best = 0;
  for (std::size_t s = 1; s < base.size(); ++s) {
    if (base[s] > base[best] || (base[s] == base[best] && states[s] < states[best])) best = s;
  }
  return states[best];
}

inline std::size_t require_state(const BeliefField& field, const std::string& state) {
  auto idx = field.support->index_of(state);
  if (!idx) throw InvalidInput("reference state not in support: " + state);
  return *idx;
}

inline LogOddsField log_odds(const BeliefField& field, const std::string& ref_state) {
  field.validate();
  const std::size_t ref = require_state(field, ref_state);
  const std::size_t n = field.support->size();
  const std::size_t g = field.grid_size();
  LogOddsField u(n, g);
  for (std::size_t l = 0; l < g; ++l) {
    for (std::size_t r = 0; r < g; ++r) {
      const Belief& mu = field.at(l, r);
      if (!(mu[ref] > 0.0)) throw DegenerateReference("zero probability at the reference state");
      const double log_ref = std::log(mu[ref]);
      for (std::size_t s = 0; s < n; ++s) {
        if (s == ref) continue;
        if (!(mu[s] > 0.0)) throw InvalidInput("log-odds requires strictly positive beliefs");
        u(s, l, r) = std::log(mu[s]) - log_ref;
      }
    }
  }
  return u;
}

/// Rectangle holonomy over grid indices l1 < l2, r1 < r2 (four-corner form).
inline double rectangle_holonomy(const LogOddsField& u, std::size_t s, std::size_t l1, std::size_t l2,
                                 std::size_t r1, std::size_t r2) {
  return u(s, l2, r2) - u(s, l2, r1) - u(s, l1, r2) + u(s, l1, r1);
}

/// Unit-square holonomy on grid indices and its RMS aggregate h. Weighted
/// mode uses w(s) = mu(L+1, R+1)(s); otherwise w = 1/|S|.
inline HolonomyReport holonomy(const BeliefField& field, const std::string& ref_state, bool weighted = true) {
  field.validate();
  const std::size_t g = field.grid_size();
  if (g < 2) throw InvalidInput("holonomy needs at least two radii");
  const LogOddsField u = log_odds(field, ref_state);
  const std::size_t n = u.states();

  HolonomyReport report;
  report.weighted = weighted;
  report.ref_state = ref_state;
  report.per_cell = LogOddsField(n, g - 1);
  double acc = 0.0;
  for (std::size_t l = 0; l + 1 < g; ++l) {
    for (std::size_t r = 0; r + 1 < g; ++r) {
      const Belief& corner = field.at(l + 1, r + 1);
      for (std::size_t s = 0; s < n; ++s) {
        const double omega = rectangle_holonomy(u, s, l, l + 1, r, r + 1);
        report.per_cell(s, l, r) = omega;
        const double w = weighted ? corner[s] : 1.0 / static_cast<double>(n);
        acc += w * omega * omega;
      }
    }
  }
  const double cells = static_cast<double>((g - 1) * (g - 1));
  report.h = std::sqrt(acc / cells);
  return report;
}

inline HolonomyReport holonomy(const BeliefField& field, const char* ref_state, bool weighted = true) {
  return holonomy(field, std::string(ref_state), weighted);
}

inline HolonomyReport holonomy(const BeliefField& field, bool weighted = true) {
  return holonomy(field, default_ref_state(field), weighted);
}

/// Normalized left * right / base, and ln of the normalizer.
inline std::pair<Belief, double> poe_with_normalizer(const Belief& left_only, const Belief& right_only,
                                                     const Belief& base) {
  if (!left_only.same_support(base) || !right_only.same_support(base))
    throw InvalidInput("poe: beliefs on different supports");
  Vector weights(static_cast<Eigen::Index>(base.size()));
  for (std::size_t s = 0; s < base.size(); ++s) {
    if (!(base[s] > 0.0)) throw DegenerateReference("poe: zero entry in base belief");
    weights[static_cast<Eigen::Index>(s)] = left_only[s] * right_only[s] / base[s];
  }
  const double z = weights.sum();
  if (!(z > 0.0)) throw DegenerateReference("poe: one-sided beliefs have disjoint support");
  return {Belief(base.support(), weights / z), std::log(z)};
}

inline Belief poe_reconstruct(const Belief& left_only, const Belief& right_only, const Belief& base) {
  return poe_with_normalizer(left_only, right_only, base).first;
}

inline CeiReport cei(const BeliefField& field, std::size_t l_index, std::size_t r_index) {
  field.validate();
  CeiReport report;
  report.two_sided = field.at(l_index, r_index);
  auto [poe, log_z] = poe_with_normalizer(field.at(l_index, 0), field.at(0, r_index), field.at(0, 0));
  report.poe = std::move(poe);
  report.log_normalizer = log_z;
  report.cei = kl(report.two_sided, report.poe);
  report.radii_used = {l_index, r_index};
  return report;
}

/// CEI at the largest grid radii.
inline CeiReport cei(const BeliefField& field) {
  if (!field.has_grid()) throw InvalidInput("cei needs a belief grid");
  return cei(field, field.grid_size() - 1, field.grid_size() - 1);
}

// ---------------------------------------------------------------------------
// Coherence-destroying controls on token sequences.

using Tokens = std::vector<std::string>;

inline void check_window(const Tokens& seq, std::size_t slot, std::size_t radius) {
  if (slot >= seq.size() || radius >= seq.size() - slot)
    throw InvalidInput("right-context window out of bounds");
}

/// Exchanges the windows [slot+1, slot+radius] of two sequences.
inline std::pair<Tokens, Tokens> suffix_swap(Tokens seq_a, Tokens seq_b, std::size_t slot_a,
                                             std::size_t slot_b, std::size_t radius) {
  check_window(seq_a, slot_a, radius);
  check_window(seq_b, slot_b, radius);
  for (std::size_t k = 1; k <= radius; ++k) std::swap(seq_a[slot_a + k], seq_b[slot_b + k]);
  return {std::move(seq_a), std::move(seq_b)};
}

/// Fisher-Yates shuffle of the window [slot+1, slot+radius] driven by
/// SplitMix64(seed): for i = radius-1 down to 1, j = below(i+1), swap(i, j)
/// on window offsets.
inline Tokens local_shuffle(Tokens seq, std::size_t slot, std::size_t radius, std::uint64_t seed) {
  check_window(seq, slot, radius);
  SplitMix64 rng(seed);
  auto first = seq.begin() + static_cast<std::ptrdiff_t>(slot + 1);
  for (std::size_t i = radius; i-- > 1;) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(first[static_cast<std::ptrdiff_t>(i)], first[static_cast<std::ptrdiff_t>(j)]);
  }
  return seq;
}

}  // namespace texture

#endif  // TEXTURE_CERTIFICATES_HPP
