#ifndef TEXTURE_SYNTH_HPP
#define TEXTURE_SYNTH_HPP

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "texture/beliefs.hpp"
#include "texture/rng.hpp"

namespace texture::synth {

enum class Kind { separable, poe_null, ci_generative, random_positive };

inline const char* to_string(Kind kind) {
  switch (kind) {
    case Kind::separable: return "separable";
    case Kind::poe_null: return "poe_null";
    case Kind::ci_generative: return "ci_generative";
    case Kind::random_positive: return "random_positive";
  }
  return "unknown";
}

inline Kind kind_from_string(const std::string& s) {
  if (s == "separable") return Kind::separable;
  if (s == "poe_null") return Kind::poe_null;
  if (s == "ci_generative" || s == "ci") return Kind::ci_generative;
  if (s == "random_positive" || s == "random") return Kind::random_positive;
  throw InvalidInput("unknown synthetic kind: " + s);
}

/// Generator parameters. Recognized `parameters` keys:
///   separable:       "scale" (log-odds std, default 1), "gamma" (bilinear
///                    term gamma * l * r added to state 1), "embed_dim"
///   ci_generative:   "observations" (alphabet size, default 4),
///                    "coupling" (strength of a left-right dependent term,
///                    default 0), "deterministic" (1 = identity likelihoods)
///   random_positive: "scale"
/// `support_size` counts the tail state.
struct SynthSpec {
  Kind kind = Kind::separable;
  std::size_t support_size = 5;
  std::vector<int> grid{0, 1, 2, 4, 8};
  std::uint64_t seed = 0;
  std::map<std::string, double> parameters;

  double param(const std::string& key, double fallback) const {
    auto it = parameters.find(key);
    return it == parameters.end() ? fallback : it->second;
  }

  void validate() const {
    if (support_size < 2) throw InvalidInput("support_size must be at least 2");
    if (grid.empty()) throw InvalidInput("radius grid must not be empty");
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (grid[i] <= grid[i - 1]) throw InvalidInput("radius grid must be strictly increasing");
  }
};

/// Candidates "s00", "s01", ... so identifier order equals index order.
inline SupportPtr synthetic_support(std::size_t support_size) {
  std::vector<std::string> ids;
  const int width = support_size > 101 ? 3 : 2;
  for (std::size_t i = 0; i + 1 < support_size; ++i) {
    std::ostringstream id;
    id << 's' << std::setw(width) << std::setfill('0') << i;
    ids.push_back(id.str());
  }
  return SlotSupport::from_candidates(std::move(ids));
}

namespace detail {

inline Belief softmax(const SupportPtr& support, const Vector& logits) {
  Vector w = (logits.array() - logits.maxCoeff()).exp().matrix();
  return Belief::normalized(support, w);
}

inline Vector dirichlet_one(SplitMix64& rng, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.exponential();
  return v / v.sum();
}

inline BeliefField empty_field(const SynthSpec& spec, const char* prefix) {
  spec.validate();
  BeliefField f;
  std::ostringstream id;
  id << prefix << '-' << spec.seed;
  f.slot_id = id.str();
  f.support = synthetic_support(spec.support_size);
  f.radii = spec.grid;
  f.condition = "real";
  return f;
}

inline void finish_boundaries(BeliefField& f) {
  const std::size_t last = f.grid_size() - 1;
  f.left_boundary = f.at(last, 0);
  f.right_boundary = f.at(0, last);
}

inline void attach_embeddings(BeliefField& f, SplitMix64& rng, std::size_t dim) {
  for (std::size_t s = 0; s < f.support->candidate_count(); ++s) {
    std::vector<double> e(dim);
    for (auto& x : e) x = rng.normal();
    f.embeddings[f.support->state(s)] = std::move(e);
  }
}

}  // namespace detail

/// u(s, l, r) = u0(s) + alpha_s(l) + beta_s(r) on grid indices, with state 0
/// as the log-odds reference (u = 0) and alpha(0) = beta(0) = 0. Optional
/// bilinear defect gamma * l * r on state 1.
inline BeliefField gen_separable_field(const SynthSpec& spec) {
  if (spec.kind != Kind::separable) throw InvalidInput("gen_separable_field needs kind = separable");
  BeliefField f = detail::empty_field(spec, "separable");
  SplitMix64 rng(spec.seed);
  const auto n = static_cast<Eigen::Index>(spec.support_size);
  const std::size_t g = spec.grid.size();
  const double scale = spec.param("scale", 1.0);
  const double gamma = spec.param("gamma", 0.0);

  Vector base(n);
  Matrix alpha = Matrix::Zero(n, static_cast<Eigen::Index>(g));
  Matrix beta = Matrix::Zero(n, static_cast<Eigen::Index>(g));
  for (Eigen::Index s = 0; s < n; ++s) base[s] = s == 0 ? 0.0 : scale * rng.normal();
  for (Eigen::Index s = 1; s < n; ++s)
    for (std::size_t i = 1; i < g; ++i) {
      alpha(s, static_cast<Eigen::Index>(i)) = scale * rng.normal();
      beta(s, static_cast<Eigen::Index>(i)) = scale * rng.normal();
    }
  f.grid.reserve(g * g);
  for (std::size_t l = 0; l < g; ++l)
    for (std::size_t r = 0; r < g; ++r) {
      Vector u = base + alpha.col(static_cast<Eigen::Index>(l)) + beta.col(static_cast<Eigen::Index>(r));
      if (n > 1) u[1] += gamma * static_cast<double>(l) * static_cast<double>(r);
      f.grid.push_back(detail::softmax(f.support, u));
    }
  detail::finish_boundaries(f);
  const auto dim = static_cast<std::size_t>(spec.param("embed_dim", 0.0));
  if (dim > 0) detail::attach_embeddings(f, rng, dim);
  return f;
}

/// Exact posteriors of a model in which left and right observations are
/// conditionally independent given the slot value Z:
///   mu(l, r)(z) ~ prior(z) * like_l[z][x_l] * like_r[z][x_r],
/// with prior and likelihood rows drawn from Dirichlet(1). Radius index 0
/// carries no observation. A nonzero "coupling" multiplies every two-sided
/// cell by exp(coupling * c_lr(z)) for a random c_lr, which breaks the
/// independence.
inline BeliefField gen_ci_field(const SynthSpec& spec) {
  if (spec.kind != Kind::ci_generative && spec.kind != Kind::poe_null)
    throw InvalidInput("gen_ci_field needs kind = ci_generative");
  BeliefField f = detail::empty_field(spec, "ci");
  SplitMix64 rng(spec.seed);
  const auto n = static_cast<Eigen::Index>(spec.support_size);
  const std::size_t g = spec.grid.size();
  const auto alphabet = static_cast<Eigen::Index>(std::max(2.0, spec.param("observations", 4.0)));
  const double coupling = spec.param("coupling", 0.0);
  const bool deterministic = spec.param("deterministic", 0.0) != 0.0;

  const Vector prior = detail::dirichlet_one(rng, n);
  // Likelihood of the realized observation at each radius, per z.
  const auto truth = static_cast<Eigen::Index>(deterministic ? rng.below(static_cast<std::uint64_t>(n)) : 0);
  auto side_likelihoods = [&]() {
    std::vector<Vector> like(g, Vector::Ones(n));
    if (deterministic) {
      for (std::size_t i = 1; i < g; ++i) {
        like[i] = Vector::Zero(n);
        like[i][truth] = 1.0;
      }
      return like;
    }
    for (std::size_t i = 1; i < g; ++i) {
      const auto x = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(alphabet)));
      for (Eigen::Index z = 0; z < n; ++z) like[i][z] = detail::dirichlet_one(rng, alphabet)[x];
    }
    return like;
  };
  const std::vector<Vector> left = side_likelihoods();
  const std::vector<Vector> right = side_likelihoods();

  f.grid.reserve(g * g);
  for (std::size_t l = 0; l < g; ++l)
    for (std::size_t r = 0; r < g; ++r) {
      Vector w = prior.cwiseProduct(left[l]).cwiseProduct(right[r]);
      if (coupling != 0.0 && l > 0 && r > 0)
        for (Eigen::Index z = 0; z < n; ++z) w[z] *= std::exp(coupling * rng.normal());
      f.grid.push_back(Belief::normalized(f.support, w));
    }
  detail::finish_boundaries(f);
  return f;
}

/// Every cell an independent softmax of N(0, scale^2) logits.
inline BeliefField gen_random_positive_field(const SynthSpec& spec) {
  BeliefField f = detail::empty_field(spec, "random");
  SplitMix64 rng(spec.seed);
  const auto n = static_cast<Eigen::Index>(spec.support_size);
  const std::size_t g = spec.grid.size();
  const double scale = spec.param("scale", 1.0);
  for (std::size_t c = 0; c < g * g; ++c) {
    Vector logits(n);
    for (Eigen::Index s = 0; s < n; ++s) logits[s] = scale * rng.normal();
    f.grid.push_back(detail::softmax(f.support, logits));
  }
  detail::finish_boundaries(f);
  const auto dim = static_cast<std::size_t>(spec.param("embed_dim", 0.0));
  if (dim > 0) detail::attach_embeddings(f, rng, dim);
  return f;
}

inline BeliefField generate(const SynthSpec& spec) {
  switch (spec.kind) {
    case Kind::separable: return gen_separable_field(spec);
    case Kind::poe_null:
    case Kind::ci_generative: return gen_ci_field(spec);
    case Kind::random_positive: return gen_random_positive_field(spec);
  }
  throw InvalidInput("unknown synthetic kind");
}

/// A strictly positive coupling with the given marginals (within 1e-10),
/// obtained by proportional fitting of a seeded random positive matrix.
/// It is only a feasible point, never claimed optimal.
inline Matrix sample_feasible_coupling(const Belief& mu_l, const Belief& mu_r, std::uint64_t seed) {
  if (!mu_l.strictly_positive() || !mu_r.strictly_positive())
    throw InvalidInput("feasible coupling needs strictly positive marginals");
  const auto n = static_cast<Eigen::Index>(mu_l.size());
  const auto m = static_cast<Eigen::Index>(mu_r.size());
  for (int attempt = 0; attempt < 5; ++attempt) {
    SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    Matrix g(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) g(i, j) = std::exp(2.0 * rng.normal());
    for (int it = 0; it < 100000; ++it) {
      g.array().colwise() *= (mu_l.probs().array() / g.rowwise().sum().array());
      g.array().rowwise() *= (mu_r.probs().array() / g.colwise().sum().transpose().array()).transpose();
      const double err = (g.rowwise().sum() - mu_l.probs()).cwiseAbs().maxCoeff();
      if (err <= 1e-12) return g;
    }
  }
  throw ConvergenceFailure("feasible coupling sampler did not converge", 0.0);
}

struct ClosedForm {
  Matrix gamma;
  Belief midpoint;
  double energy = 0.0;
};

/// Uniform kernel (identical rows equal to uniform pi): gamma = mu_l x mu_r,
/// midpoint = pi, energy = KL(mu_l || pi) + KL(mu_r || pi).
inline ClosedForm uniform_kernel_closed_form(const Belief& mu_l, const Belief& mu_r) {
  const Belief pi = Belief::uniform(mu_l.support());
  return ClosedForm{mu_l.probs() * mu_r.probs().transpose(), pi, kl(mu_l, pi) + kl(mu_r, pi)};
}

}  // namespace texture::synth

#endif  // TEXTURE_SYNTH_HPP
