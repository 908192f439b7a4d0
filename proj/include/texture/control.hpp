#ifndef TEXTURE_CONTROL_HPP
#define TEXTURE_CONTROL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "texture/texture.hpp"

namespace texture {

using TokenRange = std::pair<std::size_t, std::size_t>;  // half-open [first, second)

inline constexpr std::size_t kDefaultBlock = 64;

enum class PartitionKind { sentence, fixed_block };

inline const char* to_string(PartitionKind kind) {
  return kind == PartitionKind::sentence ? "sentence" : "fixed_block";
}

struct SpanPartition {
  std::vector<TokenRange> spans;
  PartitionKind kind = PartitionKind::sentence;

  std::size_t length() const noexcept { return spans.empty() ? 0 : spans.back().second; }

  void validate() const {
    std::size_t expect = 0;
    for (const auto& [start, end] : spans) {
      if (start != expect || end <= start) throw InvalidInput("span partition must tile [0, n) contiguously");
      expect = end;
    }
  }
};

inline SpanPartition fixed_block_partition(std::size_t n, std::size_t block = kDefaultBlock) {
  if (block == 0) throw InvalidInput("block size must be positive");
  SpanPartition p{{}, PartitionKind::fixed_block};
  for (std::size_t s = 0; s < n; s += block) p.spans.emplace_back(s, std::min(n, s + block));
  return p;
}

/// Splits after sentence terminators. A run of 2*block tokens without a
/// terminator is cut into block-sized pieces.
inline SpanPartition sentence_partition(const std::vector<std::string>& tokens,
                                        std::size_t block = kDefaultBlock,
                                        const std::set<std::string>& terminators = sentence_terminators()) {
  if (block == 0) throw InvalidInput("block size must be positive");
  SpanPartition p{{}, PartitionKind::fixed_block};
  std::size_t start = 0;
  bool any_sentence = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (terminators.count(tokens[i])) {
      p.spans.emplace_back(start, i + 1);
      start = i + 1;
      any_sentence = true;
    } else if (i + 1 - start >= 2 * block) {
      p.spans.emplace_back(start, start + block);
      start += block;
    }
  }
  if (start < tokens.size()) p.spans.emplace_back(start, tokens.size());
  if (any_sentence) p.kind = PartitionKind::sentence;
  return p;
}

/// Mean of w_minus [-k]_+ + w_plus [k]_+ over the span, via prefix sums.
class SpanScorer {
 public:
  SpanScorer(const CurvatureField& field, double w_minus, double w_plus)
      : prefix_(field.contribution_prefix(w_minus, w_plus)) {
    if (!(w_minus >= 0.0) || !(w_plus >= 0.0)) throw InvalidInput("span weights must be non-negative");
  }

  double operator()(TokenRange span) const {
    if (span.second <= span.first) throw InvalidInput("empty span");
    if (span.second >= prefix_.size()) throw InvalidInput("span extends past the field");
    return (prefix_[span.second] - prefix_[span.first]) / static_cast<double>(span.second - span.first);
  }

 private:
  std::vector<double> prefix_;
};

inline double span_score(const CurvatureField& field, TokenRange span, double w_minus = 1.0, double w_plus = 1.0) {
  return SpanScorer(field, w_minus, w_plus)(span);
}

struct PrunePlan {
  std::vector<std::size_t> selected;  // ascending span indices
  std::size_t total_tokens = 0;
  std::vector<double> scores;
};

/// Greedy budgeted selection in descending score (ties: earlier span).
/// A span is taken when it fits the remaining budget; then each unselected
/// neighbour within index distance `guard` (nearest first, left before
/// right) is taken if it still fits.
inline PrunePlan curv_prune(const CurvatureField& field, const SpanPartition& partition, std::size_t budget,
                            double w_minus = 1.0, double w_plus = 1.0, std::size_t guard = 0) {
  partition.validate();
  if (partition.length() > field.length()) throw InvalidInput("partition longer than the curvature field");
  const SpanScorer score(field, w_minus, w_plus);
  const std::size_t m = partition.spans.size();
  PrunePlan plan;
  plan.scores.reserve(m);
  for (const auto& span : partition.spans) plan.scores.push_back(score(span));

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return plan.scores[a] > plan.scores[b]; });

  std::vector<bool> taken(m, false);
  std::size_t remaining = budget;
  auto try_take = [&](std::size_t j) {
    const std::size_t len = partition.spans[j].second - partition.spans[j].first;
    if (taken[j] || len > remaining) return false;
    taken[j] = true;
    remaining -= len;
    return true;
  };
  for (std::size_t j : order) {
    if (!try_take(j)) continue;
    for (std::size_t d = 1; d <= guard; ++d) {
      if (j >= d) try_take(j - d);
      if (j + d < m) try_take(j + d);
    }
  }
  for (std::size_t j = 0; j < m; ++j)
    if (taken[j]) plan.selected.push_back(j);
  plan.total_tokens = budget - remaining;
  return plan;
}

/// M_- = sum over evaluated positions of [-kappa]_+.
inline double fanout_mass(const CurvatureField& field, const std::vector<std::size_t>& eval_positions) {
  if (eval_positions.empty()) throw InvalidInput("fanout_mass: no evaluated positions");
  double mass = 0.0;
  for (std::size_t p : eval_positions) mass += std::max(-field.at(p), 0.0);
  return mass;
}

inline double fanout_mass(const CurvatureField& field) { return fanout_mass(field, field.positions()); }

struct RoutingDecision {
  int k = 0;
  bool saturated = false;
};

/// k = clip(round(k_min + alpha * mass), k_min, k_max); saturated when the
/// rounded unclipped value reaches k_max.
inline RoutingDecision routing_map(double mass, int k_min, int k_max, double alpha) {
  if (k_min > k_max) throw InvalidInput("k_min must not exceed k_max");
  if (!(alpha >= 0.0)) throw InvalidInput("alpha must be non-negative");
  if (!(mass >= 0.0)) throw InvalidInput("fan-out mass must be non-negative");
  const double raw = std::round(static_cast<double>(k_min) + alpha * mass);
  RoutingDecision d;
  d.saturated = raw >= static_cast<double>(k_max);
  d.k = d.saturated ? k_max : std::max(k_min, static_cast<int>(raw));
  return d;
}

/// Token indices that are strict local maxima of |kappa| within +-window,
/// or the right side of a sign change (kappa_{i-1} kappa_i < 0).
inline std::vector<std::size_t> curvature_pivots(const CurvatureField& field, std::size_t window) {
  const auto& k = field.per_token();
  const std::size_t n = k.size();
  std::vector<std::size_t> pivots;
  for (std::size_t i = 1; i < n; ++i) {
    bool pivot = k[i - 1] * k[i] < 0.0;
    if (!pivot && window > 0) {
      const std::size_t lo = i >= window ? i - window : 0;
      const std::size_t hi = std::min(n - 1, i + window);
      bool strict_max = true;
      for (std::size_t j = lo; j <= hi && strict_max; ++j)
        if (j != i && std::abs(k[j]) >= std::abs(k[i])) strict_max = false;
      pivot = strict_max;
    }
    if (pivot) pivots.push_back(i);
  }
  return pivots;
}

/// Cuts a document at curvature pivots so every chunk but the last has a
/// length in [l_min, l_max]: pivots closer than l_min to the previous cut
/// are dropped, and gaps longer than l_max are cut every l_max tokens.
inline std::vector<TokenRange> pivot_chunks(const CurvatureField& doc_field, std::size_t l_min, std::size_t l_max,
                                            std::size_t window = 3) {
  if (l_min < 1 || l_min > l_max) throw InvalidInput("chunk lengths need 1 <= l_min <= l_max");
  const std::size_t n = doc_field.length();
  if (n < 1) throw InvalidInput("empty document");
  std::vector<std::size_t> cuts{0};
  for (std::size_t p : curvature_pivots(doc_field, window)) {
    while (p - cuts.back() > l_max) cuts.push_back(cuts.back() + l_max);
    if (p - cuts.back() >= l_min) cuts.push_back(p);
  }
  while (n - cuts.back() > l_max) cuts.push_back(cuts.back() + l_max);
  std::vector<TokenRange> chunks;
  for (std::size_t i = 0; i < cuts.size(); ++i)
    chunks.emplace_back(cuts[i], i + 1 < cuts.size() ? cuts[i + 1] : n);
  return chunks;
}

/// Windows around the top-m fan-out slots (largest [-kappa]_+, ties to the
/// earlier position), radius `window`, truncated just inside the nearest
/// punctuation token on either side; overlapping windows are merged.
inline std::vector<TokenRange> extract_anchors(const CurvatureField& z_field, const std::vector<std::string>& tokens,
                                               std::size_t m, std::size_t window,
                                               const std::set<std::string>& punctuation = sentence_terminators()) {
  if (m < 1) throw InvalidInput("anchor count m must be at least 1");
  const auto& positions = z_field.positions();
  if (positions.empty()) throw InvalidInput("no evaluated positions");
  if (tokens.size() != z_field.length()) throw InvalidInput("token count does not match the field length");

  std::vector<std::size_t> fan;
  for (std::size_t p : positions)
    if (z_field.at(p) < 0.0) fan.push_back(p);
  std::stable_sort(fan.begin(), fan.end(),
                   [&](std::size_t a, std::size_t b) { return z_field.at(a) < z_field.at(b); });
  if (fan.size() > m) fan.resize(m);

  std::vector<TokenRange> ranges;
  const std::size_t n = tokens.size();
  for (std::size_t p : fan) {
    std::size_t start = p;
    for (std::size_t d = 1; d <= window && p >= d; ++d) {
      if (punctuation.count(tokens[p - d])) break;
      start = p - d;
    }
    std::size_t end = p + 1;
    for (std::size_t d = 1; d <= window && p + d < n; ++d) {
      if (punctuation.count(tokens[p + d])) break;
      end = p + d + 1;
    }
    ranges.emplace_back(start, end);
  }
  std::sort(ranges.begin(), ranges.end());
  std::vector<TokenRange> merged;
  for (const auto& r : ranges) {
    if (!merged.empty() && r.first < merged.back().second)
      merged.back().second = std::max(merged.back().second, r.second);
    else
      merged.push_back(r);
  }
  return merged;
}

struct DocumentChunk {
  std::string doc_id;
  std::size_t start = 0;
  std::size_t end = 0;
};

struct RoutePlan {
  double fanout_mass = 0.0;
  int k = 0;
  bool saturated = false;
  bool full_context = false;
  std::vector<DocumentChunk> chunks;
  std::vector<TokenRange> anchors;
};

struct RouteParams {
  int k_min = 2;
  int k_max = 10;
  double alpha = 4.0;
  std::size_t l_min = 32;
  std::size_t l_max = 256;
  std::size_t pivot_window = 3;
  std::size_t anchor_window = 3;
  std::size_t m = 3;
};

struct RouteDocument {
  std::string doc_id;
  CurvatureField field;
};

/// Routing, chunking and anchor extraction for one evaluated sequence z.
inline RoutePlan plan_route(const CurvatureField& z_field, const std::vector<std::string>& z_tokens,
                            const std::vector<RouteDocument>& documents, const RouteParams& params) {
  RoutePlan plan;
  plan.fanout_mass = fanout_mass(z_field);
  const RoutingDecision d = routing_map(plan.fanout_mass, params.k_min, params.k_max, params.alpha);
  plan.k = d.k;
  plan.saturated = d.saturated;
  plan.full_context = d.saturated;
  for (const auto& doc : documents)
    for (const auto& [s, e] : pivot_chunks(doc.field, params.l_min, params.l_max, params.pivot_window))
      plan.chunks.push_back({doc.doc_id, s, e});
  plan.anchors = extract_anchors(z_field, z_tokens, params.m, params.anchor_window);
  return plan;
}

}  // namespace texture

#endif  // TEXTURE_CONTROL_HPP
