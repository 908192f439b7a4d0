#ifndef TEXTURE_COMMANDS_HPP
#define TEXTURE_COMMANDS_HPP

// Subcommand implementations behind the `texture` CLI. Each command takes a
// plain config struct and returns its output text, so tests can drive them
// without a process boundary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "texture/beliefs.hpp"
#include "texture/certificates.hpp"
#include "texture/control.hpp"
#include "texture/io.hpp"
#include "texture/kernel.hpp"
#include "texture/parallel.hpp"
#include "texture/synth.hpp"
#include "texture/texture.hpp"

namespace texture::cli {

using io::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitConvergence = 3;
inline constexpr int kExitIo = 4;

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::convergence_failure: return kExitConvergence;
    case ErrorCode::io_error: return kExitIo;
    default: return kExitValidation;
  }
}

enum class SmoothingPolicy { automatic, always, never };

inline SmoothingPolicy smoothing_from_string(const std::string& s) {
  if (s == "auto") return SmoothingPolicy::automatic;
  if (s == "always") return SmoothingPolicy::always;
  if (s == "never") return SmoothingPolicy::never;
  throw InvalidInput("unknown smoothing policy: " + s);
}

inline const char* to_string(SmoothingPolicy p) {
  switch (p) {
    case SmoothingPolicy::automatic: return "auto";
    case SmoothingPolicy::always: return "always";
    case SmoothingPolicy::never: return "never";
  }
  return "auto";
}

/// Applies the policy to a group of beliefs that must stay comparable:
/// under `automatic`, all are smoothed as soon as any has a zero entry.
inline std::vector<Belief> apply_smoothing(std::vector<Belief> group, SmoothingPolicy policy, double delta) {
  bool needed = policy == SmoothingPolicy::always;
  if (policy == SmoothingPolicy::automatic)
    needed = std::any_of(group.begin(), group.end(), [](const Belief& b) { return !b.strictly_positive(); });
  if (needed)
    for (auto& b : group) b = smooth(b, delta);
  return group;
}

inline std::string metadata_comment(const json& config, const std::string& hash) {
  return "# config: " + config.dump() + "\n# input_hash: " + hash + "\n";
}

// ---------------------------------------------------------------------------
// Statistics for certify summaries.

/// Conventional median (mean of the two middle values for even counts).
inline double median(std::vector<double> v) {
  if (v.empty()) throw InvalidInput("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Linear-interpolation quantile (type 7) of a sample.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw InvalidInput("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

inline Interval percentile_interval(const std::vector<double>& draws) {
  return {quantile(draws, 0.025), quantile(draws, 0.975)};
}

// ---------------------------------------------------------------------------
// validate

inline std::string cmd_validate(const std::string& path) {
  const auto fields = io::load_belief_field(path);
  std::size_t grids = 0;
  std::size_t boundaries = 0;
  for (const auto& f : fields) {
    grids += f.has_grid() ? 1 : 0;
    boundaries += (f.left_boundary.support() && f.right_boundary.support()) ? 1 : 0;
  }
  std::ostringstream out;
  out << "ok: " << fields.size() << " slots (" << grids << " with grids, " << boundaries
      << " with boundary beliefs)\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// certify

struct CertifyConfig {
  std::vector<std::pair<std::string, std::string>> inputs;  // (condition label or "", path)
  bool weighted = true;
  std::optional<std::string> ref_state;
  std::optional<std::size_t> cei_l_index;
  std::optional<std::size_t> cei_r_index;
  SmoothingPolicy smoothing = SmoothingPolicy::automatic;
  double delta = kDefaultSmoothing;
  int resamples = 1000;
  std::uint64_t seed = 0;

  json to_json() const {
    json inputs_json = json::array();
    for (const auto& [cond, path] : inputs) inputs_json.push_back({{"condition", cond}, {"path", path}});
    return {{"command", "certify"},
            {"inputs", inputs_json},
            {"weighted", weighted},
            {"ref_state", ref_state ? json(*ref_state) : json("auto")},
            {"cei_l_index", cei_l_index ? json(*cei_l_index) : json("max")},
            {"cei_r_index", cei_r_index ? json(*cei_r_index) : json("max")},
            {"smoothing", to_string(smoothing)},
            {"delta", delta},
            {"resamples", resamples},
            {"seed", seed}};
  }
};

struct SlotCertificate {
  std::string slot_id;
  std::string condition;
  double h = 0.0;
  double cei = 0.0;
};

/// Holonomy h and CEI for one field, after smoothing the whole grid when
/// the policy asks for it.
inline SlotCertificate certify_field(BeliefField field, const CertifyConfig& config) {
  if (field.grid_size() < 2) throw InvalidInput("slot '" + field.slot_id + "' needs a grid with >= 2 radii");
  field.grid = apply_smoothing(std::move(field.grid), config.smoothing, config.delta);
  SlotCertificate out;
  out.slot_id = field.slot_id;
  out.condition = field.condition;
  const std::string ref = config.ref_state ? *config.ref_state : default_ref_state(field);
  out.h = holonomy(field, ref, config.weighted).h;
  const std::size_t last = field.grid_size() - 1;
  out.cei = cei(field, config.cei_l_index.value_or(last), config.cei_r_index.value_or(last)).cei;
  return out;
}

inline std::vector<std::string> condition_order(const std::vector<SlotCertificate>& rows) {
  std::vector<std::string> order;
  for (const char* c : {"real", "swap", "shuffle"})
    if (std::any_of(rows.begin(), rows.end(), [&](const auto& r) { return r.condition == c; })) order.emplace_back(c);
  std::vector<std::string> rest;
  for (const auto& r : rows)
    if (std::find(order.begin(), order.end(), r.condition) == order.end() &&
        std::find(rest.begin(), rest.end(), r.condition) == rest.end())
      rest.push_back(r.condition);
  std::sort(rest.begin(), rest.end());
  order.insert(order.end(), rest.begin(), rest.end());
  return order;
}

/// CSV: one `slot` row per slot, a `median` row per condition, and a
/// `delta` row (first condition minus each other one) with 95% percentile
/// bootstrap intervals over `resamples` resamples.
inline std::string cmd_certify(const CertifyConfig& config) {
  std::vector<BeliefField> fields;
  std::vector<std::string> contents;
  for (const auto& [label, path] : config.inputs) {
    contents.push_back(io::read_file(path));
    auto loaded = io::parse_belief_fields(contents.back(), path);
    for (auto& f : loaded) {
      if (!label.empty()) f.condition = label;
      if (f.condition.empty()) f.condition = "real";
      fields.push_back(std::move(f));
    }
  }
  if (config.resamples < 1) throw InvalidInput("resamples must be positive");

  std::vector<SlotCertificate> rows(fields.size());
  parallel_for(fields.size(), [&](std::size_t i) { rows[i] = certify_field(fields[i], config); });

  const auto conditions = condition_order(rows);
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> samples;
  for (const auto& r : rows) {
    samples[r.condition].first.push_back(r.h);
    samples[r.condition].second.push_back(r.cei);
  }
  for (const auto& c : conditions)
    if (samples[c].first.size() < 2) throw InvalidInput("condition '" + c + "' has fewer than 2 slots");

  // Bootstrap draws of the per-condition medians, one stream for the run.
  SplitMix64 rng(config.seed);
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> boot;
  for (const auto& c : conditions) {
    const auto& [hs, ceis] = samples[c];
    auto& [bh, bc] = boot[c];
    std::vector<double> rh(hs.size()), rc(hs.size());
    for (int b = 0; b < config.resamples; ++b) {
      for (std::size_t k = 0; k < hs.size(); ++k) {
        const auto idx = static_cast<std::size_t>(rng.below(hs.size()));
        rh[k] = hs[idx];
        rc[k] = ceis[idx];
      }
      bh.push_back(median(rh));
      bc.push_back(median(rc));
    }
  }

  std::ostringstream out;
  out << metadata_comment(config.to_json(), io::content_hash(contents));
  out << "row_type,slot_id,condition,h,cei,h_ci_low,h_ci_high,cei_ci_low,cei_ci_high\n";
  for (const auto& r : rows)
    out << "slot," << r.slot_id << ',' << r.condition << ',' << io::format_real(r.h) << ','
        << io::format_real(r.cei) << ",,,,\n";
  for (const auto& c : conditions) {
    const Interval ih = percentile_interval(boot[c].first);
    const Interval ic = percentile_interval(boot[c].second);
    out << "median,," << c << ',' << io::format_real(median(samples[c].first)) << ','
        << io::format_real(median(samples[c].second)) << ',' << io::format_real(ih.low) << ','
        << io::format_real(ih.high) << ',' << io::format_real(ic.low) << ',' << io::format_real(ic.high) << '\n';
  }
  for (std::size_t k = 1; k < conditions.size(); ++k) {
    const auto& a = conditions[0];
    const auto& b = conditions[k];
    std::vector<double> dh, dc;
    for (int i = 0; i < config.resamples; ++i) {
      dh.push_back(boot[a].first[static_cast<std::size_t>(i)] - boot[b].first[static_cast<std::size_t>(i)]);
      dc.push_back(boot[a].second[static_cast<std::size_t>(i)] - boot[b].second[static_cast<std::size_t>(i)]);
    }
    const Interval ih = percentile_interval(dh);
    const Interval ic = percentile_interval(dc);
    out << "delta,," << a << '-' << b << ','
        << io::format_real(median(samples[a].first) - median(samples[b].first)) << ','
        << io::format_real(median(samples[a].second) - median(samples[b].second)) << ','
        << io::format_real(ih.low) << ',' << io::format_real(ih.high) << ',' << io::format_real(ic.low) << ','
        << io::format_real(ic.high) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// texture

struct TextureConfig {
  std::string input;
  std::optional<std::string> cost_sidecar;
  double epsilon = 0.0;  // <= 0: median candidate cost per slot
  double tau = 0.0;
  double eps0 = kDefaultGuard;
  double tol = kBridgeTolerance;
  int max_iter = kBridgeMaxIterations;
  SmoothingPolicy smoothing = SmoothingPolicy::automatic;
  double delta = kDefaultSmoothing;
  std::optional<std::size_t> length;
  Interpolation interpolation = Interpolation::nearest;

  json to_json() const {
    return {{"command", "texture"},
            {"input", input},
            {"costs", cost_sidecar ? json(*cost_sidecar) : json(nullptr)},
            {"epsilon", epsilon > 0.0 ? json(epsilon) : json("median")},
            {"tau", tau},
            {"eps0", eps0},
            {"tol", tol},
            {"max_iter", max_iter},
            {"smoothing", to_string(smoothing)},
            {"delta", delta},
            {"length", length ? json(*length) : json("auto")},
            {"interpolation", to_string(interpolation)}};
  }
};

struct TextureRow {
  std::string slot_id;
  std::size_t position = 0;
  std::optional<SlotCurvature> result;
  double epsilon = 0.0;
  std::string error;
};

struct TextureOutput {
  std::string csv;
  std::optional<json> field;  // absent when no slot succeeded
  std::vector<TextureRow> rows;
};

/// Kernel for one slot: inline cost, then sidecar cost, then embeddings.
inline NeutralKernel slot_kernel(const BeliefField& f, const std::map<std::string, json>& sidecar,
                                 const TextureConfig& config, double& epsilon_used) {
  CostMatrix cost{f.support, {}, {}};
  if (f.cost) {
    cost.c = *f.cost;
  } else if (auto it = sidecar.find(f.slot_id); it != sidecar.end()) {
    cost.c = io::sidecar_cost(f, it->second);
  } else if (!f.embeddings.empty()) {
    cost = cost_from_embeddings(f.support, f.embeddings);
  } else {
    throw MissingEmbedding("slot has no cost matrix and no embeddings");
  }
  epsilon_used = config.epsilon > 0.0 ? config.epsilon : default_epsilon(cost);
  return build_kernel(cost, epsilon_used, config.tau);
}

inline TextureOutput cmd_texture(const TextureConfig& config) {
  std::vector<std::string> contents{io::read_file(config.input)};
  const auto fields = io::parse_belief_fields(contents[0], config.input);
  std::map<std::string, json> sidecar;
  if (config.cost_sidecar) {
    contents.push_back(io::read_file(*config.cost_sidecar));
    sidecar = io::load_cost_sidecar(*config.cost_sidecar);
  }

  TextureOutput out;
  out.rows.resize(fields.size());
  parallel_for(fields.size(), [&](std::size_t i) {
    const BeliefField& f = fields[i];
    TextureRow& row = out.rows[i];
    row.slot_id = f.slot_id;
    row.position = f.position;
    try {
      if (!f.left_boundary.support() || !f.right_boundary.support())
        throw InvalidInput("slot needs both boundary beliefs");
      auto ends = apply_smoothing({f.left_boundary, f.right_boundary}, config.smoothing, config.delta);
      const NeutralKernel kernel = slot_kernel(f, sidecar, config, row.epsilon);
      SlotCurvature sc = texture_slot(ends[0], ends[1], kernel, config.eps0, config.tol, config.max_iter);
      sc.slot_id = f.slot_id;
      sc.position = f.position;
      row.result = std::move(sc);
    } catch (const Error& e) {
      row.error = to_string(e.code());
    }
  });

  const std::string hash = io::content_hash(contents);
  std::ostringstream csv;
  csv << metadata_comment(config.to_json(), hash);
  csv << "slot_id,position,kappa,gap,energy,iterations,marginal_error,epsilon,flags,error\n";
  std::vector<SlotCurvature> ok;
  for (const auto& row : out.rows) {
    csv << row.slot_id << ',' << row.position << ',';
    if (row.result) {
      const auto& r = *row.result;
      csv << io::format_real(r.kappa) << ',' << io::format_real(r.gap) << ',' << io::format_real(r.energy) << ','
          << r.iterations << ',' << io::format_real(r.marginal_error) << ',' << io::format_real(row.epsilon) << ','
          << (r.low_energy ? "low_energy" : "") << ",\n";
      ok.push_back(r);
    } else {
      csv << ",,,,,,," << row.error << '\n';
    }
  }
  out.csv = csv.str();

  if (!ok.empty()) {
    std::size_t length = 0;
    for (const auto& r : ok) length = std::max(length, r.position + 1);
    if (config.length) {
      if (*config.length < length) throw InvalidInput("--length is shorter than the largest slot position");
      length = *config.length;
    }
    json j = io::curvature_field_to_json(estimate_field(ok, length, config.interpolation));
    json slots = json::array();
    for (const auto& r : ok)
      slots.push_back({{"slot_id", r.slot_id},
                       {"position", r.position},
                       {"kappa", r.kappa},
                       {"gap", r.gap},
                       {"energy", r.energy},
                       {"low_energy", r.low_energy}});
    j["slots"] = std::move(slots);
    j["config"] = config.to_json();
    j["input_hash"] = hash;
    out.field = std::move(j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// prune / route

enum class PartitionChoice { sentence, fixed };

struct PruneConfig {
  std::string field;
  std::optional<std::string> tokens;
  std::size_t budget = 0;
  double w_minus = 1.0;
  double w_plus = 1.0;
  std::size_t guard = 0;
  PartitionChoice partition = PartitionChoice::sentence;
  std::size_t block = kDefaultBlock;

  json to_json() const {
    return {{"command", "prune"},
            {"field", field},
            {"tokens", tokens ? json(*tokens) : json(nullptr)},
            {"budget", budget},
            {"w_minus", w_minus},
            {"w_plus", w_plus},
            {"guard", guard},
            {"partition", partition == PartitionChoice::sentence ? "sentence" : "fixed"},
            {"block", block}};
  }
};

inline json spans_json(const std::vector<TokenRange>& spans) {
  json arr = json::array();
  for (const auto& [s, e] : spans) arr.push_back({s, e});
  return arr;
}

inline json cmd_prune(const PruneConfig& config) {
  std::vector<std::string> contents{io::read_file(config.field)};
  const CurvatureField field = io::curvature_field_from_json(json::parse(contents[0]), config.field);
  std::vector<std::string> tokens;
  if (config.tokens) {
    contents.push_back(io::read_file(*config.tokens));
    tokens = io::parse_tokens(contents.back());
    if (tokens.size() != field.length())
      throw InvalidInput("token count " + std::to_string(tokens.size()) + " differs from field length " +
                         std::to_string(field.length()));
  }
  if (!(config.w_minus >= 0.0) || !(config.w_plus >= 0.0)) throw InvalidInput("weights must be non-negative");
  SpanPartition partition;
  if (config.partition == PartitionChoice::sentence) {
    if (!config.tokens) throw InvalidInput("sentence partition needs --tokens");
    partition = sentence_partition(tokens, config.block);
  } else {
    partition = fixed_block_partition(field.length(), config.block);
  }
  const PrunePlan plan = curv_prune(field, partition, config.budget, config.w_minus, config.w_plus, config.guard);

  json j;
  j["selected"] = plan.selected;
  std::vector<TokenRange> chosen;
  for (std::size_t idx : plan.selected) chosen.push_back(partition.spans[idx]);
  j["selected_spans"] = spans_json(chosen);
  j["total_tokens"] = plan.total_tokens;
  j["budget"] = config.budget;
  j["partition"] = {{"kind", to_string(partition.kind)}, {"spans", spans_json(partition.spans)}};
  j["scores"] = plan.scores;
  if (config.tokens) {
    std::vector<std::string> kept;
    for (const auto& [s, e] : chosen) kept.insert(kept.end(), tokens.begin() + static_cast<std::ptrdiff_t>(s),
                                                  tokens.begin() + static_cast<std::ptrdiff_t>(e));
    j["pruned_tokens"] = kept;
  }
  j["config"] = config.to_json();
  j["input_hash"] = io::content_hash(contents);
  return j;
}

struct RouteConfig {
  std::string query_field;
  std::string query_tokens;
  std::vector<std::pair<std::string, std::string>> documents;  // (doc_id, field path)
  RouteParams params;

  json to_json() const {
    json docs = json::array();
    for (const auto& [id, path] : documents) docs.push_back({{"doc_id", id}, {"field", path}});
    return {{"command", "route"},
            {"query_field", query_field},
            {"query_tokens", query_tokens},
            {"documents", docs},
            {"k_min", params.k_min},
            {"k_max", params.k_max},
            {"alpha", params.alpha},
            {"l_min", params.l_min},
            {"l_max", params.l_max},
            {"pivot_window", params.pivot_window},
            {"anchor_window", params.anchor_window},
            {"m", params.m}};
  }
};

inline json cmd_route(const RouteConfig& config) {
  if (config.params.k_min < 0 || config.params.k_min > config.params.k_max)
    throw InvalidInput("need 0 <= k_min <= k_max");
  std::vector<std::string> contents{io::read_file(config.query_field), io::read_file(config.query_tokens)};
  const CurvatureField z = io::curvature_field_from_json(json::parse(contents[0]), config.query_field);
  const auto tokens = io::parse_tokens(contents[1]);
  std::vector<RouteDocument> docs;
  for (const auto& [id, path] : config.documents) {
    contents.push_back(io::read_file(path));
    docs.push_back({id, io::curvature_field_from_json(json::parse(contents.back()), path)});
  }
  const RoutePlan plan = plan_route(z, tokens, docs, config.params);

  json j;
  j["fanout_mass"] = plan.fanout_mass;
  j["k"] = plan.k;
  j["saturated"] = plan.saturated;
  j["full_context"] = plan.full_context;
  json chunks = json::array();
  for (const auto& c : plan.chunks) chunks.push_back({{"doc_id", c.doc_id}, {"start", c.start}, {"end", c.end}});
  j["chunks"] = std::move(chunks);
  json anchors = json::array();
  std::vector<std::string> augmented = tokens;
  for (const auto& [s, e] : plan.anchors) {
    std::vector<std::string> span(tokens.begin() + static_cast<std::ptrdiff_t>(s),
                                  tokens.begin() + static_cast<std::ptrdiff_t>(e));
    augmented.insert(augmented.end(), span.begin(), span.end());
    anchors.push_back({{"start", s}, {"end", e}, {"tokens", span}});
  }
  j["anchors"] = std::move(anchors);
  j["augmented_query"] = augmented;
  j["config"] = config.to_json();
  j["input_hash"] = io::content_hash(contents);
  return j;
}

// ---------------------------------------------------------------------------
// synth

struct SynthConfig {
  synth::SynthSpec spec;
  std::size_t count = 1;
  std::string condition = "real";

  json to_json() const {
    return {{"command", "synth"},
            {"kind", synth::to_string(spec.kind)},
            {"support_size", spec.support_size},
            {"radii", spec.grid},
            {"seed", spec.seed},
            {"count", count},
            {"condition", condition},
            {"parameters", spec.parameters}};
  }
};

/// `count` fields; field i uses seed derive_seed(seed, i) and position i.
inline std::string cmd_synth(const SynthConfig& config) {
  if (config.count < 1) throw InvalidInput("count must be positive");
  std::vector<BeliefField> fields(config.count);
  parallel_for(config.count, [&](std::size_t i) {
    synth::SynthSpec spec = config.spec;
    spec.seed = derive_seed(config.spec.seed, static_cast<std::uint64_t>(i));
    BeliefField f = synth::generate(spec);
    f.slot_id = std::string(synth::to_string(spec.kind)) + "-" + std::to_string(i);
    f.position = i;
    f.condition = config.condition;
    fields[i] = std::move(f);
  });
  json doc = json::parse(io::dump_belief_fields(fields));
  doc["config"] = config.to_json();
  return doc.dump(1) + "\n";
}

}  // namespace texture::cli

#endif  // TEXTURE_COMMANDS_HPP
