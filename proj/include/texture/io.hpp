#ifndef TEXTURE_IO_HPP
#define TEXTURE_IO_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "texture/beliefs.hpp"
#include "texture/kernel.hpp"
#include "texture/rng.hpp"
#include "texture/texture.hpp"

namespace texture::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr double kLoadMassTolerance = 1e-6;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path);
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << contents;
  if (!out) throw IoError("cannot write " + path);
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

/// FNV-1a over each input's bytes, chained in the given order.
inline std::string content_hash(const std::vector<std::string>& contents) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& c : contents) {
    h = fnv1a64(c, h);
    h = fnv1a64(std::string_view("\x1f", 1), h);
  }
  return "fnv1a64:" + hex64(h);
}

/// 9 significant digits, %g style.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream ss;
  ss << std::setprecision(9) << v;
  return ss.str();
}

// ---------------------------------------------------------------------------
// Belief-field files.

namespace detail {

[[noreturn]] inline void fail(const std::string& slot, const std::string& path, const std::string& what) {
  throw ValidationError("slot '" + slot + "' at " + path + ": " + what);
}

struct StateMap {
  SupportPtr support;
  bool has_tail = false;
  std::vector<std::size_t> file_to_canonical;  // per file state
};

inline StateMap map_states(const json& states, const std::string& slot) {
  if (!states.is_array() || states.empty()) fail(slot, "states", "must be a non-empty array");
  std::vector<std::string> candidates;
  StateMap map;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!states[i].is_string()) fail(slot, "states[" + std::to_string(i) + "]", "must be a string");
    const auto id = states[i].get<std::string>();
    if (id == kTailState) {
      if (i + 1 != states.size()) fail(slot, "states", "tail state must be listed last");
      map.has_tail = true;
    } else {
      candidates.push_back(id);
    }
  }
  try {
    map.support = SlotSupport::from_candidates(candidates);
  } catch (const InvalidInput& e) {
    fail(slot, "states", e.what());
  }
  for (std::size_t i = 0; i < states.size(); ++i)
    map.file_to_canonical.push_back(*map.support->index_of(states[i].get<std::string>()));
  return map;
}

inline Belief read_belief(const json& arr, const StateMap& map, const std::string& slot, const std::string& path) {
  if (!arr.is_array() || arr.size() != map.file_to_canonical.size())
    fail(slot, path, "probability array must match 'states' in length");
  std::vector<StateProb> raw;
  Vector probs = Vector::Zero(static_cast<Eigen::Index>(map.support->size()));
  double total = 0.0;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) fail(slot, path + "[" + std::to_string(i) + "]", "must be a number");
    const double p = arr[i].get<double>();
    if (!(p >= 0.0) || !std::isfinite(p)) fail(slot, path + "[" + std::to_string(i) + "]", "must be >= 0");
    probs[static_cast<Eigen::Index>(map.file_to_canonical[i])] = p;
    total += p;
    raw.emplace_back(map.support->state(map.file_to_canonical[i]), p);
  }
  if (!map.has_tail) {
    if (total > 1.0 && total <= 1.0 + kLoadMassTolerance)
      for (auto& entry : raw) entry.second /= total;
    try {
      return pushforward_tail(raw, map.support);
    } catch (const Error& e) {
      fail(slot, path, e.what());
    }
  }
  if (std::abs(total - 1.0) > kLoadMassTolerance)
    fail(slot, path, "probabilities sum to " + format_real(total) + ", outside 1e-6 of one");
  return Belief(map.support, probs / total);
}

inline std::string grid_key(int l, int r) { return std::to_string(l) + "," + std::to_string(r); }

inline json belief_array(const Belief& b) {
  json arr = json::array();
  for (std::size_t s = 0; s < b.size(); ++s) arr.push_back(b[s]);
  return arr;
}

inline Matrix read_cost(const json& rows, const StateMap& map, const std::string& slot) {
  const std::size_t file_n = map.file_to_canonical.size();
  if (!rows.is_array() || (rows.size() != file_n && rows.size() != map.support->candidate_count()))
    fail(slot, "cost", "must be square over 'states' or over the candidates");
  const std::size_t k = rows.size();
  const auto n = static_cast<Eigen::Index>(map.support->size());
  Matrix c = Matrix::Zero(n, n);
  // Without a tail entry in 'states', the file order is candidates only.
  for (std::size_t i = 0; i < k; ++i) {
    if (!rows[i].is_array() || rows[i].size() != k) fail(slot, "cost[" + std::to_string(i) + "]", "wrong length");
    for (std::size_t j = 0; j < k; ++j) {
      if (!rows[i][j].is_number()) fail(slot, "cost", "entries must be numbers");
      const auto ci = static_cast<Eigen::Index>(map.file_to_canonical[i]);
      const auto cj = static_cast<Eigen::Index>(map.file_to_canonical[j]);
      c(ci, cj) = rows[i][j].get<double>();
    }
  }
  CostMatrix cost{map.support, c, {}};
  if (k == map.support->candidate_count()) cost = tail_geometry(cost);
  try {
    cost.validate();
  } catch (const InvalidInput& e) {
    fail(slot, "cost", e.what());
  }
  return cost.c;
}

}  // namespace detail

inline BeliefField parse_slot(const json& j, std::size_t index) {
  std::string slot = "#" + std::to_string(index);
  if (!j.is_object()) detail::fail(slot, "slots[" + std::to_string(index) + "]", "must be an object");
  if (!j.contains("slot_id") || !j["slot_id"].is_string()) detail::fail(slot, "slot_id", "missing or not a string");
  slot = j["slot_id"].get<std::string>();

  BeliefField f;
  f.slot_id = slot;
  if (j.contains("position")) {
    if (!j["position"].is_number_unsigned() && !(j["position"].is_number_integer() && j["position"].get<long long>() >= 0))
      detail::fail(slot, "position", "must be a non-negative integer");
    f.position = j["position"].get<std::size_t>();
  }
  if (j.contains("condition")) {
    if (!j["condition"].is_string()) detail::fail(slot, "condition", "must be a string");
    f.condition = j["condition"].get<std::string>();
  }
  if (!j.contains("states")) detail::fail(slot, "states", "missing");
  const detail::StateMap map = detail::map_states(j["states"], slot);
  f.support = map.support;

  if (j.contains("radii")) {
    const auto& radii = j["radii"];
    if (!radii.is_array()) detail::fail(slot, "radii", "must be an array");
    for (const auto& r : radii) {
      if (!r.is_number_integer() || r.get<long long>() < 0) detail::fail(slot, "radii", "entries must be integers >= 0");
      f.radii.push_back(r.get<int>());
    }
    for (std::size_t i = 1; i < f.radii.size(); ++i)
      if (f.radii[i] <= f.radii[i - 1]) detail::fail(slot, "radii", "must be strictly increasing");
  }
  if (!f.radii.empty()) {
    if (!j.contains("grid") || !j["grid"].is_object()) detail::fail(slot, "grid", "missing or not an object");
    const auto& grid = j["grid"];
    if (grid.size() != f.radii.size() * f.radii.size())
      detail::fail(slot, "grid", "must hold exactly one entry per (L,R) radius pair");
    for (int l : f.radii)
      for (int r : f.radii) {
        const std::string key = detail::grid_key(l, r);
        if (!grid.contains(key)) detail::fail(slot, "grid", "missing cell \"" + key + "\"");
        f.grid.push_back(detail::read_belief(grid[key], map, slot, "grid[\"" + key + "\"]"));
      }
  }
  if (j.contains("left")) f.left_boundary = detail::read_belief(j["left"], map, slot, "left");
  if (j.contains("right")) f.right_boundary = detail::read_belief(j["right"], map, slot, "right");
  if (f.radii.empty() && !(j.contains("left") && j.contains("right")))
    detail::fail(slot, "left/right", "a slot needs a grid or both boundary beliefs");

  if (j.contains("embeddings")) {
    const auto& emb = j["embeddings"];
    if (!emb.is_object()) detail::fail(slot, "embeddings", "must be an object");
    for (auto it = emb.begin(); it != emb.end(); ++it) {
      if (!f.support->index_of(it.key())) detail::fail(slot, "embeddings." + it.key(), "state not in support");
      if (!it.value().is_array()) detail::fail(slot, "embeddings." + it.key(), "must be an array");
      std::vector<double> v;
      for (const auto& x : it.value()) {
        if (!x.is_number()) detail::fail(slot, "embeddings." + it.key(), "entries must be numbers");
        v.push_back(x.get<double>());
      }
      f.embeddings[it.key()] = std::move(v);
    }
  }
  if (j.contains("cost")) f.cost = detail::read_cost(j["cost"], map, slot);
  try {
    f.validate();
  } catch (const InvalidInput& e) {
    detail::fail(slot, "(field)", e.what());
  }
  return f;
}

inline std::vector<BeliefField> parse_belief_fields(const std::string& text, const std::string& origin = "<input>") {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(origin + ": not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw SchemaError(origin + ": top level must be an object");
  if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer())
    throw SchemaError(origin + ": missing integer schema_version");
  if (doc["schema_version"].get<int>() != kSchemaVersion)
    throw SchemaError(origin + ": unsupported schema_version " + doc["schema_version"].dump());
  if (!doc.contains("slots") || !doc["slots"].is_array()) throw SchemaError(origin + ": missing 'slots' array");
  std::vector<BeliefField> out;
  out.reserve(doc["slots"].size());
  for (std::size_t i = 0; i < doc["slots"].size(); ++i) out.push_back(parse_slot(doc["slots"][i], i));
  return out;
}

inline std::vector<BeliefField> load_belief_field(const std::string& path) {
  return parse_belief_fields(read_file(path), path);
}

inline json slot_to_json(const BeliefField& f) {
  json j;
  j["slot_id"] = f.slot_id;
  j["position"] = f.position;
  if (!f.condition.empty()) j["condition"] = f.condition;
  j["states"] = f.support->states();
  j["radii"] = f.radii;
  json grid = json::object();
  for (std::size_t l = 0; l < f.radii.size(); ++l)
    for (std::size_t r = 0; r < f.radii.size(); ++r)
      grid[detail::grid_key(f.radii[l], f.radii[r])] = detail::belief_array(f.at(l, r));
  j["grid"] = std::move(grid);
  if (f.left_boundary.support()) j["left"] = detail::belief_array(f.left_boundary);
  if (f.right_boundary.support()) j["right"] = detail::belief_array(f.right_boundary);
  if (!f.embeddings.empty()) j["embeddings"] = f.embeddings;
  if (f.cost) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < f.cost->rows(); ++i) {
      json row = json::array();
      for (Eigen::Index k = 0; k < f.cost->cols(); ++k) row.push_back((*f.cost)(i, k));
      rows.push_back(std::move(row));
    }
    j["cost"] = std::move(rows);
  }
  return j;
}

inline std::string dump_belief_fields(const std::vector<BeliefField>& fields) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["slots"] = json::array();
  for (const auto& f : fields) doc["slots"].push_back(slot_to_json(f));
  return doc.dump(1) + "\n";
}

inline void save_belief_field(const std::string& path, const std::vector<BeliefField>& fields) {
  write_file(path, dump_belief_fields(fields));
}

/// Sidecar cost matrices: {"slot_id": [[...], ...], ...}, rows in the
/// canonical state order of that slot (candidates, or candidates + tail).
inline std::map<std::string, json> load_cost_sidecar(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw SchemaError(path + ": cost sidecar must map slot_id to a matrix");
  std::map<std::string, json> out;
  for (auto it = doc.begin(); it != doc.end(); ++it) out[it.key()] = it.value();
  return out;
}

inline Matrix sidecar_cost(const BeliefField& f, const json& rows) {
  json states = f.support->states();
  detail::StateMap map = detail::map_states(states, f.slot_id);
  if (rows.is_array() && rows.size() == f.support->candidate_count()) {
    states.erase(states.end() - 1);
    map = detail::map_states(states, f.slot_id);
  }
  return detail::read_cost(rows, map, f.slot_id);
}

// ---------------------------------------------------------------------------
// Curvature fields and token streams.

inline json curvature_field_to_json(const CurvatureField& field) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["length"] = field.length();
  j["interpolation"] = to_string(field.interpolation());
  j["positions"] = field.positions();
  j["kappas"] = field.kappas();
  return j;
}

inline CurvatureField curvature_field_from_json(const json& j, const std::string& origin = "<field>") {
  if (!j.is_object()) throw SchemaError(origin + ": curvature field must be an object");
  if (!j.contains("schema_version") || j["schema_version"] != kSchemaVersion)
    throw SchemaError(origin + ": unsupported or missing schema_version");
  for (const char* key : {"length", "positions", "kappas"})
    if (!j.contains(key)) throw SchemaError(origin + ": missing '" + key + "'");
  Interpolation mode = Interpolation::nearest;
  if (j.contains("interpolation")) {
    const auto s = j["interpolation"].get<std::string>();
    if (s == "linear") mode = Interpolation::linear;
    else if (s != "nearest") throw SchemaError(origin + ": unknown interpolation " + s);
  }
  try {
    return CurvatureField(j["positions"].get<std::vector<std::size_t>>(), j["kappas"].get<std::vector<double>>(),
                          j["length"].get<std::size_t>(), mode);
  } catch (const json::exception& e) {
    throw SchemaError(origin + ": " + e.what());
  } catch (const InvalidInput& e) {
    throw ValidationError(origin + ": " + e.what());
  }
}

inline CurvatureField load_curvature_field(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": not valid JSON: " + e.what());
  }
  return curvature_field_from_json(j, path);
}

/// Tokens from a JSON array of strings, or whitespace-separated text.
inline std::vector<std::string> parse_tokens(const std::string& text) {
  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    try {
      return json::parse(text).get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw SchemaError(std::string("token array: ") + e.what());
    }
  }
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

}  // namespace texture::io

#endif  // TEXTURE_IO_HPP
