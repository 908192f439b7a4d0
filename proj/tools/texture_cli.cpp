#include <exception>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "texture/commands.hpp"

namespace {

using namespace texture;
using namespace texture::cli;

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-")
    std::cout << text;
  else
    io::write_file(out_path, text);
}

std::pair<std::string, std::string> split_assignment(const std::string& s, const char* what) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
    throw InvalidInput(std::string(what) + " must look like key=value: " + s);
  return {s.substr(0, eq), s.substr(eq + 1)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curvature certificates, texture fields and controllers over belief-field files."};
  app.require_subcommand(1);
  std::string out_path;

  // validate
  auto* validate = app.add_subcommand("validate", "Load and check a belief-field file");
  std::string validate_input;
  validate->add_option("input", validate_input, "Belief-field JSON")->required();

  // certify
  auto* certify = app.add_subcommand("certify", "Holonomy and CEI per slot with bootstrap summaries");
  CertifyConfig cc;
  std::vector<std::string> certify_inputs, real_inputs, swap_inputs, shuffle_inputs;
  std::string ref_state, smoothing_certify = "auto";
  bool uniform_weights = false;
  certify->add_option("inputs", certify_inputs, "Belief-field files; conditions taken from each slot");
  certify->add_option("--real", real_inputs, "Files labeled condition=real");
  certify->add_option("--swap", swap_inputs, "Files labeled condition=swap");
  certify->add_option("--shuffle", shuffle_inputs, "Files labeled condition=shuffle");
  certify->add_flag("--uniform-weights", uniform_weights, "Use 1/|S| weights instead of mu(L+1,R+1)");
  certify->add_option("--ref-state", ref_state, "Log-odds reference state (default: argmax of mu(0,0))");
  certify->add_option("--cei-l-index", cc.cei_l_index, "Grid index of L for CEI (default: largest)");
  certify->add_option("--cei-r-index", cc.cei_r_index, "Grid index of R for CEI (default: largest)");
  certify->add_option("--smoothing", smoothing_certify, "auto|always|never")->capture_default_str();
  certify->add_option("--delta", cc.delta, "Smoothing weight")->capture_default_str();
  certify->add_option("--resamples", cc.resamples, "Bootstrap resamples")->capture_default_str();
  certify->add_option("--seed", cc.seed, "Bootstrap seed")->capture_default_str();
  certify->add_option("-o,--out", out_path, "Output CSV (default stdout)");

  // texture
  auto* texture_cmd = app.add_subcommand("texture", "Bridge-midpoint curvature per slot");
  TextureConfig tc;
  std::string smoothing_texture = "auto", interpolation = "nearest", field_out;
  texture_cmd->add_option("input", tc.input, "Belief-field JSON")->required();
  texture_cmd->add_option("--costs", tc.cost_sidecar, "Cost sidecar JSON keyed by slot_id");
  texture_cmd->add_option("--epsilon", tc.epsilon, "Kernel temperature (<= 0: median candidate cost)")
      ->capture_default_str();
  texture_cmd->add_option("--tau", tc.tau, "Additive kernel floor")->capture_default_str();
  texture_cmd->add_option("--eps0", tc.eps0, "Curvature guard")->capture_default_str();
  texture_cmd->add_option("--tol", tc.tol, "Bridge marginal tolerance")->capture_default_str();
  texture_cmd->add_option("--max-iter", tc.max_iter, "Bridge iteration cap")->capture_default_str();
  texture_cmd->add_option("--smoothing", smoothing_texture, "auto|always|never")->capture_default_str();
  texture_cmd->add_option("--delta", tc.delta, "Smoothing weight")->capture_default_str();
  texture_cmd->add_option("--length", tc.length, "Token length of the curvature field");
  texture_cmd->add_option("--interpolation", interpolation, "nearest|linear")->capture_default_str();
  texture_cmd->add_option("--field-out", field_out, "Write the curvature-field JSON here");
  texture_cmd->add_option("-o,--out", out_path, "Output CSV (default stdout)");

  // prune
  auto* prune = app.add_subcommand("prune", "Budgeted span selection by curvature");
  PruneConfig pc;
  std::string partition = "sentence";
  prune->add_option("--field", pc.field, "Curvature-field JSON")->required();
  prune->add_option("--tokens", pc.tokens, "Token stream (JSON array or whitespace text)");
  prune->add_option("--budget", pc.budget, "Token budget")->required();
  prune->add_option("--w-minus", pc.w_minus, "Weight on fan-out curvature")->capture_default_str();
  prune->add_option("--w-plus", pc.w_plus, "Weight on focus curvature")->capture_default_str();
  prune->add_option("--guard", pc.guard, "Guard band in spans")->capture_default_str();
  prune->add_option("--partition", partition, "sentence|fixed")->capture_default_str();
  prune->add_option("--block", pc.block, "Block size for fixed partitions and long sentences")
      ->capture_default_str();
  prune->add_option("-o,--out", out_path, "Output JSON (default stdout)");

  // route
  auto* route = app.add_subcommand("route", "Fan-out routing, pivot chunking and anchors");
  RouteConfig rc;
  std::vector<std::string> docs;
  route->add_option("--field", rc.query_field, "Curvature-field JSON of the query")->required();
  route->add_option("--tokens", rc.query_tokens, "Query token stream")->required();
  route->add_option("--doc", docs, "Document curvature field as id=path (repeatable)");
  route->add_option("--k-min", rc.params.k_min, "Minimum retrieval depth")->capture_default_str();
  route->add_option("--k-max", rc.params.k_max, "Maximum retrieval depth")->capture_default_str();
  route->add_option("--alpha", rc.params.alpha, "Depth per unit fan-out mass")->capture_default_str();
  route->add_option("--l-min", rc.params.l_min, "Minimum chunk length")->capture_default_str();
  route->add_option("--l-max", rc.params.l_max, "Maximum chunk length")->capture_default_str();
  route->add_option("--pivot-window", rc.params.pivot_window, "Local-maximum window for pivots")
      ->capture_default_str();
  route->add_option("--anchor-window", rc.params.anchor_window, "Anchor radius")->capture_default_str();
  route->add_option("--anchors", rc.params.m, "Number of anchor slots")->capture_default_str();
  route->add_option("-o,--out", out_path, "Output JSON (default stdout)");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic belief fields");
  SynthConfig sc;
  std::string kind = "separable";
  std::vector<std::string> params;
  synth_cmd->add_option("--kind", kind, "separable|poe_null|ci_generative|random_positive")->capture_default_str();
  synth_cmd->add_option("--support-size", sc.spec.support_size, "States including the tail")
      ->capture_default_str();
  synth_cmd->add_option("--radii", sc.spec.grid, "Radius grid")->capture_default_str();
  synth_cmd->add_option("--seed", sc.spec.seed, "Master seed")->capture_default_str();
  synth_cmd->add_option("--count", sc.count, "Number of slots")->capture_default_str();
  synth_cmd->add_option("--condition", sc.condition, "Condition label")->capture_default_str();
  synth_cmd->add_option("--param", params, "Generator parameter key=value (repeatable)");
  synth_cmd->add_option("-o,--out", out_path, "Output JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*validate) {
      std::cout << cmd_validate(validate_input);
    } else if (*certify) {
      for (const auto& p : certify_inputs) cc.inputs.emplace_back("", p);
      for (const auto& p : real_inputs) cc.inputs.emplace_back("real", p);
      for (const auto& p : swap_inputs) cc.inputs.emplace_back("swap", p);
      for (const auto& p : shuffle_inputs) cc.inputs.emplace_back("shuffle", p);
      if (cc.inputs.empty()) throw InvalidInput("certify needs at least one input file");
      cc.weighted = !uniform_weights;
      if (!ref_state.empty()) cc.ref_state = ref_state;
      cc.smoothing = smoothing_from_string(smoothing_certify);
      emit(cmd_certify(cc), out_path);
    } else if (*texture_cmd) {
      tc.smoothing = smoothing_from_string(smoothing_texture);
      if (interpolation == "nearest")
        tc.interpolation = Interpolation::nearest;
      else if (interpolation == "linear")
        tc.interpolation = Interpolation::linear;
      else
        throw InvalidInput("unknown interpolation: " + interpolation);
      const TextureOutput result = cmd_texture(tc);
      emit(result.csv, out_path);
      if (!field_out.empty()) {
        if (!result.field) throw InvalidInput("no slot produced a curvature value");
        io::write_file(field_out, result.field->dump(1) + "\n");
      }
    } else if (*prune) {
      if (partition == "sentence")
        pc.partition = PartitionChoice::sentence;
      else if (partition == "fixed")
        pc.partition = PartitionChoice::fixed;
      else
        throw InvalidInput("unknown partition: " + partition);
      emit(cmd_prune(pc).dump(1) + "\n", out_path);
    } else if (*route) {
      for (const auto& d : docs) rc.documents.push_back(split_assignment(d, "--doc"));
      emit(cmd_route(rc).dump(1) + "\n", out_path);
    } else if (*synth_cmd) {
      sc.spec.kind = synth::kind_from_string(kind);
      for (const auto& p : params) {
        const auto [key, value] = split_assignment(p, "--param");
        try {
          sc.spec.parameters[key] = std::stod(value);
        } catch (const std::exception&) {
          throw InvalidInput("--param value is not a number: " + p);
        }
      }
      sc.spec.validate();
      emit(cmd_synth(sc), out_path);
    }
  } catch (const texture::Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const io::json::exception& e) {
    std::cerr << "error [SchemaError]: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}
