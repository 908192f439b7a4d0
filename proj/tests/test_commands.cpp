#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "texture/commands.hpp"

using namespace texture;
using namespace texture::cli;
using io::json;

namespace {

const std::string kData = TEXTURE_TEST_DATA;

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("texture_cmd_" + name)).string();
}

std::string write_synth(const std::string& name, synth::Kind kind, std::size_t count, std::uint64_t seed,
                        const std::string& condition = "real", std::map<std::string, double> params = {}) {
  SynthConfig c;
  c.spec.kind = kind;
  c.spec.seed = seed;
  c.spec.parameters = std::move(params);
  c.count = count;
  c.condition = condition;
  const std::string path = temp_path(name);
  io::write_file(path, cmd_synth(c));
  return path;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::vector<std::vector<std::string>> rows_of_type(const std::string& csv, const std::string& type) {
  std::vector<std::vector<std::string>> out;
  for (auto& r : csv_rows(csv))
    if (r[0] == type) out.push_back(r);
  return out;
}

json texture_slot_json(const std::string& id, std::size_t pos, const std::vector<double>& left,
                       const std::vector<double>& right, const std::vector<std::vector<double>>& cost) {
  std::vector<std::string> states;
  for (std::size_t i = 0; i + 1 < left.size(); ++i) states.push_back("c" + std::to_string(i));
  states.emplace_back(kTailState);
  return {{"slot_id", id}, {"position", pos}, {"states", states}, {"left", left}, {"right", right}, {"cost", cost}};
}

std::string write_doc(const std::string& name, const json& slots) {
  const std::string path = temp_path(name);
  io::write_file(path, json{{"schema_version", 1}, {"slots", slots}}.dump());
  return path;
}

class ThreadsEnv {
 public:
  explicit ThreadsEnv(const char* value) { setenv("TEXTURE_THREADS", value, 1); }
  ~ThreadsEnv() { unsetenv("TEXTURE_THREADS"); }
};

}  // namespace

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code_for(ErrorCode::validation_error), kExitValidation);
  EXPECT_EQ(exit_code_for(ErrorCode::schema_error), kExitValidation);
  EXPECT_EQ(exit_code_for(ErrorCode::invalid_input), kExitValidation);
  EXPECT_EQ(exit_code_for(ErrorCode::convergence_failure), kExitConvergence);
  EXPECT_EQ(exit_code_for(ErrorCode::io_error), kExitIo);
}

TEST(Statistics, MedianAndQuantile) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(quantile({0, 10}, 0.25), 2.5);
  EXPECT_EQ(quantile({5, 1, 3}, 1.0), 5.0);
  EXPECT_THROW(median({}), InvalidInput);
}

TEST(Smoothing, AutoOnlyWhenZerosPresent) {
  auto s = oracle::support_of(3);
  Vector p(3), z(3);
  p << 0.2, 0.3, 0.5;
  z << 0.5, 0.5, 0.0;
  const Belief pos(s, p), zero(s, z);
  EXPECT_EQ(apply_smoothing({pos, pos}, SmoothingPolicy::automatic, 1e-3)[0].probs(), p);
  const auto both = apply_smoothing({pos, zero}, SmoothingPolicy::automatic, 1e-3);
  EXPECT_TRUE(both[1].strictly_positive());
  EXPECT_NE(both[0].probs(), p);  // the whole group is smoothed together
  EXPECT_FALSE(apply_smoothing({zero}, SmoothingPolicy::never, 1e-3)[0].strictly_positive());
  EXPECT_NE(apply_smoothing({pos}, SmoothingPolicy::always, 1e-3)[0].probs(), p);
  EXPECT_THROW(smoothing_from_string("sometimes"), InvalidInput);
}

TEST(Validate, GoldenFile) {
  EXPECT_EQ(cmd_validate(kData + "/minimal.json"), "ok: 1 slots (1 with grids, 1 with boundary beliefs)\n");
  EXPECT_THROW(cmd_validate(kData + "/short_mass.json"), ValidationError);
}

TEST(Certify, SeparableFieldsHaveFlatMedians) {
  CertifyConfig c;
  c.inputs = {{"real", write_synth("sep_real.json", synth::Kind::separable, 6, 1)},
              {"swap", write_synth("sep_swap.json", synth::Kind::separable, 6, 2)},
              {"shuffle", write_synth("sep_shuffle.json", synth::Kind::separable, 6, 3)}};
  c.resamples = 200;
  const std::string csv = cmd_certify(c);
  EXPECT_EQ(csv_rows(csv)[0],
            (std::vector<std::string>{"row_type", "slot_id", "condition", "h", "cei", "h_ci_low", "h_ci_high",
                                      "cei_ci_low", "cei_ci_high"}));
  EXPECT_EQ(rows_of_type(csv, "slot").size(), 18u);
  const auto medians = rows_of_type(csv, "median");
  ASSERT_EQ(medians.size(), 3u);
  EXPECT_EQ(medians[0][2], "real");
  EXPECT_EQ(medians[2][2], "shuffle");
  for (const auto& r : medians) EXPECT_LE(std::abs(std::stod(r[3])), 1e-10);
  const auto deltas = rows_of_type(csv, "delta");
  ASSERT_EQ(deltas.size(), 2u);
  EXPECT_EQ(deltas[0][2], "real-swap");
  for (const auto& r : deltas)
    for (std::size_t k = 3; k < r.size(); ++k) EXPECT_LE(std::abs(std::stod(r[k])), 1e-10);
}

TEST(Certify, CiFieldsSeparateFromRandomControl) {
  CertifyConfig c;
  c.inputs = {{"real", write_synth("ci_real.json", synth::Kind::ci_generative, 12, 4)},
              {"shuffle", write_synth("ci_ctrl.json", synth::Kind::random_positive, 12, 5)}};
  const std::string csv = cmd_certify(c);
  const auto delta = rows_of_type(csv, "delta").at(0);
  // Deltas are real minus control: real CEI is zero, the control's is not.
  EXPECT_LT(std::stod(delta[4]), 0.0);
  EXPECT_LT(std::stod(delta[8]), 0.0);  // upper CI bound excludes zero
  for (const auto& r : rows_of_type(csv, "slot"))
    if (r[2] == "real") EXPECT_LE(std::stod(r[4]), 1e-10);
}

TEST(Certify, ReproducibleAndEchoesConfig) {
  CertifyConfig c;
  c.inputs = {{"", write_synth("rep.json", synth::Kind::random_positive, 8, 6)}};
  c.seed = 17;
  const std::string a = cmd_certify(c);
  EXPECT_EQ(a, cmd_certify(c));
  {
    ThreadsEnv env("4");
    EXPECT_EQ(a, cmd_certify(c));
  }
  EXPECT_NE(a.find("# config: {"), std::string::npos);
  EXPECT_NE(a.find("\"seed\":17"), std::string::npos);
  EXPECT_NE(a.find("# input_hash: fnv1a64:"), std::string::npos);
  c.seed = 18;
  EXPECT_NE(a, cmd_certify(c));
}

TEST(Certify, NeedsTwoSlotsPerCondition) {
  CertifyConfig c;
  c.inputs = {{"real", write_synth("one_a.json", synth::Kind::separable, 3, 1)},
              {"swap", write_synth("one_b.json", synth::Kind::separable, 1, 2)}};
  EXPECT_THROW(cmd_certify(c), InvalidInput);
  c.inputs = {{"", kData + "/missing.json"}};
  EXPECT_THROW(cmd_certify(c), IoError);
}

TEST(Texture, StationaryEndpointsGiveZeroCurvature) {
  SplitMix64 rng(3);
  json slots = json::array();
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t n = 3 + i;
    auto s = oracle::support_of(n);
    const Matrix c = oracle::random_symmetric_cost(n, rng);
    const NeutralKernel k = build_kernel(CostMatrix{s, c, {}}, default_epsilon(CostMatrix{s, c, {}}));
    const auto pi = oracle::to_vec(k.pi.probs());
    slots.push_back(texture_slot_json("p" + std::to_string(i), 2 * i, pi, pi, oracle::to_mat(c)));
  }
  TextureConfig tc;
  tc.input = write_doc("stationary.json", slots);
  const TextureOutput out = cmd_texture(tc);
  ASSERT_EQ(out.rows.size(), 4u);
  for (const auto& r : out.rows) {
    ASSERT_TRUE(r.result) << r.error;
    EXPECT_NEAR(r.result->kappa, 0.0, 1e-6);
    EXPECT_TRUE(r.result->low_energy);
  }
  ASSERT_TRUE(out.field);
  EXPECT_EQ((*out.field)["length"], 7);
}

TEST(Texture, UniformKernelMatchesClosedForm) {
  SplitMix64 rng(8);
  json slots = json::array();
  std::vector<double> expected;
  for (std::size_t i = 0; i < 6; ++i) {
    const std::size_t n = 2 + i % 4;
    auto s = oracle::support_of(n);
    const auto l = oracle::to_vec(oracle::random_belief(s, rng, 1.5).probs());
    const auto r = oracle::to_vec(oracle::random_belief(s, rng, 1.5).probs());
    const oracle::Vec u(n, 1.0 / static_cast<double>(n));
    const double e = oracle::kl(l, u) + oracle::kl(r, u);
    expected.push_back(4.0 * e / (e + kDefaultGuard));
    slots.push_back(texture_slot_json("u" + std::to_string(i), i, l, r, oracle::Mat(n, oracle::Vec(n, 0.0))));
  }
  TextureConfig tc;
  tc.input = write_doc("uniform.json", slots);
  const TextureOutput out = cmd_texture(tc);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    ASSERT_TRUE(out.rows[i].result);
    EXPECT_NEAR(out.rows[i].result->kappa, expected[i], 1e-6);
  }
}

TEST(Texture, DeterministicAcrossWorkerCounts) {
  TextureConfig tc;
  tc.input = write_synth("tex_det.json", synth::Kind::random_positive, 16, 9, "real", {{"embed_dim", 3}});
  std::string one, four;
  {
    ThreadsEnv env("1");
    one = cmd_texture(tc).csv;
  }
  {
    ThreadsEnv env("4");
    four = cmd_texture(tc).csv;
  }
  EXPECT_EQ(one, four);
  EXPECT_EQ(one, cmd_texture(tc).csv);
}

TEST(Texture, PerSlotFailuresBecomeRows) {
  json slots = json::array();
  slots.push_back(texture_slot_json("ok", 0, {0.5, 0.5}, {0.2, 0.8}, {{0, 1}, {1, 0}}));
  json bad = {{"slot_id", "no-geometry"}, {"position", 1}, {"states", {"a", "<TAIL>"}},
              {"left", {0.5, 0.5}}, {"right", {0.3, 0.7}}};
  slots.push_back(bad);
  TextureConfig tc;
  tc.input = write_doc("partial.json", slots);
  tc.max_iter = 10000;
  const TextureOutput out = cmd_texture(tc);
  EXPECT_TRUE(out.rows[0].result);
  EXPECT_FALSE(out.rows[1].result);
  EXPECT_EQ(out.rows[1].error, "MissingEmbedding");
  const auto rows = csv_rows(out.csv);
  EXPECT_EQ(rows.back().back(), "MissingEmbedding");
  tc.max_iter = 1;
  tc.tol = 1e-15;
  const TextureOutput fail = cmd_texture(tc);
  EXPECT_EQ(fail.rows[0].error, "ConvergenceFailure");
}

TEST(Texture, CostSidecar) {
  json slot = {{"slot_id", "side"}, {"position", 0}, {"states", {"a", "b", "<TAIL>"}},
               {"left", {0.7, 0.2, 0.1}}, {"right", {0.1, 0.2, 0.7}}};
  TextureConfig tc;
  tc.input = write_doc("sidecar_in.json", json::array({slot}));
  const std::string side = temp_path("sidecar_cost.json");
  io::write_file(side, json{{"side", {{0, 1}, {1, 0}}}}.dump());
  tc.cost_sidecar = side;
  tc.epsilon = 0.5;
  const TextureOutput out = cmd_texture(tc);
  ASSERT_TRUE(out.rows[0].result) << out.rows[0].error;
  EXPECT_EQ(out.rows[0].epsilon, 0.5);
}

TEST(Prune, ThreeSpanExampleEndToEnd) {
  const std::string field = temp_path("prune_field.json");
  io::write_file(field, io::curvature_field_to_json(CurvatureField({0, 1, 2, 3, 4, 5}, {.9, .9, .1, .1, .5, .5}, 6))
                            .dump());
  const std::string tokens = temp_path("prune_tokens.txt");
  io::write_file(tokens, "t0 t1 t2 t3 t4 t5");
  PruneConfig pc;
  pc.field = field;
  pc.tokens = tokens;
  pc.budget = 4;
  pc.partition = PartitionChoice::fixed;
  pc.block = 2;
  const json plan = cmd_prune(pc);
  EXPECT_EQ(plan["selected"], json({0, 2}));
  EXPECT_EQ(plan["total_tokens"], 4);
  EXPECT_EQ(plan["pruned_tokens"], json({"t0", "t1", "t4", "t5"}));
  EXPECT_EQ(plan["config"]["budget"], 4);
  pc.budget = 100;
  EXPECT_EQ(cmd_prune(pc)["selected"], json({0, 1, 2}));
  pc.partition = PartitionChoice::sentence;
  EXPECT_EQ(cmd_prune(pc)["total_tokens"], 6);
  pc.tokens.reset();
  EXPECT_THROW(cmd_prune(pc), InvalidInput);
}

TEST(Route, PositiveCurvatureUsesMinimumDepth) {
  const std::string field = temp_path("route_field.json");
  io::write_file(field, io::curvature_field_to_json(CurvatureField({0, 2}, {0.3, 0.8}, 4)).dump());
  const std::string tokens = temp_path("route_tokens.json");
  io::write_file(tokens, R"(["where", "is", "it", "?"])");
  RouteConfig rc;
  rc.query_field = field;
  rc.query_tokens = tokens;
  rc.documents = {{"d0", field}};
  rc.params.l_min = 1;
  const json plan = cmd_route(rc);
  EXPECT_EQ(plan["k"], rc.params.k_min);
  EXPECT_EQ(plan["saturated"], false);
  EXPECT_TRUE(plan["anchors"].empty());
  EXPECT_EQ(plan["augmented_query"].size(), 4u);
  EXPECT_EQ(plan["chunks"].back()["end"], 4);
  rc.params.k_min = 20;
  EXPECT_THROW(cmd_route(rc), InvalidInput);
}

TEST(Synth, SlotsUseDerivedSeeds) {
  SynthConfig c;
  c.spec.kind = synth::Kind::random_positive;
  c.spec.seed = 5;
  c.count = 3;
  const auto fields = io::parse_belief_fields(cmd_synth(c));
  ASSERT_EQ(fields.size(), 3u);
  EXPECT_EQ(fields[1].slot_id, "random_positive-1");
  EXPECT_EQ(fields[2].position, 2u);
  EXPECT_NE(fields[0].at(0, 0).probs(), fields[1].at(0, 0).probs());
  synth::SynthSpec direct = c.spec;
  direct.seed = derive_seed(5, std::uint64_t{1});
  EXPECT_LE((synth::generate(direct).at(2, 3).probs() - fields[1].at(2, 3).probs()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(cmd_synth(c), cmd_synth(c));
}
