#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "oracles.hpp"
#include "texture/io.hpp"
#include "texture/synth.hpp"

using namespace texture;
using io::json;

namespace {

const std::string kData = TEXTURE_TEST_DATA;

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("texture_io_" + name)).string();
}

json one_slot(json slot) { return {{"schema_version", 1}, {"slots", json::array({slot})}}; }

json basic_slot() {
  return {{"slot_id", "x"},
          {"states", {"a", "b", "<TAIL>"}},
          {"left", {0.5, 0.3, 0.2}},
          {"right", {0.2, 0.3, 0.5}}};
}

void expect_same_fields(const std::vector<BeliefField>& a, const std::vector<BeliefField>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].slot_id, b[i].slot_id);
    EXPECT_EQ(a[i].position, b[i].position);
    EXPECT_EQ(a[i].condition, b[i].condition);
    EXPECT_EQ(*a[i].support, *b[i].support);
    EXPECT_EQ(a[i].radii, b[i].radii);
    EXPECT_EQ(a[i].embeddings, b[i].embeddings);
    ASSERT_EQ(a[i].grid.size(), b[i].grid.size());
    for (std::size_t c = 0; c < a[i].grid.size(); ++c)
      EXPECT_LE((a[i].grid[c].probs() - b[i].grid[c].probs()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((a[i].left_boundary.probs() - b[i].left_boundary.probs()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((a[i].right_boundary.probs() - b[i].right_boundary.probs()).cwiseAbs().maxCoeff(), 1e-12);
    ASSERT_EQ(a[i].cost.has_value(), b[i].cost.has_value());
    if (a[i].cost) EXPECT_LE((*a[i].cost - *b[i].cost).cwiseAbs().maxCoeff(), 1e-12);
  }
}

}  // namespace

TEST(LoadBeliefField, GoldenMinimalFile) {
  const auto fields = io::load_belief_field(kData + "/minimal.json");
  ASSERT_EQ(fields.size(), 1u);
  const BeliefField& f = fields[0];
  EXPECT_EQ(f.slot_id, "doc0:17");
  EXPECT_EQ(f.position, 17u);
  EXPECT_EQ(f.support->states(), (std::vector<std::string>{"a", "b", "<TAIL>"}));
  EXPECT_EQ(f.radii, (std::vector<int>{0, 1}));
  // File order was [b, a, tail]; canonical order is [a, b, tail].
  EXPECT_NEAR(f.at(0, 0)[0], 0.5, 1e-15);
  EXPECT_NEAR(f.at(0, 0)[1], 0.3, 1e-15);
  EXPECT_NEAR(f.at(1, 1)[0], 0.8, 1e-15);
  EXPECT_NEAR(f.at(1, 0)[1], 0.25, 1e-15);
  EXPECT_NEAR(f.left_boundary[0], 0.55, 1e-15);
  EXPECT_EQ(f.embeddings.at("b"), (std::vector<double>{0.6, 0.8}));
}

TEST(LoadBeliefField, NearUnitMassIsRenormalized) {
  const auto fields = io::load_belief_field(kData + "/near_unit_mass.json");
  const Belief& b = fields[0].left_boundary;
  EXPECT_NEAR(b.probs().sum(), 1.0, 1e-15);
  EXPECT_NEAR(b[0], 0.5 / 0.9999995, 1e-15);
}

TEST(LoadBeliefField, ShortMassIsValidationError) {
  try {
    io::load_belief_field(kData + "/short_mass.json");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("slot 's'"), std::string::npos);
    EXPECT_NE(what.find("left"), std::string::npos);
  }
}

TEST(LoadBeliefField, TaillessArraysPushResidualToTail) {
  json slot = basic_slot();
  slot["states"] = {"b", "a"};
  slot["left"] = {0.3, 0.5};
  slot["right"] = {0.3, 0.2};
  const auto f = io::parse_belief_fields(one_slot(slot).dump())[0];
  EXPECT_NEAR(f.left_boundary[0], 0.5, 1e-15);
  EXPECT_NEAR(f.left_boundary[2], 0.2, 1e-15);
  EXPECT_NEAR(f.right_boundary[2], 0.5, 1e-15);
  slot["left"] = {0.7, 0.5};
  EXPECT_THROW(io::parse_belief_fields(one_slot(slot).dump()), ValidationError);
}

TEST(LoadBeliefField, SchemaErrors) {
  EXPECT_THROW(io::parse_belief_fields("not json"), SchemaError);
  EXPECT_THROW(io::parse_belief_fields("[]"), SchemaError);
  EXPECT_THROW(io::parse_belief_fields(R"({"slots": []})"), SchemaError);
  EXPECT_THROW(io::parse_belief_fields(R"({"schema_version": 2, "slots": []})"), SchemaError);
  EXPECT_THROW(io::parse_belief_fields(R"({"schema_version": 1})"), SchemaError);
  EXPECT_THROW(io::load_belief_field(kData + "/does_not_exist.json"), IoError);
}

TEST(LoadBeliefField, ValidationErrors) {
  auto expect_invalid = [](json slot) {
    EXPECT_THROW(io::parse_belief_fields(one_slot(std::move(slot)).dump()), ValidationError);
  };
  json s = basic_slot();
  s["states"] = {"a", "<TAIL>", "b"};
  expect_invalid(s);
  s = basic_slot();
  s["states"] = {"a", "a", "<TAIL>"};
  expect_invalid(s);
  s = basic_slot();
  s["left"] = {0.5, 0.5};
  expect_invalid(s);
  s = basic_slot();
  s["left"] = {1.2, -0.2, 0.0};
  expect_invalid(s);
  s = basic_slot();
  s.erase("right");
  expect_invalid(s);
  s = basic_slot();
  s["radii"] = {0, 1};
  s["grid"] = {{"0,0", {0.2, 0.3, 0.5}}};
  expect_invalid(s);
  s = basic_slot();
  s["radii"] = {1, 0};
  expect_invalid(s);
  s = basic_slot();
  s["embeddings"] = {{"zz", {1.0}}};
  expect_invalid(s);
  s = basic_slot();
  s["cost"] = {{0, 1}, {2, 0}};
  expect_invalid(s);
}

TEST(LoadBeliefField, CandidateCostGetsTailGeometry) {
  json s = basic_slot();
  s["states"] = {"b", "a", "<TAIL>"};
  s["left"] = {0.3, 0.5, 0.2};
  s["right"] = {0.3, 0.2, 0.5};
  s["cost"] = {{0, 2}, {2, 0}};
  const auto f = io::parse_belief_fields(one_slot(s).dump())[0];
  ASSERT_TRUE(f.cost);
  EXPECT_EQ((*f.cost)(0, 1), 2.0);
  EXPECT_EQ((*f.cost)(2, 0), 0.0);  // lower median of {0, 2}
}

TEST(SaveBeliefField, RoundTripSynthetic) {
  std::vector<BeliefField> fields;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    synth::SynthSpec spec;
    spec.kind = seed % 2 ? synth::Kind::ci_generative : synth::Kind::separable;
    spec.seed = seed;
    spec.support_size = 3 + seed;
    spec.parameters["embed_dim"] = 4;
    BeliefField f = synth::generate(spec);
    f.position = seed * 3;
    fields.push_back(std::move(f));
  }
  fields[0].cost = cost_from_embeddings(fields[0].support, fields[0].embeddings).c;
  const std::string path = temp_path("roundtrip.json");
  io::save_belief_field(path, fields);
  const auto loaded = io::load_belief_field(path);
  expect_same_fields(fields, loaded);
  io::save_belief_field(path, loaded);
  expect_same_fields(loaded, io::load_belief_field(path));
  std::remove(path.c_str());
}

TEST(SaveBeliefField, RoundTripGolden) {
  const auto a = io::load_belief_field(kData + "/minimal.json");
  const auto b = io::parse_belief_fields(io::dump_belief_fields(a));
  expect_same_fields(a, b);
}

TEST(CostSidecar, CandidateAndFullMatrices) {
  const auto f = io::load_belief_field(kData + "/minimal.json")[0];
  const Matrix cand = io::sidecar_cost(f, json{{0, 1.5}, {1.5, 0}});
  EXPECT_EQ(cand(0, 1), 1.5);
  EXPECT_EQ(cand(2, 1), 0.0);
  const Matrix full = io::sidecar_cost(f, json{{0, 1, 3}, {1, 0, 2}, {3, 2, 0}});
  EXPECT_EQ(full(2, 0), 3.0);
  EXPECT_THROW(io::sidecar_cost(f, json{{0, 1}}), ValidationError);
}

TEST(CurvatureFieldJson, RoundTrip) {
  const CurvatureField f({1, 4, 9}, {0.5, -1.25, 3.0}, 12, Interpolation::linear);
  const CurvatureField g = io::curvature_field_from_json(io::curvature_field_to_json(f));
  EXPECT_EQ(g.positions(), f.positions());
  EXPECT_EQ(g.kappas(), f.kappas());
  EXPECT_EQ(g.length(), 12u);
  EXPECT_EQ(g.interpolation(), Interpolation::linear);
  EXPECT_EQ(g.per_token(), f.per_token());
}

TEST(CurvatureFieldJson, Errors) {
  EXPECT_THROW(io::curvature_field_from_json(json{{"schema_version", 1}}), SchemaError);
  EXPECT_THROW(io::curvature_field_from_json(
                   json{{"schema_version", 1}, {"length", 2}, {"positions", {5}}, {"kappas", {1.0}}}),
               ValidationError);
  EXPECT_THROW(io::curvature_field_from_json(json{
                   {"schema_version", 1}, {"length", 2}, {"positions", {0}}, {"kappas", {1.0}}, {"interpolation", "cubic"}}),
               SchemaError);
}

TEST(Tokens, ArrayAndWhitespace) {
  EXPECT_EQ(io::parse_tokens(R"(["a", "b c", "."])"), (std::vector<std::string>{"a", "b c", "."}));
  EXPECT_EQ(io::parse_tokens("  the cat\n sat . "), (std::vector<std::string>{"the", "cat", "sat", "."}));
  EXPECT_THROW(io::parse_tokens("[1, 2]"), SchemaError);
}

TEST(Formatting, NineSignificantDigitsAndHash) {
  EXPECT_EQ(io::format_real(0.1234567891234), "0.123456789");
  EXPECT_EQ(io::format_real(1e-20), "1e-20");
  EXPECT_EQ(io::content_hash({"a"}), io::content_hash({"a"}));
  EXPECT_NE(io::content_hash({"a", "b"}), io::content_hash({"ab"}));
  EXPECT_EQ(io::content_hash({}).rfind("fnv1a64:", 0), 0u);
}
