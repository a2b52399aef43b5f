#include <gtest/gtest.h>

#include "semarag/errors.hpp"
#include "semarag/interpreter.hpp"
#include "support.hpp"

using namespace semarag;
using test::say;

namespace {

const ClinicalSchema kCaseSchema{
    "Infectious etiology & pathogen identification",
    {"stroke", "HAP/aspiration pneumonia", "right-basal crackles", "new right consolidation", "fever + purulent cough"},
    {"62y", "hospital day 7", "post-stroke aspiration risk", "neutrophil predominance"},
    "hospital day 7 post-stroke pneumonia right consolidation most likely causative organism"};

}  // namespace

TEST(Linearize, CaseStudySchema) {
  EXPECT_EQ(linearize(kCaseSchema),
            "hospital day 7 post-stroke pneumonia right consolidation most likely causative organism; Infectious "
            "etiology & pathogen identification; stroke, HAP/aspiration pneumonia, right-basal crackles, new right "
            "consolidation, fever + purulent cough; 62y, hospital day 7, post-stroke aspiration risk, neutrophil "
            "predominance");
}

TEST(Linearize, EmptyFieldsOmitted) {
  EXPECT_EQ(linearize(ClinicalSchema{"i", {}, {}, "q"}), "q; i");
  EXPECT_EQ(linearize(ClinicalSchema{"i", {"e"}, {}, "q"}), "q; i; e");
  EXPECT_EQ(linearize(ClinicalSchema{"", {}, {"c"}, "q"}), "q; c");
  EXPECT_EQ(linearize(ClinicalSchema{"", {}, {}, "q"}), "q");
}

TEST(ParseSchema, MinimalSchemaAccepted) {
  auto s = parse_schema(R"({"intent":"i","entities":[],"constraints":[],"q_init":"q"})");
  EXPECT_EQ(s, (ClinicalSchema{"i", {}, {}, "q"}));
}

TEST(ParseSchema, JsonInsideProseAndFences) {
  auto s = parse_schema("Here you go:\n```json\n" + test::schema_json("qq") + "\n```\nDone.");
  EXPECT_EQ(s.q_init, "qq");
  EXPECT_THROW(parse_schema("Here you go: " + test::schema_json("qq"), true), SchemaParseFailure);
}

TEST(ParseSchema, SingleStringListsTolerated) {
  auto s = parse_schema(R"({"intent":"i","entities":"stroke","constraints":["a"," "],"q_init":" q "})");
  EXPECT_EQ(s.entities, std::vector<std::string>{"stroke"});
  EXPECT_EQ(s.constraints, std::vector<std::string>{"a"});
  EXPECT_EQ(s.q_init, "q");
}

TEST(ParseSchema, Rejections) {
  EXPECT_THROW(parse_schema("no json at all"), SchemaParseFailure);
  EXPECT_THROW(parse_schema(R"({"intent":"i"})"), SchemaParseFailure);
  EXPECT_THROW(parse_schema(R"({"q_init":"   "})"), SchemaParseFailure);
  EXPECT_THROW(parse_schema(R"({"q_init":"q","entities":[1,2]})"), SchemaParseFailure);
  try {
    parse_schema("prose only");
  } catch (const SchemaParseFailure& e) {
    EXPECT_EQ(e.raw(), "prose only");
  }
}

TEST(Interpret, CaseStudyResponse) {
  const auto json = Json{{"intent", kCaseSchema.intent},
                         {"entities", kCaseSchema.entities},
                         {"constraints", kCaseSchema.constraints},
                         {"q_init", kCaseSchema.q_init}}
                        .dump();
  auto rig = test::mock_rig({say(Role::interpreter, json)});
  CallScope scope{"q", {}, {}};
  auto r = interpret(test::mcq("q"), *rig->gateway, RunConfig{}, scope);
  EXPECT_FALSE(r.degraded);
  EXPECT_EQ(r.schema, kCaseSchema);
  EXPECT_NE(std::find(r.schema.constraints.begin(), r.schema.constraints.end(), "hospital day 7"),
            r.schema.constraints.end());
  EXPECT_EQ(scope.usage.llm_calls, 1);

  const auto reqs = rig->backend->requests();
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(reqs[0].temperature, 1.0);
  EXPECT_NE(reqs[0].prompt.find("D. Staphylococcus aureus"), std::string::npos);
}

TEST(Interpret, RecoversOnParseRetry) {
  auto rig = test::mock_rig({say(Role::interpreter, "sorry, prose"), say(Role::interpreter, test::schema_json("q2"))});
  CallScope scope{"q", {}, {}};
  auto r = interpret(test::mcq("q"), *rig->gateway, RunConfig{}, scope);
  EXPECT_FALSE(r.degraded);
  EXPECT_EQ(r.schema.q_init, "q2");
  EXPECT_EQ(scope.usage.llm_calls, 2);
}

TEST(Interpret, DegradesAfterRetries) {
  auto rig = test::mock_rig({say(Role::interpreter, "prose"), say(Role::interpreter, "more prose")});
  CallScope scope{"q", {}, {}};
  auto q = test::mcq("q", "  Which organism?  ");
  auto r = interpret(q, *rig->gateway, RunConfig{}, scope);
  EXPECT_TRUE(r.degraded);
  EXPECT_EQ(r.schema.q_init, "Which organism?");
  EXPECT_EQ(r.schema.intent, "unknown");
  EXPECT_EQ(r.raw_outputs.size(), 2u);
  EXPECT_FALSE(r.failure.empty());
}
