#include <gtest/gtest.h>

#include <map>
#include <set>

#include "semarag/errors.hpp"
#include "semarag/explorer.hpp"
#include "support.hpp"

using namespace semarag;
using test::say;
using test::verdict_json;

namespace {

/// Returns a fixed ranked list per query.
class MapRetriever : public Retriever {
 public:
  std::map<std::string, std::vector<ScoredDoc>> table;
  std::vector<ScoredDoc> topk(std::string_view query, std::size_t k) const override {
    auto it = table.find(std::string(query));
    if (it == table.end()) return {};
    auto out = it->second;
    if (out.size() > k) out.resize(k);
    return out;
  }
};

ScoredDoc sd(const std::string& id, double score) { return {EvidenceDoc{id, "s", "t " + id, "text " + id, {}}, score}; }

std::vector<std::string> ids(const std::vector<ScoredDoc>& v) {
  std::vector<std::string> out;
  for (const auto& d : v) out.push_back(d.doc.doc_id);
  return out;
}

RunConfig config(int t_max = 2, std::size_t m = 3, std::size_t k = 4) {
  RunConfig cfg;
  cfg.t_max = t_max;
  cfg.m = m;
  cfg.k = k;
  return cfg;
}

struct LoopRun {
  LoopResult result;
  std::unique_ptr<test::Rig> rig;
  CallScope scope{"q", {}, {}};
};

LoopRun run(std::vector<MockBackend::Entry> script, const RunConfig& cfg, const Retriever& retriever) {
  LoopRun r;
  r.rig = test::mock_rig(std::move(script));
  r.result = run_loop(ClinicalSchema{"i", {}, {}, "q"}, "initial query pneumonia", retriever, *r.rig->gateway, cfg,
                      r.scope, frozen_clock());
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Retrieval rounds
// ---------------------------------------------------------------------------

TEST(RetrieveRound, DisjointUnion) {
  MapRetriever r;
  r.table["q1"] = {sd("a", 0.9), sd("b", 0.8)};
  r.table["q2"] = {sd("c", 0.95), sd("d", 0.1)};
  std::int64_t ops = 0;
  const std::vector<std::string> qs{"q1", "q2"};
  auto out = retrieve_round(qs, r, 2, ops);
  EXPECT_EQ(ids(out), (std::vector<std::string>{"c", "a", "b", "d"}));
  EXPECT_EQ(ops, 2);
}

TEST(RetrieveRound, IdenticalQueriesCollapse) {
  auto c = test::synthetic_corpus(30);
  std::int64_t ops = 0;
  const std::vector<std::string> one{"sepsis lactate"}, two{"sepsis lactate", "sepsis lactate"};
  auto a = retrieve_round(one, *c.retriever, 5, ops);
  auto b = retrieve_round(two, *c.retriever, 5, ops);
  EXPECT_EQ(ids(a), ids(b));
  EXPECT_EQ(ops, 3);
}

TEST(RetrieveRound, DuplicatesKeepBestScore) {
  MapRetriever r;
  r.table["q1"] = {sd("a", 0.2), sd("b", 0.1)};
  r.table["q2"] = {sd("a", 0.7)};
  std::int64_t ops = 0;
  const std::vector<std::string> qs{"q1", "q2"};
  auto out = retrieve_round(qs, r, 5, ops);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].doc.doc_id, "a");
  EXPECT_EQ(out[0].score, 0.7);
}

TEST(RetrieveRound, UnionMatchesBruteForceOracle) {
  auto c = test::synthetic_corpus(50, 3);
  const std::vector<std::string> qs{"pneumonia fever cough", "kidney dose", "mrsa pseudomonas hospital"};
  const std::size_t k = 6;
  std::set<std::string> oracle;
  for (const auto& q : qs) {
    const auto qv = c.embedder->embed_query(q);
    std::vector<std::pair<double, std::string>> all;
    for (std::size_t i = 0; i < c.index->size(); ++i) {
      all.emplace_back(inner_product(qv, c.index->vector(i)), c.index->doc(i).doc_id);
    }
    std::sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    for (std::size_t i = 0; i < k; ++i) oracle.insert(all[i].second);
  }
  std::int64_t ops = 0;
  auto out = retrieve_round(qs, *c.retriever, k, ops);
  const auto got = ids(out);
  EXPECT_EQ(std::set<std::string>(got.begin(), got.end()), oracle);
  EXPECT_EQ(got.size(), oracle.size());
}

TEST(Merge, Examples) {
  auto d = test::synthetic_docs(2, 1);
  std::vector<ScoredDoc> d12{{d[0], 1}, {d[1], 0.5}};
  auto c1 = merge_evidence(EvidenceSet{}, d12);
  EXPECT_EQ(c1.ordered_ids(), (std::vector<std::string>{"d000", "d001"}));
  std::vector<ScoredDoc> d1{{d[0], 1}};
  auto only1 = merge_evidence(EvidenceSet{}, d1);
  std::vector<std::string> added;
  auto c2 = merge_evidence(only1, d12, &added);
  EXPECT_EQ(c2.ordered_ids(), (std::vector<std::string>{"d000", "d001"}));
  EXPECT_EQ(added, std::vector<std::string>{"d001"});
}

TEST(Summaries, TruncatedWithIdsAndSingleLine) {
  std::vector<EvidenceDoc> docs{{"id1", "s", "Title", "line one\nline two", {}}, {"id2", "s", "T2", std::string(20, 'x'), {}}};
  auto set = EvidenceSet{}.merge(std::span<const EvidenceDoc>(docs));
  EXPECT_EQ(render_summaries(set, 10), "[id1] Title: line one l...\n[id2] T2: xxxxxxxxxx...");
  EXPECT_EQ(render_summaries(set, 100), "[id1] Title: line one line two\n[id2] T2: xxxxxxxxxxxxxxxxxxxx");
}

// ---------------------------------------------------------------------------
// Verdict parsing and audit
// ---------------------------------------------------------------------------

TEST(ParseVerdict, Forms) {
  auto v = parse_verdict(R"({"sufficiency":1,"gap":"N/A","queries":[]})", 3);
  EXPECT_TRUE(v.sufficient);
  v = parse_verdict(R"(```json
{"sufficiency": true, "gap": "whatever", "queries": ["ignored"]}
```)", 3);
  EXPECT_TRUE(v.sufficient);
  EXPECT_TRUE(v.next_queries.empty());
  EXPECT_EQ(v.gap, "N/A");
  v = parse_verdict(R"({"sufficiency":"0","gap":"g","next_queries":["a","b","c","d","e"]})", 3);
  EXPECT_FALSE(v.sufficient);
  EXPECT_EQ(v.next_queries, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_THROW(parse_verdict(R"({"sufficiency":2})", 3), VerdictParseFailure);
  EXPECT_THROW(parse_verdict(R"({"gap":"g"})", 3), VerdictParseFailure);
  EXPECT_THROW(parse_verdict(R"({"sufficiency":0,"queries":"one"})", 3), VerdictParseFailure);
  EXPECT_THROW(parse_verdict("no object", 3), VerdictParseFailure);
}

TEST(Audit, CaseStudyRoundOne) {
  const std::string gap = "Evidence does not distinguish pathogens based on hospitalization duration";
  const std::string follow = "most likely pathogen hospital-acquired pneumonia vs community-acquired";
  auto rig = test::mock_rig({say(Role::explorer, verdict_json(false, {follow}, gap))});
  CallScope scope{"q", {}, {}};
  const std::vector<std::string> ql{"q"};
  auto a = audit(ClinicalSchema{"i", {}, {}, "q"}, ql, EvidenceSet{}, *rig->gateway, config(), scope);
  EXPECT_FALSE(a.verdict.sufficient);
  EXPECT_EQ(a.verdict.gap, gap);
  EXPECT_EQ(a.verdict.next_queries, std::vector<std::string>{follow});
}

TEST(Audit, TruncatesToM) {
  auto rig = test::mock_rig({say(Role::explorer, verdict_json(false, {"1", "2", "3", "4", "5"}))});
  CallScope scope{"q", {}, {}};
  const std::vector<std::string> ql{"q"};
  auto a = audit(ClinicalSchema{"i", {}, {}, "q"}, ql, EvidenceSet{}, *rig->gateway, config(2, 3), scope);
  EXPECT_EQ(a.verdict.next_queries.size(), 3u);
}

TEST(Audit, ParseFailureBecomesEmptyVerdict) {
  auto rig = test::mock_rig({say(Role::explorer, "hmm"), say(Role::explorer, "still prose")});
  CallScope scope{"q", {}, {}};
  const std::vector<std::string> ql{"q"};
  auto a = audit(ClinicalSchema{"i", {}, {}, "q"}, ql, EvidenceSet{}, *rig->gateway, config(), scope);
  EXPECT_TRUE(a.parse_failed);
  EXPECT_FALSE(a.verdict.sufficient);
  EXPECT_EQ(a.verdict.gap, "parse failure");
  EXPECT_TRUE(a.verdict.next_queries.empty());
  EXPECT_EQ(scope.usage.llm_calls, 2);
}

// ---------------------------------------------------------------------------
// The loop
// ---------------------------------------------------------------------------

TEST(Loop, InsufficientThenSufficient) {
  auto c = test::synthetic_corpus(40);
  auto r = run({say(Role::explorer, verdict_json(false, test::follow_ups(1, 3))), say(Role::explorer, verdict_json(true))},
               config(2, 3), *c.retriever);
  const auto& t = r.result.trajectory;
  EXPECT_EQ(t.rounds_executed(), 2);
  EXPECT_EQ(t.termination, Termination::sufficient);
  EXPECT_EQ(t.counters.retrieval_ops, 4);
  EXPECT_EQ(t.counters.llm_calls, 2);
  EXPECT_EQ(t.rounds[0].queries.size(), 1u);
  EXPECT_EQ(t.rounds[1].queries.size(), 3u);
  EXPECT_NO_THROW(check_trajectory(t, 2));
}

TEST(Loop, ImmediateSufficiency) {
  auto c = test::synthetic_corpus(40);
  auto r = run({say(Role::explorer, verdict_json(true))}, config(), *c.retriever);
  EXPECT_EQ(r.result.trajectory.rounds_executed(), 1);
  EXPECT_EQ(r.result.trajectory.termination, Termination::sufficient);
  EXPECT_EQ(r.result.trajectory.counters.retrieval_ops, 1);
}

TEST(Loop, MaxRoundsAndStagnation) {
  auto c = test::synthetic_corpus(40);
  auto a = run({say(Role::explorer, verdict_json(false, {"x"})), say(Role::explorer, verdict_json(false, {"y"}))},
               config(), *c.retriever);
  EXPECT_EQ(a.result.trajectory.rounds_executed(), 2);
  EXPECT_EQ(a.result.trajectory.termination, Termination::max_rounds);

  auto b = run({say(Role::explorer, verdict_json(false, {}))}, config(), *c.retriever);
  EXPECT_EQ(b.result.trajectory.rounds_executed(), 1);
  EXPECT_EQ(b.result.trajectory.termination, Termination::stagnation);
}

TEST(Loop, AuditParseFailureStagnates) {
  auto c = test::synthetic_corpus(20);
  auto r = run({say(Role::explorer, "x"), say(Role::explorer, "y")}, config(), *c.retriever);
  EXPECT_EQ(r.result.trajectory.termination, Termination::stagnation);
  EXPECT_TRUE(r.result.audit_parse_failure);
  EXPECT_EQ(r.result.trajectory.counters.llm_calls, 2);
}

TEST(Loop, QueryListIsCumulativeByDefault) {
  auto c = test::synthetic_corpus(20);
  auto r = run({say(Role::explorer, verdict_json(false, {"second round query"})), say(Role::explorer, verdict_json(true))},
               config(), *c.retriever);
  const auto reqs = r.rig->backend->requests();
  ASSERT_EQ(reqs.size(), 2u);
  EXPECT_NE(reqs[1].prompt.find(R"(["initial query pneumonia","second round query"])"), std::string::npos);

  auto cfg = config();
  cfg.cumulative_query_list = false;
  auto rig = test::mock_rig({say(Role::explorer, verdict_json(false, {"second round query"})), say(Role::explorer, verdict_json(true))});
  CallScope scope{"q", {}, {}};
  run_loop(ClinicalSchema{"i", {}, {}, "q"}, "initial query pneumonia", *c.retriever, *rig->gateway, cfg, scope,
           frozen_clock());
  EXPECT_NE(rig->backend->requests()[1].prompt.find(R"(["second round query"])"), std::string::npos);
}

TEST(Loop, EvidenceMonotoneAndRecordedPerRound) {
  auto c = test::synthetic_corpus(60);
  auto r = run({say(Role::explorer, verdict_json(false, {"kidney dose aspirin", "lung bronchus"})),
                say(Role::explorer, verdict_json(false, {"sepsis lactate"})), say(Role::explorer, verdict_json(true))},
               config(3, 3, 5), *c.retriever);
  const auto& t = r.result.trajectory;
  ASSERT_EQ(t.rounds_executed(), 3);
  std::size_t total = 0;
  for (const auto& round : t.rounds) {
    total += round.newly_added.size();
    EXPECT_EQ(round.evidence_size, total);
  }
  EXPECT_EQ(r.result.evidence.size(), total);
}

TEST(Loop, ReplayReproducesNewlyAdded) {
  auto c = test::synthetic_corpus(60);
  auto r = run({say(Role::explorer, verdict_json(false, {"kidney dose aspirin", "lung bronchus"})),
                say(Role::explorer, verdict_json(true))},
               config(2, 3, 5), *c.retriever);
  const auto replay = replay_trajectory(r.result.trajectory, *c.retriever, 5);
  ASSERT_EQ(replay.size(), r.result.trajectory.rounds.size());
  for (std::size_t i = 0; i < replay.size(); ++i) EXPECT_EQ(replay[i], r.result.trajectory.rounds[i].newly_added);
}

TEST(Loop, BudgetAbortKeepsPartialTrajectory) {
  auto c = test::synthetic_corpus(20);
  auto rig = test::mock_rig({say(Role::explorer, verdict_json(false, {"x"})), say(Role::explorer, verdict_json(true))});
  CallScope scope{"q", BudgetSettings{1, 100000}, {}};
  try {
    run_loop(ClinicalSchema{"i", {}, {}, "q"}, "query", *c.retriever, *rig->gateway, config(), scope, frozen_clock());
    FAIL() << "expected LoopAborted";
  } catch (const LoopAborted& e) {
    EXPECT_EQ(e.partial().rounds_executed(), 1);
    EXPECT_EQ(e.partial().counters.retrieval_ops, 2);
    EXPECT_FALSE(e.evidence().empty());
    EXPECT_THROW(std::rethrow_exception(e.cause()), BudgetExceeded);
  }
}

TEST(Loop, EmptyIndexAborts) {
  auto idx = std::make_shared<const VectorIndex>(VectorIndex::from_parts({}, {}, 64, MockEmbedder(64).tag()));
  DenseRetriever retriever(idx, std::make_shared<MockEmbedder>(64));
  auto rig = test::mock_rig({});
  CallScope scope{"q", {}, {}};
  try {
    run_loop(ClinicalSchema{"i", {}, {}, "q"}, "query", retriever, *rig->gateway, config(), scope, frozen_clock());
    FAIL();
  } catch (const LoopAborted& e) {
    EXPECT_EQ(e.partial().rounds_executed(), 0);
    EXPECT_THROW(std::rethrow_exception(e.cause()), EmptyIndex);
  }
}

TEST(Loop, WallTimeComesFromTheClock) {
  auto c = test::synthetic_corpus(20);
  auto rig = test::mock_rig({say(Role::explorer, verdict_json(true))});
  CallScope scope{"q", {}, {}};
  double now = 100.0;
  Clock ticking = [&now] { return now += 5.0; };
  auto r = run_loop(ClinicalSchema{"i", {}, {}, "q"}, "query", *c.retriever, *rig->gateway, config(), scope, ticking);
  EXPECT_EQ(r.trajectory.counters.wall_ms, 5.0);
}
