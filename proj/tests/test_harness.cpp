#include <gtest/gtest.h>

#include <fstream>

#include "semarag/errors.hpp"
#include "semarag/harness.hpp"
#include "support.hpp"

using namespace semarag;
using test::say;

namespace {

std::filesystem::path write_file(const std::string& dir, const std::string& name, const std::string& body) {
  const auto path = test::scratch_dir(dir) / name;
  std::ofstream(path) << body;
  return path;
}

RunConfig defaults() {
  RunConfig cfg;
  cfg.k = 20;  // every synthetic doc lands in C*, so cited ids always resolve
  return cfg;
}

std::vector<MockBackend::Entry> concat(std::vector<std::vector<MockBackend::Entry>> parts) {
  std::vector<MockBackend::Entry> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

/// Interpreter, one sufficient round, a report and an answer.
std::vector<MockBackend::Entry> sufficient_first(const std::string& qid, const std::string& label = "D") {
  return {say(Role::interpreter, test::schema_json(), qid), say(Role::explorer, test::verdict_json(true), qid),
          say(Role::adjudicator, test::report_json({{"claim", {"d000"}}}), qid),
          say(Role::answerer, test::final_answer(label), qid)};
}

BenchmarkResult run(std::vector<MockBackend::Entry> script, const std::vector<Question>& qs, RunConfig cfg = defaults(),
                    std::size_t workers = 1) {
  auto corpus = test::synthetic_corpus(20);
  auto rig = test::mock_rig(std::move(script));
  Pipeline pipeline(cfg, rig->gateway, corpus.retriever, frozen_clock());
  return run_benchmark(qs, pipeline, workers);
}

}  // namespace

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

TEST(Dataset, LoadsMcqLines) {
  const auto path = write_file("ds-mcq", "d.jsonl",
                               R"({"id":"1","question":"a?","options":{"A":"x","B":"y","C":"z","D":"w"},"answer":"A"})"
                               "\n\n"
                               R"({"id":"2","question":"b?","options":{"A":"x","B":"y","C":"z","D":"w"},"answer":"B"})"
                               "\n"
                               R"({"id":"3","question":"c?","options":{"A":"x","B":"y","C":"z","D":"w"},"answer":"C"})"
                               "\n");
  auto d = load_dataset(path, TaskKind::mcq4);
  ASSERT_EQ(d.questions.size(), 3u);
  EXPECT_TRUE(d.rejected.empty());
  EXPECT_EQ(d.questions[2].answer_key, "C");
}

TEST(Dataset, YesNoMaybe) {
  const auto path = write_file("ds-ynm", "d.jsonl",
                               R"({"id":"p1","question":"q?","options":{"yes":"","no":"","maybe":""},"answer":"maybe"})");
  auto d = load_dataset(path, TaskKind::ynm);
  ASSERT_EQ(d.questions.size(), 1u);
  EXPECT_EQ(d.questions[0].labels(), (std::vector<std::string>{"yes", "no", "maybe"}));
}

TEST(Dataset, BadLinesRejectedWithLineNumbers) {
  const auto path = write_file("ds-bad", "d.jsonl",
                               R"({"id":"1","question":"a?","options":{"A":"x","B":"y","C":"z","D":"w"},"answer":"A"})"
                               "\n"
                               R"({"id":"2","question":"b?","answer":"B"})"
                               "\n"
                               "not json\n"
                               R"({"id":"1","question":"a?","options":{"A":"x","B":"y","C":"z","D":"w"},"answer":"A"})"
                               "\n");
  auto d = load_dataset(path, TaskKind::mcq4);
  EXPECT_EQ(d.questions.size(), 1u);
  ASSERT_EQ(d.rejected.size(), 3u);
  EXPECT_EQ(d.rejected[0].rfind("line 2:", 0), 0u);
  EXPECT_NE(d.rejected[0].find("options"), std::string::npos);
  EXPECT_EQ(d.rejected[1].rfind("line 3:", 0), 0u);
  EXPECT_NE(d.rejected[2].find("duplicate"), std::string::npos);
}

TEST(Dataset, NothingLoadable) {
  const auto path = write_file("ds-none", "d.jsonl", "{}\n");
  EXPECT_THROW(load_dataset(path, TaskKind::mcq4), DatasetError);
  EXPECT_THROW(load_dataset(test::scratch_dir("ds-none") / "missing.jsonl", TaskKind::mcq4), DatasetError);
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

TEST(Metrics, AccuracyAndCostsAtDefaults) {
  std::vector<Question> qs{test::mcq("q1"), test::mcq("q2"), test::mcq("q3"), test::mcq("q4")};
  auto r = run(concat({test::never_sufficient("q1", 2, 3, "d000"), test::never_sufficient("q2", 2, 3, "d000"),
                       test::never_sufficient("q3", 2, 3, "d000"), test::never_sufficient("q4", 2, 3, "d000", "A")}),
               qs, defaults(), 3);
  EXPECT_EQ(r.metrics.n_questions, 4u);
  EXPECT_EQ(r.metrics.n_correct, 3u);
  EXPECT_DOUBLE_EQ(r.metrics.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.metrics.calls_per_q, 5.0);
  EXPECT_DOUBLE_EQ(r.metrics.retr_per_q, 4.0);
  for (std::size_t i = 0; i < qs.size(); ++i) EXPECT_EQ(r.records[i].id, qs[i].id);
  EXPECT_EQ(r.records[3].prediction, "A");
  EXPECT_FALSE(r.records[3].correct);
}

TEST(Metrics, MixedTrajectoriesAverage) {
  std::vector<Question> qs{test::mcq("q1"), test::mcq("q2")};
  auto r = run(concat({test::never_sufficient("q1", 2, 3, "d000"), sufficient_first("q2")}), qs);
  EXPECT_DOUBLE_EQ(r.metrics.calls_per_q, 4.5);
  EXPECT_DOUBLE_EQ(r.metrics.retr_per_q, 2.5);
  EXPECT_EQ(r.records[1].trajectory->termination, Termination::sufficient);
}

TEST(Metrics, TokensAndTimeAreMeans) {
  std::vector<QuestionRecord> recs(2);
  recs[0].counters = {1, 1, 0, 1, 100, 10, 1000.0};
  recs[1].counters = {3, 3, 0, 3, 300, 30, 3000.0};
  recs[0].correct = true;
  recs[1].abstained = true;
  auto m = compute_metrics(recs);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_EQ(m.n_abstained, 1u);
  EXPECT_DOUBLE_EQ(m.time_per_q, 2.0);
  EXPECT_DOUBLE_EQ(m.tokens_in_per_q, 200.0);
  EXPECT_DOUBLE_EQ(m.tokens_out_per_q, 20.0);
  EXPECT_DOUBLE_EQ(m.tokens_per_q, 220.0);
  EXPECT_EQ(metrics_from_json(Json::parse(metrics_to_json(m).dump())), m);
  EXPECT_NE(format_summary(m).find("0.5"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Records and persistence
// ---------------------------------------------------------------------------

TEST(Records, JsonRoundTrip) {
  std::vector<Question> qs{test::mcq("q1")};
  auto r = run(test::never_sufficient("q1", 2, 3, "d000"), qs);
  const auto& rec = r.records[0];
  EXPECT_EQ(record_from_json(Json::parse(record_to_json(rec).dump())), rec);
  EXPECT_EQ(rec.evidence_ids.size(), 20u);
  EXPECT_EQ(rec.counters.retrieval_ops, 4);
  EXPECT_FALSE(rec.error.has_value());
}

TEST(Records, WriteRunAndRecompute) {
  std::vector<Question> qs{test::mcq("q1"), test::mcq("q2"), test::mcq("q3")};
  auto r = run(concat({test::never_sufficient("q1", 2, 3, "d000"), sufficient_first("q2"), sufficient_first("q3", "B")}),
               qs);
  const auto out = test::scratch_dir("write-run");
  write_run(out, r);
  std::ifstream in(out / "records.jsonl");
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 3u);
  EXPECT_EQ(read_records(out / "records.jsonl"), r.records);
  EXPECT_EQ(summarize_records(out / "records.jsonl"), r.metrics);
  std::ifstream sj(out / "summary.json");
  EXPECT_EQ(metrics_from_json(Json::parse(sj)), r.metrics);
  EXPECT_TRUE(std::filesystem::exists(out / "summary.txt"));
}

TEST(Records, IdenticalAcrossRuns) {
  std::vector<Question> qs{test::mcq("q1"), test::mcq("q2")};
  auto script = concat({test::never_sufficient("q1", 2, 3, "d000"), sufficient_first("q2")});
  const auto a = test::scratch_dir("same-a") / "records.jsonl";
  const auto b = test::scratch_dir("same-b") / "records.jsonl";
  write_records(a, run(script, qs, defaults(), 2).records);
  write_records(b, run(script, qs, defaults(), 1).records);
  EXPECT_EQ(test::slurp(a), test::slurp(b));
}

// ---------------------------------------------------------------------------
// Failures become records
// ---------------------------------------------------------------------------

TEST(Failures, BudgetExceededKeepsPartialTrajectory) {
  auto cfg = defaults();
  cfg.budget.max_calls = 2;
  std::vector<Question> qs{test::mcq("q1")};
  auto r = run(test::never_sufficient("q1", 2, 3, "d000"), qs, cfg);
  const auto& rec = r.records[0];
  ASSERT_TRUE(rec.error.has_value());
  EXPECT_EQ(rec.error->kind, "budget_exceeded");
  ASSERT_TRUE(rec.trajectory.has_value());
  EXPECT_EQ(rec.trajectory->rounds_executed(), 1);
  EXPECT_FALSE(rec.prediction.has_value());
  EXPECT_EQ(r.metrics.n_failed, 1u);
  EXPECT_DOUBLE_EQ(r.metrics.accuracy, 0.0);
}

TEST(Failures, AuthAndBackendErrorsClassified) {
  std::vector<Question> qs{test::mcq("q1"), test::mcq("q2")};
  auto r = run({say(Role::interpreter, "", "q1", "auth"), say(Role::interpreter, "", "q2", "boom")}, qs);
  EXPECT_EQ(r.records[0].error->kind, "auth_error");
  EXPECT_EQ(r.records[1].error->kind, "backend_error");
}

TEST(Failures, EmptyIndexClassified) {
  auto idx = std::make_shared<const VectorIndex>(VectorIndex::from_parts({}, {}, 64, MockEmbedder(64).tag()));
  auto retriever = std::make_shared<DenseRetriever>(idx, std::make_shared<MockEmbedder>(64));
  auto rig = test::mock_rig(sufficient_first("q1"));
  Pipeline pipeline(defaults(), rig->gateway, retriever, frozen_clock());
  auto rec = pipeline.run(test::mcq("q1"));
  ASSERT_TRUE(rec.error.has_value());
  EXPECT_EQ(rec.error->kind, "index_error");
}

TEST(Failures, AbstentionIsRecordedNotFailed) {
  std::vector<Question> qs{test::mcq("q1")};
  auto script = sufficient_first("q1");
  script.back() = say(Role::answerer, "unsure", "q1");
  script.push_back(say(Role::answerer, "still unsure", "q1"));
  auto r = run(script, qs);
  const auto& rec = r.records[0];
  EXPECT_FALSE(rec.error.has_value());
  EXPECT_TRUE(rec.abstained);
  EXPECT_FALSE(rec.prediction.has_value());
  EXPECT_FALSE(rec.correct);
  EXPECT_NE(std::find(rec.flags.begin(), rec.flags.end(), "answer_parse_failure"), rec.flags.end());
  EXPECT_EQ(r.metrics.n_abstained, 1u);
}

TEST(Ablations, FlagsAndCounts) {
  auto cfg = defaults();
  cfg.ablation.skip_interpreter = true;
  cfg.ablation.skip_adjudication = true;
  std::vector<Question> qs{test::mcq("q1")};
  auto r = run(test::never_sufficient("q1", 2, 3, "d000", "D", cfg.ablation), qs, cfg);
  const auto& rec = r.records[0];
  EXPECT_FALSE(rec.error.has_value()) << rec.error->message;
  EXPECT_EQ(rec.counters.llm_calls, 3);
  EXPECT_EQ(rec.initial_query, "Which organism is most likely?");
  EXPECT_FALSE(rec.report.has_value());
  EXPECT_NE(std::find(rec.flags.begin(), rec.flags.end(), "interpreter_skipped"), rec.flags.end());
  EXPECT_NE(std::find(rec.flags.begin(), rec.flags.end(), "adjudication_skipped"), rec.flags.end());
}
