#include "semarag/harness.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include "semarag/errors.hpp"
#include "semarag/text.hpp"

namespace semarag {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

DatasetLoad load_dataset(const fs::path& path, TaskKind kind) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset " + path.string());

  DatasetLoad out;
  std::set<std::string> seen;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (trim_view(line).empty()) continue;
    try {
      auto q = validate_question(question_from_json(Json::parse(line), kind));
      if (!seen.insert(q.id).second) throw DatasetError("duplicate id '" + q.id + "'");
      out.questions.push_back(std::move(q));
    } catch (const std::exception& e) {
      out.rejected.push_back(fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  for (const auto& r : out.rejected) spdlog::warn("{}: rejected {}", path.string(), r);
  if (out.questions.empty()) {
    throw DatasetError(fmt::format("{}: no valid questions ({} rejected)", path.string(), out.rejected.size()));
  }
  spdlog::info("{}: loaded {} question(s), rejected {}", path.string(), out.questions.size(), out.rejected.size());
  return out;
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

namespace {

template <class T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json ablation_json(const AblationSettings& a) {
  return Json{{"skip_interpreter", a.skip_interpreter},
              {"single_round", a.single_round},
              {"skip_adjudication", a.skip_adjudication}};
}

}  // namespace

Json record_to_json(const QuestionRecord& r) {
  Json j;
  j["id"] = r.id;
  j["task_kind"] = std::string(to_string(r.task_kind));
  j["answer_key"] = optional_json(r.answer_key);
  j["ablation"] = ablation_json(r.ablation);
  j["schema"] = optional_json(r.schema);
  j["schema_degraded"] = r.schema_degraded;
  j["initial_query"] = r.initial_query;
  j["trajectory"] = optional_json(r.trajectory);
  j["evidence_ids"] = r.evidence_ids;
  j["report"] = optional_json(r.report);
  j["report_fallback"] = r.report_fallback;
  j["dropped_source_ids"] = r.dropped_source_ids;
  j["prediction"] = optional_json(r.prediction);
  j["abstained"] = r.abstained;
  j["correct"] = r.correct;
  j["counters"] = Json{{"llm_calls", r.counters.llm_calls},   {"llm_attempts", r.counters.llm_attempts},
                       {"cache_hits", r.counters.cache_hits}, {"retrieval_ops", r.counters.retrieval_ops},
                       {"tokens_in", r.counters.tokens_in},   {"tokens_out", r.counters.tokens_out},
                       {"wall_ms", r.counters.wall_ms}};
  j["flags"] = r.flags;
  j["error"] = r.error ? Json{{"kind", r.error->kind}, {"message", r.error->message}} : Json(nullptr);
  return j;
}

QuestionRecord record_from_json(const Json& j) {
  QuestionRecord r;
  r.id = j.at("id").get<std::string>();
  r.task_kind = parse_task_kind(j.at("task_kind").get<std::string>());
  if (!j.at("answer_key").is_null()) r.answer_key = j.at("answer_key").get<std::string>();
  const auto& a = j.at("ablation");
  r.ablation.skip_interpreter = a.at("skip_interpreter").get<bool>();
  r.ablation.single_round = a.at("single_round").get<bool>();
  r.ablation.skip_adjudication = a.at("skip_adjudication").get<bool>();
  if (!j.at("schema").is_null()) r.schema = j.at("schema").get<ClinicalSchema>();
  r.schema_degraded = j.at("schema_degraded").get<bool>();
  r.initial_query = j.at("initial_query").get<std::string>();
  if (!j.at("trajectory").is_null()) r.trajectory = j.at("trajectory").get<RetrievalTrajectory>();
  r.evidence_ids = j.at("evidence_ids").get<std::vector<std::string>>();
  if (!j.at("report").is_null()) r.report = j.at("report").get<EvidenceReport>();
  r.report_fallback = j.at("report_fallback").get<bool>();
  r.dropped_source_ids = j.at("dropped_source_ids").get<std::vector<std::string>>();
  if (!j.at("prediction").is_null()) r.prediction = j.at("prediction").get<std::string>();
  r.abstained = j.at("abstained").get<bool>();
  r.correct = j.at("correct").get<bool>();
  const auto& c = j.at("counters");
  r.counters.llm_calls = c.at("llm_calls").get<std::int64_t>();
  r.counters.llm_attempts = c.at("llm_attempts").get<std::int64_t>();
  r.counters.cache_hits = c.at("cache_hits").get<std::int64_t>();
  r.counters.retrieval_ops = c.at("retrieval_ops").get<std::int64_t>();
  r.counters.tokens_in = c.at("tokens_in").get<std::int64_t>();
  r.counters.tokens_out = c.at("tokens_out").get<std::int64_t>();
  r.counters.wall_ms = c.at("wall_ms").get<double>();
  r.flags = j.at("flags").get<std::vector<std::string>>();
  if (!j.at("error").is_null()) {
    r.error = RecordError{j.at("error").at("kind").get<std::string>(), j.at("error").at("message").get<std::string>()};
  }
  return r;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

RecordError classify(std::exception_ptr ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const BudgetExceeded& e) {
    return {"budget_exceeded", e.what()};
  } catch (const AuthError& e) {
    return {"auth_error", e.what()};
  } catch (const BackendError& e) {
    return {"backend_error", e.what()};
  } catch (const EmptyIndex& e) {
    return {"index_error", e.what()};
  } catch (const IndexFormatError& e) {
    return {"index_error", e.what()};
  } catch (const EmbedderDimensionMismatch& e) {
    return {"index_error", e.what()};
  } catch (const std::exception& e) {
    return {"internal", e.what()};
  } catch (...) {
    return {"internal", "unknown exception"};
  }
}

}  // namespace

Pipeline::Pipeline(RunConfig cfg, std::shared_ptr<Gateway> gateway, std::shared_ptr<const Retriever> retriever,
                   Clock clock)
    : cfg_(std::move(cfg)), gateway_(std::move(gateway)), retriever_(std::move(retriever)), clock_(std::move(clock)) {
  validate_config(cfg_);
}

QuestionRecord Pipeline::run(const Question& q) const {
  QuestionRecord r;
  r.id = q.id;
  r.task_kind = q.task_kind;
  r.answer_key = q.answer_key;
  r.ablation = cfg_.ablation;
  if (q.task_kind != TaskKind::mcq4) r.flags.push_back("label_grammar_extended");

  CallScope scope{q.id, cfg_.budget, {}};
  const double start = clock_();

  try {
    // Stage 1: interpretation
    ClinicalSchema schema;
    if (cfg_.ablation.skip_interpreter) {
      schema = degraded_schema(q);
      r.schema_degraded = true;
      r.flags.push_back("interpreter_skipped");
    } else {
      auto ir = interpret(q, *gateway_, cfg_, scope);
      schema = std::move(ir.schema);
      r.schema_degraded = ir.degraded;
      if (ir.degraded) r.flags.push_back("schema_parse_failure");
    }
    r.initial_query = r.schema_degraded ? schema.q_init : linearize(schema);
    r.schema = schema;

    // Stage 2: exploration
    LoopResult loop;
    try {
      loop = run_loop(schema, r.initial_query, *retriever_, *gateway_, cfg_, scope, clock_);
    } catch (const LoopAborted& e) {
      r.trajectory = e.partial();
      r.evidence_ids = e.evidence().ordered_ids();
      std::rethrow_exception(e.cause());
    }
    r.trajectory = loop.trajectory;
    r.evidence_ids = loop.evidence.ordered_ids();
    if (loop.audit_parse_failure) r.flags.push_back("audit_parse_failure");

    // Stage 3: adjudication and answering
    std::string slot;
    if (cfg_.ablation.skip_adjudication) {
      slot = render_summaries(loop.evidence, cfg_.summary_chars);
      r.flags.push_back("adjudication_skipped");
    } else {
      auto adj = adjudicate(q, schema, loop.issued_queries, loop.evidence, *gateway_, cfg_, scope);
      slot = report_text(adj.report);
      r.report = std::move(adj.report);
      r.report_fallback = adj.fallback;
      r.dropped_source_ids = std::move(adj.dropped_source_ids);
      if (adj.fallback) r.flags.push_back("report_fallback");
      if (!r.dropped_source_ids.empty()) r.flags.push_back("sources_dropped");
    }

    auto ans = answer(q, slot, *gateway_, cfg_, scope);
    if (ans.label) {
      r.prediction = ans.label->label;
      r.correct = q.answer_key && *q.answer_key == ans.label->label;
    } else {
      r.abstained = true;
      r.flags.push_back("answer_parse_failure");
      spdlog::warn("{}: abstained ({})", q.id, ans.failure);
    }
  } catch (...) {
    r.error = classify(std::current_exception());
    spdlog::error("{}: {} ({})", q.id, r.error->message, r.error->kind);
  }

  r.counters.llm_calls = scope.usage.llm_calls;
  r.counters.llm_attempts = scope.usage.attempts;
  r.counters.cache_hits = scope.usage.cache_hits;
  r.counters.retrieval_ops = r.trajectory ? r.trajectory->counters.retrieval_ops : 0;
  r.counters.tokens_in = scope.usage.tokens_in;
  r.counters.tokens_out = scope.usage.tokens_out;
  r.counters.wall_ms = clock_() - start;
  return r;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

RunMetrics compute_metrics(std::span<const QuestionRecord> records) {
  RunMetrics m;
  m.n_questions = records.size();
  if (records.empty()) return m;

  double calls = 0, retr = 0, ms = 0, tin = 0, tout = 0;
  for (const auto& r : records) {
    if (r.correct) ++m.n_correct;
    if (r.abstained) ++m.n_abstained;
    if (r.error) ++m.n_failed;
    calls += static_cast<double>(r.counters.llm_calls);
    retr += static_cast<double>(r.counters.retrieval_ops);
    ms += r.counters.wall_ms;
    tin += static_cast<double>(r.counters.tokens_in);
    tout += static_cast<double>(r.counters.tokens_out);
  }
  const auto n = static_cast<double>(records.size());
  m.accuracy = static_cast<double>(m.n_correct) / n;
  m.calls_per_q = calls / n;
  m.retr_per_q = retr / n;
  m.time_per_q = ms / n / 1000.0;
  m.tokens_in_per_q = tin / n;
  m.tokens_out_per_q = tout / n;
  m.tokens_per_q = (tin + tout) / n;
  return m;
}

Json metrics_to_json(const RunMetrics& m) {
  return Json{{"n_questions", m.n_questions},
              {"n_correct", m.n_correct},
              {"n_abstained", m.n_abstained},
              {"n_failed", m.n_failed},
              {"accuracy", m.accuracy},
              {"calls_per_q", m.calls_per_q},
              {"retr_per_q", m.retr_per_q},
              {"time_per_q", m.time_per_q},
              {"tokens_per_q", m.tokens_per_q},
              {"tokens_in_per_q", m.tokens_in_per_q},
              {"tokens_out_per_q", m.tokens_out_per_q}};
}

RunMetrics metrics_from_json(const Json& j) {
  RunMetrics m;
  m.n_questions = j.at("n_questions").get<std::size_t>();
  m.n_correct = j.at("n_correct").get<std::size_t>();
  m.n_abstained = j.at("n_abstained").get<std::size_t>();
  m.n_failed = j.at("n_failed").get<std::size_t>();
  m.accuracy = j.at("accuracy").get<double>();
  m.calls_per_q = j.at("calls_per_q").get<double>();
  m.retr_per_q = j.at("retr_per_q").get<double>();
  m.time_per_q = j.at("time_per_q").get<double>();
  m.tokens_per_q = j.at("tokens_per_q").get<double>();
  m.tokens_in_per_q = j.at("tokens_in_per_q").get<double>();
  m.tokens_out_per_q = j.at("tokens_out_per_q").get<double>();
  return m;
}

std::string format_summary(const RunMetrics& m) {
  std::string out;
  out += fmt::format("{:<12} {:>10}\n", "questions", m.n_questions);
  out += fmt::format("{:<12} {:>10}\n", "correct", m.n_correct);
  out += fmt::format("{:<12} {:>10}\n", "abstained", m.n_abstained);
  out += fmt::format("{:<12} {:>10}\n", "failed", m.n_failed);
  out += fmt::format("{:<12} {:>10.4f}\n", "accuracy", m.accuracy);
  out += fmt::format("{:<12} {:>10.3f}\n", "calls/q", m.calls_per_q);
  out += fmt::format("{:<12} {:>10.3f}\n", "retr/q", m.retr_per_q);
  out += fmt::format("{:<12} {:>10.3f}\n", "time/q (s)", m.time_per_q);
  out += fmt::format("{:<12} {:>10.1f}\n", "tok/q", m.tokens_per_q);
  out += fmt::format("{:<12} {:>10.1f}\n", "tok_in/q", m.tokens_in_per_q);
  out += fmt::format("{:<12} {:>10.1f}\n", "tok_out/q", m.tokens_out_per_q);
  return out;
}

BenchmarkResult run_benchmark(std::span<const Question> questions, const Pipeline& pipeline, std::size_t workers) {
  BenchmarkResult result;
  result.records.resize(questions.size());
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, questions.size()));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < questions.size(); i = next++) {
      result.records[i] = pipeline.run(questions[i]);
    }
  };
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }
  result.metrics = compute_metrics(result.records);
  return result;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw Error("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace

void write_records(const fs::path& path, std::span<const QuestionRecord> records) {
  std::string text;
  for (const auto& r : records) text += dump_line(record_to_json(r)) + "\n";
  write_text(path, text);
}

std::vector<QuestionRecord> read_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open records " + path.string());
  std::vector<QuestionRecord> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (trim_view(line).empty()) continue;
    try {
      out.push_back(record_from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(fmt::format("{}:{}: bad record: {}", path.string(), lineno, e.what()));
    }
  }
  return out;
}

void write_run(const fs::path& out_dir, const BenchmarkResult& result) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());
  write_records(out_dir / "records.jsonl", result.records);
  write_text(out_dir / "summary.json", metrics_to_json(result.metrics).dump(2) + "\n");
  write_text(out_dir / "summary.txt", format_summary(result.metrics));
}

RunMetrics summarize_records(const fs::path& records_path) {
  const auto records = read_records(records_path);
  return compute_metrics(records);
}

// ---------------------------------------------------------------------------
// Wiring
// ---------------------------------------------------------------------------

Engine make_engine(const RunConfig& cfg, const fs::path& index_dir, std::span<const fs::path> corpus_files) {
  Engine e;
  e.embedder = make_embedder(cfg.embedder);
  if (!index_dir.empty() && fs::exists(index_dir / "manifest.json")) {
    e.index = std::make_shared<const VectorIndex>(VectorIndex::load(index_dir));
  } else if (!corpus_files.empty()) {
    auto built = ingest(corpus_files, cfg.chunking, *e.embedder);
    if (!index_dir.empty()) built.save(index_dir);
    e.index = std::make_shared<const VectorIndex>(std::move(built));
  } else {
    throw IndexFormatError("no index at '" + index_dir.string() + "' and no corpus to build one from");
  }
  e.retriever = std::make_shared<DenseRetriever>(e.index, e.embedder);
  e.gateway = std::make_shared<Gateway>(make_backend(cfg), gateway_options(cfg));
  return e;
}

}  // namespace semarag
