#pragma once

// Dataset loading, the per-question pipeline, batch evaluation, metrics and
// persistence of run artifacts.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semarag/arbiter.hpp"
#include "semarag/config.hpp"
#include "semarag/corpus_index.hpp"
#include "semarag/domain.hpp"
#include "semarag/explorer.hpp"
#include "semarag/interpreter.hpp"
#include "semarag/json_io.hpp"
#include "semarag/llm_gateway.hpp"

namespace semarag {

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct DatasetLoad {
  std::vector<Question> questions;
  std::vector<std::string> rejected;  // "line N: reason"
};

/// Loads {"id","question","options":{label:text},"answer"} lines. Bad lines
/// are collected in `rejected`; throws DatasetError when nothing loads.
DatasetLoad load_dataset(const std::filesystem::path& path, TaskKind kind);

// ---------------------------------------------------------------------------
// Per-question record
// ---------------------------------------------------------------------------

struct QuestionCounters {
  std::int64_t llm_calls = 0;
  std::int64_t llm_attempts = 0;
  std::int64_t cache_hits = 0;
  std::int64_t retrieval_ops = 0;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  double wall_ms = 0.0;

  bool operator==(const QuestionCounters&) const = default;
};

struct RecordError {
  std::string kind;  // budget_exceeded, auth_error, backend_error, index_error, internal
  std::string message;

  bool operator==(const RecordError&) const = default;
};

struct QuestionRecord {
  std::string id;
  TaskKind task_kind = TaskKind::mcq4;
  std::optional<std::string> answer_key;
  AblationSettings ablation;

  std::optional<ClinicalSchema> schema;
  bool schema_degraded = false;
  std::string initial_query;

  std::optional<RetrievalTrajectory> trajectory;
  std::vector<std::string> evidence_ids;  // C*, in order

  std::optional<EvidenceReport> report;
  bool report_fallback = false;
  std::vector<std::string> dropped_source_ids;

  std::optional<std::string> prediction;
  bool abstained = false;
  bool correct = false;

  QuestionCounters counters;
  std::vector<std::string> flags;
  std::optional<RecordError> error;

  bool operator==(const QuestionRecord&) const = default;
};

Json record_to_json(const QuestionRecord& r);
QuestionRecord record_from_json(const Json& j);

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

/// interpret -> run_loop -> adjudicate -> answer for one question. Shared
/// state (gateway, retriever) is safe for concurrent use, so one Pipeline
/// serves all workers.
class Pipeline {
 public:
  Pipeline(RunConfig cfg, std::shared_ptr<Gateway> gateway, std::shared_ptr<const Retriever> retriever,
           Clock clock = steady_clock_ms());

  /// Never throws for question-level failures; they are recorded.
  QuestionRecord run(const Question& q) const;

  const RunConfig& config() const noexcept { return cfg_; }

 private:
  RunConfig cfg_;
  std::shared_ptr<Gateway> gateway_;
  std::shared_ptr<const Retriever> retriever_;
  Clock clock_;
};

// ---------------------------------------------------------------------------
// Metrics and batch runs
// ---------------------------------------------------------------------------

struct RunMetrics {
  std::size_t n_questions = 0;
  std::size_t n_correct = 0;
  std::size_t n_abstained = 0;
  std::size_t n_failed = 0;
  double accuracy = 0.0;
  double calls_per_q = 0.0;
  double retr_per_q = 0.0;
  double time_per_q = 0.0;  // seconds
  double tokens_per_q = 0.0;
  double tokens_in_per_q = 0.0;
  double tokens_out_per_q = 0.0;

  bool operator==(const RunMetrics&) const = default;
};

RunMetrics compute_metrics(std::span<const QuestionRecord> records);

Json metrics_to_json(const RunMetrics& m);
RunMetrics metrics_from_json(const Json& j);
std::string format_summary(const RunMetrics& m);

struct BenchmarkResult {
  RunMetrics metrics;
  std::vector<QuestionRecord> records;  // dataset order
};

/// Fans questions out to `workers` threads; records come back in input order.
BenchmarkResult run_benchmark(std::span<const Question> questions, const Pipeline& pipeline,
                              std::size_t workers);

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

void write_records(const std::filesystem::path& path, std::span<const QuestionRecord> records);
std::vector<QuestionRecord> read_records(const std::filesystem::path& path);

/// Writes records.jsonl, summary.json and summary.txt into `out_dir`.
void write_run(const std::filesystem::path& out_dir, const BenchmarkResult& result);

/// Recomputes the summary from stored records.
RunMetrics summarize_records(const std::filesystem::path& records_path);

// ---------------------------------------------------------------------------
// Wiring
// ---------------------------------------------------------------------------

struct Engine {
  std::shared_ptr<const VectorIndex> index;
  std::shared_ptr<const Embedder> embedder;
  std::shared_ptr<Gateway> gateway;
  std::shared_ptr<const Retriever> retriever;
};

/// Loads an index from `index_dir` (or ingests `corpus_files` when the
/// directory is empty) and connects the configured backend and embedder.
Engine make_engine(const RunConfig& cfg, const std::filesystem::path& index_dir,
                   std::span<const std::filesystem::path> corpus_files);

}  // namespace semarag
