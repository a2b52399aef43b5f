#pragma once

// Shared value types for every pipeline stage: questions, the clinical
// schema, evidence documents and sets, audit verdicts, trajectories and
// adjudication reports. All of them are plain values; once built they are
// only read, so sharing across worker threads needs no locking.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace semarag {

// ---------------------------------------------------------------------------
// Questions
// ---------------------------------------------------------------------------

enum class TaskKind { mcq4, yn, ynm };

std::string_view to_string(TaskKind kind);
/// Accepts "mcq4", "yn", "ynm" (case-insensitive). Throws ConfigError otherwise.
TaskKind parse_task_kind(std::string_view text);

/// Canonical label set: {A,B,C,D}, {yes,no} or {yes,no,maybe}.
std::vector<std::string> label_set(TaskKind kind);

/// Maps a raw label onto its canonical spelling for `kind`, ignoring case and
/// surrounding whitespace. Returns nullopt when it is not a member.
std::optional<std::string> canonical_label(std::string_view raw, TaskKind kind);

struct Option {
  std::string label;
  std::string text;

  bool operator==(const Option&) const = default;
};

struct Question {
  std::string id;
  std::string stem;
  std::vector<Option> options;  // display order
  TaskKind task_kind = TaskKind::mcq4;
  std::optional<std::string> answer_key;

  std::vector<std::string> labels() const;
  bool operator==(const Question&) const = default;
};

/// Returns `q` with canonical labels iff every Question invariant holds.
/// Throws EmptyOptions, DuplicateLabel or LabelSetMismatch.
Question validate_question(Question q);

/// Stem followed by one line per option, as shown to the agents.
std::string render_question(const Question& q);

// ---------------------------------------------------------------------------
// Clinical schema
// ---------------------------------------------------------------------------

struct ClinicalSchema {
  std::string intent;
  std::vector<std::string> entities;
  std::vector<std::string> constraints;
  std::string q_init;

  bool operator==(const ClinicalSchema&) const = default;
};

/// Trims every field and drops blank list items. Throws ValidationError when
/// q_init is blank.
ClinicalSchema validate_schema(ClinicalSchema s);

/// Fallback used when the interpreter output cannot be parsed, and for the
/// no-interpreter ablation.
ClinicalSchema degraded_schema(const Question& q);

// ---------------------------------------------------------------------------
// Evidence
// ---------------------------------------------------------------------------

struct EvidenceDoc {
  std::string doc_id;
  std::string source_corpus;
  std::string title;
  std::string text;
  std::optional<std::vector<double>> embedding;

  bool operator==(const EvidenceDoc&) const = default;
};

/// Content hash of (source, title, text) as 16 lowercase hex digits.
std::string derive_doc_id(std::string_view source, std::string_view title, std::string_view text);

/// Ordered, duplicate-free accumulation of evidence. First-seen wins.
class EvidenceSet {
 public:
  EvidenceSet() = default;

  /// Appends documents whose doc_id is not yet present, in the given order.
  /// When `added` is non-null it receives the ids that were appended.
  EvidenceSet merge(std::span<const EvidenceDoc> incoming,
                    std::vector<std::string>* added = nullptr) const;
  EvidenceSet merge(const EvidenceSet& other, std::vector<std::string>* added = nullptr) const;

  const std::vector<EvidenceDoc>& docs() const noexcept { return docs_; }
  const std::unordered_set<std::string>& ids() const noexcept { return ids_; }
  std::vector<std::string> ordered_ids() const;

  bool contains(const std::string& doc_id) const { return ids_.contains(doc_id); }
  std::size_t size() const noexcept { return docs_.size(); }
  bool empty() const noexcept { return docs_.empty(); }

  bool operator==(const EvidenceSet& other) const { return docs_ == other.docs_; }

 private:
  std::vector<EvidenceDoc> docs_;
  std::unordered_set<std::string> ids_;
};

// ---------------------------------------------------------------------------
// Explorer audit and trajectory
// ---------------------------------------------------------------------------

inline constexpr std::string_view kGapNotApplicable = "N/A";

struct SufficiencyVerdict {
  bool sufficient = false;
  std::string gap;
  std::vector<std::string> next_queries;

  bool operator==(const SufficiencyVerdict&) const = default;
};

/// Builds a verdict that satisfies the invariants: a sufficient verdict has
/// gap "N/A" and no queries; otherwise queries are trimmed, blanks dropped,
/// and the list is cut to `max_queries`.
SufficiencyVerdict make_verdict(bool sufficient, std::string gap, std::vector<std::string> queries,
                                std::size_t max_queries);

enum class Termination { sufficient, max_rounds, stagnation };

std::string_view to_string(Termination t);
Termination parse_termination(std::string_view text);

struct CostCounters {
  std::int64_t llm_calls = 0;
  std::int64_t retrieval_ops = 0;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  double wall_ms = 0.0;

  bool operator==(const CostCounters&) const = default;
};

struct RoundRecord {
  int round_index = 0;  // 1-based
  std::vector<std::string> queries;
  std::vector<std::string> newly_added;
  std::size_t evidence_size = 0;
  SufficiencyVerdict verdict;

  bool operator==(const RoundRecord&) const = default;
};

struct RetrievalTrajectory {
  std::vector<RoundRecord> rounds;
  Termination termination = Termination::max_rounds;
  CostCounters counters;  // explorer loop only

  int rounds_executed() const noexcept { return static_cast<int>(rounds.size()); }
  bool operator==(const RetrievalTrajectory&) const = default;
};

/// Throws ValidationError naming the first broken trajectory invariant.
void check_trajectory(const RetrievalTrajectory& traj, int t_max);

// ---------------------------------------------------------------------------
// Adjudication
// ---------------------------------------------------------------------------

struct Citation {
  std::string claim;
  std::vector<std::string> source_ids;

  bool operator==(const Citation&) const = default;
};

struct EvidenceReport {
  std::string question_focus;
  std::vector<Citation> supporting;
  std::vector<Citation> conflicting;
  std::string synthesis;

  bool operator==(const EvidenceReport&) const = default;
};

/// True when every cited id is a member of `evidence`.
bool report_is_closed(const EvidenceReport& report, const EvidenceSet& evidence);

struct AnswerLabel {
  std::string label;
  bool operator==(const AnswerLabel&) const = default;
};

}  // namespace semarag
