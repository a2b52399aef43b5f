#pragma once

// The sufficiency-driven retrieval loop. Each round retrieves for every
// query, folds new documents into the evidence set, then asks the explorer
// role whether the evidence is enough and, if not, what to search next.

#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semarag/config.hpp"
#include "semarag/corpus_index.hpp"
#include "semarag/domain.hpp"
#include "semarag/errors.hpp"
#include "semarag/llm_gateway.hpp"

namespace semarag {

/// Milliseconds since an arbitrary origin. Injected so that runs against the
/// mock backend can produce reproducible records.
using Clock = std::function<double()>;
Clock steady_clock_ms();
Clock frozen_clock();

/// Union of per-query top-k lists. Duplicates keep their best score; output
/// is ordered by best score, then doc_id. Adds |queries| to `retrieval_ops`.
std::vector<ScoredDoc> retrieve_round(std::span<const std::string> queries, const Retriever& retriever,
                                      std::size_t k, std::int64_t& retrieval_ops);

/// prev followed by unseen candidates in rank order.
EvidenceSet merge_evidence(const EvidenceSet& prev, std::span<const ScoredDoc> candidates,
                           std::vector<std::string>* added = nullptr);

/// One "[doc_id] title: text" line per document, text cut to `max_chars`.
std::string render_summaries(const EvidenceSet& evidence, std::size_t max_chars);

std::string explorer_prompt(const ClinicalSchema& schema, std::span<const std::string> query_list,
                            const EvidenceSet& evidence, std::size_t summary_chars);

/// Accepts "sufficiency" as 0/1, true/false or "0"/"1"; "queries" (or
/// "next_queries") as a list of strings. Throws VerdictParseFailure.
SufficiencyVerdict parse_verdict(std::string_view raw, std::size_t max_queries, bool strict = false);

struct AuditResult {
  SufficiencyVerdict verdict;
  bool parse_failed = false;
  std::vector<std::string> raw_outputs;
};

/// A verdict that still fails to parse after retries becomes
/// {insufficient, "parse failure", no queries}, which ends the loop.
AuditResult audit(const ClinicalSchema& schema, std::span<const std::string> query_list,
                  const EvidenceSet& evidence, Gateway& gateway, const RunConfig& cfg, CallScope& scope);

struct LoopResult {
  EvidenceSet evidence;                    // C*
  RetrievalTrajectory trajectory;
  std::vector<std::string> issued_queries; // every query, in issue order
  bool audit_parse_failure = false;
};

/// Raised when the loop cannot finish (budget, backend or index failure).
/// Carries what was completed before the failure.
class LoopAborted : public Error {
 public:
  LoopAborted(const std::string& what, std::exception_ptr cause, RetrievalTrajectory partial, EvidenceSet evidence)
      : Error("retrieval loop aborted: " + what),
        cause_(std::move(cause)),
        partial_(std::move(partial)),
        evidence_(std::move(evidence)) {}

  /// The original failure, for classification.
  std::exception_ptr cause() const noexcept { return cause_; }
  const RetrievalTrajectory& partial() const noexcept { return partial_; }
  const EvidenceSet& evidence() const noexcept { return evidence_; }

 private:
  std::exception_ptr cause_;
  RetrievalTrajectory partial_;
  EvidenceSet evidence_;
};

LoopResult run_loop(const ClinicalSchema& schema, const std::string& initial_query,
                    const Retriever& retriever, Gateway& gateway, const RunConfig& cfg, CallScope& scope,
                    const Clock& clock = steady_clock_ms());

/// Re-issues each recorded round's queries and returns the ids each round
/// would newly add. Matches `newly_added` for a faithful trajectory.
std::vector<std::vector<std::string>> replay_trajectory(const RetrievalTrajectory& trajectory,
                                                        const Retriever& retriever, std::size_t k);

}  // namespace semarag
