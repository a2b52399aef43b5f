#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semarag/config.hpp"
#include "semarag/domain.hpp"
#include "semarag/llm_gateway.hpp"

namespace semarag {

// ---------------------------------------------------------------------------
// Phase 1: adjudication
// ---------------------------------------------------------------------------

std::string adjudicator_prompt(const Question& q, const ClinicalSchema& schema,
                               std::span<const std::string> final_queries, const EvidenceSet& evidence,
                               std::size_t summary_chars);

/// Throws ReportParseFailure.
EvidenceReport parse_report(std::string_view raw, bool strict = false);

/// Drops source ids not present in `evidence` (brackets and whitespace around
/// ids are ignored). A claim left without any valid source is removed.
/// Returns the dropped ids in encounter order.
std::vector<std::string> enforce_traceability(EvidenceReport& report, const EvidenceSet& evidence);

/// Stem as focus, one verbatim claim per first three documents, synthesis
/// "fallback".
EvidenceReport fallback_report(const Question& q, const EvidenceSet& evidence, std::size_t claim_chars);

struct Adjudication {
  EvidenceReport report;
  bool fallback = false;
  std::vector<std::string> dropped_source_ids;
  std::vector<std::string> raw_outputs;
};

Adjudication adjudicate(const Question& q, const ClinicalSchema& schema,
                        std::span<const std::string> final_queries, const EvidenceSet& evidence,
                        Gateway& gateway, const RunConfig& cfg, CallScope& scope);

// ---------------------------------------------------------------------------
// Phase 2: answering
// ---------------------------------------------------------------------------

/// `report_text` fills the adjudication-report slot; without adjudication the
/// evidence summaries take its place.
std::string answerer_prompt(const Question& q, std::string_view report_text);

std::string report_text(const EvidenceReport& report);

/// Last "Final Answer:" followed by an allowed label wins; case, brackets,
/// markdown emphasis and trailing punctuation are tolerated. A text that is
/// nothing but one label is accepted too. Throws NoLabelFound or
/// AmbiguousLabel.
AnswerLabel parse_answer(std::string_view text, std::span<const std::string> allowed);

struct AnswerOutcome {
  std::optional<AnswerLabel> label;  // nullopt: abstained
  std::string failure;
  std::vector<std::string> raw_outputs;

  bool abstained() const noexcept { return !label.has_value(); }
};

AnswerOutcome answer(const Question& q, std::string_view report_text, Gateway& gateway, const RunConfig& cfg,
                     CallScope& scope);

}  // namespace semarag
