#pragma once

// JSON mapping for domain types. Records use ordered_json so that key order,
// and therefore the bytes written to disk, are fixed by the code.

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "semarag/domain.hpp"

namespace semarag {

using Json = nlohmann::ordered_json;

void to_json(Json& j, const Option& o);
void to_json(Json& j, const Question& q);
void to_json(Json& j, const ClinicalSchema& s);
void from_json(const Json& j, ClinicalSchema& s);
void to_json(Json& j, const SufficiencyVerdict& v);
void from_json(const Json& j, SufficiencyVerdict& v);
void to_json(Json& j, const CostCounters& c);
void from_json(const Json& j, CostCounters& c);
void to_json(Json& j, const RoundRecord& r);
void from_json(const Json& j, RoundRecord& r);
void to_json(Json& j, const RetrievalTrajectory& t);
void from_json(const Json& j, RetrievalTrajectory& t);
void to_json(Json& j, const Citation& c);
void from_json(const Json& j, Citation& c);

/// Reports serialize with the adjudicator's own output keys
/// (key_supporting_evidence, key_conflicting_or_limiting_evidence, ...).
void to_json(Json& j, const EvidenceReport& r);
void from_json(const Json& j, EvidenceReport& r);

/// Parses one dataset record: {"id","question","options":{label:text},"answer"}.
/// The result is not yet validated.
Question question_from_json(const Json& j, TaskKind kind);

/// Compact one-line dump used for JSONL files.
std::string dump_line(const Json& j);

/// First balanced top-level JSON object embedded in `text` (prose and code
/// fences around it are skipped). With `strict`, the trimmed text must be a
/// single JSON object. Returns nullopt when nothing parses.
std::optional<Json> extract_json_object(std::string_view text, bool strict = false);

}  // namespace semarag
