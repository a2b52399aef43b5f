#include "semarag/json_io.hpp"

#include "semarag/errors.hpp"
#include "semarag/text.hpp"

namespace semarag {

namespace {

std::vector<std::string> string_list(const Json& j, const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key) || j.at(key).is_null()) return out;
  for (const auto& v : j.at(key)) out.push_back(v.get<std::string>());
  return out;
}

}  // namespace

void to_json(Json& j, const Option& o) { j = Json{{"label", o.label}, {"text", o.text}}; }

void to_json(Json& j, const Question& q) {
  Json options = Json::object();
  for (const auto& o : q.options) options[o.label] = o.text;
  j = Json{{"id", q.id}, {"question", q.stem}, {"options", options}};
  if (q.answer_key) j["answer"] = *q.answer_key;
}

void to_json(Json& j, const ClinicalSchema& s) {
  j = Json{{"intent", s.intent}, {"entities", s.entities}, {"constraints", s.constraints}, {"q_init", s.q_init}};
}

void from_json(const Json& j, ClinicalSchema& s) {
  s.intent = j.value("intent", std::string{});
  s.entities = string_list(j, "entities");
  s.constraints = string_list(j, "constraints");
  s.q_init = j.at("q_init").get<std::string>();
}

void to_json(Json& j, const SufficiencyVerdict& v) {
  j = Json{{"sufficiency", v.sufficient ? 1 : 0}, {"gap", v.gap}, {"queries", v.next_queries}};
}

void from_json(const Json& j, SufficiencyVerdict& v) {
  const auto& s = j.at("sufficiency");
  v.sufficient = s.is_boolean() ? s.get<bool>() : s.get<int>() != 0;
  v.gap = j.value("gap", std::string{});
  v.next_queries = string_list(j, "queries");
}

void to_json(Json& j, const CostCounters& c) {
  j = Json{{"llm_calls", c.llm_calls},
           {"retrieval_ops", c.retrieval_ops},
           {"tokens_in", c.tokens_in},
           {"tokens_out", c.tokens_out},
           {"wall_ms", c.wall_ms}};
}

void from_json(const Json& j, CostCounters& c) {
  c.llm_calls = j.at("llm_calls").get<std::int64_t>();
  c.retrieval_ops = j.at("retrieval_ops").get<std::int64_t>();
  c.tokens_in = j.at("tokens_in").get<std::int64_t>();
  c.tokens_out = j.at("tokens_out").get<std::int64_t>();
  c.wall_ms = j.at("wall_ms").get<double>();
}

void to_json(Json& j, const RoundRecord& r) {
  j = Json{{"t", r.round_index},
           {"queries", r.queries},
           {"newly_added", r.newly_added},
           {"evidence_size", r.evidence_size},
           {"verdict", r.verdict}};
}

void from_json(const Json& j, RoundRecord& r) {
  r.round_index = j.at("t").get<int>();
  r.queries = string_list(j, "queries");
  r.newly_added = string_list(j, "newly_added");
  r.evidence_size = j.at("evidence_size").get<std::size_t>();
  r.verdict = j.at("verdict").get<SufficiencyVerdict>();
}

void to_json(Json& j, const RetrievalTrajectory& t) {
  j = Json{{"T", t.rounds_executed()},
           {"termination", std::string(to_string(t.termination))},
           {"rounds", t.rounds},
           {"counters", t.counters}};
}

void from_json(const Json& j, RetrievalTrajectory& t) {
  t.rounds = j.at("rounds").get<std::vector<RoundRecord>>();
  t.termination = parse_termination(j.at("termination").get<std::string>());
  t.counters = j.at("counters").get<CostCounters>();
  if (j.at("T").get<int>() != t.rounds_executed()) {
    throw ValidationError("RoundCount", "T", "T does not match the number of rounds");
  }
}

void to_json(Json& j, const Citation& c) { j = Json{{"claim", c.claim}, {"source_ids", c.source_ids}}; }

void from_json(const Json& j, Citation& c) {
  c.claim = j.at("claim").get<std::string>();
  c.source_ids.clear();
  if (j.contains("source_ids")) {
    for (const auto& v : j.at("source_ids")) {
      // models sometimes emit numeric summary indices
      c.source_ids.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    }
  }
}

void to_json(Json& j, const EvidenceReport& r) {
  j = Json{{"question_focus", r.question_focus},
           {"key_supporting_evidence", r.supporting},
           {"key_conflicting_or_limiting_evidence", r.conflicting},
           {"evidence_synthesis", r.synthesis}};
}

void from_json(const Json& j, EvidenceReport& r) {
  auto pick = [&](const char* a, const char* b) -> const Json* {
    if (j.contains(a)) return &j.at(a);
    if (j.contains(b)) return &j.at(b);
    return nullptr;
  };
  r.question_focus = j.at("question_focus").get<std::string>();
  const Json* sup = pick("key_supporting_evidence", "supporting");
  const Json* con = pick("key_conflicting_or_limiting_evidence", "conflicting");
  const Json* syn = pick("evidence_synthesis", "synthesis");
  if (!sup || !syn) throw ValidationError("MissingKey", "report", "supporting evidence or synthesis missing");
  r.supporting = sup->get<std::vector<Citation>>();
  r.conflicting = (con && !con->is_null()) ? con->get<std::vector<Citation>>() : std::vector<Citation>{};
  r.synthesis = syn->get<std::string>();
}

Question question_from_json(const Json& j, TaskKind kind) {
  Question q;
  q.task_kind = kind;
  if (!j.is_object()) throw ValidationError("NotAnObject", "record", "expected a JSON object");
  if (!j.contains("id")) throw ValidationError("MissingField", "id", "missing");
  q.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
  if (!j.contains("question")) throw ValidationError("MissingField", "question", "missing");
  q.stem = j.at("question").get<std::string>();
  if (!j.contains("options")) throw ValidationError("MissingField", "options", "missing");
  const auto& opts = j.at("options");
  if (!opts.is_object()) throw ValidationError("BadField", "options", "expected an object of label -> text");
  for (auto it = opts.begin(); it != opts.end(); ++it) {
    q.options.push_back({it.key(), it.value().get<std::string>()});
  }
  if (j.contains("answer") && !j.at("answer").is_null()) q.answer_key = j.at("answer").get<std::string>();
  return q;
}

std::string dump_line(const Json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::optional<Json> extract_json_object(std::string_view text, bool strict) {
  if (strict) {
    auto t = trim_view(text);
    auto parsed = Json::parse(t.begin(), t.end(), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
    return parsed;
  }

  for (std::size_t start = text.find('{'); start != std::string_view::npos;
       start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          auto candidate = text.substr(start, i - start + 1);
          auto parsed = Json::parse(candidate.begin(), candidate.end(), nullptr, false);
          if (!parsed.is_discarded() && parsed.is_object()) return parsed;
          break;
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace semarag
