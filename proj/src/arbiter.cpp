#include "semarag/arbiter.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>

#include "semarag/errors.hpp"
#include "semarag/explorer.hpp"
#include "semarag/json_io.hpp"
#include "semarag/text.hpp"

namespace semarag {

// ---------------------------------------------------------------------------
// Phase 1
// ---------------------------------------------------------------------------

std::string adjudicator_prompt(const Question& q, const ClinicalSchema& schema,
                               std::span<const std::string> final_queries, const EvidenceSet& evidence,
                               std::size_t summary_chars) {
  const Json queries(std::vector<std::string>(final_queries.begin(), final_queries.end()));
  return render(role_prompt(Role::adjudicator).text, {{"research_topic", render_question(q)},
                                                      {"clinical_schema", Json(schema).dump()},
                                                      {"query_list", queries.dump()},
                                                      {"summaries", render_summaries(evidence, summary_chars)}});
}

EvidenceReport parse_report(std::string_view raw, bool strict) {
  auto j = extract_json_object(raw, strict);
  if (!j) throw ReportParseFailure("adjudicator output holds no JSON object", std::string(raw));
  try {
    return j->get<EvidenceReport>();
  } catch (const std::exception& e) {
    throw ReportParseFailure(std::string("adjudicator output has the wrong shape: ") + e.what(), std::string(raw));
  }
}

namespace {

std::string normalize_source_id(std::string_view id) {
  auto t = trim_view(id);
  while (!t.empty() && (t.front() == '[' || t.front() == '"' || t.front() == '\'')) t.remove_prefix(1);
  while (!t.empty() && (t.back() == ']' || t.back() == '"' || t.back() == '\'')) t.remove_suffix(1);
  return trim(t);
}

void filter_citations(std::vector<Citation>& citations, const EvidenceSet& evidence,
                      std::vector<std::string>& dropped) {
  std::vector<Citation> kept;
  for (auto& c : citations) {
    std::vector<std::string> valid;
    for (const auto& raw_id : c.source_ids) {
      auto id = normalize_source_id(raw_id);
      if (evidence.contains(id)) {
        if (std::find(valid.begin(), valid.end(), id) == valid.end()) valid.push_back(std::move(id));
      } else {
        dropped.push_back(raw_id);
      }
    }
    if (!valid.empty()) {
      c.source_ids = std::move(valid);
      kept.push_back(std::move(c));
    }
  }
  citations = std::move(kept);
}

}  // namespace

std::vector<std::string> enforce_traceability(EvidenceReport& report, const EvidenceSet& evidence) {
  std::vector<std::string> dropped;
  filter_citations(report.supporting, evidence, dropped);
  filter_citations(report.conflicting, evidence, dropped);
  if (!dropped.empty()) {
    spdlog::warn("adjudication cited {} source id(s) outside the evidence set; dropped: {}", dropped.size(),
                 join(dropped, ", "));
  }
  return dropped;
}

EvidenceReport fallback_report(const Question& q, const EvidenceSet& evidence, std::size_t claim_chars) {
  EvidenceReport r;
  r.question_focus = trim(q.stem);
  const auto& docs = evidence.docs();
  for (std::size_t i = 0; i < docs.size() && i < 3; ++i) {
    r.supporting.push_back({std::string(utf8_prefix(docs[i].text, claim_chars)), {docs[i].doc_id}});
  }
  r.synthesis = "fallback";
  return r;
}

Adjudication adjudicate(const Question& q, const ClinicalSchema& schema, std::span<const std::string> final_queries,
                        const EvidenceSet& evidence, Gateway& gateway, const RunConfig& cfg, CallScope& scope) {
  Adjudication result;
  const auto prompt = adjudicator_prompt(q, schema, final_queries, evidence, cfg.summary_chars);
  for (int attempt = 0; attempt <= cfg.max_parse_retries; ++attempt) {
    auto c = gateway.complete(Role::adjudicator, prompt, cfg.temp_arbiter, scope, attempt > 0);
    result.raw_outputs.push_back(c.text);
    try {
      result.report = parse_report(c.text, cfg.strict_json);
    } catch (const ReportParseFailure&) {
      continue;
    }
    result.dropped_source_ids = enforce_traceability(result.report, evidence);
    if (result.report.supporting.empty() && !evidence.empty()) {
      // nothing traceable survived; keep the pipeline grounded in C*
      result.report = fallback_report(q, evidence, cfg.summary_chars);
      result.fallback = true;
    }
    return result;
  }
  result.report = fallback_report(q, evidence, cfg.summary_chars);
  result.fallback = true;
  return result;
}

// ---------------------------------------------------------------------------
// Phase 2
// ---------------------------------------------------------------------------

std::string answerer_prompt(const Question& q, std::string_view report_text) {
  return render(role_prompt(Role::answerer, q.task_kind).text,
                {{"research_topic", render_question(q)}, {"adjudication_report", std::string(report_text)}});
}

std::string report_text(const EvidenceReport& report) { return Json(report).dump(); }

namespace {

struct Token {
  std::string word;  // lowercase
  std::size_t begin;
  std::size_t end;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  for (std::size_t i = 0; i < s.size();) {
    if (std::isalnum(static_cast<unsigned char>(s[i]))) {
      std::size_t j = i;
      while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j]))) ++j;
      out.push_back({to_lower(s.substr(i, j - i)), i, j});
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

bool is_filler(const std::string& w) {
  return w == "is" || w == "the" || w == "option" || w == "choice" || w == "answer";
}

bool is_list_separator(std::string_view gap) {
  auto t = trim_view(gap);
  return t.empty() || t == "/" || t == "," || t == "&" || t == "|" || t == ";";
}

}  // namespace

AnswerLabel parse_answer(std::string_view text, std::span<const std::string> allowed) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char c : text) {
    if (c != '*' && c != '#' && c != '`') cleaned += c;
  }
  const std::string lower = to_lower(cleaned);

  auto label_of = [&](const std::string& word) -> const std::string* {
    for (const auto& l : allowed) {
      if (to_lower(l) == word) return &l;
    }
    return nullptr;
  };

  static constexpr std::string_view kMarker = "final answer";
  std::vector<std::size_t> hits;
  for (auto pos = lower.find(kMarker); pos != std::string::npos; pos = lower.find(kMarker, pos + 1)) {
    hits.push_back(pos);
  }

  for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
    const std::size_t from = *it + kMarker.size();
    const std::size_t eol = cleaned.find('\n', from);
    const std::string_view rest = std::string_view(cleaned).substr(from, eol == std::string::npos ? std::string::npos : eol - from);
    const auto tokens = tokenize(rest);

    std::size_t i = 0;
    while (i < tokens.size() && is_filler(tokens[i].word) && !label_of(tokens[i].word)) ++i;
    if (i >= tokens.size()) continue;
    const std::string* first = label_of(tokens[i].word);
    if (!first) continue;

    // "A or B", "A/B", "A, B": more than one label in the answer slot
    std::size_t j = i + 1;
    while (j < tokens.size()) {
      const auto gap = rest.substr(tokens[j - 1].end, tokens[j].begin - tokens[j - 1].end);
      if (const std::string* next = label_of(tokens[j].word); next && is_list_separator(gap)) {
        if (*next != *first) throw AmbiguousLabel(*first, *next, std::string(text));
        ++j;
        continue;
      }
      if ((tokens[j].word == "or" || tokens[j].word == "and") && is_list_separator(gap) && j + 1 < tokens.size()) {
        if (const std::string* next = label_of(tokens[j + 1].word); next && *next != *first) {
          throw AmbiguousLabel(*first, *next, std::string(text));
        }
      }
      break;
    }
    return AnswerLabel{*first};
  }

  // lone label, possibly wrapped in brackets or followed by a period
  std::string_view bare = trim_view(cleaned);
  auto strip = [](char c) { return c == '[' || c == ']' || c == '(' || c == ')' || c == '.' || c == ':' || c == '"' || c == '\''; };
  while (!bare.empty() && strip(bare.front())) bare.remove_prefix(1);
  while (!bare.empty() && strip(bare.back())) bare.remove_suffix(1);
  if (const std::string* l = label_of(to_lower(trim_view(bare)))) return AnswerLabel{*l};

  throw NoLabelFound(std::string(text));
}

AnswerOutcome answer(const Question& q, std::string_view report_text, Gateway& gateway, const RunConfig& cfg,
                     CallScope& scope) {
  AnswerOutcome out;
  const auto labels = q.labels();
  const auto prompt = answerer_prompt(q, report_text);
  for (int attempt = 0; attempt <= cfg.max_parse_retries; ++attempt) {
    auto c = gateway.complete(Role::answerer, prompt, cfg.temp_arbiter, scope, attempt > 0);
    out.raw_outputs.push_back(c.text);
    try {
      out.label = parse_answer(c.text, labels);
      out.failure.clear();
      return out;
    } catch (const AgentParseFailure& e) {
      out.failure = e.what();
    }
  }
  return out;
}

}  // namespace semarag
