#include "semarag/explorer.hpp"

#include <algorithm>
#include <chrono>
#include <map>

#include "semarag/json_io.hpp"
#include "semarag/text.hpp"

namespace semarag {

Clock steady_clock_ms() {
  return [] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now().time_since_epoch()).count();
  };
}

Clock frozen_clock() {
  return [] { return 0.0; };
}

std::vector<ScoredDoc> retrieve_round(std::span<const std::string> queries, const Retriever& retriever,
                                      std::size_t k, std::int64_t& retrieval_ops) {
  std::map<std::string, ScoredDoc> best;
  for (const auto& q : queries) {
    auto hits = retriever.topk(q, k);
    ++retrieval_ops;
    for (auto& h : hits) {
      auto it = best.find(h.doc.doc_id);
      if (it == best.end()) {
        best.emplace(h.doc.doc_id, std::move(h));
      } else if (h.score > it->second.score) {
        it->second.score = h.score;
      }
    }
  }
  std::vector<ScoredDoc> out;
  out.reserve(best.size());
  for (auto& [id, sd] : best) out.push_back(std::move(sd));
  std::stable_sort(out.begin(), out.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc.doc_id < b.doc.doc_id;
  });
  return out;
}

EvidenceSet merge_evidence(const EvidenceSet& prev, std::span<const ScoredDoc> candidates,
                           std::vector<std::string>* added) {
  std::vector<EvidenceDoc> docs;
  docs.reserve(candidates.size());
  for (const auto& c : candidates) docs.push_back(c.doc);
  return prev.merge(std::span<const EvidenceDoc>(docs), added);
}

std::string render_summaries(const EvidenceSet& evidence, std::size_t max_chars) {
  std::string out;
  for (const auto& d : evidence.docs()) {
    auto body = utf8_prefix(d.text, max_chars);
    std::string line = "[" + d.doc_id + "] " + d.title + ": " + std::string(body);
    if (body.size() < d.text.size()) line += "...";
    std::replace(line.begin(), line.end(), '\n', ' ');
    if (!out.empty()) out += '\n';
    out += line;
  }
  return out;
}

std::string explorer_prompt(const ClinicalSchema& schema, std::span<const std::string> query_list,
                            const EvidenceSet& evidence, std::size_t summary_chars) {
  const Json queries(std::vector<std::string>(query_list.begin(), query_list.end()));
  return render(role_prompt(Role::explorer).text, {{"clinical_schema", Json(schema).dump()},
                                                   {"query_list", queries.dump()},
                                                   {"summaries", render_summaries(evidence, summary_chars)}});
}

SufficiencyVerdict parse_verdict(std::string_view raw, std::size_t max_queries, bool strict) {
  auto j = extract_json_object(raw, strict);
  if (!j) throw VerdictParseFailure("explorer output holds no JSON object", std::string(raw));
  if (!j->contains("sufficiency")) throw VerdictParseFailure("explorer output lacks 'sufficiency'", std::string(raw));

  const auto& s = j->at("sufficiency");
  bool sufficient = false;
  if (s.is_boolean()) {
    sufficient = s.get<bool>();
  } else if (s.is_number_integer() || s.is_number_unsigned()) {
    const auto v = s.get<long long>();
    if (v != 0 && v != 1) throw VerdictParseFailure("'sufficiency' must be 0 or 1", std::string(raw));
    sufficient = v == 1;
  } else if (s.is_string() && (s.get<std::string>() == "0" || s.get<std::string>() == "1")) {
    sufficient = s.get<std::string>() == "1";
  } else {
    throw VerdictParseFailure("'sufficiency' must be 0 or 1", std::string(raw));
  }

  std::string gap;
  if (j->contains("gap") && j->at("gap").is_string()) gap = j->at("gap").get<std::string>();

  std::vector<std::string> queries;
  const char* key = j->contains("queries") ? "queries" : (j->contains("next_queries") ? "next_queries" : nullptr);
  if (key && !j->at(key).is_null()) {
    const auto& list = j->at(key);
    if (!list.is_array()) throw VerdictParseFailure("'queries' must be a list", std::string(raw));
    for (const auto& q : list) {
      if (!q.is_string()) throw VerdictParseFailure("'queries' must hold strings", std::string(raw));
      queries.push_back(q.get<std::string>());
    }
  }
  return make_verdict(sufficient, std::move(gap), std::move(queries), max_queries);
}

AuditResult audit(const ClinicalSchema& schema, std::span<const std::string> query_list, const EvidenceSet& evidence,
                  Gateway& gateway, const RunConfig& cfg, CallScope& scope) {
  AuditResult result;
  const auto prompt = explorer_prompt(schema, query_list, evidence, cfg.summary_chars);
  for (int attempt = 0; attempt <= cfg.max_parse_retries; ++attempt) {
    auto c = gateway.complete(Role::explorer, prompt, cfg.temp_interpreter_explorer, scope, attempt > 0);
    result.raw_outputs.push_back(c.text);
    try {
      result.verdict = parse_verdict(c.text, cfg.m, cfg.strict_json);
      return result;
    } catch (const VerdictParseFailure&) {
    }
  }
  result.parse_failed = true;
  result.verdict = make_verdict(false, "parse failure", {}, cfg.m);
  return result;
}

LoopResult run_loop(const ClinicalSchema& schema, const std::string& initial_query, const Retriever& retriever,
                    Gateway& gateway, const RunConfig& cfg, CallScope& scope, const Clock& clock) {
  const int t_max = cfg.effective_t_max();
  const double start = clock();
  const Usage before = scope.usage;

  LoopResult result;
  auto& traj = result.trajectory;
  std::vector<std::string> current{initial_query};

  auto settle_counters = [&] {
    traj.counters.llm_calls = scope.usage.llm_calls - before.llm_calls;
    traj.counters.tokens_in = scope.usage.tokens_in - before.tokens_in;
    traj.counters.tokens_out = scope.usage.tokens_out - before.tokens_out;
    traj.counters.wall_ms = clock() - start;
  };

  try {
    for (int t = 1; t <= t_max; ++t) {
      result.issued_queries.insert(result.issued_queries.end(), current.begin(), current.end());

      const auto candidates = retrieve_round(current, retriever, cfg.k, traj.counters.retrieval_ops);
      std::vector<std::string> added;
      result.evidence = merge_evidence(result.evidence, candidates, &added);

      const auto& query_list = cfg.cumulative_query_list ? result.issued_queries : current;
      auto a = audit(schema, query_list, result.evidence, gateway, cfg, scope);
      result.audit_parse_failure = result.audit_parse_failure || a.parse_failed;

      traj.rounds.push_back(RoundRecord{t, current, std::move(added), result.evidence.size(), a.verdict});

      if (a.verdict.sufficient) {
        traj.termination = Termination::sufficient;
        break;
      }
      if (a.verdict.next_queries.empty()) {
        traj.termination = Termination::stagnation;
        break;
      }
      traj.termination = Termination::max_rounds;
      current = std::move(a.verdict.next_queries);
    }
  } catch (const std::exception& e) {
    settle_counters();
    throw LoopAborted(e.what(), std::current_exception(), traj, result.evidence);
  }

  settle_counters();
  return result;
}

std::vector<std::vector<std::string>> replay_trajectory(const RetrievalTrajectory& trajectory,
                                                        const Retriever& retriever, std::size_t k) {
  std::vector<std::vector<std::string>> out;
  EvidenceSet evidence;
  std::int64_t ops = 0;
  for (const auto& round : trajectory.rounds) {
    const auto candidates = retrieve_round(round.queries, retriever, k, ops);
    std::vector<std::string> added;
    evidence = merge_evidence(evidence, candidates, &added);
    out.push_back(std::move(added));
  }
  return out;
}

}  // namespace semarag
