#include "semarag/domain.hpp"

#include <algorithm>
#include <set>

#include "semarag/errors.hpp"
#include "semarag/text.hpp"

namespace semarag {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::mcq4: return "mcq4";
    case TaskKind::yn: return "yn";
    case TaskKind::ynm: return "ynm";
  }
  return "mcq4";
}

TaskKind parse_task_kind(std::string_view text) {
  const auto t = to_lower(trim_view(text));
  if (t == "mcq4") return TaskKind::mcq4;
  if (t == "yn") return TaskKind::yn;
  if (t == "ynm") return TaskKind::ynm;
  throw ConfigError("unknown task kind '" + std::string(text) + "' (expected mcq4, yn or ynm)");
}

std::vector<std::string> label_set(TaskKind kind) {
  switch (kind) {
    case TaskKind::mcq4: return {"A", "B", "C", "D"};
    case TaskKind::yn: return {"yes", "no"};
    case TaskKind::ynm: return {"yes", "no", "maybe"};
  }
  return {};
}

std::optional<std::string> canonical_label(std::string_view raw, TaskKind kind) {
  const auto needle = to_lower(trim_view(raw));
  for (auto& label : label_set(kind)) {
    if (to_lower(label) == needle) return label;
  }
  return std::nullopt;
}

std::vector<std::string> Question::labels() const {
  std::vector<std::string> out;
  out.reserve(options.size());
  for (const auto& o : options) out.push_back(o.label);
  return out;
}

Question validate_question(Question q) {
  if (q.options.empty()) throw EmptyOptions("options");

  std::set<std::string> seen;
  for (auto& opt : q.options) {
    const auto key = to_lower(trim_view(opt.label));
    if (!seen.insert(key).second) {
      throw DuplicateLabel("options", "label '" + opt.label + "' appears more than once");
    }
  }

  const auto expected = label_set(q.task_kind);
  for (auto& opt : q.options) {
    auto canon = canonical_label(opt.label, q.task_kind);
    if (!canon) {
      throw LabelSetMismatch("options", "label '" + opt.label + "' is not valid for task kind " +
                                            std::string(to_string(q.task_kind)));
    }
    opt.label = *canon;
  }
  if (q.options.size() != expected.size()) {
    throw LabelSetMismatch("options", "expected " + std::to_string(expected.size()) + " options for " +
                                          std::string(to_string(q.task_kind)) + ", got " +
                                          std::to_string(q.options.size()));
  }

  if (q.answer_key) {
    auto canon = canonical_label(*q.answer_key, q.task_kind);
    if (!canon) throw LabelSetMismatch("answer", "answer key '" + *q.answer_key + "' is not an option label");
    q.answer_key = *canon;
  }
  return q;
}

std::string render_question(const Question& q) {
  std::string out = q.stem;
  for (const auto& o : q.options) {
    out += '\n';
    if (q.task_kind == TaskKind::mcq4) {
      out += o.label + ". " + o.text;
    } else if (to_lower(trim_view(o.text)) == to_lower(o.label) || trim_view(o.text).empty()) {
      out += "- " + o.label;
    } else {
      out += "- " + o.label + ": " + o.text;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

ClinicalSchema validate_schema(ClinicalSchema s) {
  auto clean = [](std::vector<std::string>& items) {
    std::vector<std::string> kept;
    for (auto& it : items) {
      auto t = trim(it);
      if (!t.empty()) kept.push_back(std::move(t));
    }
    items = std::move(kept);
  };
  s.intent = trim(s.intent);
  s.q_init = trim(s.q_init);
  clean(s.entities);
  clean(s.constraints);
  if (s.q_init.empty()) throw ValidationError("EmptyQuery", "q_init", "q_init is blank");
  return s;
}

ClinicalSchema degraded_schema(const Question& q) {
  ClinicalSchema s;
  s.intent = "unknown";
  s.q_init = trim(q.stem);
  if (s.q_init.empty()) s.q_init = q.id;
  return s;
}

// ---------------------------------------------------------------------------

std::string derive_doc_id(std::string_view source, std::string_view title, std::string_view text) {
  std::string material;
  material.reserve(source.size() + title.size() + text.size() + 2);
  material.append(source);
  material.push_back('\x1f');
  material.append(title);
  material.push_back('\x1f');
  material.append(text);
  return sha256_hex(material).substr(0, 16);
}

EvidenceSet EvidenceSet::merge(std::span<const EvidenceDoc> incoming, std::vector<std::string>* added) const {
  EvidenceSet out = *this;
  for (const auto& d : incoming) {
    if (out.ids_.insert(d.doc_id).second) {
      out.docs_.push_back(d);
      if (added) added->push_back(d.doc_id);
    }
  }
  return out;
}

EvidenceSet EvidenceSet::merge(const EvidenceSet& other, std::vector<std::string>* added) const {
  return merge(std::span<const EvidenceDoc>(other.docs_), added);
}

std::vector<std::string> EvidenceSet::ordered_ids() const {
  std::vector<std::string> out;
  out.reserve(docs_.size());
  for (const auto& d : docs_) out.push_back(d.doc_id);
  return out;
}

// ---------------------------------------------------------------------------

SufficiencyVerdict make_verdict(bool sufficient, std::string gap, std::vector<std::string> queries,
                                std::size_t max_queries) {
  SufficiencyVerdict v;
  v.sufficient = sufficient;
  if (sufficient) {
    v.gap = std::string(kGapNotApplicable);
    return v;
  }
  v.gap = trim(gap);
  for (auto& q : queries) {
    if (v.next_queries.size() >= max_queries) break;
    auto t = trim(q);
    if (!t.empty()) v.next_queries.push_back(std::move(t));
  }
  return v;
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::sufficient: return "sufficient";
    case Termination::max_rounds: return "max_rounds";
    case Termination::stagnation: return "stagnation";
  }
  return "max_rounds";
}

Termination parse_termination(std::string_view text) {
  if (text == "sufficient") return Termination::sufficient;
  if (text == "max_rounds") return Termination::max_rounds;
  if (text == "stagnation") return Termination::stagnation;
  throw ValidationError("UnknownTermination", "termination", std::string(text));
}

void check_trajectory(const RetrievalTrajectory& traj, int t_max) {
  const int t = traj.rounds_executed();
  if (t < 1 || t > t_max) {
    throw ValidationError("RoundCount", "rounds", "T=" + std::to_string(t) + " outside [1, " +
                                                      std::to_string(t_max) + "]");
  }
  std::size_t prev = 0;
  for (std::size_t i = 0; i < traj.rounds.size(); ++i) {
    const auto& r = traj.rounds[i];
    if (r.round_index != static_cast<int>(i) + 1) {
      throw ValidationError("RoundIndex", "rounds", "round " + std::to_string(i + 1) + " has index " +
                                                        std::to_string(r.round_index));
    }
    if (r.evidence_size < prev) throw ValidationError("EvidenceShrank", "evidence_size", "round " + std::to_string(i + 1));
    prev = r.evidence_size;
  }
  const bool last_sufficient = traj.rounds.back().verdict.sufficient;
  if ((traj.termination == Termination::sufficient) != last_sufficient) {
    throw ValidationError("TerminationMismatch", "termination",
                          std::string(to_string(traj.termination)) + " disagrees with final verdict");
  }
}

bool report_is_closed(const EvidenceReport& report, const EvidenceSet& evidence) {
  auto closed = [&](const std::vector<Citation>& cs) {
    return std::all_of(cs.begin(), cs.end(), [&](const Citation& c) {
      return std::all_of(c.source_ids.begin(), c.source_ids.end(),
                         [&](const std::string& id) { return evidence.contains(id); });
    });
  };
  return closed(report.supporting) && closed(report.conflicting);
}

}  // namespace semarag
