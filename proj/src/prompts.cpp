#include <algorithm>
#include <cctype>
#include <string>

#include "semarag/errors.hpp"
#include "semarag/llm_gateway.hpp"

namespace semarag {

namespace {

constexpr std::string_view kInterpreter = R"PROMPT(Role:
You are an expert clinician.

Goal:
Given an unstructured medical question, extract an explicit Clinical Schema that makes the implied intent and constraints searchable. Focus on what must be retrieved and do not answer the question itself.

Input:
Medical Question: {research_topic}

Task:
Identify:
1. clinical intent (task type),
2. core medical entities (salient concepts from the question),
3. key constraints (time course, demographics, setting, comorbidities, severity, contraindications, risk factors, anatomical or functional qualifiers),
4. a concise retrieval query aligned with the schema (q_init).

Key Instructions:
- Entities should be small, focused, and primarily grounded in the question itself.
- Include only the most retrieval-relevant concepts; avoid broad, redundant, or unnecessary enumeration.
- Merge obvious synonyms, near-duplicates, or simple morphological variants into one canonical medical expression when possible.
- Prefer the main clinical concept, condition, mechanism, finding, test, treatment, population, anatomical target, or other decision-critical concept that is necessary for retrieval.
- If the question provides candidate answers or options, do not mechanically include all of them as entities; include an option only if needed for retrieval or candidate discrimination.
- For multiple-choice, judgment, or open-ended questions, center the schema on the stem and its decision-critical medical concepts rather than listing answer choices.
- Constraints should capture only decision-relevant qualifiers explicitly stated or strongly implied by the question.
- Preserve key medical relations when they are essential for retrieval, such as derivation, origin, cause, association, indication, or contraindication.
- q_init should retrieve the knowledge needed to answer the question, remain neutral, and avoid prematurely inferring a conclusion.
- q_init should be short, medically precise, and should not simply concatenate all entities or options.
- Use precise medical terminology.
- Do not add explanations, rationale, or extra keys.

Output JSON:
{
  "intent": "<short clinical task type>",
  "entities": ["<entity1>", "<entity2>"],
  "constraints": ["<constraint1>", "<constraint2>"],
  "q_init": "<one concise neutral search-style query>"
})PROMPT";

constexpr std::string_view kExplorer = R"PROMPT(Role:
You are an evidence sufficiency auditor and query refiner for medical question answering.

Goal:
Determine whether the current retrieved evidence is sufficient to answer the medical question under the given Clinical Schema. Do not answer the question itself.

Input:
Clinical Schema: {clinical_schema}
Current Query Set: {query_list}
Retrieved Evidence Summaries: {summaries}

Key Instructions:
- Assess whether the current evidence sufficiently covers the key intent, entities, and constraints in the Clinical Schema.
- Judge sufficiency based on whether the evidence is enough to support final answer selection, or to distinguish among competing candidate answers when relevant.
- Evidence may be relevant yet still insufficient; do not mark sufficiency = 1 unless the evidence is adequate for confident answer selection.
- If the evidence is insufficient, identify the single most important missing fact, missing distinction, or unresolved clinical criterion.
- Generate 1 to 3 follow-up queries that directly target this gap.
- Follow-up queries must be specific, self-contained, non-redundant, and explicitly grounded in the Clinical Schema.
- For questions with candidate answers, prioritize queries that help distinguish among candidates rather than broad background expansion.
- Prefer targeted refinement over broad exploratory expansion.
- Do not repeat an existing query unless revision is necessary.
- If the current evidence is already sufficient, return no follow-up queries.

Rules:
- If sufficiency = 1, set "gap" to "N/A" and "queries" to [].
- If sufficiency = 0, "gap" must be specific, concrete, and decision-relevant rather than generic.
- Queries should target missing clinical distinctions, time conditions, population constraints, contraindications, severity, mechanisms, diagnostic criteria, or option-level discrimination when relevant.
- Return JSON only.

Output JSON:
{
  "sufficiency": 0 or 1,
  "gap": "<short concrete description of the most important missing evidence>",
  "queries": ["<query1>", "<query2>", "<query3>"]
})PROMPT";

constexpr std::string_view kAdjudicator = R"PROMPT(Role:
You are a medical evidence adjudicator.

Goal:
Synthesize the final retrieved evidence into a concise, traceable report that can support final answer selection. Do not directly answer the question. Only organize, adjudicate, and summarize the evidence.

Input:
Medical Question: {research_topic}
Clinical Schema: {clinical_schema}
Final Query Set: {query_list}
Retrieved Evidence Summaries: {summaries}

Key Instructions:
- Review the retrieved evidence in light of the medical question and Clinical Schema.
- Focus on the most decision-relevant evidence and remove redundancy.
- Identify which evidence directly supports a candidate conclusion, which evidence conflicts with it, and which evidence is only background, indirect, or weakly relevant.
- When multiple pieces of evidence overlap, merge them into one concise statement.
- When evidence is incomplete, uncertain, indirect, or conflicting, make that explicit rather than resolving it prematurely.
- Preserve traceability by attaching source identifiers or summary indices whenever available.
- Every claim in the report must be supported by the provided summaries; do not infer unsupported medical facts.
- Do not introduce external medical knowledge.
- Do not perform final answer selection.

Rules:
- Keep the report concise, traceable, and decision-oriented.
- Prefer evidence that is directly relevant to the question over general background knowledge.
- If there is no real conflicting evidence, return an empty list for "key_conflicting_or_limiting_evidence".
- If source identifiers are unavailable, use summary indices or short summary labels consistently.
- Do not repeat the same evidence across multiple fields unless necessary.
- Return JSON only.

Output JSON:
{
  "question_focus": "<one short sentence stating what must be decided>",
  "key_supporting_evidence": [
    {
      "claim": "<concise evidence-supported statement>",
      "source_ids": ["<source1>", "<source2>"]
    }
  ],
  "key_conflicting_or_limiting_evidence": [
    {
      "claim": "<concise conflicting, uncertain, or limiting statement>",
      "source_ids": ["<source1>", "<source2>"]
    }
  ],
  "evidence_synthesis": "<short integrated synthesis of what the evidence supports, what remains uncertain, and what distinction matters most for final answer selection>"
})PROMPT";

constexpr std::string_view kAnswererMcq = R"PROMPT(Role:
You are a medical AI assistant.

Goal:
Answer the multiple-choice medical question using the provided evidence adjudication report.

Input:
Medical Question: {research_topic}
Evidence Adjudication Report: {adjudication_report}

Key Instructions:
- Select exactly one final answer: A, B, C, or D.
- First rely on the evidence adjudication report.
- If the report contains relevant evidence, choose the option best supported by that evidence.
- If the report is incomplete, weak, or lacks directly relevant evidence, use medical knowledge to reason and choose the most appropriate answer.
- Do not output reasoning, JSON, code blocks, or any extra text.

Output Format:
Final Answer: [A/B/C/D])PROMPT";

// Yes/no and yes/no/maybe variants: same wording, label grammar swapped.
constexpr std::string_view kAnswererYn = R"PROMPT(Role:
You are a medical AI assistant.

Goal:
Answer the yes/no medical question using the provided evidence adjudication report.

Input:
Medical Question: {research_topic}
Evidence Adjudication Report: {adjudication_report}

Key Instructions:
- Select exactly one final answer: yes or no.
- First rely on the evidence adjudication report.
- If the report contains relevant evidence, choose the option best supported by that evidence.
- If the report is incomplete, weak, or lacks directly relevant evidence, use medical knowledge to reason and choose the most appropriate answer.
- Do not output reasoning, JSON, code blocks, or any extra text.

Output Format:
Final Answer: [yes/no])PROMPT";

constexpr std::string_view kAnswererYnm = R"PROMPT(Role:
You are a medical AI assistant.

Goal:
Answer the yes/no/maybe medical question using the provided evidence adjudication report.

Input:
Medical Question: {research_topic}
Evidence Adjudication Report: {adjudication_report}

Key Instructions:
- Select exactly one final answer: yes, no, or maybe.
- First rely on the evidence adjudication report.
- If the report contains relevant evidence, choose the option best supported by that evidence.
- If the report is incomplete, weak, or lacks directly relevant evidence, use medical knowledge to reason and choose the most appropriate answer.
- Do not output reasoning, JSON, code blocks, or any extra text.

Output Format:
Final Answer: [yes/no/maybe])PROMPT";

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Length of the placeholder starting at `pos` ("{name}"), or 0.
std::size_t placeholder_at(std::string_view tmpl, std::size_t pos) {
  if (tmpl[pos] != '{' || pos + 1 >= tmpl.size() || !is_ident_start(tmpl[pos + 1])) return 0;
  std::size_t end = pos + 1;
  while (end < tmpl.size() && is_ident(tmpl[end])) ++end;
  if (end >= tmpl.size() || tmpl[end] != '}') return 0;
  return end - pos + 1;
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::interpreter: return "interpreter";
    case Role::explorer: return "explorer";
    case Role::adjudicator: return "adjudicator";
    case Role::answerer: return "answerer";
  }
  return "interpreter";
}

Role parse_role(std::string_view text) {
  if (text == "interpreter") return Role::interpreter;
  if (text == "explorer") return Role::explorer;
  if (text == "adjudicator" || text == "arbiter") return Role::adjudicator;
  if (text == "answerer") return Role::answerer;
  throw ConfigError("unknown role '" + std::string(text) + "'");
}

RolePrompt role_prompt(Role role, TaskKind kind) {
  switch (role) {
    case Role::interpreter: return {role, kInterpreter};
    case Role::explorer: return {role, kExplorer};
    case Role::adjudicator: return {role, kAdjudicator};
    case Role::answerer:
      switch (kind) {
        case TaskKind::mcq4: return {role, kAnswererMcq};
        case TaskKind::yn: return {role, kAnswererYn};
        case TaskKind::ynm: return {role, kAnswererYnm};
      }
  }
  return {role, kInterpreter};
}

std::vector<std::string> placeholders(std::string_view tmpl) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (auto len = placeholder_at(tmpl, i)) {
      std::string name(tmpl.substr(i + 1, len - 2));
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(std::move(name));
      i += len - 1;
    }
  }
  return names;
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& bindings) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size();) {
    if (auto len = placeholder_at(tmpl, i)) {
      const std::string name(tmpl.substr(i + 1, len - 2));
      auto it = bindings.find(name);
      if (it == bindings.end()) throw UnboundPlaceholder(name);
      out += it->second;
      i += len;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

}  // namespace semarag
