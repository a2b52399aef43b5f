#pragma once

// Shared fixtures: scripted mock rigs, synthetic corpora and seeded
// generators for the property tests.

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "semarag/harness.hpp"

namespace semarag::test {

inline std::filesystem::path data_dir() { return SEMARAG_TEST_DATA; }
inline std::filesystem::path golden_dir() { return SEMARAG_GOLDEN_DIR; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("semarag-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// Scripted responses
// ---------------------------------------------------------------------------

inline MockBackend::Entry say(Role role, std::string response, std::string question_id = "",
                              std::string fault = "") {
  MockBackend::Entry e;
  e.role = role;
  e.response = std::move(response);
  e.question_id = std::move(question_id);
  e.fault = std::move(fault);
  return e;
}

inline std::string schema_json(const std::string& q_init = "initial query", const std::string& intent = "diagnosis",
                               std::vector<std::string> entities = {"entity"},
                               std::vector<std::string> constraints = {"constraint"}) {
  return Json{{"intent", intent}, {"entities", entities}, {"constraints", constraints}, {"q_init", q_init}}.dump();
}

inline std::string verdict_json(bool sufficient, std::vector<std::string> queries = {},
                                const std::string& gap = "missing evidence") {
  return Json{{"sufficiency", sufficient ? 1 : 0}, {"gap", sufficient ? "N/A" : gap}, {"queries", queries}}.dump();
}

inline std::string report_json(const std::vector<std::pair<std::string, std::vector<std::string>>>& supporting,
                               const std::vector<std::pair<std::string, std::vector<std::string>>>& conflicting = {}) {
  auto cites = [](const auto& list) {
    Json arr = Json::array();
    for (const auto& [claim, ids] : list) arr.push_back(Json{{"claim", claim}, {"source_ids", ids}});
    return arr;
  };
  return Json{{"question_focus", "focus"},
              {"key_supporting_evidence", cites(supporting)},
              {"key_conflicting_or_limiting_evidence", cites(conflicting)},
              {"evidence_synthesis", "synthesis"}}
      .dump();
}

inline std::string final_answer(const std::string& label) { return "Reasoning over the report.\nFinal Answer: " + label; }

/// `n` distinct follow-up queries for round `round`.
inline std::vector<std::string> follow_ups(int round, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back("follow up " + std::to_string(round) + "." + std::to_string(i) + " pneumonia pathogen");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rigs
// ---------------------------------------------------------------------------

struct Rig {
  std::shared_ptr<MockBackend> backend;
  std::shared_ptr<Gateway> gateway;
  std::vector<int> sleeps;
};

inline std::unique_ptr<Rig> mock_rig(std::vector<MockBackend::Entry> script, GatewayOptions options = {}) {
  auto rig = std::make_unique<Rig>();
  rig->backend = std::make_shared<MockBackend>(std::move(script));
  auto* sleeps = &rig->sleeps;
  rig->gateway = std::make_shared<Gateway>(rig->backend, options, [sleeps](int ms) { sleeps->push_back(ms); });
  return rig;
}

// ---------------------------------------------------------------------------
// Corpora
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words{
      "pneumonia", "stroke",   "aspiration", "fever",     "cough",     "bacteria", "virus",    "antibiotic",
      "hospital",  "culture",  "sputum",     "radiology", "infection", "pathogen", "resistant", "dose",
      "aspirin",   "kidney",   "cardiac",    "embolism",  "sepsis",    "lactate",  "platelet", "neutrophil",
      "lung",      "bronchus", "catheter",   "ventilator", "mrsa",     "pseudomonas", "anaerobe", "influenza"};
  return words;
}

inline std::string random_sentence(std::mt19937_64& rng, std::size_t words) {
  std::uniform_int_distribution<std::size_t> pick(0, vocabulary().size() - 1);
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += vocabulary()[pick(rng)];
  }
  return s;
}

/// Docs with ids "d000".. and random vocabulary text.
inline std::vector<EvidenceDoc> synthetic_docs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<EvidenceDoc> docs;
  for (std::size_t i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "d%03zu", i);
    docs.push_back(EvidenceDoc{id, "synthetic", "Doc " + std::to_string(i), random_sentence(rng, 12), std::nullopt});
  }
  return docs;
}

struct Corpus {
  std::shared_ptr<const VectorIndex> index;
  std::shared_ptr<const Embedder> embedder;
  std::shared_ptr<const Retriever> retriever;
};

inline Corpus synthetic_corpus(std::size_t n, std::uint64_t seed = 7, std::size_t dim = 64) {
  Corpus c;
  c.embedder = std::make_shared<MockEmbedder>(dim, 0);
  c.index = std::make_shared<const VectorIndex>(VectorIndex::build(synthetic_docs(n, seed), *c.embedder));
  c.retriever = std::make_shared<DenseRetriever>(c.index, c.embedder);
  return c;
}

inline Question mcq(const std::string& id, const std::string& stem = "Which organism is most likely?",
                    std::optional<std::string> key = "D") {
  Question q;
  q.id = id;
  q.stem = stem;
  q.task_kind = TaskKind::mcq4;
  q.options = {{"A", "Streptococcus pneumoniae"},
               {"B", "Mycobacterium tuberculosis"},
               {"C", "Haemophilus influenzae"},
               {"D", "Staphylococcus aureus"}};
  q.answer_key = std::move(key);
  return q;
}

/// Script for one question that never reports sufficiency and always proposes
/// `m` follow-ups. Reports cite `cite_id`, which must be in C*.
inline std::vector<MockBackend::Entry> never_sufficient(const std::string& qid, int t_max, std::size_t m,
                                                        const std::string& cite_id, const std::string& label = "D",
                                                        const AblationSettings& ablation = {}) {
  std::vector<MockBackend::Entry> s;
  if (!ablation.skip_interpreter) s.push_back(say(Role::interpreter, schema_json(), qid));
  const int rounds = ablation.single_round ? 1 : t_max;
  for (int t = 1; t <= rounds; ++t) {
    s.push_back(say(Role::explorer, verdict_json(false, follow_ups(t, m)), qid));
  }
  if (!ablation.skip_adjudication) {
    s.push_back(say(Role::adjudicator, report_json({{"claim", {cite_id}}}), qid));
  }
  s.push_back(say(Role::answerer, final_answer(label), qid));
  return s;
}

}  // namespace semarag::test
