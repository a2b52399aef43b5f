#include "semarag/config.hpp"

#include <fstream>

#include "semarag/errors.hpp"

namespace semarag {

void validate_config(const RunConfig& cfg) {
  if (cfg.t_max < 1) throw ConfigError("t_max must be >= 1");
  if (cfg.k < 1) throw ConfigError("k must be >= 1");
  if (cfg.m < 1) throw ConfigError("m must be >= 1");
  if (cfg.temp_interpreter_explorer < 0.0 || cfg.temp_arbiter < 0.0) {
    throw ConfigError("temperatures must be >= 0");
  }
  if (cfg.max_parse_retries < 0) throw ConfigError("max_parse_retries must be >= 0");
  if (cfg.chunking.max_chars == 0 || cfg.chunking.overlap >= cfg.chunking.max_chars) {
    throw ConfigError("chunking requires 0 <= overlap < max_chars");
  }
  if (cfg.embedder.dimension == 0) throw ConfigError("embedder dimension must be >= 1");
  if (cfg.backend.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (cfg.backend.max_in_flight == 0) throw ConfigError("max_in_flight must be >= 1");
  if (cfg.workers == 0) throw ConfigError("workers must be >= 1");
}

namespace {

template <class T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(std::string("unknown config key '") + where + it.key() + "'");
  }
}

}  // namespace

void apply_config_json(RunConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  try {
    reject_unknown(j,
                   {"t_max", "k", "m", "temp_interpreter_explorer", "temp_arbiter", "max_parse_retries",
                    "strict_json", "summary_chars", "cumulative_query_list", "ablation", "budget", "backend",
                    "cache", "embedder", "chunking", "workers", "seed"},
                   "");
    take(j, "t_max", cfg.t_max);
    take(j, "k", cfg.k);
    take(j, "m", cfg.m);
    take(j, "temp_interpreter_explorer", cfg.temp_interpreter_explorer);
    take(j, "temp_arbiter", cfg.temp_arbiter);
    take(j, "max_parse_retries", cfg.max_parse_retries);
    take(j, "strict_json", cfg.strict_json);
    take(j, "summary_chars", cfg.summary_chars);
    take(j, "cumulative_query_list", cfg.cumulative_query_list);
    take(j, "workers", cfg.workers);
    take(j, "seed", cfg.seed);

    if (j.contains("ablation")) {
      const auto& a = j.at("ablation");
      reject_unknown(a, {"skip_interpreter", "single_round", "skip_adjudication"}, "ablation.");
      take(a, "skip_interpreter", cfg.ablation.skip_interpreter);
      take(a, "single_round", cfg.ablation.single_round);
      take(a, "skip_adjudication", cfg.ablation.skip_adjudication);
    }
    if (j.contains("budget")) {
      const auto& b = j.at("budget");
      reject_unknown(b, {"max_calls", "max_tokens"}, "budget.");
      take(b, "max_calls", cfg.budget.max_calls);
      take(b, "max_tokens", cfg.budget.max_tokens);
    }
    if (j.contains("backend")) {
      const auto& b = j.at("backend");
      reject_unknown(b,
                     {"kind", "mock_script", "base_url", "path", "model", "api_key_env", "timeout_s",
                      "max_retries", "backoff_base_ms", "backoff_max_ms", "max_in_flight"},
                     "backend.");
      if (b.contains("kind")) {
        const auto kind = b.at("kind").get<std::string>();
        if (kind == "mock") cfg.backend.kind = BackendKind::mock;
        else if (kind == "http") cfg.backend.kind = BackendKind::http;
        else throw ConfigError("backend.kind must be mock or http");
      }
      take(b, "mock_script", cfg.backend.mock_script);
      take(b, "base_url", cfg.backend.base_url);
      take(b, "path", cfg.backend.path);
      take(b, "model", cfg.backend.model);
      take(b, "api_key_env", cfg.backend.api_key_env);
      take(b, "timeout_s", cfg.backend.timeout_s);
      take(b, "max_retries", cfg.backend.max_retries);
      take(b, "backoff_base_ms", cfg.backend.backoff_base_ms);
      take(b, "backoff_max_ms", cfg.backend.backoff_max_ms);
      take(b, "max_in_flight", cfg.backend.max_in_flight);
    }
    if (j.contains("cache")) {
      const auto& c = j.at("cache");
      reject_unknown(c, {"enabled", "dir"}, "cache.");
      take(c, "enabled", cfg.cache.enabled);
      take(c, "dir", cfg.cache.dir);
    }
    if (j.contains("embedder")) {
      const auto& e = j.at("embedder");
      reject_unknown(e, {"kind", "dimension", "seed", "url"}, "embedder.");
      if (e.contains("kind")) {
        const auto kind = e.at("kind").get<std::string>();
        if (kind == "mock") cfg.embedder.kind = EmbedderKind::mock;
        else if (kind == "http") cfg.embedder.kind = EmbedderKind::http;
        else throw ConfigError("embedder.kind must be mock or http");
      }
      take(e, "dimension", cfg.embedder.dimension);
      take(e, "seed", cfg.embedder.seed);
      take(e, "url", cfg.embedder.url);
    }
    if (j.contains("chunking")) {
      const auto& c = j.at("chunking");
      reject_unknown(c, {"max_chars", "overlap"}, "chunking.");
      take(c, "max_chars", cfg.chunking.max_chars);
      take(c, "overlap", cfg.chunking.overlap);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());
  RunConfig cfg;
  apply_config_json(cfg, j);
  validate_config(cfg);
  return cfg;
}

nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  using J = nlohmann::ordered_json;
  return J{
      {"t_max", cfg.t_max},
      {"k", cfg.k},
      {"m", cfg.m},
      {"temp_interpreter_explorer", cfg.temp_interpreter_explorer},
      {"temp_arbiter", cfg.temp_arbiter},
      {"max_parse_retries", cfg.max_parse_retries},
      {"strict_json", cfg.strict_json},
      {"summary_chars", cfg.summary_chars},
      {"cumulative_query_list", cfg.cumulative_query_list},
      {"ablation",
       {{"skip_interpreter", cfg.ablation.skip_interpreter},
        {"single_round", cfg.ablation.single_round},
        {"skip_adjudication", cfg.ablation.skip_adjudication}}},
      {"budget", {{"max_calls", cfg.budget.max_calls}, {"max_tokens", cfg.budget.max_tokens}}},
      {"backend",
       {{"kind", cfg.backend.kind == BackendKind::mock ? "mock" : "http"},
        {"mock_script", cfg.backend.mock_script},
        {"base_url", cfg.backend.base_url},
        {"path", cfg.backend.path},
        {"model", cfg.backend.model},
        {"api_key_env", cfg.backend.api_key_env},
        {"timeout_s", cfg.backend.timeout_s},
        {"max_retries", cfg.backend.max_retries},
        {"backoff_base_ms", cfg.backend.backoff_base_ms},
        {"backoff_max_ms", cfg.backend.backoff_max_ms},
        {"max_in_flight", cfg.backend.max_in_flight}}},
      {"cache", {{"enabled", cfg.cache.enabled}, {"dir", cfg.cache.dir}}},
      {"embedder",
       {{"kind", cfg.embedder.kind == EmbedderKind::mock ? "mock" : "http"},
        {"dimension", cfg.embedder.dimension},
        {"seed", cfg.embedder.seed},
        {"url", cfg.embedder.url}}},
      {"chunking", {{"max_chars", cfg.chunking.max_chars}, {"overlap", cfg.chunking.overlap}}},
      {"workers", cfg.workers},
      {"seed", cfg.seed},
  };
}

}  // namespace semarag
