#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

namespace semarag {

enum class BackendKind { mock, http };
enum class EmbedderKind { mock, http };

struct BackendSettings {
  BackendKind kind = BackendKind::mock;
  std::string mock_script;  // JSONL path, mock backend only

  std::string base_url = "http://127.0.0.1:8000";
  std::string path = "/v1/chat/completions";
  std::string model = "deepseek-v3.1";
  std::string api_key_env = "SEMARAG_API_KEY";  // credentials never come from flags
  int timeout_s = 120;
  std::uint64_t seed = 0;  // forwarded as the sampling seed; copied from RunConfig::seed

  int max_retries = 3;
  int backoff_base_ms = 200;
  int backoff_max_ms = 5000;
  std::size_t max_in_flight = 8;
};

struct CacheSettings {
  bool enabled = false;
  std::string dir;  // empty: in-memory only
};

struct BudgetSettings {
  std::int64_t max_calls = 64;
  std::int64_t max_tokens = 200000;
};

struct EmbedderSettings {
  EmbedderKind kind = EmbedderKind::mock;
  std::size_t dimension = 256;
  std::uint64_t seed = 0;
  std::string url = "http://127.0.0.1:8001/embed";
};

struct ChunkingSettings {
  std::size_t max_chars = 1000;
  std::size_t overlap = 200;
};

/// Role-wise removal switches.
struct AblationSettings {
  bool skip_interpreter = false;   // raw stem as the round-1 query
  bool single_round = false;       // T_max forced to 1
  bool skip_adjudication = false;  // answer straight from the evidence set

  bool operator==(const AblationSettings&) const = default;
};

struct RunConfig {
  int t_max = 2;
  std::size_t k = 16;
  std::size_t m = 3;
  double temp_interpreter_explorer = 1.0;
  double temp_arbiter = 0.0;

  int max_parse_retries = 1;
  bool strict_json = false;
  std::size_t summary_chars = 800;
  bool cumulative_query_list = true;

  AblationSettings ablation;
  BudgetSettings budget;
  BackendSettings backend;
  CacheSettings cache;
  EmbedderSettings embedder;
  ChunkingSettings chunking;

  std::size_t workers = 4;
  std::uint64_t seed = 0;

  /// Rounds the explorer may run once ablations are applied.
  int effective_t_max() const noexcept { return ablation.single_round ? 1 : t_max; }
};

/// Throws ConfigError when a numeric invariant is broken.
void validate_config(const RunConfig& cfg);

/// Overlays keys present in `j` onto `cfg`. Unknown keys are rejected.
void apply_config_json(RunConfig& cfg, const nlohmann::json& j);

RunConfig load_config_file(const std::filesystem::path& path);

nlohmann::ordered_json config_to_json(const RunConfig& cfg);

}  // namespace semarag
