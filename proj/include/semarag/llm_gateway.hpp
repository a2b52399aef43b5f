#pragma once

// Role-conditioned access to one shared chat model. Every agent goes through
// Gateway::complete, which owns retries, the completion cache, per-question
// budgets and token accounting. Backends only move bytes.

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semarag/config.hpp"
#include "semarag/domain.hpp"

namespace semarag {

enum class Role { interpreter, explorer, adjudicator, answerer };

std::string_view to_string(Role role);
/// Accepts the four role names plus "arbiter" for the adjudicator.
Role parse_role(std::string_view text);

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

struct RolePrompt {
  Role role;
  std::string_view text;
};

/// Template for `role`. The answerer template depends on the task kind; the
/// yes/no and yes/no/maybe variants only change the label grammar lines.
RolePrompt role_prompt(Role role, TaskKind kind = TaskKind::mcq4);

/// Placeholder names (`{name}`) in order of first appearance.
std::vector<std::string> placeholders(std::string_view tmpl);

/// Byte-exact substitution of `{name}` placeholders. Substituted text is not
/// rescanned. Throws UnboundPlaceholder for any placeholder without a binding.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& bindings);

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

struct Completion {
  std::string text;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  double latency_ms = 0.0;
};

struct ChatRequest {
  Role role = Role::interpreter;
  std::string prompt;
  double temperature = 0.0;
  std::string question_id;
};

/// ceil(chars / 4): the deterministic token rule used by the mock backend and
/// as a fallback when a live provider omits usage numbers.
std::int64_t approx_tokens(std::string_view text);

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual Completion complete(const ChatRequest& request) = 0;
  /// Stable identity, part of the cache key.
  virtual std::string id() const = 0;
};

/// Replays scripted responses. Each script entry is consumed once, in turn
/// order, from the queue of its (question_id, role); entries without a
/// question_id form a shared per-role queue used as the fallback.
class MockBackend : public LlmBackend {
 public:
  struct Entry {
    Role role = Role::interpreter;
    int turn = 0;
    std::string response;
    std::string question_id;  // empty: shared queue
    std::string fault;        // "", "transient", "auth" or "error"
  };

  explicit MockBackend(std::vector<Entry> script, std::string id = "mock");

  /// JSONL: {"role","turn","response"} plus optional "question_id", "fault".
  static std::vector<Entry> load_script(const std::filesystem::path& path);

  Completion complete(const ChatRequest& request) override;
  std::string id() const override { return id_; }

  std::vector<ChatRequest> requests() const;
  std::size_t remaining() const;

 private:
  using Key = std::pair<std::string, Role>;
  std::string id_;
  mutable std::mutex mu_;
  std::map<Key, std::deque<Entry>> queues_;
  std::vector<ChatRequest> log_;
};

/// Chat-completion style HTTP+JSON backend: one system message carrying the
/// rendered role prompt and one short user turn per call.
class HttpChatBackend : public LlmBackend {
 public:
  /// Reads the bearer token from the environment variable named in settings.
  explicit HttpChatBackend(BackendSettings settings);
  HttpChatBackend(BackendSettings settings, std::string api_key);

  Completion complete(const ChatRequest& request) override;
  std::string id() const override;

  /// Request body for `request`; exposed so the wire format can be tested.
  std::string request_body(const ChatRequest& request) const;

 private:
  BackendSettings settings_;
  std::string api_key_;
};

inline constexpr std::string_view kUserTurn =
    "Follow the instructions above and respond in the required output format.";

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

/// Content-addressed completion store. With a directory, each entry is one
/// `<key>.json` file; without, entries live in memory only.
class CompletionCache {
 public:
  explicit CompletionCache(std::filesystem::path dir = {});

  static std::string key(Role role, std::string_view prompt, double temperature,
                         std::string_view backend_id);

  /// Corrupt entries are reported as misses and logged.
  std::optional<Completion> get(const std::string& key) const;
  void put(const std::string& key, const Completion& c);

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, Completion> memory_;
};

// ---------------------------------------------------------------------------
// Accounting
// ---------------------------------------------------------------------------

struct Usage {
  std::int64_t llm_calls = 0;  // completed, non-cached calls
  std::int64_t attempts = 0;   // every backend attempt, including failed ones
  std::int64_t cache_hits = 0;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
};

/// Per-question call scope: identity for scripted backends plus the running
/// usage that the budget is checked against. One question, one thread.
struct CallScope {
  std::string question_id;
  BudgetSettings budget;
  Usage usage;
};

struct GatewayOptions {
  int max_retries = 3;
  int backoff_base_ms = 200;
  int backoff_max_ms = 5000;
  std::size_t max_in_flight = 8;
  bool cache_enabled = false;
  std::filesystem::path cache_dir;
};

GatewayOptions gateway_options(const RunConfig& cfg);

class Gateway {
 public:
  using Sleeper = std::function<void(int ms)>;

  Gateway(std::shared_ptr<LlmBackend> backend, GatewayOptions options, Sleeper sleeper = {});

  /// Throws BudgetExceeded before contacting the backend when the scope is
  /// out of calls or tokens. Transient failures are retried with bounded
  /// exponential backoff; AuthError and other backend errors propagate.
  /// `bypass_cache` forces a live call (parse retries use it) and refreshes
  /// the cached entry.
  Completion complete(Role role, const std::string& prompt, double temperature, CallScope& scope,
                      bool bypass_cache = false);

  LlmBackend& backend() noexcept { return *backend_; }
  const GatewayOptions& options() const noexcept { return options_; }

 private:
  Completion call_with_retry(const ChatRequest& request, CallScope& scope);

  std::shared_ptr<LlmBackend> backend_;
  GatewayOptions options_;
  Sleeper sleeper_;
  std::unique_ptr<CompletionCache> cache_;

  std::mutex slots_mu_;
  std::condition_variable slots_cv_;
  std::size_t in_flight_ = 0;
};

/// Builds the backend named in `cfg.backend`.
std::shared_ptr<LlmBackend> make_backend(const RunConfig& cfg);

}  // namespace semarag
