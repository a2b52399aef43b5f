#include "semarag/llm_gateway.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "semarag/errors.hpp"
#include "semarag/json_io.hpp"
#include "semarag/text.hpp"

namespace semarag {

std::int64_t approx_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

// ---------------------------------------------------------------------------
// MockBackend
// ---------------------------------------------------------------------------

MockBackend::MockBackend(std::vector<Entry> script, std::string id) : id_(std::move(id)) {
  std::stable_sort(script.begin(), script.end(), [](const Entry& a, const Entry& b) { return a.turn < b.turn; });
  for (auto& e : script) queues_[{e.question_id, e.role}].push_back(std::move(e));
}

std::vector<MockBackend::Entry> MockBackend::load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock script " + path.string());
  std::vector<Entry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim_view(line).empty()) continue;
    auto j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("role") || !j.contains("response")) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": mock script lines need {role, turn, response}");
    }
    Entry e;
    e.role = parse_role(j.at("role").get<std::string>());
    e.turn = j.value("turn", static_cast<int>(lineno));
    e.response = j.at("response").get<std::string>();
    e.question_id = j.value("question_id", std::string{});
    e.fault = j.value("fault", std::string{});
    out.push_back(std::move(e));
  }
  return out;
}

Completion MockBackend::complete(const ChatRequest& request) {
  Entry entry;
  {
    std::lock_guard lock(mu_);
    log_.push_back(request);
    auto it = queues_.find({request.question_id, request.role});
    if (it == queues_.end() || it->second.empty()) it = queues_.find({std::string{}, request.role});
    if (it == queues_.end() || it->second.empty()) {
      throw MockScriptExhausted("mock script has no response left for role " + std::string(to_string(request.role)) +
                                (request.question_id.empty() ? "" : " (question " + request.question_id + ")"));
    }
    entry = std::move(it->second.front());
    it->second.pop_front();
  }
  if (entry.fault == "transient") throw TransientBackendError("injected transient fault");
  if (entry.fault == "auth") throw AuthError("injected auth fault");
  if (!entry.fault.empty()) throw BackendError("injected backend fault: " + entry.fault);

  Completion c;
  c.text = std::move(entry.response);
  c.tokens_in = approx_tokens(request.prompt);
  c.tokens_out = approx_tokens(c.text);
  return c;
}

std::vector<ChatRequest> MockBackend::requests() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t MockBackend::remaining() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [key, q] : queues_) n += q.size();
  return n;
}

// ---------------------------------------------------------------------------
// CompletionCache
// ---------------------------------------------------------------------------

CompletionCache::CompletionCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::string CompletionCache::key(Role role, std::string_view prompt, double temperature,
                                 std::string_view backend_id) {
  char temp[40];
  std::snprintf(temp, sizeof temp, "%.17g", temperature);
  std::string material;
  material.append(to_string(role));
  material.push_back('\x1f');
  material.append(temp);
  material.push_back('\x1f');
  material.append(backend_id);
  material.push_back('\x1f');
  material.append(prompt);
  return sha256_hex(material);
}

std::optional<Completion> CompletionCache::get(const std::string& key) const {
  {
    std::shared_lock lock(mu_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  }
  if (dir_.empty()) return std::nullopt;

  const auto path = dir_ / (key + ".json");
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  auto j = Json::parse(buf.str(), nullptr, false);
  try {
    if (j.is_discarded() || !j.is_object()) throw std::runtime_error("not a JSON object");
    Completion c;
    c.text = j.at("text").get<std::string>();
    c.tokens_in = j.at("tokens_in").get<std::int64_t>();
    c.tokens_out = j.at("tokens_out").get<std::int64_t>();
    c.latency_ms = j.value("latency_ms", 0.0);
    return c;
  } catch (const std::exception& e) {
    spdlog::warn("cache entry {} is corrupt ({}); falling through to a live call", path.string(), e.what());
    return std::nullopt;
  }
}

void CompletionCache::put(const std::string& key, const Completion& c) {
  std::unique_lock lock(mu_);
  memory_[key] = c;
  if (dir_.empty()) return;
  const auto path = dir_ / (key + ".json");
  const auto tmp = dir_ / (key + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << dump_line(Json{{"text", c.text},
                          {"tokens_in", c.tokens_in},
                          {"tokens_out", c.tokens_out},
                          {"latency_ms", c.latency_ms}})
        << '\n';
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) spdlog::warn("could not write cache entry {}: {}", path.string(), ec.message());
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

GatewayOptions gateway_options(const RunConfig& cfg) {
  GatewayOptions o;
  o.max_retries = cfg.backend.max_retries;
  o.backoff_base_ms = cfg.backend.backoff_base_ms;
  o.backoff_max_ms = cfg.backend.backoff_max_ms;
  o.max_in_flight = cfg.backend.max_in_flight;
  o.cache_enabled = cfg.cache.enabled;
  o.cache_dir = cfg.cache.dir;
  return o;
}

Gateway::Gateway(std::shared_ptr<LlmBackend> backend, GatewayOptions options, Sleeper sleeper)
    : backend_(std::move(backend)), options_(std::move(options)), sleeper_(std::move(sleeper)) {
  if (!backend_) throw ConfigError("gateway needs a backend");
  if (!sleeper_) sleeper_ = [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
  if (options_.max_in_flight == 0) options_.max_in_flight = 1;
  if (options_.cache_enabled) cache_ = std::make_unique<CompletionCache>(options_.cache_dir);
}

Completion Gateway::complete(Role role, const std::string& prompt, double temperature, CallScope& scope,
                             bool bypass_cache) {
  if (scope.usage.llm_calls >= scope.budget.max_calls) {
    throw BudgetExceeded("call budget of " + std::to_string(scope.budget.max_calls) + " exhausted");
  }
  if (scope.usage.tokens_in + scope.usage.tokens_out >= scope.budget.max_tokens) {
    throw BudgetExceeded("token budget of " + std::to_string(scope.budget.max_tokens) + " exhausted");
  }

  std::string key;
  if (cache_) {
    key = CompletionCache::key(role, prompt, temperature, backend_->id());
    if (!bypass_cache) {
      if (auto hit = cache_->get(key)) {
        ++scope.usage.cache_hits;
        return *hit;
      }
    }
  }

  ChatRequest request{role, prompt, temperature, scope.question_id};
  Completion c = call_with_retry(request, scope);
  ++scope.usage.llm_calls;
  scope.usage.tokens_in += c.tokens_in;
  scope.usage.tokens_out += c.tokens_out;
  if (cache_) cache_->put(key, c);
  return c;
}

Completion Gateway::call_with_retry(const ChatRequest& request, CallScope& scope) {
  struct Slot {
    Gateway& g;
    explicit Slot(Gateway& gw) : g(gw) {
      std::unique_lock lock(g.slots_mu_);
      g.slots_cv_.wait(lock, [&] { return g.in_flight_ < g.options_.max_in_flight; });
      ++g.in_flight_;
    }
    ~Slot() {
      {
        std::lock_guard lock(g.slots_mu_);
        --g.in_flight_;
      }
      g.slots_cv_.notify_one();
    }
  };

  for (int attempt = 0;; ++attempt) {
    ++scope.usage.attempts;
    try {
      Slot slot(*this);
      const auto start = std::chrono::steady_clock::now();
      Completion c = backend_->complete(request);
      if (c.latency_ms == 0.0) {
        c.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      }
      return c;
    } catch (const TransientBackendError& e) {
      if (attempt >= options_.max_retries) throw;
      const long long delay = std::min<long long>(static_cast<long long>(options_.backoff_base_ms) << std::min(attempt, 20),
                                                  options_.backoff_max_ms);
      spdlog::debug("transient backend error ({}), retry {}/{} in {} ms", e.what(), attempt + 1,
                    options_.max_retries, delay);
      sleeper_(static_cast<int>(delay));
    }
  }
}

std::shared_ptr<LlmBackend> make_backend(const RunConfig& cfg) {
  if (cfg.backend.kind == BackendKind::mock) {
    if (cfg.backend.mock_script.empty()) throw ConfigError("mock backend requires a mock script");
    return std::make_shared<MockBackend>(MockBackend::load_script(cfg.backend.mock_script));
  }
  auto settings = cfg.backend;
  settings.seed = cfg.seed;
  return std::make_shared<HttpChatBackend>(std::move(settings));
}

}  // namespace semarag
