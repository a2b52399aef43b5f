// HTTP clients for the chat-completion backend and the remote embedder.
// Kept in one translation unit because httplib is expensive to compile.

#include <httplib.h>

#include <cstdlib>

#include "semarag/corpus_index.hpp"
#include "semarag/errors.hpp"
#include "semarag/json_io.hpp"
#include "semarag/llm_gateway.hpp"

namespace semarag {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

[[noreturn]] void throw_for_status(int status, const std::string& body, const std::string& what) {
  const std::string msg = what + " returned HTTP " + std::to_string(status) + ": " + body.substr(0, 200);
  if (status == 401 || status == 403) throw AuthError(msg);
  if (status == 408 || status == 429 || status >= 500) throw TransientBackendError(msg);
  throw BackendError(msg);
}

}  // namespace

// ---------------------------------------------------------------------------
// Chat backend
// ---------------------------------------------------------------------------

HttpChatBackend::HttpChatBackend(BackendSettings settings) : settings_(std::move(settings)) {
  if (const char* key = std::getenv(settings_.api_key_env.c_str())) api_key_ = key;
}

HttpChatBackend::HttpChatBackend(BackendSettings settings, std::string api_key)
    : settings_(std::move(settings)), api_key_(std::move(api_key)) {}

std::string HttpChatBackend::id() const { return "http:" + settings_.base_url + settings_.path + "#" + settings_.model + "@" +
                                                std::to_string(settings_.seed); }

std::string HttpChatBackend::request_body(const ChatRequest& request) const {
  Json body{{"model", settings_.model},
            {"temperature", request.temperature},
            {"seed", settings_.seed},
            {"messages",
             Json::array({Json{{"role", "system"}, {"content", request.prompt}},
                          Json{{"role", "user"}, {"content", std::string(kUserTurn)}}})}};
  return body.dump();
}

Completion HttpChatBackend::complete(const ChatRequest& request) {
  httplib::Client client(settings_.base_url);
  client.set_connection_timeout(settings_.timeout_s, 0);
  client.set_read_timeout(settings_.timeout_s, 0);
  client.set_write_timeout(settings_.timeout_s, 0);

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(settings_.path, headers, request_body(request), "application/json");
  if (!res) throw TransientBackendError("chat endpoint unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) throw_for_status(res->status, res->body, "chat endpoint");

  auto j = Json::parse(res->body, nullptr, false);
  if (j.is_discarded()) throw BackendError("chat endpoint returned invalid JSON");
  try {
    Completion c;
    c.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    if (j.contains("usage") && j.at("usage").is_object()) {
      const auto& u = j.at("usage");
      c.tokens_in = u.value("prompt_tokens", approx_tokens(request.prompt) + approx_tokens(kUserTurn));
      c.tokens_out = u.value("completion_tokens", approx_tokens(c.text));
    } else {
      c.tokens_in = approx_tokens(request.prompt) + approx_tokens(kUserTurn);
      c.tokens_out = approx_tokens(c.text);
    }
    return c;
  } catch (const Json::exception& e) {
    throw BackendError(std::string("unexpected chat response shape: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Remote embedder
// ---------------------------------------------------------------------------

HttpEmbedder::HttpEmbedder(std::string url, std::size_t dimension, std::size_t batch_size, int timeout_s)
    : url_(std::move(url)), dimension_(dimension), batch_size_(batch_size ? batch_size : 1), timeout_s_(timeout_s) {}

std::string HttpEmbedder::tag() const { return "http:" + url_ + "#d" + std::to_string(dimension_); }

std::vector<std::vector<double>> HttpEmbedder::post(std::span<const std::string> texts, std::string_view side) const {
  const auto url = split_url(url_);
  httplib::Client client(url.origin);
  client.set_connection_timeout(timeout_s_, 0);
  client.set_read_timeout(timeout_s_, 0);

  Json body{{"texts", std::vector<std::string>(texts.begin(), texts.end())}, {"side", std::string(side)}};
  auto res = client.Post(url.path, body.dump(), "application/json");
  if (!res) throw TransientBackendError("embedder unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) throw_for_status(res->status, res->body, "embedder");

  auto j = Json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.contains("vectors")) throw BackendError("embedder response lacks 'vectors'");
  auto vectors = j.at("vectors").get<std::vector<std::vector<double>>>();
  if (vectors.size() != texts.size()) {
    throw BackendError("embedder returned " + std::to_string(vectors.size()) + " vectors for " +
                       std::to_string(texts.size()) + " texts");
  }
  for (const auto& v : vectors) {
    if (v.size() != dimension_) throw EmbedderDimensionMismatch(dimension_, v.size());
  }
  return vectors;
}

std::vector<double> HttpEmbedder::embed_query(std::string_view text) const {
  const std::string t(text);
  return post(std::span<const std::string>(&t, 1), "query").front();
}

std::vector<double> HttpEmbedder::embed_doc(std::string_view text) const {
  const std::string t(text);
  return post(std::span<const std::string>(&t, 1), "doc").front();
}

std::vector<std::vector<double>> HttpEmbedder::embed_docs(std::span<const std::string> texts) const {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); i += batch_size_) {
    auto batch = post(texts.subspan(i, std::min(batch_size_, texts.size() - i)), "doc");
    for (auto& v : batch) out.push_back(std::move(v));
  }
  return out;
}

}  // namespace semarag
