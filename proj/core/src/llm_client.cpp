#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "cpe/llm_client.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "cpe/errors.hpp"
#include "cpe/reward.hpp"
#include "cpe/rng.hpp"
#include "cpe/rollout.hpp"

namespace cpe {

using nlohmann::ordered_json;

namespace {

constexpr const char* kGenerationPromptTemplate =
    R"(Answer the question for this specific user. Use the profile only where it genuinely helps, keep the tone natural, and stay within 300-400 tokens.

User profile:
{persona}

Question:
{question}
)";

struct SplitUrl {
  std::string host;  // scheme://host[:port]
  std::string prefix;
};

SplitUrl split_base_url(const std::string& base_url) {
  const std::size_t scheme = base_url.find("://");
  if (scheme == std::string::npos)
    throw ConfigError("endpoint.base_url", "expected scheme://host[:port][/path]");
  const std::size_t path = base_url.find('/', scheme + 3);
  SplitUrl out;
  if (path == std::string::npos) {
    out.host = base_url;
  } else {
    out.host = base_url.substr(0, path);
    out.prefix = base_url.substr(path);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  }
  return out;
}

}  // namespace

void validate(const EndpointConfig& cfg) {
  if (cfg.base_url.empty()) throw ConfigError("endpoint.base_url", "must be set");
  if (cfg.model_name.empty()) throw ConfigError("endpoint.model_name", "must be set");
  if (cfg.timeout_ms <= 0) throw ConfigError("endpoint.timeout_ms", "must be > 0");
  if (cfg.max_retries < 0) throw ConfigError("endpoint.max_retries", "must be >= 0");
  if (cfg.backoff_base_ms < 0)
    throw ConfigError("endpoint.backoff_base_ms", "must be >= 0");
  split_base_url(cfg.base_url);
}

std::string chat_request_body(const EndpointConfig& cfg,
                              const std::vector<ChatMessage>& messages) {
  ordered_json body;
  body["model"] = cfg.model_name;
  ordered_json msgs = ordered_json::array();
  for (const auto& m : messages) {
    msgs.push_back(ordered_json{{"role", m.role}, {"content", m.content}});
  }
  body["messages"] = std::move(msgs);
  body["temperature"] = cfg.temperature;
  body["max_tokens"] = cfg.max_tokens;
  return body.dump();
}

LlmClient::LlmClient(EndpointConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  sleep_ = [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
}

std::string LlmClient::api_key() const {
  if (cfg_.api_key_env_var.empty()) return "";
  const char* key = std::getenv(cfg_.api_key_env_var.c_str());
  if (!key || !*key)
    throw ConfigError("endpoint.api_key_env_var",
                      "environment variable " + cfg_.api_key_env_var + " is not set");
  return key;
}

ChatResult LlmClient::post_once(const std::string& body) {
  const SplitUrl url = split_base_url(cfg_.base_url);
  httplib::Client client(url.host);
  client.set_connection_timeout(0, cfg_.timeout_ms * 1000LL);
  client.set_read_timeout(0, cfg_.timeout_ms * 1000LL);
  client.set_write_timeout(0, cfg_.timeout_ms * 1000LL);

  httplib::Headers headers;
  const std::string key = api_key();
  if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

  auto res = client.Post((url.prefix + "/chat/completions").c_str(), headers, body,
                         "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
        err == httplib::Error::Write) {
      throw TransportError(TransportKind::Timeout, 0, "request timed out");
    }
    throw TransportError(TransportKind::ServerError, 0,
                         "connection failed: " + httplib::to_string(err));
  }
  if (res->status == 429)
    throw TransportError(TransportKind::RateLimited, 429, "rate limited");
  if (res->status >= 500)
    throw TransportError(TransportKind::ServerError, res->status, "server error");
  if (res->status >= 400)
    throw TransportError(TransportKind::ClientError, res->status,
                         "client error: " + res->body);

  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(res->body);
  } catch (const std::exception&) {
    throw ProtocolError(ProtocolErrorKind::EmptyChoices, "response is not JSON");
  }
  if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
      parsed["choices"].empty()) {
    throw ProtocolError(ProtocolErrorKind::EmptyChoices, "no choices in response");
  }
  ChatResult out;
  const auto& first = parsed["choices"][0];
  if (!first.contains("message") || !first["message"].contains("content"))
    throw ProtocolError(ProtocolErrorKind::EmptyChoices, "choice has no content");
  out.text = first["message"]["content"].get<std::string>();
  if (parsed.contains("usage")) {
    const auto& u = parsed["usage"];
    out.usage.prompt_tokens = u.value("prompt_tokens", 0);
    out.usage.completion_tokens = u.value("completion_tokens", 0);
    out.usage.total_tokens = u.value("total_tokens", 0);
  }
  return out;
}

ChatResult LlmClient::chat_complete(const std::vector<ChatMessage>& messages) {
  const std::string body = chat_request_body(cfg_, messages);
  Rng jitter(hash_combine(hash_str(cfg_.base_url),
                          std::chrono::steady_clock::now().time_since_epoch().count()));
  for (int attempt = 0;; ++attempt) {
    try {
      return post_once(body);
    } catch (const TransportError& e) {
      const bool retryable = e.kind() == TransportKind::RateLimited ||
                             (e.kind() == TransportKind::ServerError && e.status() > 0);
      if (!retryable || attempt >= cfg_.max_retries) throw;
      // Full jitter: uniform in [0, base * 2^attempt].
      const double cap =
          static_cast<double>(cfg_.backoff_base_ms) * std::pow(2.0, attempt);
      sleep_(static_cast<int>(jitter.next_double() * cap));
    }
  }
}

Critique LlmClient::grm_critique(const Persona& persona, const Query& query,
                                 const std::string& response_text) {
  const std::string prompt = render_grm_prompt(persona, query, response_text);
  std::vector<ChatMessage> messages{{"user", prompt}};
  ChatResult first = chat_complete(messages);
  try {
    return parse_grm_output(first.text);
  } catch (const ProtocolError&) {
    messages.push_back({"assistant", first.text});
    messages.push_back({"user", grm_format_reminder()});
    ChatResult second = chat_complete(messages);
    try {
      return parse_grm_output(second.text);
    } catch (const ProtocolError&) {
      throw GrmFormatError(second.text);
    }
  }
}

const std::string& generation_prompt_template() {
  static const std::string tpl = kGenerationPromptTemplate;
  return tpl;
}

std::string render_generation_prompt(const Query& query, const Persona& persona) {
  std::string out = generation_prompt_template();
  const std::string persona_slot = "{persona}";
  const std::string question_slot = "{question}";
  out.replace(out.find(persona_slot), persona_slot.size(),
              persona_profile_text(persona));
  out.replace(out.find(question_slot), question_slot.size(), query.text);
  return out;
}

ResponseSample LlmClient::llm_generate(const Query& query, const Persona& persona) {
  const ChatResult res =
      chat_complete({{"user", render_generation_prompt(query, persona)}});
  ResponseSample s;
  s.query_id = query.id;
  s.text = res.text;
  s.token_length = res.usage.completion_tokens;
  s.origin = Origin::Original;
  return s;
}

ResponseSample LlmClient::llm_edit(const Query& query, const Persona& persona,
                                   const ResponseSample& parent, int parent_index,
                                   const Critique& critique) {
  const std::string prompt =
      render_edit_prompt(query, persona, parent.text, critique.feedback_text);
  const ChatResult res = chat_complete({{"user", prompt}});
  ResponseSample s;
  s.query_id = query.id;
  s.text = res.text;
  s.token_length = res.usage.completion_tokens;
  s.origin = Origin::Edited;
  s.parent_index = parent_index;
  return s;
}

}  // namespace cpe
