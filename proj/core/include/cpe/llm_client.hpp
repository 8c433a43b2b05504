#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cpe/types.hpp"

namespace cpe {

struct EndpointConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8080/v1"
  std::string model_name;
  std::string api_key_env_var = "OPENAI_API_KEY";
  double temperature = 0.0;
  int max_tokens = 1024;
  int timeout_ms = 30000;
  int max_retries = 3;
  int backoff_base_ms = 250;
};

void validate(const EndpointConfig& cfg);

struct ChatMessage {
  std::string role;
  std::string content;
};

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
  int total_tokens = 0;
};

struct ChatResult {
  std::string text;
  TokenUsage usage;
};

// Builds the chat-completions request body (deterministic field order).
std::string chat_request_body(const EndpointConfig& cfg,
                              const std::vector<ChatMessage>& messages);

// Client for OpenAI-compatible chat-completion endpoints. The API key is
// read from the environment variable named in the config and never appears
// in errors, logs or serialized state.
class LlmClient {
 public:
  explicit LlmClient(EndpointConfig cfg);

  // POSTs the chat request and returns the first choice plus usage.
  // 429 and 5xx responses are retried with full-jitter exponential backoff
  // up to max_retries; other 4xx fail immediately.
  ChatResult chat_complete(const std::vector<ChatMessage>& messages);

  // Renders the evaluator prompt, calls the endpoint and parses the reply.
  // On a malformed reply, reprompts once with a format reminder; a second
  // failure raises GrmFormatError carrying the raw text.
  Critique grm_critique(const Persona& persona, const Query& query,
                        const std::string& response_text);

  // Generation/edit wrappers. token_length comes from the provider's usage
  // field; behavior log-probabilities are unavailable in this mode.
  ResponseSample llm_generate(const Query& query, const Persona& persona);
  ResponseSample llm_edit(const Query& query, const Persona& persona,
                          const ResponseSample& parent, int parent_index,
                          const Critique& critique);

  const EndpointConfig& config() const { return cfg_; }

  // Test hook; replaces the real backoff sleep.
  void set_sleep_hook(std::function<void(int ms)> hook) { sleep_ = std::move(hook); }

 private:
  EndpointConfig cfg_;
  std::function<void(int)> sleep_;

  std::string api_key() const;
  ChatResult post_once(const std::string& body);
};

const std::string& generation_prompt_template();
std::string render_generation_prompt(const Query& query, const Persona& persona);

}  // namespace cpe
