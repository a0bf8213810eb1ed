#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dexkit/dsl.hpp"

namespace dexkit::llm {

class NetworkError : public Error {
public:
    using Error::Error;
};

// Reply could not be turned into a cost program, even after one retry.
class UnparseableReplyError : public Error {
public:
    using Error::Error;
};

struct ChatMessage {
    std::string role;
    std::string content;
};

struct TransportResult {
    bool ok = false;
    int status = 0;
    std::string body;   // raw response document
    std::string error;  // transport-level failure description
};

// One chat-completions round trip. Implementations: HTTP, canned (offline),
// or anything a test injects.
class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual TransportResult send(const std::string& request_body) = 0;
};

struct LlmClientConfig {
    std::string endpoint_url = "http://localhost:8080/v1";
    std::string model = "gpt-4";
    std::string api_key_env = "OPENAI_API_KEY";  // bearer token read from this env var
    double timeout_seconds = 30.0;
    bool offline = true;        // offline => canned replies, no network
    std::string canned_dir;     // optional directory of <slug>.txt reply files
};

class HttpTransport : public ChatTransport {
public:
    explicit HttpTransport(const LlmClientConfig& config) : config_(config) {}
    TransportResult send(const std::string& request_body) override;

private:
    LlmClientConfig config_;
};

// Serves stored assistant replies keyed by the slug of the last user message.
// Directory files (<slug>.txt) take precedence over the built-in map.
class CannedTransport : public ChatTransport {
public:
    CannedTransport(std::map<std::string, std::string> replies, std::string directory = "");
    TransportResult send(const std::string& request_body) override;

private:
    std::map<std::string, std::string> replies_;
    std::string directory_;
};

// lowercase alphanumerics, runs of anything else collapse to '_'
std::string slugify(const std::string& text);

struct Exemplar {
    std::string request;       // e.g. "ok"
    std::string program_text;  // DSL source
};

// System prompt: task framing, the DSL grammar, hand layout, and the
// exemplars verbatim.
std::string build_system_prompt(const std::vector<Exemplar>& exemplars, int num_fingers,
                                const std::map<std::string, int>& finger_roles);

// First fenced code block of the reply, else the whole trimmed text.
std::string extract_dsl_block(const std::string& reply);

// Ask the model for a cost program: one request, parse the first DSL block,
// on parse failure retry once with the error appended. Throws NetworkError /
// UnparseableReplyError. `transport` overrides the config-selected transport
// (tests inject probes here).
dsl::CostProgram llm_generate_cost(const std::string& request,
                                   const std::vector<Exemplar>& exemplars,
                                   const LlmClientConfig& config, int num_fingers,
                                   const std::map<std::string, int>& finger_roles = {},
                                   ChatTransport* transport = nullptr,
                                   std::string* raw_reply = nullptr);

// Wrap assistant text in a chat-completions response document.
std::string make_completion_document(const std::string& content);

}  // namespace dexkit::llm
