#include "dexkit/llm.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace dexkit::llm {

using nlohmann::json;

TransportResult HttpTransport::send(const std::string& request_body) {
    // split endpoint into base and path prefix
    std::string url = config_.endpoint_url;
    std::string base = url, prefix;
    const size_t scheme = url.find("://");
    const size_t path_start = scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
    if (path_start != std::string::npos) {
        base = url.substr(0, path_start);
        prefix = url.substr(path_start);
    }
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    httplib::Client client(base);
    client.set_connection_timeout(static_cast<time_t>(config_.timeout_seconds),
                                  static_cast<time_t>(config_.timeout_seconds * 1e6) % 1000000);
    client.set_read_timeout(static_cast<time_t>(config_.timeout_seconds), 0);

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0')
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    TransportResult result;
    auto response = client.Post(prefix + "/chat/completions", headers, request_body, "application/json");
    if (!response) {
        result.error = "connection failed: " + httplib::to_string(response.error());
        return result;
    }
    result.status = response->status;
    result.body = response->body;
    result.ok = response->status >= 200 && response->status < 300;
    if (!result.ok) result.error = "http status " + std::to_string(response->status);
    return result;
}

CannedTransport::CannedTransport(std::map<std::string, std::string> replies, std::string directory)
    : replies_(std::move(replies)), directory_(std::move(directory)) {}

TransportResult CannedTransport::send(const std::string& request_body) {
    TransportResult result;
    std::string request_text;
    try {
        const json body = json::parse(request_body);
        // the first user message is the gesture request; retries append more
        for (const auto& message : body.at("messages"))
            if (message.at("role").get<std::string>() == "user") {
                request_text = message.at("content").get<std::string>();
                break;
            }
    } catch (const json::exception& e) {
        result.error = std::string("canned transport: bad request body: ") + e.what();
        return result;
    }
    const std::string key = slugify(request_text);

    std::string content;
    bool found = false;
    if (!directory_.empty()) {
        std::ifstream file(directory_ + "/" + key + ".txt");
        if (file) {
            std::ostringstream ss;
            ss << file.rdbuf();
            content = ss.str();
            found = true;
        }
    }
    if (!found) {
        // exact slug, then substring match so retry prompts still resolve
        auto it = replies_.find(key);
        if (it == replies_.end())
            for (auto iter = replies_.begin(); iter != replies_.end(); ++iter)
                if (key.find(iter->first) != std::string::npos) {
                    it = iter;
                    break;
                }
        if (it != replies_.end()) {
            content = it->second;
            found = true;
        }
    }
    if (!found) {
        result.error = "no canned reply for request '" + key + "'";
        return result;
    }
    result.ok = true;
    result.status = 200;
    result.body = make_completion_document(content);
    return result;
}

std::string slugify(const std::string& text) {
    std::string out;
    bool pending_sep = false;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            if (pending_sep && !out.empty()) out += '_';
            pending_sep = false;
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else {
            pending_sep = true;
        }
    }
    return out;
}

std::string make_completion_document(const std::string& content) {
    json doc;
    doc["object"] = "chat.completion";
    doc["choices"] = json::array();
    json choice;
    choice["index"] = 0;
    choice["message"] = {{"role", "assistant"}, {"content", content}};
    choice["finish_reason"] = "stop";
    doc["choices"].push_back(choice);
    return doc.dump();
}

std::string build_system_prompt(const std::vector<Exemplar>& exemplars, int num_fingers,
                                const std::map<std::string, int>& finger_roles) {
    std::ostringstream out;
    out << "You write cost functions that pose a robotic hand into requested gestures.\n"
        << "A cost function is a single expression in this grammar (lower cost = better pose):\n"
        << "  expr    := number | tip(i) | tip(i).x | tip(i).y | tip(i).z\n"
        << "           | expr + expr | expr - expr | expr * number | neg(expr)\n"
        << "           | norm(vector - vector) | dot(vector, [nx, ny, nz]) | mean(expr, ...)\n"
        << "tip(i) is the 3-D position of fingertip i. The hand has " << num_fingers
        << " fingers, indices 0.." << num_fingers - 1 << ".\n";
    if (!finger_roles.empty()) {
        out << "Finger indices:";
        for (const auto& [role, index] : finger_roles) out << " " << index << "-" << role;
        out << ".\n";
    }
    out << "dot(tip(i), n) with a unit direction n rewards keeping finger i straight along n;\n"
        << "norm(tip(i) - tip(j)) pulls two fingertips together when minimized.\n\n"
        << "Examples:\n";
    for (const Exemplar& ex : exemplars) {
        out << "Request: " << ex.request << "\n```\n" << ex.program_text << "\n```\n\n";
    }
    out << "Refer to the examples and answer each request with one expression in a fenced code "
           "block.";
    return out.str();
}

std::string extract_dsl_block(const std::string& reply) {
    const size_t fence = reply.find("```");
    if (fence != std::string::npos) {
        size_t start = reply.find('\n', fence);
        if (start != std::string::npos) {
            ++start;
            const size_t end = reply.find("```", start);
            if (end != std::string::npos) {
                std::string block = reply.substr(start, end - start);
                while (!block.empty() && std::isspace(static_cast<unsigned char>(block.back())))
                    block.pop_back();
                return block;
            }
        }
    }
    std::string trimmed = reply;
    size_t begin = trimmed.find_first_not_of(" \t\r\n");
    size_t last = trimmed.find_last_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    return trimmed.substr(begin, last - begin + 1);
}

namespace {

std::string send_request(ChatTransport& transport, const LlmClientConfig& config,
                         const std::vector<ChatMessage>& messages) {
    json body;
    body["model"] = config.model;
    body["temperature"] = 0.2;
    body["messages"] = json::array();
    for (const ChatMessage& m : messages)
        body["messages"].push_back({{"role", m.role}, {"content", m.content}});

    const TransportResult result = transport.send(body.dump());
    if (!result.ok) throw NetworkError("chat request failed: " + result.error);
    try {
        const json doc = json::parse(result.body);
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw UnparseableReplyError(std::string("malformed completion document: ") + e.what());
    }
}

}  // namespace

dsl::CostProgram llm_generate_cost(const std::string& request, const std::vector<Exemplar>& exemplars,
                                   const LlmClientConfig& config, int num_fingers,
                                   const std::map<std::string, int>& finger_roles,
                                   ChatTransport* transport, std::string* raw_reply) {
    if (exemplars.size() < 2)
        throw ConfigError("llm_generate_cost: need at least 2 exemplar cost functions");

    std::unique_ptr<ChatTransport> owned;
    if (transport == nullptr) {
        if (config.offline)
            owned = std::make_unique<CannedTransport>(std::map<std::string, std::string>{},
                                                      config.canned_dir);
        else
            owned = std::make_unique<HttpTransport>(config);
        transport = owned.get();
    }

    std::vector<ChatMessage> messages;
    messages.push_back({"system", build_system_prompt(exemplars, num_fingers, finger_roles)});
    messages.push_back({"user", request});

    std::string parse_failure;
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (attempt == 1)
            messages.push_back(
                {"user", "That answer failed to parse (" + parse_failure + "). Reply with one valid "
                         "expression in a fenced code block."});
        const std::string content = send_request(*transport, config, messages);
        if (raw_reply != nullptr) *raw_reply = content;
        const std::string block = extract_dsl_block(content);
        try {
            dsl::CostProgram program = dsl::parse_cost(block, num_fingers);
            program.finger_roles = finger_roles;
            return program;
        } catch (const dsl::ParseError& e) {
            parse_failure = e.what();
            messages.push_back({"assistant", content});
        }
    }
    throw UnparseableReplyError("reply still unparseable after one retry: " + parse_failure);
}

}  // namespace dexkit::llm
