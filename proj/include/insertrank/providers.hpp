#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "insertrank/corpus.hpp"
#include "insertrank/llm.hpp"

namespace insertrank::llm {

// ---------------------------------------------------------------------------
// Deterministic mock providers. Each answers in the fenced form
// "```json\n[i, j, ...]\n```" that rerank prompts request.

/// Number of documents listed in a rerank prompt: the longest run of lines
/// starting "[1]. ", "[2]. ", ... in the last user message.
std::size_t count_prompt_documents(const ChatRequest& request);

std::string fenced_json_list(const std::vector<std::size_t>& indices);

/// Answers 1..n, i.e. keeps the prompt order.
class IdentityProvider : public ChatProvider {
public:
    ChatResponse send(const ChatRequest& request, const RequestContext& context) override;
};

/// Answers n..1.
class ReverseProvider : public ChatProvider {
public:
    ChatResponse send(const ChatRequest& request, const RequestContext& context) override;
};

/// Sorts prompt positions by (grade desc, first-stage rank asc) using the
/// candidates in the request context.
class OracleProvider : public ChatProvider {
public:
    explicit OracleProvider(std::shared_ptr<const Qrels> qrels) : qrels_(std::move(qrels)) {}
    ChatResponse send(const ChatRequest& request, const RequestContext& context) override;

private:
    std::shared_ptr<const Qrels> qrels_;
};

/// One scripted reply: either text or a raised error.
struct ScriptStep {
    std::string text;
    std::optional<ErrorKind> error;

    static ScriptStep reply(std::string text) { return {std::move(text), std::nullopt}; }
    static ScriptStep fail(ErrorKind kind, std::string message) { return {std::move(message), kind}; }
};

/// Replays a fixed sequence of replies, then raises ScriptExhaustedError.
class ScriptedProvider : public ChatProvider {
public:
    explicit ScriptedProvider(std::vector<ScriptStep> steps) : steps_(std::move(steps)) {}
    ChatResponse send(const ChatRequest& request, const RequestContext& context) override;
    [[nodiscard]] std::size_t calls() const;

private:
    std::vector<ScriptStep> steps_;
    std::size_t next_ = 0;
    mutable std::mutex mutex_;
};

/// Reads a JSON array of strings (replies) or objects {"error": kind,
/// "message": ...} into script steps.
std::vector<ScriptStep> load_script(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTPS providers.

/// Field mapping for one chat-completion endpoint. JSON pointers locate the
/// reply text and usage counters in the response body.
struct ProviderSpec {
    std::string name;
    std::string base_url;  // scheme://host[:port][/prefix]
    std::string path = "/chat/completions";
    std::string auth_header = "Authorization";
    std::string auth_prefix = "Bearer ";
    std::string max_tokens_field = "max_tokens";
    std::string text_pointer = "/choices/0/message/content";
    std::string prompt_tokens_pointer = "/usage/prompt_tokens";
    std::string completion_tokens_pointer = "/usage/completion_tokens";
    std::string error_pointer = "/error/message";
    std::map<std::string, std::string> extra_headers;
    int timeout_seconds = 600;
};

/// INSERTRANK_API_KEY_<NAME>, with the name uppercased and non-alphanumerics
/// replaced by '_'.
std::string credential_env_var(const std::string& provider_name);

class ProviderRegistry {
public:
    /// openai, deepseek, gemini (OpenAI-compatible endpoint) and openrouter.
    static ProviderRegistry defaults();

    /// Adds or replaces specs from a JSON object {"name": {fields...}, ...}.
    void merge_json_file(const std::filesystem::path& path);
    void add(ProviderSpec spec);
    [[nodiscard]] const ProviderSpec* find(const std::string& name) const;
    [[nodiscard]] std::vector<std::string> names() const;

private:
    std::map<std::string, ProviderSpec> specs_;
};

struct HttpResult {
    int status = 0;
    std::string body;
};

/// Minimal HTTPS POST used by the provider. Throws TransportError when no
/// response is received.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResult post(const std::string& base_url, const std::string& path,
                            const std::map<std::string, std::string>& headers,
                            const std::string& body, int timeout_seconds) = 0;
};

/// cpp-httplib backed transport with TLS through OpenSSL.
std::shared_ptr<HttpTransport> make_default_transport();

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

class OpenAICompatibleProvider : public ChatProvider {
public:
    OpenAICompatibleProvider(ProviderSpec spec, std::shared_ptr<HttpTransport> transport,
                             EnvLookup env = {});
    ChatResponse send(const ChatRequest& request, const RequestContext& context) override;

    /// The JSON body sent for a request.
    [[nodiscard]] std::string request_body(const ChatRequest& request) const;

private:
    ProviderSpec spec_;
    std::shared_ptr<HttpTransport> transport_;
    EnvLookup env_;
};

}  // namespace insertrank::llm
