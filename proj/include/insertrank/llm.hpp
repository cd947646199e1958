#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace insertrank::llm {

struct ChatMessage {
    std::string role;  // "system" or "user"
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
    std::string provider;
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    std::optional<int> max_output_tokens;

    /// Throws std::invalid_argument when there is no user message, a message
    /// is empty, a role is unknown or the temperature is negative.
    void validate() const;

    friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;

    friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct ChatResponse {
    std::string text;  // verbatim; may be empty on a refusal
    std::optional<TokenUsage> usage;
    bool cached = false;
    std::optional<std::int64_t> provider_latency_ms;
};

/// Sorted-key JSON of (provider, model, messages, temperature,
/// max_output_tokens). Stable across processes and platforms.
std::string canonical_json(const ChatRequest& request);

/// SHA-256 of canonical_json, as 64 lowercase hex characters.
std::string cache_key(const ChatRequest& request);

std::string sha256_hex(std::string_view data);

enum class ErrorKind { auth, rate_limit, transport, content, script_exhausted };

std::string_view to_string(ErrorKind kind);

class LlmError : public std::runtime_error {
public:
    LlmError(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    [[nodiscard]] ErrorKind kind() const { return kind_; }
    /// Transport failures and rate limits are worth another attempt.
    [[nodiscard]] bool transient() const {
        return kind_ == ErrorKind::transport || kind_ == ErrorKind::rate_limit;
    }

private:
    ErrorKind kind_;
};

class AuthError : public LlmError {
public:
    explicit AuthError(const std::string& m) : LlmError(ErrorKind::auth, m) {}
};
class RateLimitError : public LlmError {
public:
    explicit RateLimitError(const std::string& m) : LlmError(ErrorKind::rate_limit, m) {}
};
class TransportError : public LlmError {
public:
    explicit TransportError(const std::string& m) : LlmError(ErrorKind::transport, m) {}
};
class ContentError : public LlmError {
public:
    explicit ContentError(const std::string& m) : LlmError(ErrorKind::content, m) {}
};
class ScriptExhaustedError : public LlmError {
public:
    explicit ScriptExhaustedError(const std::string& m) : LlmError(ErrorKind::script_exhausted, m) {}
};

/// Candidate shown at one prompt position.
struct CandidateRef {
    std::string doc_id;
    std::size_t first_stage_rank = 0;
};

/// Side information about a rerank request. Network providers ignore it;
/// the oracle mock needs it to look up grades. It never enters the cache key.
struct RequestContext {
    std::string query_id;
    std::vector<CandidateRef> candidates;  // in prompt order
};

/// One attempt against a backend. Implementations throw LlmError subclasses.
class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual ChatResponse send(const ChatRequest& request, const RequestContext& context) = 0;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;

    /// Delay before attempt `attempt + 1`, for attempt >= 1.
    [[nodiscard]] std::chrono::milliseconds delay_after(int attempt) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Provider wrapper that retries transient failures with exponential backoff
/// and bounds the number of in-flight requests.
class ChatClient {
public:
    explicit ChatClient(std::shared_ptr<ChatProvider> provider, RetryPolicy retry = {},
                        Sleeper sleeper = {}, std::size_t max_in_flight = 4);

    ChatResponse complete(const ChatRequest& request, const RequestContext& context = {});

    /// Total provider attempts made so far, including failed ones.
    [[nodiscard]] std::uint64_t attempts() const;

private:
    std::shared_ptr<ChatProvider> provider_;
    RetryPolicy retry_;
    Sleeper sleeper_;
    std::size_t max_in_flight_;
    std::size_t in_flight_ = 0;
    std::uint64_t attempts_ = 0;
    mutable std::mutex mutex_;
    std::condition_variable slot_free_;
};

/// One JSON file per response under <dir>/<digest[0:2]>/<digest>.json with
/// body {"request", "response", "timestamp"}. Writes go through a temporary
/// file and a rename, so concurrent writers are safe.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }
    [[nodiscard]] std::filesystem::path entry_path(const std::string& digest) const;
    /// Location for the plain-text copy of a raw response.
    [[nodiscard]] std::filesystem::path raw_response_path(const std::string& digest) const;

    /// Corrupt or mismatched entries are reported with a warning and treated
    /// as a miss.
    [[nodiscard]] std::optional<ChatResponse> lookup(const ChatRequest& request) const;
    [[nodiscard]] bool contains(const ChatRequest& request) const;
    void store(const ChatRequest& request, const ChatResponse& response) const;
    void write_raw_response(const std::string& digest, const std::string& text) const;

private:
    [[nodiscard]] std::optional<ChatResponse> read_entry(const ChatRequest& request, bool report) const;

    std::filesystem::path dir_;
};

/// Serves from the cache when possible (cached = true, no provider call);
/// otherwise completes through the client and persists the response.
ChatResponse cached_complete(const ResponseCache* cache, ChatClient& client,
                             const ChatRequest& request, const RequestContext& context = {});

}  // namespace insertrank::llm
