#include "insertrank/llm.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "insertrank/log.hpp"

namespace insertrank::llm {

using nlohmann::json;

void ChatRequest::validate() const {
    bool has_user = false;
    for (const auto& m : messages) {
        if (m.role != "system" && m.role != "user") {
            throw std::invalid_argument("unsupported message role \"" + m.role + "\"");
        }
        if (m.content.empty()) throw std::invalid_argument("empty message content");
        has_user |= m.role == "user";
    }
    if (!has_user) throw std::invalid_argument("request needs at least one user message");
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
        throw std::invalid_argument("temperature must be a finite value >= 0");
    }
    if (max_output_tokens && *max_output_tokens < 1) {
        throw std::invalid_argument("max_output_tokens must be >= 1");
    }
}

namespace {

json request_json(const ChatRequest& r) {
    json messages = json::array();
    for (const auto& m : r.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    return json{{"provider", r.provider},
                {"model", r.model},
                {"messages", std::move(messages)},
                {"temperature", r.temperature},
                {"max_output_tokens", r.max_output_tokens ? json(*r.max_output_tokens) : json(nullptr)}};
}

json response_json(const ChatResponse& r) {
    json out{{"text", r.text}};
    if (r.usage) {
        out["usage"] = {{"prompt_tokens", r.usage->prompt_tokens},
                        {"completion_tokens", r.usage->completion_tokens}};
    }
    if (r.provider_latency_ms) out["provider_latency_ms"] = *r.provider_latency_ms;
    return out;
}

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_atomically(const std::filesystem::path& path, const std::string& contents) {
    std::filesystem::create_directories(path.parent_path());
    // unique temp name per writer; rename is atomic within a filesystem
    std::ostringstream tmp_name;
    tmp_name << path.filename().string() << ".tmp." << std::this_thread::get_id() << '.'
             << std::random_device{}();
    auto tmp = path.parent_path() / tmp_name.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write cache file " + tmp.string());
        out << contents;
        out.flush();
        if (!out) throw std::runtime_error("failed writing cache file " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

std::string canonical_json(const ChatRequest& request) {
    // nlohmann::json objects are std::map backed, so keys serialize sorted
    return request_json(request).dump();
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 computation failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

std::string cache_key(const ChatRequest& request) { return sha256_hex(canonical_json(request)); }

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::auth: return "auth";
        case ErrorKind::rate_limit: return "rate_limit";
        case ErrorKind::transport: return "transport";
        case ErrorKind::content: return "content";
        case ErrorKind::script_exhausted: return "script_exhausted";
    }
    return "unknown";
}

std::chrono::milliseconds RetryPolicy::delay_after(int attempt) const {
    double ms = static_cast<double>(base_delay.count()) * std::pow(factor, attempt - 1);
    return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

ChatClient::ChatClient(std::shared_ptr<ChatProvider> provider, RetryPolicy retry, Sleeper sleeper,
                       std::size_t max_in_flight)
    : provider_(std::move(provider)),
      retry_(retry),
      sleeper_(std::move(sleeper)),
      max_in_flight_(std::max<std::size_t>(1, max_in_flight)) {
    if (!provider_) throw std::invalid_argument("ChatClient needs a provider");
    if (retry_.max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::uint64_t ChatClient::attempts() const {
    std::lock_guard lock(mutex_);
    return attempts_;
}

ChatResponse ChatClient::complete(const ChatRequest& request, const RequestContext& context) {
    request.validate();
    for (int attempt = 1;; ++attempt) {
        {
            std::unique_lock lock(mutex_);
            slot_free_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
            ++in_flight_;
            ++attempts_;
        }
        auto release = [&] {
            {
                std::lock_guard lock(mutex_);
                --in_flight_;
            }
            slot_free_.notify_one();
        };
        try {
            auto started = std::chrono::steady_clock::now();
            ChatResponse response = provider_->send(request, context);
            release();
            if (!response.provider_latency_ms) {
                response.provider_latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                                   std::chrono::steady_clock::now() - started)
                                                   .count();
            }
            response.cached = false;
            return response;
        } catch (const LlmError& e) {
            release();
            if (!e.transient()) throw;
            if (attempt >= retry_.max_attempts) {
                std::string msg = request.provider + ": giving up after " + std::to_string(attempt) +
                                  " attempts: " + e.what();
                if (e.kind() == ErrorKind::rate_limit) throw RateLimitError(msg);
                throw TransportError(msg);
            }
            auto delay = retry_.delay_after(attempt);
            log::warn(request.provider + ": attempt " + std::to_string(attempt) + "/" +
                      std::to_string(retry_.max_attempts) + " failed (" + std::string(to_string(e.kind())) +
                      ": " + e.what() + "); retrying in " + std::to_string(delay.count()) + " ms");
            sleeper_(delay);
        } catch (...) {
            release();
            throw;
        }
    }
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path ResponseCache::entry_path(const std::string& digest) const {
    return dir_ / digest.substr(0, 2) / (digest + ".json");
}

std::filesystem::path ResponseCache::raw_response_path(const std::string& digest) const {
    return dir_ / "responses" / (digest + ".txt");
}

std::optional<ChatResponse> ResponseCache::lookup(const ChatRequest& request) const {
    return read_entry(request, true);
}

std::optional<ChatResponse> ResponseCache::read_entry(const ChatRequest& request, bool report) const {
    const auto digest = cache_key(request);
    const auto path = entry_path(digest);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;

    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read cache entry " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        json entry = json::parse(buf.str());
        if (entry.at("request") != request_json(request)) {
            if (report) log::warn("cache entry " + path.string() + " does not match its request; refetching");
            return std::nullopt;
        }
        const json& r = entry.at("response");
        ChatResponse response;
        response.text = r.at("text").get<std::string>();
        if (auto u = r.find("usage"); u != r.end()) {
            response.usage = TokenUsage{u->at("prompt_tokens").get<std::int64_t>(),
                                        u->at("completion_tokens").get<std::int64_t>()};
        }
        if (auto l = r.find("provider_latency_ms"); l != r.end()) {
            response.provider_latency_ms = l->get<std::int64_t>();
        }
        response.cached = true;
        return response;
    } catch (const json::exception& e) {
        if (report) log::warn("corrupt cache entry " + path.string() + " (" + e.what() + "); refetching");
        return std::nullopt;
    }
}

bool ResponseCache::contains(const ChatRequest& request) const {
    return read_entry(request, false).has_value();
}

void ResponseCache::store(const ChatRequest& request, const ChatResponse& response) const {
    const auto digest = cache_key(request);
    json entry{{"request", request_json(request)},
               {"response", response_json(response)},
               {"timestamp", utc_timestamp()}};
    write_atomically(entry_path(digest), entry.dump(2) + "\n");
}

void ResponseCache::write_raw_response(const std::string& digest, const std::string& text) const {
    write_atomically(raw_response_path(digest), text);
}

ChatResponse cached_complete(const ResponseCache* cache, ChatClient& client,
                             const ChatRequest& request, const RequestContext& context) {
    if (cache) {
        if (auto hit = cache->lookup(request)) return *hit;
    }
    ChatResponse response = client.complete(request, context);
    if (cache) cache->store(request, response);
    response.cached = false;
    return response;
}

}  // namespace insertrank::llm
