#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "insertrank/providers.hpp"

namespace insertrank::llm {

using nlohmann::json;

std::string credential_env_var(const std::string& provider_name) {
    std::string out = "INSERTRANK_API_KEY_";
    for (unsigned char c : provider_name) {
        out.push_back(std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_');
    }
    return out;
}

ProviderRegistry ProviderRegistry::defaults() {
    ProviderRegistry r;
    auto spec = [](std::string name, std::string base_url) {
        ProviderSpec s;
        s.name = std::move(name);
        s.base_url = std::move(base_url);
        return s;
    };
    r.add(spec("openai", "https://api.openai.com/v1"));
    r.add(spec("deepseek", "https://api.deepseek.com/v1"));
    r.add(spec("gemini", "https://generativelanguage.googleapis.com/v1beta/openai"));
    r.add(spec("openrouter", "https://openrouter.ai/api/v1"));
    return r;
}

void ProviderRegistry::add(ProviderSpec spec) {
    auto name = spec.name;
    specs_.insert_or_assign(std::move(name), std::move(spec));
}

const ProviderSpec* ProviderRegistry::find(const std::string& name) const {
    auto it = specs_.find(name);
    return it == specs_.end() ? nullptr : &it->second;
}

std::vector<std::string> ProviderRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : specs_) out.push_back(name);
    return out;
}

void ProviderRegistry::merge_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open provider config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("malformed provider config " + path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw DataError("provider config must be a JSON object keyed by provider name");
    for (const auto& [name, fields] : doc.items()) {
        ProviderSpec spec;
        if (const auto* existing = find(name)) spec = *existing;
        spec.name = name;
        try {
            spec.base_url = fields.value("base_url", spec.base_url);
            spec.path = fields.value("path", spec.path);
            spec.auth_header = fields.value("auth_header", spec.auth_header);
            spec.auth_prefix = fields.value("auth_prefix", spec.auth_prefix);
            spec.max_tokens_field = fields.value("max_tokens_field", spec.max_tokens_field);
            spec.text_pointer = fields.value("text_pointer", spec.text_pointer);
            spec.prompt_tokens_pointer = fields.value("prompt_tokens_pointer", spec.prompt_tokens_pointer);
            spec.completion_tokens_pointer =
                fields.value("completion_tokens_pointer", spec.completion_tokens_pointer);
            spec.error_pointer = fields.value("error_pointer", spec.error_pointer);
            spec.timeout_seconds = fields.value("timeout_seconds", spec.timeout_seconds);
            if (auto h = fields.find("headers"); h != fields.end()) {
                spec.extra_headers = h->get<std::map<std::string, std::string>>();
            }
        } catch (const json::exception& e) {
            throw DataError("provider \"" + name + "\": " + e.what());
        }
        if (spec.base_url.empty()) throw DataError("provider \"" + name + "\" has no base_url");
        add(std::move(spec));
    }
}

namespace {

class HttplibTransport : public HttpTransport {
public:
    HttpResult post(const std::string& base_url, const std::string& path,
                    const std::map<std::string, std::string>& headers, const std::string& body,
                    int timeout_seconds) override {
        // split "scheme://host[:port]/prefix" into client origin and path prefix
        auto scheme_end = base_url.find("://");
        auto path_start = base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
        std::string origin = base_url.substr(0, path_start);
        std::string prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);

        httplib::Client client(origin);
        client.set_connection_timeout(30);
        client.set_read_timeout(timeout_seconds);
        client.set_write_timeout(60);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = client.Post(prefix + path, h, body, "application/json");
        if (!res) {
            throw TransportError("request to " + origin + " failed: " + httplib::to_string(res.error()));
        }
        return HttpResult{res->status, res->body};
    }
};

std::optional<std::string> getenv_lookup(const std::string& name) {
    const char* v = std::getenv(name.c_str());
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

std::string provider_message(const json& body, const std::string& pointer, const std::string& raw) {
    try {
        const auto& m = body.at(json::json_pointer(pointer));
        if (m.is_string()) return m.get<std::string>();
        return m.dump();
    } catch (const json::exception&) {
        return raw.size() > 500 ? raw.substr(0, 500) + "..." : raw;
    }
}

}  // namespace

std::shared_ptr<HttpTransport> make_default_transport() { return std::make_shared<HttplibTransport>(); }

OpenAICompatibleProvider::OpenAICompatibleProvider(ProviderSpec spec,
                                                   std::shared_ptr<HttpTransport> transport, EnvLookup env)
    : spec_(std::move(spec)), transport_(std::move(transport)), env_(std::move(env)) {
    if (!transport_) transport_ = make_default_transport();
    if (!env_) env_ = getenv_lookup;
}

std::string OpenAICompatibleProvider::request_body(const ChatRequest& request) const {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    json body{{"model", request.model}, {"messages", std::move(messages)}, {"temperature", request.temperature}};
    if (request.max_output_tokens) body[spec_.max_tokens_field] = *request.max_output_tokens;
    return body.dump();
}

ChatResponse OpenAICompatibleProvider::send(const ChatRequest& request, const RequestContext&) {
    const auto var = credential_env_var(spec_.name);
    auto key = env_(var);
    if (!key) throw AuthError(spec_.name + ": missing credential, set " + var);

    std::map<std::string, std::string> headers = spec_.extra_headers;
    headers[spec_.auth_header] = spec_.auth_prefix + *key;

    auto started = std::chrono::steady_clock::now();
    HttpResult res = transport_->post(spec_.base_url, spec_.path, headers, request_body(request),
                                      spec_.timeout_seconds);
    auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                         started)
                       .count();

    json body = json::parse(res.body, nullptr, false);
    const std::string where = spec_.name + " (HTTP " + std::to_string(res.status) + "): ";
    if (res.status == 401 || res.status == 403) {
        throw AuthError(where + provider_message(body, spec_.error_pointer, res.body));
    }
    if (res.status == 429) throw RateLimitError(where + provider_message(body, spec_.error_pointer, res.body));
    if (res.status == 408 || res.status >= 500) {
        throw TransportError(where + provider_message(body, spec_.error_pointer, res.body));
    }
    if (res.status < 200 || res.status >= 300) {
        throw ContentError(where + provider_message(body, spec_.error_pointer, res.body));
    }
    if (body.is_discarded()) throw TransportError(where + "response is not JSON");

    ChatResponse out;
    try {
        const auto& text = body.at(json::json_pointer(spec_.text_pointer));
        if (text.is_null()) {
            throw ContentError(where + "no content in response: " +
                               provider_message(body, spec_.error_pointer, res.body));
        }
        out.text = text.get<std::string>();
    } catch (const json::exception&) {
        throw ContentError(where + "unexpected response shape: " +
                           provider_message(body, spec_.error_pointer, res.body));
    }
    try {
        out.usage = TokenUsage{body.at(json::json_pointer(spec_.prompt_tokens_pointer)).get<std::int64_t>(),
                               body.at(json::json_pointer(spec_.completion_tokens_pointer)).get<std::int64_t>()};
    } catch (const json::exception&) {
        out.usage.reset();
    }
    out.provider_latency_ms = latency;
    return out;
}

}  // namespace insertrank::llm
