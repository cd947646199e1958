#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "insertrank/providers.hpp"

namespace insertrank::llm {

std::size_t count_prompt_documents(const ChatRequest& request) {
    const ChatMessage* last_user = nullptr;
    for (const auto& m : request.messages) {
        if (m.role == "user") last_user = &m;
    }
    if (!last_user) return 0;
    std::size_t expected = 1;
    std::istringstream in(last_user->content);
    for (std::string line; std::getline(in, line);) {
        const std::string marker = "[" + std::to_string(expected) + "]. ";
        if (line.compare(0, marker.size(), marker) == 0 ||
            line == marker.substr(0, marker.size() - 1)) {
            ++expected;
        }
    }
    return expected - 1;
}

std::string fenced_json_list(const std::vector<std::size_t>& indices) {
    std::string out = "```json\n[";
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(indices[i]);
    }
    out += "]\n```";
    return out;
}

namespace {

std::size_t prompt_size(const ChatRequest& request, const RequestContext& context) {
    return context.candidates.empty() ? count_prompt_documents(request) : context.candidates.size();
}

}  // namespace

ChatResponse IdentityProvider::send(const ChatRequest& request, const RequestContext& context) {
    std::vector<std::size_t> order(prompt_size(request, context));
    std::iota(order.begin(), order.end(), std::size_t{1});
    return ChatResponse{fenced_json_list(order), std::nullopt, false, 0};
}

ChatResponse ReverseProvider::send(const ChatRequest& request, const RequestContext& context) {
    std::vector<std::size_t> order(prompt_size(request, context));
    std::iota(order.rbegin(), order.rend(), std::size_t{1});
    return ChatResponse{fenced_json_list(order), std::nullopt, false, 0};
}

ChatResponse OracleProvider::send(const ChatRequest&, const RequestContext& context) {
    if (context.candidates.empty()) {
        throw ContentError("oracle provider needs the candidate list of the active query");
    }
    const auto& cands = context.candidates;
    std::vector<std::size_t> order(cands.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        int ga = qrels_->grade(context.query_id, cands[a].doc_id);
        int gb = qrels_->grade(context.query_id, cands[b].doc_id);
        if (ga != gb) return ga > gb;
        return cands[a].first_stage_rank < cands[b].first_stage_rank;
    });
    for (auto& i : order) ++i;
    return ChatResponse{fenced_json_list(order), std::nullopt, false, 0};
}

ChatResponse ScriptedProvider::send(const ChatRequest&, const RequestContext&) {
    std::lock_guard lock(mutex_);
    if (next_ >= steps_.size()) {
        throw ScriptExhaustedError("scripted provider exhausted after " + std::to_string(steps_.size()) +
                                   " responses");
    }
    const ScriptStep& step = steps_[next_++];
    if (step.error) {
        switch (*step.error) {
            case ErrorKind::auth: throw AuthError(step.text);
            case ErrorKind::rate_limit: throw RateLimitError(step.text);
            case ErrorKind::transport: throw TransportError(step.text);
            case ErrorKind::content: throw ContentError(step.text);
            case ErrorKind::script_exhausted: throw ScriptExhaustedError(step.text);
        }
    }
    return ChatResponse{step.text, std::nullopt, false, 0};
}

std::size_t ScriptedProvider::calls() const {
    std::lock_guard lock(mutex_);
    return next_;
}

std::vector<ScriptStep> load_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open script " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed script " + path.string() + ": " + e.what());
    }
    if (!doc.is_array()) throw DataError("script must be a JSON array");
    std::vector<ScriptStep> steps;
    for (const auto& item : doc) {
        if (item.is_string()) {
            steps.push_back(ScriptStep::reply(item.get<std::string>()));
            continue;
        }
        if (!item.is_object() || !item.contains("error")) {
            throw DataError("script entries must be strings or {\"error\": ...} objects");
        }
        const auto kind = item.at("error").get<std::string>();
        const auto message = item.value("message", kind);
        static const std::map<std::string, ErrorKind> kKinds = {
            {"auth", ErrorKind::auth},
            {"rate_limit", ErrorKind::rate_limit},
            {"transport", ErrorKind::transport},
            {"content", ErrorKind::content}};
        auto it = kKinds.find(kind);
        if (it == kKinds.end()) throw DataError("unknown script error kind \"" + kind + "\"");
        steps.push_back(ScriptStep::fail(it->second, message));
    }
    return steps;
}

}  // namespace insertrank::llm
