#include "insertrank/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "insertrank/providers.hpp"
#include "text_util.hpp"

namespace insertrank {

std::string_view to_string(ScoreMode mode) {
    switch (mode) {
        case ScoreMode::none: return "none";
        case ScoreMode::raw: return "raw";
        case ScoreMode::norm01: return "norm01";
        case ScoreMode::norm0100: return "norm0100";
    }
    return "?";
}

ScoreMode parse_score_mode(std::string_view name) {
    for (auto m : {ScoreMode::none, ScoreMode::raw, ScoreMode::norm01, ScoreMode::norm0100}) {
        if (name == to_string(m)) return m;
    }
    throw std::invalid_argument("unknown score mode \"" + std::string(name) +
                                "\" (expected none, raw, norm01 or norm0100)");
}

std::string_view to_string(OrderMode::Kind kind) {
    return kind == OrderMode::Kind::shuffle ? "shuffle" : "bm25_desc";
}

OrderMode::Kind parse_order_kind(std::string_view name) {
    if (name == "bm25_desc") return OrderMode::Kind::bm25_desc;
    if (name == "shuffle") return OrderMode::Kind::shuffle;
    throw std::invalid_argument("unknown order mode \"" + std::string(name) + "\" (expected bm25_desc or shuffle)");
}

std::string variant_label(ScoreMode score, OrderMode::Kind order) {
    if (order == OrderMode::Kind::bm25_desc) {
        switch (score) {
            case ScoreMode::none: return "Vanilla";
            case ScoreMode::raw: return "Raw BM25";
            case ScoreMode::norm01: return "0-1 scale";
            case ScoreMode::norm0100: return "0-100 scale";
        }
    }
    switch (score) {
        case ScoreMode::none: return "Shuffled";
        case ScoreMode::raw: return "Shuffled w/ BM25";
        case ScoreMode::norm01: return "Shuffled w/ 0-1 scale";
        case ScoreMode::norm0100: return "Shuffled w/ 0-100 scale";
    }
    return "?";
}

std::string_view to_string(PromptTemplate t) { return t == PromptTemplate::r2med ? "r2med" : "bright"; }

PromptTemplate parse_template(std::string_view name) {
    if (name == "bright") return PromptTemplate::bright;
    if (name == "r2med") return PromptTemplate::r2med;
    throw std::invalid_argument("unknown prompt template \"" + std::string(name) + "\" (expected bright or r2med)");
}

void RerankConfig::validate() const {
    if (topk < 1) throw std::invalid_argument("topk must be at least 1");
    if (max_doc_tokens && *max_doc_tokens < 1) throw std::invalid_argument("max_doc_tokens must be at least 1");
    for (int p : {precision.raw, precision.norm01, precision.norm0100}) {
        if (p < 0 || p > 12) throw std::invalid_argument("score precision must be between 0 and 12");
    }
}

std::vector<double> normalize_scores(std::span<const double> scores, ScoreMode mode) {
    for (double s : scores) {
        if (!std::isfinite(s)) throw std::invalid_argument("cannot display a non-finite score");
    }
    std::vector<double> out(scores.begin(), scores.end());
    if (mode == ScoreMode::raw || mode == ScoreMode::none || out.empty()) return out;

    auto [lo_it, hi_it] = std::minmax_element(out.begin(), out.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    const double scale = mode == ScoreMode::norm0100 ? 100.0 : 1.0;
    for (double& s : out) {
        // a flat list carries no ranking signal; show every entry at the top
        s = hi == lo ? scale : scale * ((s - lo) / (hi - lo));
    }
    return out;
}

std::optional<std::vector<std::string>> display_scores(std::span<const double> scores, ScoreMode mode,
                                                       const ScorePrecision& precision) {
    if (mode == ScoreMode::none) return std::nullopt;
    int decimals = precision.raw;
    if (mode == ScoreMode::norm01) decimals = precision.norm01;
    if (mode == ScoreMode::norm0100) decimals = precision.norm0100;

    std::vector<std::string> out;
    out.reserve(scores.size());
    for (double v : normalize_scores(scores, mode)) out.push_back(detail::format_fixed(v, decimals));
    return out;
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_below: bound must be positive");
    // reject the low (2^64 mod bound) outputs so every residue is equally likely
    const std::uint64_t threshold = (0 - bound) % bound;
    while (true) {
        std::uint64_t r = rng();
        if (r >= threshold) return r % bound;
    }
}

std::vector<ScoredCandidate> order_candidates(std::span<const ScoredCandidate> candidates, OrderMode mode) {
    std::vector<ScoredCandidate> out(candidates.begin(), candidates.end());
    if (mode.kind == OrderMode::Kind::bm25_desc || out.size() < 2) return out;
    std::mt19937_64 rng(mode.seed);
    for (std::size_t i = out.size() - 1; i > 0; --i) {
        auto j = static_cast<std::size_t>(uniform_below(rng, i + 1));
        std::swap(out[i], out[j]);
    }
    return out;
}

std::uint64_t stable_hash(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t per_query_seed(std::uint64_t seed, std::string_view query_id) {
    return seed ^ stable_hash(query_id);
}

std::string truncate_tokens(std::string_view text, std::size_t max_tokens) {
    auto tokens = detail::split_whitespace(text);
    if (tokens.size() <= max_tokens) return std::string(text);
    std::string out;
    for (std::size_t i = 0; i < max_tokens; ++i) {
        if (i) out.push_back(' ');
        out.append(tokens[i]);
    }
    return out;
}

namespace {

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

constexpr std::string_view kBrightInstructions =
    "First identify the essential problem in the query.\n"
    "Think step by step to reason about why each document is relevant or irrelevant.\n"
    "Rank these passages based on their relevance to the query.\n"
    "Please output the ranking result of passages as a list, where the first element is the id of the most "
    "relevant passage, the second element is the id of the second most element, etc.\n"
    "Please strictly follow the format to output a list of {topk} ids corresponding to the most relevant "
    "{topk} passages:\n"
    "```json\n"
    "[...]";

// The doubled period after "irrelevant" is part of the template text.
constexpr std::string_view kR2medInstructions =
    "First, identify the essential problem or topic in the query.\n"
    "Think step by step to reason about why each document is relevant or irrelevant..\n"
    "Rank these passages based on their relevance to the query.\n"
    "Please output the ranking result of passages as a list, where the first element is the id of the most "
    "relevant passage, the second element is the id of the second most element, etc.\n"
    "Finally, output a ranked list of the top {topk} most relevant passages by their index number.\n"
    "Please strictly follow the format to output a list of {topk} ids corresponding to the most relevant "
    "{topk} passages:\n"
    "```json\n"
    "[...]";

}  // namespace

std::string build_prompt(std::string_view query_text, std::span<const PromptDocument> documents,
                         std::size_t topk, PromptTemplate prompt_template) {
    if (documents.empty()) throw std::invalid_argument("cannot build a prompt without documents");
    const bool scored = documents.front().score.has_value();
    for (const auto& d : documents) {
        if (d.score.has_value() != scored) {
            throw std::invalid_argument("either every prompt document carries a score or none does");
        }
    }

    std::string out;
    if (prompt_template == PromptTemplate::bright) {
        out += "The following passages are related to query: ";
        out += query_text;
        out += "\n\n";
    } else {
        out += "The following passages are related to the query: \"";
        out += query_text;
        out += "\".\n\n";
    }
    if (scored) {
        out += kRetrieverSentence;
        out += "\n\n";
    }
    for (std::size_t i = 0; i < documents.size(); ++i) {
        if (i) out += '\n';
        out += '[' + std::to_string(i + 1) + "]. " + documents[i].text;
        if (scored) out += " BM25 score: " + *documents[i].score;
    }
    out += '\n';

    const auto k = std::to_string(topk);
    out += replace_all(std::string(prompt_template == PromptTemplate::bright ? kBrightInstructions
                                                                              : kR2medInstructions),
                       "{topk}", k);
    return out;
}

namespace {

bool is_json_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Parses an integer array starting at text[pos] == '['. Values too large for
// uint64 and negative values become 0, which is out of range for any prompt.
std::optional<std::vector<std::uint64_t>> parse_int_array(std::string_view text, std::size_t pos) {
    std::size_t i = pos + 1;
    auto skip = [&] {
        while (i < text.size() && is_json_space(text[i])) ++i;
    };
    std::vector<std::uint64_t> values;
    while (true) {
        skip();
        bool negative = false;
        if (i < text.size() && text[i] == '-') {
            negative = true;
            ++i;
        }
        std::size_t start = i;
        std::uint64_t v = 0;
        bool overflow = false;
        while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
            auto digit = static_cast<std::uint64_t>(text[i] - '0');
            if (v > (std::numeric_limits<std::uint64_t>::max() - digit) / 10) overflow = true;
            v = overflow ? 0 : v * 10 + digit;
            ++i;
        }
        if (i == start) return std::nullopt;
        values.push_back(negative || overflow ? 0 : v);
        skip();
        if (i >= text.size()) return std::nullopt;
        if (text[i] == ']') return values;
        if (text[i] != ',') return std::nullopt;
        ++i;
    }
}

void tag_once(std::vector<std::string>& repairs, const char* tag) {
    if (std::find(repairs.begin(), repairs.end(), tag) == repairs.end()) repairs.emplace_back(tag);
}

}  // namespace

ParsedRanking parse_ranking(std::string_view raw, std::size_t n, std::size_t topk,
                            std::span<const std::size_t> fallback_order) {
    ParsedRanking out;
    const std::size_t target = std::min(topk, n);

    std::optional<std::vector<std::uint64_t>> found;
    for (std::size_t pos = raw.rfind('['); pos != std::string_view::npos; pos = raw.rfind('[', pos - 1)) {
        found = parse_int_array(raw, pos);
        if (found || pos == 0) break;
    }

    std::vector<bool> used(n + 1, false);
    auto fill_from_fallback = [&] {
        for (std::size_t p : fallback_order) {
            if (out.ranking.size() >= target) break;
            if (p >= 1 && p <= n && !used[p]) {
                used[p] = true;
                out.ranking.push_back(p);
            }
        }
    };

    if (!found) {
        out.repairs.emplace_back("no_parse");
        fill_from_fallback();
        return out;
    }

    for (std::uint64_t v : *found) {
        if (v < 1 || v > n) {
            tag_once(out.repairs, "oob");
            continue;
        }
        auto p = static_cast<std::size_t>(v);
        if (used[p]) {
            tag_once(out.repairs, "dup");
            continue;
        }
        used[p] = true;
        out.ranking.push_back(p);
    }
    if (out.ranking.size() > target) out.ranking.resize(target);
    if (out.ranking.size() < target) {
        out.repairs.emplace_back("fill");
        fill_from_fallback();
    }
    return out;
}

std::vector<RunEntry> RerankOutcome::run_entries() const {
    std::vector<RunEntry> out;
    out.reserve(doc_ids.size());
    const auto n = static_cast<double>(candidate_count);
    for (std::size_t i = 0; i < doc_ids.size(); ++i) {
        out.push_back({doc_ids[i], n - static_cast<double>(i + 1) + 1.0});
    }
    return out;
}

llm::ChatRequest rerank_request(const Query& query, std::span<const ScoredCandidate> candidates,
                                const CorpusStore& corpus, const RerankConfig& config,
                                std::vector<ScoredCandidate>* ordered_out) {
    config.validate();
    if (candidates.empty()) throw std::invalid_argument("query " + query.query_id + " has no candidates");

    OrderMode order = config.order_mode;
    if (order.kind == OrderMode::Kind::shuffle) order.seed = per_query_seed(order.seed, query.query_id);
    auto ordered = order_candidates(candidates, order);

    std::vector<double> scores;
    scores.reserve(ordered.size());
    for (const auto& c : ordered) scores.push_back(c.score);
    auto shown = display_scores(scores, config.score_mode, config.precision);

    std::vector<PromptDocument> docs;
    docs.reserve(ordered.size());
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        auto pos = corpus.find(ordered[i].doc_id);
        if (!pos) throw DataError("candidate \"" + ordered[i].doc_id + "\" is not in the corpus");
        std::string text = corpus.at(*pos).full_text();
        if (config.max_doc_tokens) text = truncate_tokens(text, *config.max_doc_tokens);
        docs.push_back({std::move(text), shown ? std::optional<std::string>((*shown)[i]) : std::nullopt});
    }

    const std::string& query_text = config.use_original_query ? query.text : query.effective_text();
    llm::ChatRequest req;
    req.provider = config.provider;
    req.model = config.model;
    req.temperature = config.temperature;
    req.max_output_tokens = config.max_output_tokens;
    req.messages.push_back({"user", build_prompt(query_text, docs, config.topk, config.prompt_template)});
    if (ordered_out) *ordered_out = std::move(ordered);
    return req;
}

namespace {

[[noreturn]] void rethrow_with_query(const llm::LlmError& e, const std::string& query_id) {
    const std::string msg = "query " + query_id + ": " + e.what();
    switch (e.kind()) {
        case llm::ErrorKind::auth: throw llm::AuthError(msg);
        case llm::ErrorKind::rate_limit: throw llm::RateLimitError(msg);
        case llm::ErrorKind::transport: throw llm::TransportError(msg);
        case llm::ErrorKind::content: throw llm::ContentError(msg);
        case llm::ErrorKind::script_exhausted: throw llm::ScriptExhaustedError(msg);
    }
    throw llm::LlmError(e.kind(), msg);
}

}  // namespace

RerankOutcome rerank_query(const Query& query, std::span<const ScoredCandidate> candidates,
                           const CorpusStore& corpus, const RerankConfig& config, llm::ChatClient& client,
                           const llm::ResponseCache* cache) {
    RerankOutcome out;
    out.query_id = query.query_id;
    config.validate();
    if (candidates.empty()) {
        out.repairs.emplace_back("no_candidates");
        return out;
    }

    std::vector<ScoredCandidate> ordered;
    auto req = rerank_request(query, candidates, corpus, config, &ordered);
    out.prompt = req.messages.back().content;
    out.prompt_digest = llm::cache_key(req);
    out.candidate_count = ordered.size();

    llm::RequestContext ctx;
    ctx.query_id = query.query_id;
    for (const auto& c : ordered) ctx.candidates.push_back({c.doc_id, c.first_stage_rank});

    llm::ChatResponse resp;
    try {
        resp = llm::cached_complete(cache, client, req, ctx);
    } catch (const llm::LlmError& e) {
        rethrow_with_query(e, query.query_id);
    }
    out.raw_response = resp.text;
    out.cached = resp.cached;
    if (cache) cache->write_raw_response(out.prompt_digest, resp.text);

    std::vector<std::size_t> fallback(ordered.size());
    std::iota(fallback.begin(), fallback.end(), std::size_t{1});
    auto parsed = parse_ranking(resp.text, ordered.size(), config.topk, fallback);
    out.ranking = std::move(parsed.ranking);
    out.repairs = std::move(parsed.repairs);
    for (std::size_t p : out.ranking) out.doc_ids.push_back(ordered[p - 1].doc_id);
    return out;
}

std::string hyde_reformulate(const Query& query, const HydeConfig& config, llm::ChatClient& client,
                             const llm::ResponseCache* cache) {
    llm::ChatRequest req;
    req.provider = config.provider;
    req.model = config.model;
    req.temperature = config.temperature;
    req.max_output_tokens = config.max_output_tokens;
    req.messages.push_back({"user", replace_all(config.prompt_template, "{query}", query.text)});

    llm::ChatResponse resp;
    try {
        resp = llm::cached_complete(cache, client, req, {query.query_id, {}});
    } catch (const llm::LlmError& e) {
        rethrow_with_query(e, query.query_id);
    }
    if (detail::trim(resp.text).empty()) {
        throw llm::ContentError("query " + query.query_id + ": empty reformulation");
    }
    return resp.text;
}

}  // namespace insertrank
