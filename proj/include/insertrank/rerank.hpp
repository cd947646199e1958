#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "insertrank/bm25.hpp"
#include "insertrank/corpus.hpp"
#include "insertrank/llm.hpp"
#include "insertrank/run.hpp"

namespace insertrank {

/// How first-stage scores appear in the prompt. `none` is the vanilla
/// listwise baseline: no retriever sentence and no per-document scores.
enum class ScoreMode { none, raw, norm01, norm0100 };

std::string_view to_string(ScoreMode mode);
/// Throws std::invalid_argument for an unknown name.
ScoreMode parse_score_mode(std::string_view name);

struct OrderMode {
    enum class Kind { bm25_desc, shuffle };
    Kind kind = Kind::bm25_desc;
    std::uint64_t seed = 0;

    static OrderMode bm25_desc() { return {}; }
    static OrderMode shuffle(std::uint64_t seed) { return {Kind::shuffle, seed}; }

    friend bool operator==(const OrderMode&, const OrderMode&) = default;
};

/// "bm25_desc" or "shuffle".
std::string_view to_string(OrderMode::Kind kind);
OrderMode::Kind parse_order_kind(std::string_view name);

/// Table label of a variant: "Vanilla", "Raw BM25", "0-1 scale",
/// "0-100 scale", and "Shuffled", "Shuffled w/ BM25", ... for shuffled runs.
std::string variant_label(ScoreMode score, OrderMode::Kind order);

enum class PromptTemplate { bright, r2med };

std::string_view to_string(PromptTemplate t);
PromptTemplate parse_template(std::string_view name);

/// Decimal places used when printing scores.
struct ScorePrecision {
    int raw = 2;
    int norm01 = 3;
    int norm0100 = 1;
};

struct RerankConfig {
    ScoreMode score_mode = ScoreMode::raw;
    OrderMode order_mode;
    std::size_t topk = 10;
    /// Whitespace-token cap per document; unset keeps full documents.
    std::optional<std::size_t> max_doc_tokens;
    PromptTemplate prompt_template = PromptTemplate::bright;
    ScorePrecision precision;
    /// Put the original query in the prompt even when a reformulation exists.
    bool use_original_query = false;

    std::string provider;
    std::string model;
    double temperature = 0.0;
    std::optional<int> max_output_tokens;

    /// Throws std::invalid_argument on topk < 1 or max_doc_tokens < 1.
    void validate() const;
};

/// Pre-format values of a normalization: identity for raw, per-list min-max
/// for norm01 and 100x that for norm0100. A list whose values are all equal
/// maps to 1 (resp. 100). Throws std::invalid_argument on non-finite input.
std::vector<double> normalize_scores(std::span<const double> scores, ScoreMode mode);

/// Scores as printed in the prompt, or nullopt for ScoreMode::none.
std::optional<std::vector<std::string>> display_scores(std::span<const double> scores, ScoreMode mode,
                                                       const ScorePrecision& precision = {});

/// Uniform draw from [0, bound) by rejection on raw 64-bit outputs, so the
/// result does not depend on a standard library's distribution code.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

/// bm25_desc keeps the input. shuffle(seed) applies a Fisher-Yates shuffle
/// driven by std::mt19937_64 seeded with `seed`: for i = n-1 down to 1, swap
/// element i with element uniform_below(rng, i + 1). Each candidate keeps its
/// own score.
std::vector<ScoredCandidate> order_candidates(std::span<const ScoredCandidate> candidates, OrderMode mode);

/// FNV-1a 64-bit hash of a query id.
std::uint64_t stable_hash(std::string_view text);
/// Per-query shuffle seed: run seed XOR stable_hash(query_id).
std::uint64_t per_query_seed(std::uint64_t seed, std::string_view query_id);

/// First `max_tokens` whitespace-delimited tokens joined by single spaces.
/// Texts with at most `max_tokens` tokens are returned unchanged.
std::string truncate_tokens(std::string_view text, std::size_t max_tokens);

/// One prompt entry: document text and its printed score (absent for
/// ScoreMode::none).
struct PromptDocument {
    std::string text;
    std::optional<std::string> score;
};

inline constexpr std::string_view kRetrieverSentence =
    "You are also given the BM25 scores from a lexical retriever for each document.";

/// Renders the listwise prompt. Documents are numbered [1]..[n] in the given
/// order; `{topk}` is replaced by the configured value even when fewer
/// documents are shown. The retriever sentence appears iff
/// the documents carry scores. Throws std::invalid_argument when `documents`
/// is empty or only some documents carry scores.
std::string build_prompt(std::string_view query_text, std::span<const PromptDocument> documents,
                         std::size_t topk, PromptTemplate prompt_template);

struct ParsedRanking {
    std::vector<std::size_t> ranking;  // 1-based prompt positions
    std::vector<std::string> repairs;  // "oob", "dup", "fill", "no_parse"

    friend bool operator==(const ParsedRanking&, const ParsedRanking&) = default;
};

/// Extracts the last well-formed JSON array of integers from free text and
/// repairs it into a duplicate-free list of min(topk, n) positions in [1, n].
/// Entries outside [1, n] are dropped ("oob"), repeated entries keep their
/// first occurrence ("dup"), short lists are completed from fallback_order
/// ("fill"). Each tag is logged once, in the order first encountered. With
/// no array at all the result is the head of fallback_order ("no_parse").
/// Never throws for any input text.
ParsedRanking parse_ranking(std::string_view raw, std::size_t n, std::size_t topk,
                            std::span<const std::size_t> fallback_order);

struct RerankOutcome {
    std::string query_id;
    std::vector<std::size_t> ranking;  // 1-based positions in the prompt order
    std::vector<std::string> doc_ids;  // ranking mapped back to documents
    std::string raw_response;
    std::vector<std::string> repairs;
    std::string prompt_digest;
    std::string prompt;
    std::size_t candidate_count = 0;
    bool cached = false;

    /// Run entries with synthetic scores n - position + 1, n being the number
    /// of candidates shown to the model.
    [[nodiscard]] std::vector<RunEntry> run_entries() const;
};

/// truncate -> order -> display scores -> build prompt -> cached completion
/// -> parse. Shuffle seeds are derived per query with per_query_seed. An
/// empty candidate list yields an empty outcome without a model call.
/// Provider errors propagate as llm::LlmError with the query id prefixed.
RerankOutcome rerank_query(const Query& query, std::span<const ScoredCandidate> candidates,
                           const CorpusStore& corpus, const RerankConfig& config, llm::ChatClient& client,
                           const llm::ResponseCache* cache);

/// The chat request rerank_query would send, without sending it.
llm::ChatRequest rerank_request(const Query& query, std::span<const ScoredCandidate> candidates,
                                const CorpusStore& corpus, const RerankConfig& config,
                                std::vector<ScoredCandidate>* ordered = nullptr);

struct HydeConfig {
    std::string provider;
    std::string model;
    std::string prompt_template =
        "Write a passage that answers the following question. Question: {query}. Passage:";
    double temperature = 0.0;
    std::optional<int> max_output_tokens;
};

/// Asks the model for a hypothetical answering passage and returns it
/// verbatim. Throws llm::ContentError("empty reformulation") when the model
/// returns only whitespace.
std::string hyde_reformulate(const Query& query, const HydeConfig& config, llm::ChatClient& client,
                             const llm::ResponseCache* cache);

}  // namespace insertrank
