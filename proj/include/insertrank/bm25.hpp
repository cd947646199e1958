#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "insertrank/corpus.hpp"

namespace insertrank {

/// Lowercases and splits on every non-alphanumeric codepoint. Input is
/// decoded as UTF-8; invalid byte sequences act as separators. Case folding
/// covers ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic. No stemming
/// and no stopword removal.
std::vector<std::string> tokenize(std::string_view text);

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;

    /// Throws std::invalid_argument unless k1 >= 0 and 0 <= b <= 1.
    void validate() const;
};

struct Posting {
    std::uint32_t doc;  // position in the corpus
    std::uint32_t tf;

    friend bool operator==(const Posting&, const Posting&) = default;
};

/// One first-stage result. Within a candidate list scores are non-increasing
/// and ranks run 1..n.
struct ScoredCandidate {
    std::string doc_id;
    double score = 0.0;
    std::size_t first_stage_rank = 0;

    friend bool operator==(const ScoredCandidate&, const ScoredCandidate&) = default;
};

/// Raised when an index file has a foreign header or an unknown version.
class IndexFormatError : public DataError {
public:
    using DataError::DataError;
};

/// Inverted index with Okapi BM25 scoring:
///
///   idf(t)   = ln(1 + (N - df + 0.5) / (df + 0.5))
///   w(t, d)  = idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
///   score    = sum of w over query tokens, duplicates counted each time
///
/// The index owns the corpus so that rerank prompts can be rendered from an
/// index file alone. A built index is immutable and safe to query from
/// several threads.
class Bm25Index {
public:
    /// Tokenization runs on up to `threads` workers; postings are merged in
    /// document order so the result does not depend on the thread count.
    static Bm25Index build(CorpusStore corpus, Bm25Params params = {}, unsigned threads = 1);

    /// Direct score of one document. Throws std::out_of_range for an invalid
    /// position.
    [[nodiscard]] double score(std::span<const std::string> query_tokens,
                               std::size_t doc_position) const;

    /// Top-k documents with score > 0, ordered by (score desc, doc_id asc).
    /// Throws std::invalid_argument when k < 1.
    [[nodiscard]] std::vector<ScoredCandidate> retrieve_topk(std::span<const std::string> query_tokens,
                                                             std::size_t k) const;
    /// Tokenizes the reformulated text when present, else the original.
    [[nodiscard]] std::vector<ScoredCandidate> retrieve_topk(const Query& query, std::size_t k) const;

    [[nodiscard]] double idf(std::size_t document_frequency) const;

    [[nodiscard]] const CorpusStore& corpus() const { return corpus_; }
    [[nodiscard]] const Bm25Params& params() const { return params_; }
    [[nodiscard]] std::size_t doc_count() const { return doc_lengths_.size(); }
    [[nodiscard]] double avgdl() const { return avgdl_; }
    [[nodiscard]] std::uint32_t doc_length(std::size_t position) const { return doc_lengths_.at(position); }
    [[nodiscard]] std::size_t vocabulary_size() const { return terms_.size(); }
    [[nodiscard]] std::span<const Posting> postings(std::string_view term) const;

    /// Binary serialization behind the "BMIX1" header.
    void write(std::ostream& out) const;
    static Bm25Index read(std::istream& in);
    void save(const std::filesystem::path& path) const;
    static Bm25Index load(const std::filesystem::path& path);

private:
    Bm25Index() = default;
    void finalize();
    [[nodiscard]] double term_weight(double idf, std::uint32_t tf, std::uint32_t dl) const;
    [[nodiscard]] const std::vector<Posting>* find_postings(std::string_view term) const;

    CorpusStore corpus_;
    Bm25Params params_;
    std::vector<std::uint32_t> doc_lengths_;
    double avgdl_ = 0.0;
    std::vector<std::string> terms_;
    std::vector<std::vector<Posting>> postings_;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
};

}  // namespace insertrank
