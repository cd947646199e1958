#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace insertrank {

/// Raised for malformed or inconsistent input data. Messages name the
/// offending line number or identifier.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Document {
    std::string doc_id;
    std::optional<std::string> title;
    std::string text;

    /// Text used for indexing and prompting: "title\ntext" when a title is
    /// present, otherwise the body alone.
    [[nodiscard]] std::string full_text() const;

    friend bool operator==(const Document&, const Document&) = default;
};

struct Query {
    std::string query_id;
    std::string text;
    /// CoT or HyDE text. When set it is non-empty.
    std::optional<std::string> reformulated;

    /// Reformulated text when present, else the original.
    [[nodiscard]] const std::string& effective_text() const {
        return reformulated ? *reformulated : text;
    }

    friend bool operator==(const Query&, const Query&) = default;
};

/// Graded relevance judgments. Lookups of unjudged pairs yield grade 0.
class Qrels {
public:
    using Judgments = std::map<std::string, int>;

    /// Returns true when an existing judgment was replaced.
    bool set(const std::string& query_id, const std::string& doc_id, int grade);

    [[nodiscard]] int grade(const std::string& query_id, const std::string& doc_id) const;

    /// Judgments for one query (empty map when the query is absent).
    [[nodiscard]] const Judgments& judgments(const std::string& query_id) const;

    [[nodiscard]] bool has_query(const std::string& query_id) const {
        return by_query_.contains(query_id);
    }

    /// Judged query ids in ascending order.
    [[nodiscard]] std::vector<std::string> query_ids() const;

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] bool empty() const { return by_query_.empty(); }

private:
    std::map<std::string, Judgments> by_query_;
};

/// Immutable-after-load document collection in ingestion order.
class CorpusStore {
public:
    CorpusStore() = default;
    explicit CorpusStore(std::vector<Document> documents);

    /// Throws DataError on an empty or duplicate doc_id.
    void add(Document doc);

    [[nodiscard]] const std::vector<Document>& documents() const { return documents_; }
    [[nodiscard]] const Document& at(std::size_t position) const { return documents_.at(position); }
    [[nodiscard]] std::optional<std::size_t> find(const std::string& doc_id) const;
    [[nodiscard]] std::size_t size() const { return documents_.size(); }
    [[nodiscard]] bool empty() const { return documents_.empty(); }

private:
    std::vector<Document> documents_;
    std::unordered_map<std::string, std::size_t> lookup_;
};

enum class QueryFormat { jsonl, tsv };
enum class QrelsFormat { trec4col, tsv3col };

/// BEIR-style JSONL: one object per line with "_id", "text" and optional
/// "title". Blank lines are skipped.
CorpusStore load_corpus(std::istream& in);
CorpusStore load_corpus(const std::filesystem::path& path);

/// Writes one JSON object per document, the inverse of load_corpus.
void write_corpus(const CorpusStore& corpus, std::ostream& out);

std::vector<Query> load_queries(std::istream& in, QueryFormat format);
std::vector<Query> load_queries(const std::filesystem::path& path, QueryFormat format);

/// Attaches "query_id<TAB>text" reformulations. Unknown ids and empty texts
/// are errors; queries not mentioned keep their current state. The text
/// column may carry the escapes \n, \t and \\ so multi-line chain-of-thought
/// output fits on one line. Lines starting with '#' are comments.
std::vector<Query> attach_reformulations(std::vector<Query> queries, std::istream& in);
std::vector<Query> attach_reformulations(std::vector<Query> queries,
                                         const std::filesystem::path& path);

/// Writes "query_id<TAB>reformulated" for every query that has one.
void write_reformulations(const std::vector<Query>& queries, std::ostream& out);

Qrels load_qrels(std::istream& in, QrelsFormat format);
Qrels load_qrels(const std::filesystem::path& path, QrelsFormat format);

/// ".jsonl"/".json" select JSONL; anything else is read as TSV.
QueryFormat query_format_for(const std::filesystem::path& path);
/// Sniffs the first non-empty line: a tab-separated line with three fields
/// is tsv3col, otherwise trec4col.
QrelsFormat detect_qrels_format(const std::filesystem::path& path);

}  // namespace insertrank
