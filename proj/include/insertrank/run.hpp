#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace insertrank {

struct RunEntry {
    std::string doc_id;
    double score = 0.0;

    friend bool operator==(const RunEntry&, const RunEntry&) = default;
};

/// Ranked lists per query. Query order is insertion order so that reranked
/// runs keep the input query order; lookup is by id.
class Run {
public:
    /// Replaces any existing list for the query.
    void set(const std::string& query_id, std::vector<RunEntry> entries);

    [[nodiscard]] const std::vector<RunEntry>* find(const std::string& query_id) const;
    [[nodiscard]] const std::vector<std::string>& query_ids() const { return order_; }
    [[nodiscard]] std::size_t size() const { return order_.size(); }
    [[nodiscard]] bool empty() const { return order_.empty(); }

    /// Ranked doc ids of one query (empty when absent).
    [[nodiscard]] std::vector<std::string> doc_ids(const std::string& query_id) const;

    friend bool operator==(const Run&, const Run&) = default;

private:
    std::vector<std::string> order_;
    std::map<std::string, std::vector<RunEntry>> lists_;
};

/// Reads TREC 6-column lines "qid Q0 docid rank score tag". Lines starting
/// with '#' are comments. Per query the list is re-sorted by (score desc,
/// doc_id asc) with a warning when the file's rank column disagrees.
/// Duplicate doc ids within a query and malformed lines are DataErrors that
/// name the line number.
Run read_run(std::istream& in);
Run read_run(const std::filesystem::path& path);

/// Writes one line per entry with ranks 1..n and scores at 6 decimals. Each
/// `header` line is emitted first as a "# " comment.
void write_run(const Run& run, std::ostream& out, const std::string& tag,
               const std::vector<std::string>& header = {});
void write_run(const Run& run, const std::filesystem::path& path, const std::string& tag,
               const std::vector<std::string>& header = {});

}  // namespace insertrank
