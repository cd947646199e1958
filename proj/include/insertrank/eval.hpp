#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "insertrank/corpus.hpp"
#include "insertrank/run.hpp"

namespace insertrank {

enum class Gain { linear, exponential };

/// NDCG@k of one ranked list. Gains are the graded judgments (linear) or
/// 2^g - 1 (exponential); unjudged documents gain 0; discounts are
/// 1/log2(rank + 1). The ideal DCG sorts every judged document of the query
/// by grade. A query without positive judgments scores 0.
double ndcg_at_k(std::span<const std::string> ranking, const std::map<std::string, int>& judgments,
                 std::size_t k, Gain gain = Gain::linear);

struct EvalReport {
    std::size_t k = 10;
    /// One value per judged query, sorted by query id.
    std::vector<std::pair<std::string, double>> per_query;
    double mean = 0.0;
    /// Qrels queries the run has no list for (scored as 0).
    std::vector<std::string> missing_queries;
};

/// Averages NDCG@k over the queries that have judgments. Run queries without
/// judgments are ignored; judged queries missing from the run score 0 and
/// trigger one warning.
EvalReport evaluate_run(const Run& run, const Qrels& qrels, std::size_t k = 10, Gain gain = Gain::linear);

/// Writes "query_id<TAB>ndcg@k" lines followed by an "all" line.
void write_report(const EvalReport& report, std::ostream& out);

/// Three decimals with the leading zero dropped below 1: ".334".
std::string format_metric(double value);

/// Collected results of a variant grid. Failed cells have no report.
class AblationTable {
public:
    /// Records the result of variant `row` on `split`. Rows and splits appear
    /// in first-seen order. Reports must agree on k.
    void add(const std::string& row, const std::string& split, const std::optional<EvalReport>& report);

    [[nodiscard]] const std::vector<std::string>& rows() const { return rows_; }
    [[nodiscard]] const std::vector<std::string>& splits() const { return splits_; }
    [[nodiscard]] std::optional<double> value(const std::string& row, const std::string& split) const;
    /// Unweighted mean over splits; absent when any cell failed.
    [[nodiscard]] std::optional<double> average(const std::string& row) const;
    [[nodiscard]] std::optional<std::size_t> k() const { return k_; }

    /// Column-aligned text. An "Avg" column is added when there are at least
    /// two splits; failed cells print as an em dash.
    [[nodiscard]] std::string to_text() const;
    [[nodiscard]] std::string to_tsv() const;

private:
    [[nodiscard]] std::vector<std::vector<std::string>> cells() const;

    std::vector<std::string> rows_;
    std::vector<std::string> splits_;
    std::map<std::pair<std::string, std::string>, std::optional<double>> values_;
    std::optional<std::size_t> k_;
};

}  // namespace insertrank
