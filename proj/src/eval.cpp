#include "insertrank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "insertrank/log.hpp"
#include "text_util.hpp"

namespace insertrank {

namespace {

double gain_of(int grade, Gain gain) {
    if (grade <= 0) return 0.0;
    return gain == Gain::linear ? static_cast<double>(grade) : std::exp2(grade) - 1.0;
}

double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

}  // namespace

double ndcg_at_k(std::span<const std::string> ranking, const std::map<std::string, int>& judgments,
                 std::size_t k, Gain gain) {
    if (k < 1) throw std::invalid_argument("k must be at least 1");

    std::vector<double> ideal;
    for (const auto& [doc, grade] : judgments) ideal.push_back(gain_of(grade, gain));
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) idcg += ideal[i] * discount(i + 1);
    if (idcg <= 0.0) return 0.0;

    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
        auto it = judgments.find(ranking[i]);
        if (it != judgments.end()) dcg += gain_of(it->second, gain) * discount(i + 1);
    }
    return dcg / idcg;
}

EvalReport evaluate_run(const Run& run, const Qrels& qrels, std::size_t k, Gain gain) {
    EvalReport report;
    report.k = k;
    double total = 0.0;
    for (const auto& qid : qrels.query_ids()) {
        double value = 0.0;
        if (run.find(qid)) {
            auto docs = run.doc_ids(qid);
            value = ndcg_at_k(docs, qrels.judgments(qid), k, gain);
        } else {
            report.missing_queries.push_back(qid);
        }
        report.per_query.emplace_back(qid, value);
        total += value;
    }
    if (!report.per_query.empty()) report.mean = total / static_cast<double>(report.per_query.size());
    if (!report.missing_queries.empty()) {
        log::warn(std::to_string(report.missing_queries.size()) + " judged quer" +
                  (report.missing_queries.size() == 1 ? "y has" : "ies have") +
                  " no ranked list in the run and score 0 (first: \"" + report.missing_queries.front() + "\")");
    }
    return report;
}

void write_report(const EvalReport& report, std::ostream& out) {
    const auto metric = "ndcg@" + std::to_string(report.k);
    for (const auto& [qid, value] : report.per_query) {
        out << qid << '\t' << metric << '\t' << detail::format_fixed(value, 4) << '\n';
    }
    out << "all\t" << metric << '\t' << detail::format_fixed(report.mean, 4) << '\n';
}

std::string format_metric(double value) {
    auto s = detail::format_fixed(value, 3);
    if (s.rfind("0.", 0) == 0) s.erase(0, 1);
    if (s.rfind("-0.", 0) == 0) s.erase(1, 1);
    return s;
}

void AblationTable::add(const std::string& row, const std::string& split, const std::optional<EvalReport>& report) {
    if (report) {
        if (k_ && *k_ != report->k) {
            throw std::invalid_argument("cannot tabulate NDCG@" + std::to_string(report->k) + " next to NDCG@" +
                                        std::to_string(*k_));
        }
        k_ = report->k;
    }
    if (std::find(rows_.begin(), rows_.end(), row) == rows_.end()) rows_.push_back(row);
    if (std::find(splits_.begin(), splits_.end(), split) == splits_.end()) splits_.push_back(split);
    values_[{row, split}] = report ? std::optional<double>(report->mean) : std::nullopt;
}

std::optional<double> AblationTable::value(const std::string& row, const std::string& split) const {
    auto it = values_.find({row, split});
    return it == values_.end() ? std::nullopt : it->second;
}

std::optional<double> AblationTable::average(const std::string& row) const {
    if (splits_.empty()) return std::nullopt;
    double total = 0.0;
    for (const auto& split : splits_) {
        auto v = value(row, split);
        if (!v) return std::nullopt;
        total += *v;
    }
    return total / static_cast<double>(splits_.size());
}

namespace {

constexpr const char* kMissingCell = "\xE2\x80\x94";

std::size_t display_width(const std::string& s) {
    // count UTF-8 lead bytes so the dash occupies one column
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

}  // namespace

std::vector<std::vector<std::string>> AblationTable::cells() const {
    const bool with_avg = splits_.size() >= 2;
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> header{"Variant"};
    header.insert(header.end(), splits_.begin(), splits_.end());
    if (with_avg) header.emplace_back("Avg");
    out.push_back(std::move(header));

    auto cell = [](std::optional<double> v) { return v ? format_metric(*v) : std::string(kMissingCell); };
    for (const auto& row : rows_) {
        std::vector<std::string> line{row};
        for (const auto& split : splits_) line.push_back(cell(value(row, split)));
        if (with_avg) line.push_back(cell(average(row)));
        out.push_back(std::move(line));
    }
    return out;
}

std::string AblationTable::to_text() const {
    auto table = cells();
    std::vector<std::size_t> widths(table.front().size(), 0);
    for (const auto& line : table) {
        for (std::size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], display_width(line[c]));
    }
    std::ostringstream out;
    for (const auto& line : table) {
        std::string text;
        for (std::size_t c = 0; c < line.size(); ++c) {
            const auto pad = std::string(widths[c] - display_width(line[c]), ' ');
            if (c == 0) {
                text += line[c] + pad;
            } else {
                text += "  " + pad + line[c];
            }
        }
        out << text << '\n';
    }
    return out.str();
}

std::string AblationTable::to_tsv() const {
    std::ostringstream out;
    for (const auto& line : cells()) {
        for (std::size_t c = 0; c < line.size(); ++c) out << (c ? "\t" : "") << line[c];
        out << '\n';
    }
    return out.str();
}

}  // namespace insertrank
