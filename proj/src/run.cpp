#include "insertrank/run.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "insertrank/corpus.hpp"
#include "insertrank/log.hpp"
#include "text_util.hpp"

namespace insertrank {

void Run::set(const std::string& query_id, std::vector<RunEntry> entries) {
    auto [it, inserted] = lists_.insert_or_assign(query_id, std::move(entries));
    if (inserted) order_.push_back(query_id);
}

const std::vector<RunEntry>* Run::find(const std::string& query_id) const {
    auto it = lists_.find(query_id);
    return it == lists_.end() ? nullptr : &it->second;
}

std::vector<std::string> Run::doc_ids(const std::string& query_id) const {
    std::vector<std::string> out;
    if (const auto* list = find(query_id)) {
        for (const auto& e : *list) out.push_back(e.doc_id);
    }
    return out;
}

namespace {

struct RawLine {
    RunEntry entry;
    long long rank;
};

}  // namespace

Run read_run(std::istream& in) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<RawLine>> lists;
    std::map<std::string, std::set<std::string>> seen;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        auto trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        auto fields = detail::split_whitespace(trimmed);
        const auto where = "line " + std::to_string(line_no) + ": ";
        if (fields.size() != 6) {
            throw DataError(where + "expected 6 columns (qid Q0 docid rank score tag), found " +
                            std::to_string(fields.size()));
        }
        std::string qid(fields[0]);
        std::string doc(fields[2]);
        auto rank = detail::parse_int<long long>(fields[3]);
        if (!rank) throw DataError(where + "rank \"" + std::string(fields[3]) + "\" is not an integer");
        auto score = detail::parse_double(fields[4]);
        if (!score) throw DataError(where + "score \"" + std::string(fields[4]) + "\" is not a number");
        if (!seen[qid].insert(doc).second) {
            throw DataError(where + "duplicate doc_id \"" + doc + "\" for query \"" + qid + "\"");
        }
        auto [it, inserted] = lists.try_emplace(qid);
        if (inserted) order.push_back(qid);
        it->second.push_back({{doc, *score}, *rank});
    }

    Run run;
    for (const auto& qid : order) {
        auto& raw = lists[qid];
        std::stable_sort(raw.begin(), raw.end(), [](const RawLine& a, const RawLine& b) {
            if (a.entry.score != b.entry.score) return a.entry.score > b.entry.score;
            return a.entry.doc_id < b.entry.doc_id;
        });
        bool consistent = true;
        for (std::size_t i = 1; i < raw.size(); ++i) {
            if (raw[i].rank <= raw[i - 1].rank) consistent = false;
        }
        if (!consistent) {
            log::warn("run ranks for query \"" + qid + "\" disagree with score order; ranking by score");
        }
        std::vector<RunEntry> entries;
        entries.reserve(raw.size());
        for (auto& r : raw) entries.push_back(std::move(r.entry));
        run.set(qid, std::move(entries));
    }
    return run;
}

Run read_run(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open run file " + path.string());
    try {
        return read_run(in);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_run(const Run& run, std::ostream& out, const std::string& tag, const std::vector<std::string>& header) {
    for (const auto& h : header) out << "# " << h << '\n';
    for (const auto& qid : run.query_ids()) {
        const auto& list = *run.find(qid);
        for (std::size_t i = 0; i < list.size(); ++i) {
            out << qid << " Q0 " << list[i].doc_id << ' ' << (i + 1) << ' '
                << detail::format_fixed(list[i].score, 6) << ' ' << tag << '\n';
        }
    }
}

void write_run(const Run& run, const std::filesystem::path& path, const std::string& tag,
               const std::vector<std::string>& header) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write run file " + path.string());
        write_run(run, out, tag, header);
        if (!out.flush()) throw DataError("cannot write run file " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace insertrank
