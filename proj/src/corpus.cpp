#include "insertrank/corpus.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "insertrank/log.hpp"
#include "text_util.hpp"

namespace insertrank {

using nlohmann::json;

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

std::string line_prefix(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

json parse_json_line(const std::string& line, std::size_t line_no) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        throw DataError(line_prefix(line_no) + "malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw DataError(line_prefix(line_no) + "expected a JSON object");
    return obj;
}

std::string required_string(const json& obj, const char* key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw DataError(line_prefix(line_no) + "missing field \"" + key + "\"");
    }
    if (!it->is_string()) {
        throw DataError(line_prefix(line_no) + "field \"" + key + "\" is not a string");
    }
    return it->get<std::string>();
}

int parse_grade(std::string_view field, std::size_t line_no) {
    auto grade = detail::parse_int<int>(field);
    if (!grade || *grade < 0) {
        throw DataError(line_prefix(line_no) + "grade \"" + std::string(field) +
                        "\" is not a non-negative integer");
    }
    return *grade;
}

}  // namespace

std::string Document::full_text() const {
    if (title && !title->empty()) return *title + "\n" + text;
    return text;
}

bool Qrels::set(const std::string& query_id, const std::string& doc_id, int grade) {
    if (grade < 0) throw DataError("negative grade for (" + query_id + ", " + doc_id + ")");
    auto& per_query = by_query_[query_id];
    auto [it, inserted] = per_query.insert_or_assign(doc_id, grade);
    return !inserted;
}

int Qrels::grade(const std::string& query_id, const std::string& doc_id) const {
    auto q = by_query_.find(query_id);
    if (q == by_query_.end()) return 0;
    auto d = q->second.find(doc_id);
    return d == q->second.end() ? 0 : d->second;
}

const Qrels::Judgments& Qrels::judgments(const std::string& query_id) const {
    static const Judgments kEmpty;
    auto q = by_query_.find(query_id);
    return q == by_query_.end() ? kEmpty : q->second;
}

std::vector<std::string> Qrels::query_ids() const {
    std::vector<std::string> ids;
    ids.reserve(by_query_.size());
    for (const auto& [qid, _] : by_query_) ids.push_back(qid);
    return ids;
}

std::size_t Qrels::size() const {
    std::size_t n = 0;
    for (const auto& [_, j] : by_query_) n += j.size();
    return n;
}

CorpusStore::CorpusStore(std::vector<Document> documents) {
    documents_.reserve(documents.size());
    for (auto& d : documents) add(std::move(d));
}

void CorpusStore::add(Document doc) {
    if (doc.doc_id.empty()) throw DataError("empty doc_id");
    auto [it, inserted] = lookup_.emplace(doc.doc_id, documents_.size());
    if (!inserted) throw DataError("duplicate doc_id \"" + doc.doc_id + "\"");
    documents_.push_back(std::move(doc));
}

std::optional<std::size_t> CorpusStore::find(const std::string& doc_id) const {
    auto it = lookup_.find(doc_id);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

CorpusStore load_corpus(std::istream& in) {
    CorpusStore store;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (detail::trim(line).empty()) continue;
        json obj = parse_json_line(line, line_no);
        Document doc;
        doc.doc_id = required_string(obj, "_id", line_no);
        doc.text = required_string(obj, "text", line_no);
        if (auto t = obj.find("title"); t != obj.end() && !t->is_null()) {
            if (!t->is_string()) {
                throw DataError(line_prefix(line_no) + "field \"title\" is not a string");
            }
            doc.title = t->get<std::string>();
        }
        if (doc.doc_id.empty()) throw DataError(line_prefix(line_no) + "empty \"_id\"");
        if (store.find(doc.doc_id)) {
            throw DataError(line_prefix(line_no) + "duplicate doc_id \"" + doc.doc_id + "\"");
        }
        store.add(std::move(doc));
    }
    return store;
}

CorpusStore load_corpus(const std::filesystem::path& path) {
    auto in = open_input(path);
    return load_corpus(in);
}

void write_corpus(const CorpusStore& corpus, std::ostream& out) {
    for (const auto& doc : corpus.documents()) {
        json obj{{"_id", doc.doc_id}, {"text", doc.text}};
        if (doc.title) obj["title"] = *doc.title;
        out << obj.dump() << '\n';
    }
}

std::vector<Query> load_queries(std::istream& in, QueryFormat format) {
    std::vector<Query> queries;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (detail::trim(line).empty()) continue;
        Query q;
        if (format == QueryFormat::jsonl) {
            json obj = parse_json_line(line, line_no);
            q.query_id = required_string(obj, "_id", line_no);
            q.text = required_string(obj, "text", line_no);
        } else {
            auto cols = detail::split(line, '\t');
            if (cols.size() != 2) {
                throw DataError(line_prefix(line_no) + "expected 2 tab-separated columns, found " +
                                std::to_string(cols.size()));
            }
            q.query_id = std::string(cols[0]);
            q.text = std::string(cols[1]);
        }
        if (q.query_id.empty()) throw DataError(line_prefix(line_no) + "empty query id");
        if (!seen.emplace(q.query_id, queries.size()).second) {
            throw DataError(line_prefix(line_no) + "duplicate query id \"" + q.query_id + "\"");
        }
        queries.push_back(std::move(q));
    }
    return queries;
}

std::vector<Query> load_queries(const std::filesystem::path& path, QueryFormat format) {
    auto in = open_input(path);
    return load_queries(in, format);
}

std::vector<Query> attach_reformulations(std::vector<Query> queries, std::istream& in) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < queries.size(); ++i) index.emplace(queries[i].query_id, i);

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (detail::trim(line).empty() || line.front() == '#') continue;
        auto cols = detail::split(line, '\t');
        if (cols.size() != 2) {
            throw DataError(line_prefix(line_no) + "expected 2 tab-separated columns, found " +
                            std::to_string(cols.size()));
        }
        std::string qid(cols[0]);
        auto it = index.find(qid);
        if (it == index.end()) {
            throw DataError(line_prefix(line_no) + "unknown query id \"" + qid + "\"");
        }
        std::string text = detail::unescape_tsv(cols[1]);
        if (detail::trim(text).empty()) {
            throw DataError(line_prefix(line_no) + "empty reformulation for \"" + qid + "\"");
        }
        queries[it->second].reformulated = std::move(text);
    }
    return queries;
}

std::vector<Query> attach_reformulations(std::vector<Query> queries,
                                         const std::filesystem::path& path) {
    auto in = open_input(path);
    return attach_reformulations(std::move(queries), in);
}

void write_reformulations(const std::vector<Query>& queries, std::ostream& out) {
    for (const auto& q : queries) {
        if (q.reformulated) out << q.query_id << '\t' << detail::escape_tsv(*q.reformulated) << '\n';
    }
}

Qrels load_qrels(std::istream& in, QrelsFormat format) {
    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    bool first_data_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (detail::trim(line).empty()) continue;
        std::string qid, did;
        int grade = 0;
        if (format == QrelsFormat::trec4col) {
            auto cols = detail::split_whitespace(line);
            if (cols.size() != 4) {
                throw DataError(line_prefix(line_no) + "expected 4 whitespace-separated fields, found " +
                                std::to_string(cols.size()));
            }
            qid = cols[0];
            did = cols[2];
            grade = parse_grade(cols[3], line_no);
        } else {
            auto cols = detail::split(line, '\t');
            if (cols.size() != 3) {
                throw DataError(line_prefix(line_no) + "expected 3 tab-separated columns, found " +
                                std::to_string(cols.size()));
            }
            // BEIR qrels carry a "query-id corpus-id score" header
            if (first_data_line && cols[0] == "query-id") {
                first_data_line = false;
                continue;
            }
            qid = cols[0];
            did = cols[1];
            grade = parse_grade(cols[2], line_no);
        }
        first_data_line = false;
        if (qrels.set(qid, did, grade)) {
            log::warn(line_prefix(line_no) + "duplicate judgment for (" + qid + ", " + did +
                      "); keeping the later grade");
        }
    }
    return qrels;
}

Qrels load_qrels(const std::filesystem::path& path, QrelsFormat format) {
    auto in = open_input(path);
    return load_qrels(in, format);
}

QueryFormat query_format_for(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    if (ext == ".jsonl" || ext == ".json") return QueryFormat::jsonl;
    return QueryFormat::tsv;
}

QrelsFormat detect_qrels_format(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::string line;
    while (std::getline(in, line)) {
        detail::strip_cr(line);
        if (detail::trim(line).empty()) continue;
        return detail::split(line, '\t').size() == 3 ? QrelsFormat::tsv3col : QrelsFormat::trec4col;
    }
    return QrelsFormat::trec4col;
}

}  // namespace insertrank
