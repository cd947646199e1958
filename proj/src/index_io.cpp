#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "insertrank/bm25.hpp"

// Layout (all integers little-endian):
//   "BMIX1"
//   f64 k1, f64 b
//   u64 document count, then per document:
//     str doc_id, u8 has_title, [str title], str text, u32 token count
//   u64 vocabulary size, then per term:
//     str term, u64 posting count, then (u32 doc, u32 tf) pairs
// where str = u64 byte length followed by the bytes.

namespace insertrank {
namespace {

constexpr std::array<char, 4> kMagic = {'B', 'M', 'I', 'X'};
constexpr char kVersion = '1';

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        char buf[4];
        for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
        out_.write(buf, 4);
    }
    void u64(std::uint64_t v) {
        char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
        out_.write(buf, 8);
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    void bytes(char* dst, std::size_t n) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw DataError("truncated index file");
    }
    std::uint8_t u8() {
        char c;
        bytes(&c, 1);
        return static_cast<std::uint8_t>(c);
    }
    std::uint32_t u32() {
        unsigned char buf[4];
        bytes(reinterpret_cast<char*>(buf), 4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
        return v;
    }
    std::uint64_t u64() {
        unsigned char buf[8];
        bytes(reinterpret_cast<char*>(buf), 8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        auto n = u64();
        if (n > (1ULL << 40)) throw DataError("corrupt index file: string length " + std::to_string(n));
        std::string s(n, '\0');
        if (n) bytes(s.data(), n);
        return s;
    }

private:
    std::istream& in_;
};

}  // namespace

void Bm25Index::write(std::ostream& out) const {
    Writer w(out);
    out.write(kMagic.data(), kMagic.size());
    out.put(kVersion);
    w.f64(params_.k1);
    w.f64(params_.b);
    const auto& docs = corpus_.documents();
    w.u64(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        w.str(docs[i].doc_id);
        w.u8(docs[i].title ? 1 : 0);
        if (docs[i].title) w.str(*docs[i].title);
        w.str(docs[i].text);
        w.u32(doc_lengths_[i]);
    }
    w.u64(terms_.size());
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        w.str(terms_[t]);
        w.u64(postings_[t].size());
        for (const auto& p : postings_[t]) {
            w.u32(p.doc);
            w.u32(p.tf);
        }
    }
    if (!out) throw DataError("failed writing index");
}

Bm25Index Bm25Index::read(std::istream& in) {
    char header[5] = {};
    in.read(header, 5);
    if (in.gcount() < 4 || !std::equal(kMagic.begin(), kMagic.end(), header)) {
        throw IndexFormatError("not a BM25 index file (missing BMIX header)");
    }
    if (in.gcount() < 5 || header[4] != kVersion) {
        throw IndexFormatError("unsupported index version");
    }

    Reader r(in);
    Bm25Index index;
    index.params_.k1 = r.f64();
    index.params_.b = r.f64();
    try {
        index.params_.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("corrupt index file: ") + e.what());
    }

    const auto n = r.u64();
    std::vector<Document> docs;
    docs.reserve(std::min<std::uint64_t>(n, 1u << 20));
    index.doc_lengths_.reserve(docs.capacity());
    for (std::uint64_t i = 0; i < n; ++i) {
        Document d;
        d.doc_id = r.str();
        if (r.u8()) d.title = r.str();
        d.text = r.str();
        docs.push_back(std::move(d));
        index.doc_lengths_.push_back(r.u32());
    }
    index.corpus_ = CorpusStore(std::move(docs));

    const auto vocab = r.u64();
    std::vector<std::uint64_t> tf_sums(n, 0);
    for (std::uint64_t t = 0; t < vocab; ++t) {
        auto term = r.str();
        auto count = r.u64();
        if (count == 0 || count > n) throw DataError("corrupt index file: bad posting count");
        std::vector<Posting> list;
        list.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            Posting p{r.u32(), r.u32()};
            if (p.doc >= n || p.tf == 0 || (!list.empty() && list.back().doc >= p.doc)) {
                throw DataError("corrupt index file: postings for \"" + term + "\" are invalid");
            }
            tf_sums[p.doc] += p.tf;
            list.push_back(p);
        }
        auto [it, inserted] =
            index.term_ids_.try_emplace(term, static_cast<std::uint32_t>(index.terms_.size()));
        if (!inserted) throw DataError("corrupt index file: duplicate term \"" + term + "\"");
        index.terms_.push_back(std::move(term));
        index.postings_.push_back(std::move(list));
    }
    for (std::uint64_t d = 0; d < n; ++d) {
        if (tf_sums[d] != index.doc_lengths_[d]) {
            throw DataError("corrupt index file: term frequencies disagree with document length");
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw DataError("corrupt index file: trailing bytes");
    }
    index.finalize();
    return index;
}

void Bm25Index::save(const std::filesystem::path& path) const {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        write(out);
        out.flush();
        if (!out) throw DataError("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Bm25Index Bm25Index::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return read(in);
}

}  // namespace insertrank
