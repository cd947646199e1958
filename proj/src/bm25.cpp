#include "insertrank/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace insertrank {

void Bm25Params::validate() const {
    if (!(k1 >= 0.0) || !std::isfinite(k1)) {
        throw std::invalid_argument("bm25 k1 must be a finite value >= 0");
    }
    if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("bm25 b must lie in [0, 1]");
}

Bm25Index Bm25Index::build(CorpusStore corpus, Bm25Params params, unsigned threads) {
    params.validate();
    Bm25Index index;
    index.corpus_ = std::move(corpus);
    index.params_ = params;

    const auto& docs = index.corpus_.documents();
    const std::size_t n = docs.size();
    if (n > UINT32_MAX) throw std::length_error("corpus exceeds 2^32 documents");

    // Per-document term counts, computed in parallel chunks.
    using TermCounts = std::vector<std::pair<std::string, std::uint32_t>>;
    std::vector<TermCounts> counts(n);
    std::vector<std::uint32_t> lengths(n, 0);
    auto work = [&](std::size_t begin, std::size_t end) {
        std::unordered_map<std::string, std::uint32_t> local;
        for (std::size_t d = begin; d < end; ++d) {
            local.clear();
            auto tokens = tokenize(docs[d].full_text());
            lengths[d] = static_cast<std::uint32_t>(tokens.size());
            // first-occurrence order keeps term ids deterministic
            TermCounts& out = counts[d];
            for (auto& t : tokens) {
                auto [it, inserted] = local.try_emplace(t, static_cast<std::uint32_t>(out.size()));
                if (inserted) {
                    out.emplace_back(std::move(t), 1);
                } else {
                    ++out[it->second].second;
                }
            }
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        work(0, n);
    } else {
        std::vector<std::jthread> pool;
        std::size_t chunk = (n + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            std::size_t begin = t * chunk;
            std::size_t end = std::min(n, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(work, begin, end);
        }
    }

    for (std::size_t d = 0; d < n; ++d) {
        for (auto& [term, tf] : counts[d]) {
            auto [it, inserted] =
                index.term_ids_.try_emplace(term, static_cast<std::uint32_t>(index.terms_.size()));
            if (inserted) {
                index.terms_.push_back(term);
                index.postings_.emplace_back();
            }
            index.postings_[it->second].push_back({static_cast<std::uint32_t>(d), tf});
        }
        counts[d].clear();
        counts[d].shrink_to_fit();
    }
    index.doc_lengths_ = std::move(lengths);
    index.finalize();
    return index;
}

void Bm25Index::finalize() {
    double total = 0.0;
    for (auto len : doc_lengths_) total += len;
    avgdl_ = doc_lengths_.empty() ? 0.0 : total / static_cast<double>(doc_lengths_.size());
}

double Bm25Index::idf(std::size_t df) const {
    const double n = static_cast<double>(doc_count());
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double Bm25Index::term_weight(double term_idf, std::uint32_t tf, std::uint32_t dl) const {
    const double f = tf;
    const double length_ratio = avgdl_ > 0.0 ? static_cast<double>(dl) / avgdl_ : 0.0;
    const double denom = f + params_.k1 * (1.0 - params_.b + params_.b * length_ratio);
    return term_idf * f * (params_.k1 + 1.0) / denom;
}

const std::vector<Posting>* Bm25Index::find_postings(std::string_view term) const {
    auto it = term_ids_.find(std::string(term));
    return it == term_ids_.end() ? nullptr : &postings_[it->second];
}

std::span<const Posting> Bm25Index::postings(std::string_view term) const {
    const auto* list = find_postings(term);
    if (!list) return {};
    return *list;
}

double Bm25Index::score(std::span<const std::string> query_tokens, std::size_t doc_position) const {
    if (doc_position >= doc_count()) {
        throw std::out_of_range("document position " + std::to_string(doc_position) +
                                " outside index of " + std::to_string(doc_count()) + " documents");
    }
    const auto dl = doc_lengths_[doc_position];
    double total = 0.0;
    for (const auto& token : query_tokens) {
        const auto* list = find_postings(token);
        if (!list) continue;
        auto it = std::lower_bound(list->begin(), list->end(), doc_position,
                                   [](const Posting& p, std::size_t d) { return p.doc < d; });
        if (it == list->end() || it->doc != doc_position) continue;
        total += term_weight(idf(list->size()), it->tf, dl);
    }
    return total;
}

std::vector<ScoredCandidate> Bm25Index::retrieve_topk(std::span<const std::string> query_tokens,
                                                      std::size_t k) const {
    if (k < 1) throw std::invalid_argument("k must be >= 1");

    // Term-at-a-time accumulation in query-token order.
    std::vector<double> acc(doc_count(), 0.0);
    std::vector<std::uint32_t> touched;
    for (const auto& token : query_tokens) {
        const auto* list = find_postings(token);
        if (!list) continue;
        const double term_idf = idf(list->size());
        for (const auto& p : *list) {
            if (acc[p.doc] == 0.0) touched.push_back(p.doc);
            acc[p.doc] += term_weight(term_idf, p.tf, doc_lengths_[p.doc]);
        }
    }

    const auto& docs = corpus_.documents();
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (acc[a] != acc[b]) return acc[a] > acc[b];
        return docs[a].doc_id < docs[b].doc_id;
    };

    // Bounded heap: the root is the worst of the current best k.
    std::vector<std::uint32_t> heap;
    heap.reserve(std::min(k, touched.size()));
    for (auto d : touched) {
        if (!(acc[d] > 0.0)) continue;
        if (heap.size() < k) {
            heap.push_back(d);
            std::push_heap(heap.begin(), heap.end(), better);
        } else if (better(d, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), better);
            heap.back() = d;
            std::push_heap(heap.begin(), heap.end(), better);
        }
    }
    std::sort(heap.begin(), heap.end(), better);

    std::vector<ScoredCandidate> out;
    out.reserve(heap.size());
    for (std::size_t i = 0; i < heap.size(); ++i) {
        out.push_back({docs[heap[i]].doc_id, acc[heap[i]], i + 1});
    }
    return out;
}

std::vector<ScoredCandidate> Bm25Index::retrieve_topk(const Query& query, std::size_t k) const {
    auto tokens = tokenize(query.effective_text());
    return retrieve_topk(tokens, k);
}

}  // namespace insertrank
