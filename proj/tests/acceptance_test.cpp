// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "insertrank/bm25.hpp"
#include "insertrank/cli.hpp"
#include "insertrank/eval.hpp"
#include "insertrank/log.hpp"
#include "insertrank/providers.hpp"
#include "insertrank/rerank.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace insertrank;
namespace fs = std::filesystem;

namespace {

const fs::path kData = INSERTRANK_TEST_DATA;

struct Check {
    bool ok = true;
    std::string detail;

    void fail(const std::string& why) {
        if (ok) detail = why;
        ok = false;
    }
};

double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

llm::ChatClient instant_client(std::shared_ptr<llm::ChatProvider> p) {
    return llm::ChatClient(std::move(p), llm::RetryPolicy{}, [](std::chrono::milliseconds) {});
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// A random labelled retrieval problem: corpus over a small vocabulary,
// queries drawn from it and graded judgments.
struct Dataset {
    CorpusStore corpus;
    std::vector<std::vector<std::string>> doc_tokens;
    std::vector<Query> queries;
    std::vector<std::vector<std::string>> query_tokens;
    Qrels qrels;
};

Dataset random_dataset(std::mt19937_64& rng, std::size_t max_docs, std::size_t max_vocab, std::size_t queries) {
    auto pick = [&](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    Dataset d;
    const std::size_t n_docs = pick(1, max_docs);
    const std::size_t vocab = pick(1, max_vocab);
    for (std::size_t i = 0; i < n_docs; ++i) {
        std::vector<std::string> toks;
        const std::size_t len = pick(1, 20);
        std::string text;
        for (std::size_t t = 0; t < len; ++t) {
            toks.push_back("w" + std::to_string(pick(0, vocab - 1)));
            text += (t ? " " : "") + toks.back();
        }
        d.corpus.add({"doc" + std::to_string(i), std::nullopt, text});
        d.doc_tokens.push_back(std::move(toks));
    }
    for (std::size_t q = 0; q < queries; ++q) {
        std::vector<std::string> toks;
        const std::size_t len = pick(1, 6);
        std::string text;
        for (std::size_t t = 0; t < len; ++t) {
            // occasionally a term no document contains
            toks.push_back(pick(0, 9) == 0 ? "unseen" : "w" + std::to_string(pick(0, vocab - 1)));
            text += (t ? " " : "") + toks.back();
        }
        const std::string qid = "q" + std::to_string(q);
        d.queries.push_back({qid, text, std::nullopt});
        d.query_tokens.push_back(std::move(toks));
        for (std::size_t i = 0; i < n_docs; ++i) {
            if (pick(0, 3) == 0) d.qrels.set(qid, "doc" + std::to_string(i), static_cast<int>(pick(0, 2)));
        }
    }
    return d;
}

// ---------------------------------------------------------------------------

Check bm25_oracle() {
    Check c;
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240501);
    std::size_t compared = 0;
    for (int corpus = 0; corpus < 500 && c.ok; ++corpus) {
        auto d = random_dataset(rng, 50, 30, 10);
        oracle::BruteForceBm25 brute;
        for (const auto& doc : d.corpus.documents()) brute.ids.push_back(doc.doc_id);
        brute.docs = d.doc_tokens;
        auto index = Bm25Index::build(std::move(d.corpus));
        for (std::size_t q = 0; q < d.queries.size(); ++q) {
            const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 60)(rng);
            auto got = index.retrieve_topk(d.queries[q], k);
            auto want = brute.topk(d.query_tokens[q], k);
            if (got.size() != want.size()) {
                c.fail("corpus " + std::to_string(corpus) + ": result size " + std::to_string(got.size()) + " vs " +
                       std::to_string(want.size()));
                break;
            }
            for (std::size_t i = 0; i < got.size(); ++i) {
                // Scores within the tolerance count as tied. Two summation orders can
                // split such a tie by one ulp and flip the doc_id tie-break.
                bool same_doc = got[i].doc_id == want[i].first;
                if (!same_doc) {
                    const auto pos = static_cast<std::size_t>(
                        std::find(brute.ids.begin(), brute.ids.end(), got[i].doc_id) - brute.ids.begin());
                    same_doc = std::abs(brute.score(d.query_tokens[q], pos) - want[i].second) <= 1e-9;
                }
                if (!same_doc || std::abs(got[i].score - want[i].second) > 1e-9) {
                    c.fail("corpus " + std::to_string(corpus) + " rank " + std::to_string(i + 1) + ": " +
                           got[i].doc_id + " " + fmt("%.12f", got[i].score) + " vs " + want[i].first + " " +
                           fmt("%.12f", want[i].second));
                    break;
                }
                ++compared;
            }
        }
    }
    const double secs = seconds_since(start);
    if (c.ok && secs >= 30.0) c.fail("took " + fmt("%.1f", secs) + " s");
    if (c.ok) c.detail = std::to_string(compared) + " ranked entries matched, " + fmt("%.2f", secs) + " s";
    return c;
}

Check ndcg_oracle() {
    Check c;
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::string> hand_ranking{"d9", "d1"};
    const double hand = ndcg_at_k(hand_ranking, {{"d1", 1}}, 10);
    if (std::abs(hand - 1.0 / std::log2(3.0)) > 1e-12 || std::abs(hand - 0.6309297535714575) > 1e-12) {
        c.fail("hand case gave " + fmt("%.16f", hand));
    }
    std::mt19937_64 rng(77);
    std::vector<std::string> pool{"d0", "d1", "d2", "d3", "d4", "d5", "d6", "d7", "d8", "d9"};
    double worst = 0.0;
    for (int i = 0; i < 1000 && c.ok; ++i) {
        std::map<std::string, int> judged;
        const auto n_judged = std::uniform_int_distribution<int>(0, 8)(rng);
        std::vector<std::string> shuffled = pool;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        for (int j = 0; j < n_judged; ++j) judged[shuffled[j]] = std::uniform_int_distribution<int>(0, 2)(rng);
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        shuffled.resize(std::uniform_int_distribution<std::size_t>(0, 8)(rng));
        const auto k = std::uniform_int_distribution<std::size_t>(1, 10)(rng);
        const double got = ndcg_at_k(shuffled, judged, k);
        const double want = oracle::enumerated_ndcg(shuffled, judged, k);
        worst = std::max(worst, std::abs(got - want));
        if (std::abs(got - want) > 1e-12) c.fail("instance " + std::to_string(i) + ": " + fmt("%.15f", got) +
                                                 " vs " + fmt("%.15f", want));
    }
    const double secs = seconds_since(start);
    if (c.ok && secs >= 10.0) c.fail("took " + fmt("%.1f", secs) + " s");
    if (c.ok) c.detail = "1000 instances, max error " + fmt("%.1e", worst) + ", hand case " + fmt("%.4f", hand);
    return c;
}

struct Fixture {
    Bm25Index index;
    std::vector<Query> queries;
    Qrels qrels;
};

std::vector<Fixture> e2e_fixtures() {
    std::vector<Fixture> out;
    auto toy = kData / "toy";
    out.push_back({Bm25Index::build(load_corpus(toy / "corpus.jsonl")),
                   load_queries(toy / "queries.jsonl", QueryFormat::jsonl),
                   load_qrels(toy / "qrels.tsv", QrelsFormat::tsv3col)});
    std::mt19937_64 rng(5);
    for (int i = 0; i < 20; ++i) {
        auto d = random_dataset(rng, 50, 12, 5);
        out.push_back({Bm25Index::build(std::move(d.corpus)), std::move(d.queries), std::move(d.qrels)});
    }
    return out;
}

RerankConfig mock_config(const std::string& provider, ScoreMode mode, OrderMode order, std::size_t topk) {
    RerankConfig cfg;
    cfg.provider = provider;
    cfg.model = "mock";
    cfg.score_mode = mode;
    cfg.order_mode = order;
    cfg.topk = topk;
    return cfg;
}

constexpr ScoreMode kModes[] = {ScoreMode::none, ScoreMode::raw, ScoreMode::norm01, ScoreMode::norm0100};

Check identity_end_to_end() {
    Check c;
    auto client = instant_client(std::make_shared<llm::IdentityProvider>());
    std::size_t queries = 0;
    for (const auto& f : e2e_fixtures()) {
        for (auto mode : kModes) {
            for (std::size_t topk : {3u, 10u}) {
                auto cfg = mock_config("mock-identity", mode, OrderMode::bm25_desc(), topk);
                insertrank::Run first, reranked;
                for (const auto& q : f.queries) {
                    auto pool = f.index.retrieve_topk(q, 20);
                    std::vector<RunEntry> fs_entries;
                    for (const auto& p : pool) fs_entries.push_back({p.doc_id, p.score});
                    first.set(q.query_id, fs_entries);
                    auto out = rerank_query(q, pool, f.index.corpus(), cfg, client, nullptr);
                    reranked.set(q.query_id, out.run_entries());
                    auto expect = first.doc_ids(q.query_id);
                    if (expect.size() > topk) expect.resize(topk);
                    if (out.doc_ids != expect) c.fail("order differs for " + q.query_id);
                    ++queries;
                }
                for (std::size_t k = 1; k <= topk; ++k) {
                    auto a = evaluate_run(first, f.qrels, k);
                    auto b = evaluate_run(reranked, f.qrels, k);
                    if (std::abs(a.mean - b.mean) > 1e-12) c.fail("NDCG@" + std::to_string(k) + " differs");
                }
            }
        }
    }
    if (c.ok) c.detail = std::to_string(queries) + " reranked queries equal first stage truncated to topk";
    return c;
}

Check oracle_end_to_end() {
    Check c;
    std::size_t queries = 0;
    for (const auto& f : e2e_fixtures()) {
        auto qrels = std::make_shared<const Qrels>(f.qrels);
        auto client = instant_client(std::make_shared<llm::OracleProvider>(qrels));
        for (auto mode : kModes) {
            for (auto order : {OrderMode::bm25_desc(), OrderMode::shuffle(11)}) {
                auto cfg = mock_config("mock-oracle", mode, order, 10);
                for (const auto& q : f.queries) {
                    auto pool = f.index.retrieve_topk(q, 20);
                    if (pool.empty()) continue;
                    auto out = rerank_query(q, pool, f.index.corpus(), cfg, client, nullptr);
                    auto ideal = pool;
                    std::stable_sort(ideal.begin(), ideal.end(), [&](const auto& a, const auto& b) {
                        int ga = f.qrels.grade(q.query_id, a.doc_id), gb = f.qrels.grade(q.query_id, b.doc_id);
                        if (ga != gb) return ga > gb;
                        return a.first_stage_rank < b.first_stage_rank;
                    });
                    std::vector<std::string> ideal_ids;
                    for (std::size_t i = 0; i < std::min<std::size_t>(10, ideal.size()); ++i) {
                        ideal_ids.push_back(ideal[i].doc_id);
                    }
                    const auto& judged = f.qrels.judgments(q.query_id);
                    const double got = ndcg_at_k(out.doc_ids, judged, 10);
                    const double want = ndcg_at_k(ideal_ids, judged, 10);
                    if (std::abs(got - want) > 1e-12) {
                        c.fail(q.query_id + ": " + fmt("%.12f", got) + " vs ideal " + fmt("%.12f", want));
                    }
                    ++queries;
                }
            }
        }
    }
    if (c.ok) c.detail = std::to_string(queries) + " queries reach the grade-sorted ideal NDCG@10";
    return c;
}

Check prompt_snapshot() {
    Check c;
    CorpusStore corpus;
    corpus.add({"a", std::nullopt, "Earth's axis is tilted about 23.4 degrees relative to its orbit."});
    corpus.add({"b", std::nullopt, "The distance between Earth and the Sun changes slightly during the year."});
    corpus.add({"c", std::nullopt, "Seasons are caused by the tilt of the axis, not by distance."});
    std::vector<ScoredCandidate> cands{{"a", 12.5, 1}, {"b", 8.25, 2}, {"c", 3.0, 3}};
    Query q{"q1", "Why do we have seasons on Earth?", std::nullopt};
    const std::string sentence(kRetrieverSentence);
    int compared = 0;
    for (auto tmpl : {PromptTemplate::bright, PromptTemplate::r2med}) {
        for (auto mode : kModes) {
            auto cfg = mock_config("mock-identity", mode, OrderMode::bm25_desc(), 10);
            cfg.prompt_template = tmpl;
            auto prompt = rerank_request(q, cands, corpus, cfg).messages.at(0).content;
            const auto name = std::string(to_string(tmpl)) + "_" + std::string(to_string(mode)) + ".txt";
            const auto golden = slurp(kData / "golden" / name);
            if (golden.empty()) c.fail("missing golden " + name);
            if (prompt != golden) c.fail(name + " differs from rendered prompt");
            const bool scored = mode != ScoreMode::none;
            if ((prompt.find(sentence) != std::string::npos) != scored) c.fail(name + ": sentence coupling");
            if ((prompt.find(" BM25 score: ") != std::string::npos) != scored) c.fail(name + ": score coupling");
            if (scored && prompt.find("\n[2]. The distance between Earth and the Sun changes slightly during the "
                                      "year. BM25 score: ") == std::string::npos) {
                c.fail(name + ": line shape");
            }
            ++compared;
        }
    }
    if (c.ok) c.detail = std::to_string(compared) + " prompts byte-match golden files";
    return c;
}

Check parser_robustness() {
    Check c;
    auto fb = [](std::size_t n) {
        std::vector<std::size_t> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = i + 1;
        return v;
    };
    struct Example {
        std::string raw;
        std::size_t n, topk;
        std::vector<std::size_t> ranking;
        std::vector<std::string> repairs;
    };
    const std::vector<Example> examples{
        {"```json\n[3, 1, 2]\n```", 3, 3, {3, 1, 2}, {}},
        {"I think [2, 2, 9, 1] json follows", 3, 3, {2, 1, 3}, {"dup", "oob", "fill"}},
        {"no list here", 4, 2, {1, 2}, {"no_parse"}},
    };
    for (const auto& e : examples) {
        auto f = fb(e.n);
        auto got = parse_ranking(e.raw, e.n, e.topk, f);
        if (got.ranking != e.ranking || got.repairs != e.repairs) c.fail("example \"" + e.raw + "\"");
    }

    std::mt19937_64 rng(99);
    auto pick = [&](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    const std::string alphabet = "[]0123456789,- \n\t`jsonabc.-+eE\"{}";
    const std::set<std::string> tags{"oob", "dup", "fill", "no_parse"};
    for (int i = 0; i < 10000 && c.ok; ++i) {
        std::string s;
        switch (i % 3) {
            case 0:  // arbitrary bytes
                for (std::size_t j = pick(0, 200); j > 0; --j) s.push_back(static_cast<char>(pick(0, 255)));
                break;
            case 1:  // bracket soup
                for (std::size_t j = pick(0, 80); j > 0; --j) s.push_back(alphabet[pick(0, alphabet.size() - 1)]);
                break;
            default: {  // well-formed arrays with hostile values
                s = "text [";
                for (std::size_t j = pick(0, 30); j > 0; --j) {
                    s += std::to_string(static_cast<long long>(pick(0, 40)) - 5);
                    if (j > 1) s += ", ";
                }
                s += "] tail";
                if (pick(0, 1)) s += " [99999999999999999999999, 1]";
            }
        }
        const std::size_t n = pick(1, 20);
        const std::size_t topk = pick(1, 25);
        auto order = fb(n);
        std::shuffle(order.begin(), order.end(), rng);
        auto r = parse_ranking(s, n, topk, order);
        std::set<std::size_t> seen(r.ranking.begin(), r.ranking.end());
        if (r.ranking.size() != std::min(n, topk)) c.fail("wrong length on fuzz case " + std::to_string(i));
        if (seen.size() != r.ranking.size()) c.fail("duplicate on fuzz case " + std::to_string(i));
        for (auto p : r.ranking) {
            if (p < 1 || p > n) c.fail("out of range on fuzz case " + std::to_string(i));
        }
        for (const auto& t : r.repairs) {
            if (!tags.count(t)) c.fail("unknown repair tag " + t);
        }
    }
    if (c.ok) c.detail = "10000 fuzz strings valid, 3 repair examples exact";
    return c;
}

Check normalization_properties() {
    Check c;
    std::mt19937_64 rng(1234);
    auto pick = [&](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    for (int i = 0; i < 1000 && c.ok; ++i) {
        std::vector<double> raw(pick(1, 50));
        const bool flat = i % 10 == 0;
        const double flat_value = std::uniform_real_distribution<double>(0, 40)(rng);
        for (auto& v : raw) {
            if (flat) {
                v = flat_value;
            } else if (pick(0, 4) == 0) {
                v = static_cast<double>(pick(0, 5));  // force ties
            } else {
                v = std::uniform_real_distribution<double>(0, 40)(rng);
            }
        }
        auto n01 = normalize_scores(raw, ScoreMode::norm01);
        auto n100 = normalize_scores(raw, ScoreMode::norm0100);
        auto d01 = *display_scores(raw, ScoreMode::norm01);
        auto d100 = *display_scores(raw, ScoreMode::norm0100);
        for (std::size_t a = 0; a < raw.size(); ++a) {
            if (std::abs(n100[a] - 100.0 * n01[a]) > 1e-12) c.fail("0-100 is not 100x the 0-1 value");
            if (flat && (d01[a] != "1.000" || d100[a] != "100.0")) c.fail("flat list not mapped to the top");
            for (std::size_t b = 0; b < raw.size(); ++b) {
                auto sign = [](double x, double y) { return (x > y) - (x < y); };
                if (sign(raw[a], raw[b]) != sign(n01[a], n01[b]) || sign(raw[a], raw[b]) != sign(n100[a], n100[b])) {
                    c.fail("normalization changed the order");
                }
                // printed values may merge neighbours by rounding but never invert them
                if (raw[a] > raw[b] && (std::stod(d01[a]) < std::stod(d01[b]) || std::stod(d100[a]) < std::stod(d100[b]))) {
                    c.fail("printed order inverted");
                }
                if (raw[a] == raw[b] && (d01[a] != d01[b] || d100[a] != d100[b])) c.fail("tie not preserved");
            }
        }
    }
    if (c.ok) c.detail = "1000 lists: order and ties preserved, 0-100 = 100 x 0-1, flat lists at the top";
    return c;
}

Check shuffle_properties() {
    Check c;
    std::vector<ScoredCandidate> ten;
    for (int i = 0; i < 10; ++i) ten.push_back({"d" + std::to_string(i), 10.0 - i * 0.7, static_cast<std::size_t>(i + 1)});
    std::map<std::string, double> own;
    for (const auto& x : ten) own[x.doc_id] = x.score;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        auto a = order_candidates(ten, OrderMode::shuffle(seed));
        if (a != order_candidates(ten, OrderMode::shuffle(seed))) c.fail("seed " + std::to_string(seed) + " not deterministic");
        for (const auto& x : a) {
            if (own.at(x.doc_id) != x.score) c.fail("score detached from its document");
        }
        std::set<std::string> ids;
        for (const auto& x : a) ids.insert(x.doc_id);
        if (ids.size() != ten.size()) c.fail("not a permutation");
    }

    std::vector<ScoredCandidate> four{{"a", 4, 1}, {"b", 3, 2}, {"c", 2, 3}, {"d", 1, 4}};
    std::map<std::string, int> counts;
    const int trials = 10000;
    for (std::uint64_t seed = 0; seed < static_cast<std::uint64_t>(trials); ++seed) {
        std::string key;
        for (const auto& x : order_candidates(four, OrderMode::shuffle(seed))) key += x.doc_id;
        ++counts[key];
    }
    double worst = 0.0;
    if (counts.size() != 24) c.fail(std::to_string(counts.size()) + " of 24 permutations seen");
    for (const auto& [perm, n] : counts) {
        const double dev = std::abs(static_cast<double>(n) / trials - 1.0 / 24.0);
        worst = std::max(worst, dev);
        if (dev > 0.01) c.fail(perm + " frequency off by " + fmt("%.4f", dev));
    }
    if (c.ok) c.detail = "deterministic, scores attached, 24 permutations, max deviation " + fmt("%.4f", worst);
    return c;
}

Check ablation_shape() {
    Check c;
    test::TempDir tmp;
    const auto toy = (kData / "toy").string();
    std::string yaml = "provider: mock-reverse\nmodel: fixture\ntopk: 5\ncandidates: 8\nk: 10\n"
                       "score_modes: [none, raw, norm01, norm0100]\norders: [bm25_desc]\nsplits:\n";
    for (const char* split : {"toy_a", "toy_b"}) {
        yaml += std::string("  - name: ") + split + "\n    corpus: " + toy + "/corpus.jsonl\n    queries: " + toy +
                "/queries.jsonl\n    qrels: " + toy + "/qrels.tsv\n";
    }
    std::ofstream(tmp.path() / "ablate.yaml") << yaml;
    std::ostringstream out, err;
    const std::vector<std::string> args{"ablate", "--config", (tmp.path() / "ablate.yaml").string(), "--out-dir",
                                        (tmp.path() / "out").string()};
    int code = cli::run(args, out, err);
    if (code != 0) {
        c.fail("exit " + std::to_string(code) + ": " + err.str());
        return c;
    }
    std::vector<std::vector<std::string>> rows;
    std::istringstream tsv(slurp(tmp.path() / "out" / "ablation.tsv"));
    for (std::string line; std::getline(tsv, line);) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, '\t');) cells.push_back(cell);
        rows.push_back(cells);
    }
    const std::vector<std::string> header{"Variant", "toy_a", "toy_b", "Avg"};
    const std::vector<std::string> labels{"Vanilla", "Raw BM25", "0-1 scale", "0-100 scale"};
    if (rows.size() != 5 || rows[0] != header) {
        c.fail("unexpected table layout");
        return c;
    }
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (rows[r + 1].size() != 4 || rows[r + 1][0] != labels[r]) c.fail("row " + std::to_string(r + 1));
        for (std::size_t col = 1; col < rows[r + 1].size(); ++col) {
            const auto& v = rows[r + 1][col];
            if (v.size() < 4 || (v[0] != '.' && v.rfind("1.", 0) != 0)) c.fail("cell \"" + v + "\" is not a metric");
        }
    }
    std::ostringstream out2, err2;
    if (cli::run(args, out2, err2) != 0 || out2.str() != out.str()) c.fail("rerun produced a different table");
    if (c.ok) c.detail = "4 variant rows x (2 splits + Avg), identical on rerun";
    return c;
}

}  // namespace

int main() {
    // keep warnings from the fixtures out of the report
    log::set_warning_sink([](std::string_view) {});

    struct Criterion {
        const char* name;
        std::function<Check()> run;
    };
    const std::vector<Criterion> criteria{
        {"1 BM25 oracle equivalence", bm25_oracle},
        {"2 NDCG oracle equivalence", ndcg_oracle},
        {"3 end-to-end identity", identity_end_to_end},
        {"4 end-to-end oracle", oracle_end_to_end},
        {"5 prompt snapshot", prompt_snapshot},
        {"6 parser robustness", parser_robustness},
        {"7 normalization properties", normalization_properties},
        {"8 shuffle properties", shuffle_properties},
        {"9 ablation table shape", ablation_shape},
    };
    int failures = 0;
    for (const auto& crit : criteria) {
        Check result;
        try {
            result = crit.run();
        } catch (const std::exception& e) {
            result.fail(std::string("threw: ") + e.what());
        }
        std::printf("%s  %s: %s\n", result.ok ? "PASS" : "FAIL", crit.name, result.detail.c_str());
        if (!result.ok) ++failures;
    }
    std::printf("%s  10 extended benchmark check: documented only, needs a manually downloaded split\n", "SKIP");
    std::fflush(stdout);
    return failures == 0 ? 0 : 1;
}
