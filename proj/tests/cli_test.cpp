#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "insertrank/cli.hpp"
#include "insertrank/eval.hpp"
#include "insertrank/log.hpp"
#include "support/temp_dir.hpp"

#ifndef INSERTRANK_TEST_DATA
#error "INSERTRANK_TEST_DATA must point at tests/data"
#endif

using namespace insertrank;
namespace fs = std::filesystem;

namespace {

const fs::path kToy = fs::path(INSERTRANK_TEST_DATA) / "toy";

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result cli_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        index_ = (tmp_.path() / "toy.idx").string();
        bm25_ = (tmp_.path() / "bm25.trec").string();
        ASSERT_EQ(cli_run({"index", "--corpus", (kToy / "corpus.jsonl").string(), "--out", index_}).code, 0);
        ASSERT_EQ(cli_run({"retrieve", "--index", index_, "--queries", queries(), "--k", "100", "--out", bm25_}).code,
                  0);
    }

    static std::string queries() { return (kToy / "queries.jsonl").string(); }
    static std::string qrels() { return (kToy / "qrels.tsv").string(); }
    std::string path(const std::string& name) const { return (tmp_.path() / name).string(); }

    std::vector<std::string> rerank_args(const std::string& provider, const std::string& out) const {
        return {"rerank", "--index", index_, "--queries", queries(), "--run", bm25_,
                "--provider", provider, "--model", "toy", "--out", out};
    }

    test::TempDir tmp_;
    std::string index_;
    std::string bm25_;
};

}  // namespace

TEST_F(CliTest, IndexReportsStatistics) {
    auto r = cli_run({"index", "--corpus", (kToy / "corpus.jsonl").string(), "--out", path("again.idx")});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("documents\t10"), std::string::npos);
    EXPECT_TRUE(fs::exists(path("again.idx")));
    EXPECT_EQ(slurp(path("again.idx")), slurp(index_));
}

TEST_F(CliTest, IndexUsageAndDataErrors) {
    auto missing = cli_run({"index", "--out", path("x.idx")});
    EXPECT_EQ(missing.code, 2);
    EXPECT_NE(missing.err.find("--corpus"), std::string::npos);
    EXPECT_NE(missing.err.find("Usage"), std::string::npos);

    write(path("dup.jsonl"), "{\"_id\": \"d1\", \"text\": \"a\"}\n{\"_id\": \"d1\", \"text\": \"b\"}\n");
    auto dup = cli_run({"index", "--corpus", path("dup.jsonl"), "--out", path("dup.idx")});
    EXPECT_EQ(dup.code, 1);
    EXPECT_NE(dup.err.find("\"d1\""), std::string::npos);

    EXPECT_EQ(cli_run({}).code, 2);
    EXPECT_EQ(cli_run({"frobnicate"}).code, 2);
}

TEST_F(CliTest, RetrieveRespectsKAndHeader) {
    auto run = read_run(fs::path(bm25_));
    EXPECT_EQ(run.size(), 3u);
    for (const auto& q : run.query_ids()) EXPECT_LE(run.find(q)->size(), 100u);
    EXPECT_EQ(slurp(bm25_).rfind("# command=retrieve\n", 0), 0u);

    ASSERT_EQ(cli_run({"retrieve", "--index", index_, "--queries", queries(), "--k", "2", "--out", path("k2.trec"),
                       "--no-header"})
                  .code,
              0);
    auto k2 = read_run(fs::path(path("k2.trec")));
    for (const auto& q : k2.query_ids()) EXPECT_LE(k2.find(q)->size(), 2u);
    EXPECT_EQ(slurp(path("k2.trec")).front(), 'q');
}

TEST_F(CliTest, RetrieveUsesReformulations) {
    write(path("ref.tsv"), "q3\tinterest rates inflation\n");
    ASSERT_EQ(cli_run({"retrieve", "--index", index_, "--queries", queries(), "--reformulations", path("ref.tsv"),
                       "--k", "1", "--out", path("ref.trec")})
                  .code,
              0);
    auto run = read_run(fs::path(path("ref.trec")));
    EXPECT_EQ(run.doc_ids("q3"), (std::vector<std::string>{"d5"}));
}

TEST_F(CliTest, RetrieveRejectsUnknownIndexVersion) {
    auto bytes = slurp(index_);
    bytes[4] = '9';
    write(path("future.idx"), bytes);
    auto r = cli_run({"retrieve", "--index", path("future.idx"), "--queries", queries(), "--k", "5", "--out",
                      path("o.trec")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("unsupported index version"), std::string::npos);
}

TEST_F(CliTest, IdentityRerankTruncatesFirstStage) {
    auto args = rerank_args("mock-identity", path("id.trec"));
    args.insert(args.end(), {"--score-mode", "raw", "--topk", "3"});
    auto r = cli_run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    auto first = read_run(fs::path(bm25_));
    auto reranked = read_run(fs::path(path("id.trec")));
    for (const auto& q : first.query_ids()) {
        auto docs = first.doc_ids(q);
        docs.resize(std::min<std::size_t>(3, docs.size()));
        EXPECT_EQ(reranked.doc_ids(q), docs) << q;
    }
    EXPECT_NE(slurp(path("id.trec")).find(" insertrank:raw:bm25_desc\n"), std::string::npos);
    auto log = slurp(path("id.trec") + ".outcomes.jsonl");
    EXPECT_EQ(log.rfind("{\"effective_config\":", 0), 0u);
    EXPECT_NE(log.find("\"query_id\":\"q2\""), std::string::npos);
}

TEST_F(CliTest, RerankUsageErrors) {
    auto shuffle = rerank_args("mock-identity", path("s.trec"));
    shuffle.insert(shuffle.end(), {"--order", "shuffle"});
    EXPECT_EQ(cli_run(shuffle).code, 2);

    auto oracle = rerank_args("mock-oracle", path("o.trec"));
    EXPECT_EQ(cli_run(oracle).code, 2);

    auto bad_mode = rerank_args("mock-identity", path("b.trec"));
    bad_mode.insert(bad_mode.end(), {"--score-mode", "loud"});
    EXPECT_EQ(cli_run(bad_mode).code, 2);

    auto unknown = rerank_args("nobody", path("u.trec"));
    EXPECT_EQ(cli_run(unknown).code, 2);

    auto zero = rerank_args("mock-identity", path("z.trec"));
    zero.insert(zero.end(), {"--topk", "0"});
    EXPECT_EQ(cli_run(zero).code, 2);
}

TEST_F(CliTest, RerankResumesFromCacheAndIsByteIdentical) {
    const std::string replies = R"(["[1, 2]", "[2, 1]", "no idea"])";
    write(path("script.json"), replies);
    write(path("empty.json"), "[]");
    auto args = rerank_args("mock-scripted", path("sc.trec"));
    args.insert(args.end(), {"--script", path("script.json"), "--concurrency", "1", "--cache-dir", path("cache")});
    ASSERT_EQ(cli_run(args).code, 0);
    const auto first_run = slurp(path("sc.trec"));
    const auto first_log = slurp(path("sc.trec") + ".outcomes.jsonl");
    EXPECT_NE(first_log.find("\"no_parse\""), std::string::npos);

    // an exhausted script fails on any network call, so success proves every
    // query came from the cache
    args[args.size() - 5] = path("empty.json");
    auto again = cli_run(args);
    ASSERT_EQ(again.code, 0) << again.err;
    EXPECT_EQ(slurp(path("sc.trec")), first_run);
    EXPECT_EQ(slurp(path("sc.trec") + ".outcomes.jsonl"), first_log);
}

TEST_F(CliTest, RerankContinuesPastFailedQueries) {
    write(path("script.json"), R"(["[1]", {"error": "content", "message": "refused"}, "[1]"])");
    auto args = rerank_args("mock-scripted", path("f.trec"));
    args.insert(args.end(), {"--script", path("script.json"), "--concurrency", "1", "--no-cache"});
    log::ScopedWarningCapture warnings;
    auto r = cli_run(args);
    EXPECT_EQ(r.code, 1);
    auto run = read_run(fs::path(path("f.trec")));
    EXPECT_EQ(run.size(), 2u);
    EXPECT_EQ(run.find("q2"), nullptr);
    EXPECT_TRUE(warnings.contains("refused"));
    EXPECT_NE(slurp(path("f.trec") + ".outcomes.jsonl").find("\"error_kind\":\"content\""), std::string::npos);
}

TEST_F(CliTest, EvalPrintsMean) {
    write(path("ideal.trec"),
          "q1 Q0 d3 1 4 t\nq1 Q0 d9 2 3 t\nq1 Q0 d7 3 2 t\nq1 Q0 d1 4 1 t\n"
          "q2 Q0 d5 1 3 t\nq2 Q0 d4 2 2 t\nq2 Q0 d10 3 1 t\n"
          "q3 Q0 d2 1 2 t\nq3 Q0 d8 2 1 t\n");
    auto r = cli_run({"eval", "--run", path("ideal.trec"), "--qrels", qrels(), "--k", "10"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "ndcg@10 1.0000\n");

    auto per = cli_run({"eval", "--run", path("ideal.trec"), "--qrels", qrels(), "--per-query"});
    EXPECT_EQ(per.out, "query_id\tndcg@10\nq1\t1.0000\nq2\t1.0000\nq3\t1.0000\nndcg@10 1.0000\n");
}

TEST_F(CliTest, EvalMissingQueriesAndBadPaths) {
    write(path("partial.trec"), "q1 Q0 d3 1 2 t\n");
    log::ScopedWarningCapture warnings;
    auto r = cli_run({"eval", "--run", path("partial.trec"), "--qrels", qrels()});
    EXPECT_EQ(r.code, 0);
    EXPECT_TRUE(warnings.contains("score 0"));
    EXPECT_EQ(r.out.rfind("ndcg@10 ", 0), 0u);

    EXPECT_EQ(cli_run({"eval", "--run", path("partial.trec"), "--qrels", path("nope.tsv")}).code, 1);
    write(path("broken.trec"), "q1 Q0 d3 1\n");
    EXPECT_EQ(cli_run({"eval", "--run", path("broken.trec"), "--qrels", qrels()}).code, 1);
}

TEST_F(CliTest, ReformulateWritesHydePassages) {
    write(path("script.json"), R"(["leaves reflect green light", "rates cool prices", "mitochondria"])");
    auto r = cli_run({"reformulate", "--queries", queries(), "--provider", "mock-scripted", "--model", "m", "--script",
                      path("script.json"), "--concurrency", "1", "--out", path("hyde.tsv")});
    ASSERT_EQ(r.code, 0) << r.err;
    auto qs = attach_reformulations(load_queries(fs::path(queries()), QueryFormat::jsonl), fs::path(path("hyde.tsv")));
    EXPECT_EQ(qs[0].reformulated, "leaves reflect green light");
    EXPECT_EQ(qs[2].reformulated, "mitochondria");
}

TEST_F(CliTest, AblateBuildsTableAndRepeatsFromCache) {
    const auto out_dir = path("abl");
    auto r = cli_run({"ablate", "--config", (kToy / "ablate.yaml").string(), "--out-dir", out_dir});
    ASSERT_EQ(r.code, 0) << r.err;
    auto tsv = slurp(fs::path(out_dir) / "ablation.tsv");
    EXPECT_NE(tsv.find("Variant\ttoy\n"), std::string::npos);
    EXPECT_NE(tsv.find("\nVanilla\t"), std::string::npos);
    EXPECT_NE(tsv.find("\nRaw BM25\t"), std::string::npos);
    EXPECT_NE(tsv.find("\n0-1 scale\t"), std::string::npos);
    EXPECT_NE(tsv.find("\n0-100 scale\t"), std::string::npos);

    auto again = cli_run({"ablate", "--config", (kToy / "ablate.yaml").string(), "--out-dir", out_dir});
    EXPECT_EQ(again.code, 0);
    EXPECT_EQ(again.out, r.out);
    EXPECT_EQ(slurp(fs::path(out_dir) / "ablation.tsv"), tsv);
}

TEST_F(CliTest, AblateTwoRowSweepAndEmptySettings) {
    const auto toy = kToy.string();
    write(path("two.yaml"), "provider: mock-reverse\nmodel: m\ntopk: 3\nscore_modes: [none, raw]\n"
                            "orders: [bm25_desc]\nsplits:\n  - name: toy\n    corpus: " + toy +
                                "/corpus.jsonl\n    queries: " + toy + "/queries.jsonl\n    qrels: " + toy +
                                "/qrels.tsv\n");
    auto r = cli_run({"ablate", "--config", path("two.yaml"), "--out-dir", path("two")});
    ASSERT_EQ(r.code, 0) << r.err;
    auto tsv = slurp(fs::path(path("two")) / "ablation.tsv");
    std::size_t rows = 0;
    std::istringstream in(tsv);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line[0] != '#') ++rows;
    }
    EXPECT_EQ(rows, 3u);  // header + 2 variants

    write(path("empty.yaml"), "provider: mock-reverse\nmodel: m\nscore_modes: []\norders: [bm25_desc]\n"
                              "splits:\n  - name: toy\n    corpus: " + toy + "/corpus.jsonl\n    queries: " + toy +
                                  "/queries.jsonl\n    qrels: " + toy + "/qrels.tsv\n");
    EXPECT_EQ(cli_run({"ablate", "--config", path("empty.yaml")}).code, 2);

    write(path("noseed.yaml"), "provider: mock-reverse\nmodel: m\nscore_modes: [raw]\norders: [shuffle]\n"
                               "splits:\n  - name: toy\n    corpus: " + toy + "/corpus.jsonl\n    queries: " + toy +
                                   "/queries.jsonl\n    qrels: " + toy + "/qrels.tsv\n");
    EXPECT_EQ(cli_run({"ablate", "--config", path("noseed.yaml")}).code, 2);

    write(path("typo.yaml"), "provider: mock-reverse\nmodle: m\n");
    EXPECT_EQ(cli_run({"ablate", "--config", path("typo.yaml")}).code, 2);
}

TEST_F(CliTest, AblateMarksFailedCells) {
    const auto toy = kToy.string();
    write(path("script.json"), "[]");
    write(path("fail.yaml"), "provider: mock-scripted\nmodel: m\nscore_modes: [none]\norders: [bm25_desc]\n"
                             "splits:\n  - name: toy\n    corpus: " + toy + "/corpus.jsonl\n    queries: " + toy +
                                 "/queries.jsonl\n    qrels: " + toy + "/qrels.tsv\n");
    log::ScopedWarningCapture warnings;
    auto r = cli_run({"ablate", "--config", path("fail.yaml"), "--script", path("script.json"), "--out-dir",
                      path("fail")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("\nVanilla    \xE2\x80\x94\n"), std::string::npos) << r.out;
}
