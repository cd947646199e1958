#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "insertrank/corpus.hpp"
#include "insertrank/log.hpp"

using namespace insertrank;

namespace {

template <typename Fn>
std::string error_of(Fn&& fn) {
    try {
        fn();
    } catch (const DataError& e) {
        return e.what();
    }
    return "<no error>";
}

std::set<std::string> lines_of(const std::string& s) {
    std::set<std::string> out;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) out.insert(line);
    }
    return out;
}

}  // namespace

TEST(LoadCorpus, PreservesIngestionOrder) {
    std::istringstream in(R"({"_id":"d1","text":"a b"})"
                          "\n"
                          R"({"_id":"d2","text":"c"})"
                          "\n");
    auto store = load_corpus(in);
    ASSERT_EQ(store.size(), 2u);
    EXPECT_EQ(store.at(0).doc_id, "d1");
    EXPECT_EQ(store.at(1).doc_id, "d2");
    EXPECT_EQ(store.find("d2"), 1u);
    EXPECT_FALSE(store.find("d3"));
}

TEST(LoadCorpus, EmptyFileIsValid) {
    std::istringstream in("");
    EXPECT_TRUE(load_corpus(in).empty());
}

TEST(LoadCorpus, DuplicateIdNamesTheId) {
    std::istringstream in(R"({"_id":"d1","text":"a"})"
                          "\n"
                          R"({"_id":"d1","text":"b"})");
    auto msg = error_of([&] { load_corpus(in); });
    EXPECT_NE(msg.find("\"d1\""), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
}

TEST(LoadCorpus, MalformedLineNamesLineNumber) {
    std::istringstream in(R"({"_id":"d1","text":"a"})"
                          "\n{not json\n");
    EXPECT_NE(error_of([&] { load_corpus(in); }).find("line 2"), std::string::npos);

    std::istringstream missing(R"({"_id":"d1"})");
    EXPECT_NE(error_of([&] { load_corpus(missing); }).find("\"text\""), std::string::npos);
}

TEST(LoadCorpus, TitleIsOptionalAndPrefixesFullText) {
    std::istringstream in(R"({"_id":"d1","title":"T","text":"body"})"
                          "\n"
                          R"({"_id":"d2","text":"","title":""})");
    auto store = load_corpus(in);
    EXPECT_EQ(store.at(0).full_text(), "T\nbody");
    EXPECT_EQ(store.at(1).full_text(), "");
}

TEST(LoadCorpus, RoundTripsLineSet) {
    const std::string input = R"({"_id":"d1","text":"a b"})"
                              "\n"
                              R"({"_id":"d2","text":"ünïcode \"quoted\"\nline","title":"t"})"
                              "\n"
                              R"({"_id":"d3","text":""})"
                              "\n";
    std::istringstream in(input);
    auto store = load_corpus(in);
    std::ostringstream out;
    write_corpus(store, out);
    std::istringstream again(out.str());
    EXPECT_EQ(load_corpus(again).documents(), store.documents());
    // field order may differ; compare reparsed content line by line
    EXPECT_EQ(lines_of(out.str()).size(), lines_of(input).size());
}

TEST(LoadQueries, ParsesTsvAndJsonl) {
    std::istringstream tsv("q1\thow to count reads\n");
    auto qs = load_queries(tsv, QueryFormat::tsv);
    ASSERT_EQ(qs.size(), 1u);
    EXPECT_EQ(qs[0], (Query{"q1", "how to count reads", std::nullopt}));

    std::istringstream jsonl(R"({"_id":"q2","text":"x"})");
    qs = load_queries(jsonl, QueryFormat::jsonl);
    ASSERT_EQ(qs.size(), 1u);
    EXPECT_EQ(qs[0], (Query{"q2", "x", std::nullopt}));
}

TEST(LoadQueries, WrongColumnCountIsAnError) {
    std::istringstream tsv("q1\tok\nq2\ta\tb\tc\n");
    auto msg = error_of([&] { load_queries(tsv, QueryFormat::tsv); });
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("found 4"), std::string::npos) << msg;

    std::istringstream jsonl(R"({"text":"x"})");
    EXPECT_NE(error_of([&] { load_queries(jsonl, QueryFormat::jsonl); }).find("\"_id\""),
              std::string::npos);
}

TEST(AttachReformulations, AttachesAndValidates) {
    std::vector<Query> qs{{"q1", "orig", std::nullopt}, {"q2", "other", std::nullopt}};
    std::istringstream file("q1\tCoT text\n");
    auto out = attach_reformulations(qs, file);
    EXPECT_EQ(out[0].reformulated, "CoT text");
    EXPECT_FALSE(out[1].reformulated);

    std::istringstream unknown("q9\tsomething\n");
    EXPECT_NE(error_of([&] { attach_reformulations(qs, unknown); }).find("\"q9\""), std::string::npos);

    std::istringstream empty_text("q1\t\n");
    EXPECT_NE(error_of([&] { attach_reformulations(qs, empty_text); }).find("empty"), std::string::npos);

    std::istringstream empty_file("");
    EXPECT_EQ(attach_reformulations(qs, empty_file), qs);
}

TEST(AttachReformulations, IsIdempotentAndUnescapes) {
    std::vector<Query> qs{{"q1", "orig", std::nullopt}};
    const std::string file = "q1\tstep 1\\nstep 2\\ttabbed\n";
    std::istringstream a(file), b(file);
    auto once = attach_reformulations(qs, a);
    auto twice = attach_reformulations(once, b);
    EXPECT_EQ(once, twice);
    EXPECT_EQ(once[0].reformulated, "step 1\nstep 2\ttabbed");

    std::ostringstream out;
    write_reformulations(once, out);
    std::istringstream back(out.str());
    EXPECT_EQ(attach_reformulations(qs, back), once);
}

TEST(LoadQrels, TrecAndTsv) {
    std::istringstream trec("q1 0 d2 1\nq1 0 d3 2\n");
    auto qrels = load_qrels(trec, QrelsFormat::trec4col);
    EXPECT_EQ(qrels.grade("q1", "d2"), 1);
    EXPECT_EQ(qrels.grade("q1", "d3"), 2);
    EXPECT_EQ(qrels.grade("q1", "d9"), 0);
    EXPECT_EQ(qrels.grade("q7", "d2"), 0);

    std::istringstream tsv("query-id\tcorpus-id\tscore\nq1\td2\t1\n");
    qrels = load_qrels(tsv, QrelsFormat::tsv3col);
    EXPECT_EQ(qrels.grade("q1", "d2"), 1);
    EXPECT_EQ(qrels.size(), 1u);
}

TEST(LoadQrels, RejectsNegativeAndNonIntegerGrades) {
    std::istringstream neg("q1 0 d2 -1\n");
    EXPECT_NE(error_of([&] { load_qrels(neg, QrelsFormat::trec4col); }).find("line 1"), std::string::npos);
    std::istringstream frac("q1\td2\t0.5\n");
    EXPECT_NE(error_of([&] { load_qrels(frac, QrelsFormat::tsv3col); }).find("0.5"), std::string::npos);
}

TEST(LoadQrels, DuplicateOverwritesWithWarning) {
    log::ScopedWarningCapture capture;
    std::istringstream dup("q1 0 d2 1\nq1 0 d2 3\n");
    auto qrels = load_qrels(dup, QrelsFormat::trec4col);
    EXPECT_EQ(qrels.grade("q1", "d2"), 3);
    EXPECT_TRUE(capture.contains("duplicate judgment"));
}
