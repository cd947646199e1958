#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "insertrank/bm25.hpp"
#include "insertrank/cli.hpp"
#include "insertrank/corpus.hpp"
#include "insertrank/eval.hpp"
#include "insertrank/llm.hpp"
#include "insertrank/rerank.hpp"
#include "insertrank/run.hpp"

namespace py = pybind11;
using namespace insertrank;

namespace {

// Python-side runs and qrels are plain dicts.
using PyRun = std::map<std::string, std::vector<std::pair<std::string, double>>>;
using PyQrels = std::map<std::string, std::map<std::string, int>>;

Run to_run(const PyRun& in) {
    Run run;
    for (const auto& [qid, entries] : in) {
        std::vector<RunEntry> list;
        for (const auto& [doc, score] : entries) list.push_back({doc, score});
        run.set(qid, std::move(list));
    }
    return run;
}

Qrels to_qrels(const PyQrels& in) {
    Qrels q;
    for (const auto& [qid, docs] : in) {
        for (const auto& [doc, grade] : docs) q.set(qid, doc, grade);
    }
    return q;
}

RerankConfig make_config(const std::string& provider, const std::string& model, const std::string& score_mode,
                         const std::string& order, std::optional<std::uint64_t> seed, std::size_t topk,
                         std::optional<std::size_t> max_doc_tokens, const std::string& prompt_template) {
    RerankConfig cfg;
    cfg.provider = provider;
    cfg.model = model;
    cfg.score_mode = parse_score_mode(score_mode);
    if (parse_order_kind(order) == OrderMode::Kind::shuffle) {
        if (!seed) throw std::invalid_argument("order \"shuffle\" needs a seed");
        cfg.order_mode = OrderMode::shuffle(*seed);
    }
    cfg.topk = topk;
    cfg.max_doc_tokens = max_doc_tokens;
    cfg.prompt_template = parse_template(prompt_template);
    cfg.validate();
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "BM25 retrieval, score-injected listwise reranking and NDCG evaluation";

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

    py::class_<Document>(m, "Document")
        .def(py::init([](std::string doc_id, std::string text, std::optional<std::string> title) {
                 return Document{std::move(doc_id), std::move(title), std::move(text)};
             }),
             py::arg("doc_id"), py::arg("text"), py::arg("title") = py::none())
        .def_readonly("doc_id", &Document::doc_id)
        .def_readonly("title", &Document::title)
        .def_readonly("text", &Document::text);

    py::class_<Query>(m, "Query")
        .def(py::init([](std::string query_id, std::string text, std::optional<std::string> reformulated) {
                 return Query{std::move(query_id), std::move(text), std::move(reformulated)};
             }),
             py::arg("query_id"), py::arg("text"), py::arg("reformulated") = py::none())
        .def_readonly("query_id", &Query::query_id)
        .def_readonly("text", &Query::text)
        .def_readonly("reformulated", &Query::reformulated);

    py::class_<ScoredCandidate>(m, "Candidate")
        .def(py::init<std::string, double, std::size_t>(), py::arg("doc_id"), py::arg("score"),
             py::arg("first_stage_rank"))
        .def_readonly("doc_id", &ScoredCandidate::doc_id)
        .def_readonly("score", &ScoredCandidate::score)
        .def_readonly("first_stage_rank", &ScoredCandidate::first_stage_rank)
        .def("__eq__", [](const ScoredCandidate& a, const ScoredCandidate& b) { return a == b; })
        .def("__repr__", [](const ScoredCandidate& c) {
            std::ostringstream s;
            s << "Candidate(" << c.doc_id << ", " << c.score << ", " << c.first_stage_rank << ")";
            return s.str();
        });

    py::class_<Bm25Index>(m, "Index")
        .def_static(
            "build",
            [](std::vector<Document> docs, double k1, double b, unsigned threads) {
                return Bm25Index::build(CorpusStore(std::move(docs)), Bm25Params{k1, b}, threads);
            },
            py::arg("documents"), py::arg("k1") = 0.9, py::arg("b") = 0.4, py::arg("threads") = 1,
            py::call_guard<py::gil_scoped_release>())
        .def_static(
            "from_corpus",
            [](const std::filesystem::path& path, double k1, double b, unsigned threads) {
                return Bm25Index::build(load_corpus(path), Bm25Params{k1, b}, threads);
            },
            py::arg("path"), py::arg("k1") = 0.9, py::arg("b") = 0.4, py::arg("threads") = 1)
        .def_static("load", &Bm25Index::load, py::arg("path"))
        .def("save", &Bm25Index::save, py::arg("path"))
        .def(
            "retrieve",
            [](const Bm25Index& index, const std::string& query, std::size_t k) {
                return index.retrieve_topk(Query{"", query, std::nullopt}, k);
            },
            py::arg("query"), py::arg("k") = 100)
        .def(
            "score",
            [](const Bm25Index& index, const std::string& query, const std::string& doc_id) {
                auto pos = index.corpus().find(doc_id);
                if (!pos) throw py::key_error(doc_id);
                auto tokens = tokenize(query);
                return index.score(tokens, *pos);
            },
            py::arg("query"), py::arg("doc_id"))
        .def_property_readonly("doc_count", &Bm25Index::doc_count)
        .def_property_readonly("avgdl", &Bm25Index::avgdl)
        .def_property_readonly("vocabulary_size", &Bm25Index::vocabulary_size)
        .def_property_readonly("k1", [](const Bm25Index& i) { return i.params().k1; })
        .def_property_readonly("b", [](const Bm25Index& i) { return i.params().b; });

    m.def("tokenize", &tokenize, py::arg("text"));

    m.def(
        "normalize_scores",
        [](const std::vector<double>& scores, const std::string& mode) {
            return normalize_scores(scores, parse_score_mode(mode));
        },
        py::arg("scores"), py::arg("mode"));

    m.def(
        "display_scores",
        [](const std::vector<double>& scores, const std::string& mode, int raw, int norm01, int norm0100) {
            return display_scores(scores, parse_score_mode(mode), ScorePrecision{raw, norm01, norm0100});
        },
        py::arg("scores"), py::arg("mode"), py::arg("raw_decimals") = 2, py::arg("norm01_decimals") = 3,
        py::arg("norm0100_decimals") = 1);

    m.def(
        "order_candidates",
        [](const std::vector<ScoredCandidate>& cands, const std::string& order, std::optional<std::uint64_t> seed) {
            if (parse_order_kind(order) == OrderMode::Kind::bm25_desc) {
                return order_candidates(cands, OrderMode::bm25_desc());
            }
            if (!seed) throw std::invalid_argument("order \"shuffle\" needs a seed");
            return order_candidates(cands, OrderMode::shuffle(*seed));
        },
        py::arg("candidates"), py::arg("order") = "bm25_desc", py::arg("seed") = py::none());

    m.def("per_query_seed", &per_query_seed, py::arg("seed"), py::arg("query_id"));

    m.def(
        "build_prompt",
        [](const std::string& query, const std::vector<std::pair<std::string, std::optional<std::string>>>& docs,
           std::size_t topk, const std::string& tmpl) {
            std::vector<PromptDocument> pd;
            for (const auto& [text, score] : docs) pd.push_back({text, score});
            return build_prompt(query, pd, topk, parse_template(tmpl));
        },
        py::arg("query"), py::arg("documents"), py::arg("topk") = 10, py::arg("template") = "bright",
        "documents: list of (text, printed score or None)");

    m.def(
        "parse_ranking",
        [](const std::string& raw, std::size_t n, std::size_t topk, std::optional<std::vector<std::size_t>> fallback) {
            std::vector<std::size_t> fb;
            if (fallback) {
                fb = *fallback;
            } else {
                for (std::size_t i = 1; i <= n; ++i) fb.push_back(i);
            }
            auto r = parse_ranking(raw, n, topk, fb);
            return py::make_tuple(r.ranking, r.repairs);
        },
        py::arg("raw"), py::arg("n"), py::arg("topk"), py::arg("fallback") = py::none(),
        "Returns (ranking, repairs) with 1-based positions.");

    m.def(
        "render_prompt",
        [](const Bm25Index& index, const Query& query, const std::vector<ScoredCandidate>& cands,
           const std::string& score_mode, const std::string& order, std::optional<std::uint64_t> seed,
           std::size_t topk, std::optional<std::size_t> max_doc_tokens, const std::string& tmpl) {
            auto cfg = make_config("none", "none", score_mode, order, seed, topk, max_doc_tokens, tmpl);
            return rerank_request(query, cands, index.corpus(), cfg).messages.at(0).content;
        },
        py::arg("index"), py::arg("query"), py::arg("candidates"), py::arg("score_mode") = "raw",
        py::arg("order") = "bm25_desc", py::arg("seed") = py::none(), py::arg("topk") = 10,
        py::arg("max_doc_tokens") = py::none(), py::arg("template") = "bright");

    m.def(
        "rerank",
        [](const Bm25Index& index, const Query& query, const std::vector<ScoredCandidate>& cands,
           const std::string& provider, const std::string& model, const std::string& score_mode,
           const std::string& order, std::optional<std::uint64_t> seed, std::size_t topk,
           std::optional<std::size_t> max_doc_tokens, const std::string& tmpl, std::optional<PyQrels> qrels,
           std::optional<std::filesystem::path> script, std::optional<std::filesystem::path> cache_dir) {
            auto cfg = make_config(provider, model, score_mode, order, seed, topk, max_doc_tokens, tmpl);
            cli::ProviderOptions opts{provider, nullptr, script, std::nullopt};
            if (qrels) opts.qrels = std::make_shared<const Qrels>(to_qrels(*qrels));
            llm::ChatClient client(cli::make_provider(opts));
            std::optional<llm::ResponseCache> cache;
            if (cache_dir) cache.emplace(*cache_dir);
            auto out = rerank_query(query, cands, index.corpus(), cfg, client, cache ? &*cache : nullptr);
            py::dict d;
            d["query_id"] = out.query_id;
            d["doc_ids"] = out.doc_ids;
            d["ranking"] = out.ranking;
            d["repairs"] = out.repairs;
            d["raw_response"] = out.raw_response;
            d["prompt"] = out.prompt;
            d["prompt_digest"] = out.prompt_digest;
            d["cached"] = out.cached;
            std::vector<std::pair<std::string, double>> entries;
            for (const auto& e : out.run_entries()) entries.emplace_back(e.doc_id, e.score);
            d["run"] = entries;
            return d;
        },
        py::arg("index"), py::arg("query"), py::arg("candidates"), py::arg("provider"), py::arg("model") = "mock",
        py::arg("score_mode") = "raw", py::arg("order") = "bm25_desc", py::arg("seed") = py::none(),
        py::arg("topk") = 10, py::arg("max_doc_tokens") = py::none(), py::arg("template") = "bright",
        py::arg("qrels") = py::none(), py::arg("script") = py::none(), py::arg("cache_dir") = py::none());

    m.def(
        "ndcg",
        [](const std::vector<std::string>& ranking, const std::map<std::string, int>& judgments, std::size_t k,
           const std::string& gain) {
            return ndcg_at_k(ranking, judgments, k, gain == "exponential" ? Gain::exponential : Gain::linear);
        },
        py::arg("ranking"), py::arg("judgments"), py::arg("k") = 10, py::arg("gain") = "linear");

    m.def(
        "evaluate",
        [](const PyRun& run, const PyQrels& qrels, std::size_t k) {
            auto report = evaluate_run(to_run(run), to_qrels(qrels), k);
            py::dict d;
            d["k"] = report.k;
            d["mean"] = report.mean;
            d["per_query"] = report.per_query;
            d["missing_queries"] = report.missing_queries;
            return d;
        },
        py::arg("run"), py::arg("qrels"), py::arg("k") = 10,
        "run: {qid: [(doc_id, score), ...]}, qrels: {qid: {doc_id: grade}}");

    m.def(
        "read_run",
        [](const std::filesystem::path& path) {
            auto run = read_run(path);
            PyRun out;
            for (const auto& qid : run.query_ids()) {
                auto& list = out[qid];
                for (const auto& e : *run.find(qid)) list.emplace_back(e.doc_id, e.score);
            }
            return out;
        },
        py::arg("path"));

    m.def(
        "cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a CLI subcommand in-process. Returns (exit_code, stdout, stderr).");
}
