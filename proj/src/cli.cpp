#include "insertrank/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "insertrank/eval.hpp"
#include "insertrank/log.hpp"
#include "insertrank/providers.hpp"
#include "text_util.hpp"

namespace insertrank::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Runs fn(0..n-1) on up to `workers` threads. The first exception thrown by
// any call is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    const auto count = std::min<std::size_t>(std::max(1u, workers), n);
    if (count <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < count; ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);
}

void write_text_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out || !(out << content) || !out.flush()) throw DataError("cannot write " + path.string());
    }
    fs::rename(tmp, path);
}

std::string commented(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) out += "# " + l + "\n";
    return out;
}

std::vector<Query> load_query_set(const fs::path& queries, const std::optional<fs::path>& reformulations) {
    auto qs = load_queries(queries, query_format_for(queries));
    if (reformulations) qs = attach_reformulations(std::move(qs), *reformulations);
    return qs;
}

std::shared_ptr<const Qrels> load_qrels_file(const fs::path& path) {
    if (!fs::exists(path)) throw DataError("cannot open qrels file " + path.string());
    return std::make_shared<const Qrels>(load_qrels(path, detect_qrels_format(path)));
}

std::string opt_string(const std::optional<fs::path>& p) { return p ? p->string() : "none"; }

template <typename T>
std::string opt_value(const std::optional<T>& v) {
    return v ? std::to_string(*v) : "none";
}

std::vector<std::string> rerank_lines(const RerankConfig& c) {
    std::vector<std::string> out{
        "provider=" + c.provider,
        "model=" + c.model,
        "score_mode=" + std::string(to_string(c.score_mode)),
        "order=" + std::string(to_string(c.order_mode.kind)),
        "seed=" + (c.order_mode.kind == OrderMode::Kind::shuffle ? std::to_string(c.order_mode.seed) : "none"),
        "topk=" + std::to_string(c.topk),
        "template=" + std::string(to_string(c.prompt_template)),
        "max_doc_tokens=" + opt_value(c.max_doc_tokens),
        "score_decimals=" + std::to_string(c.precision.raw) + "/" + std::to_string(c.precision.norm01) + "/" +
            std::to_string(c.precision.norm0100),
        "temperature=" + detail::format_fixed(c.temperature, 3),
        "max_output_tokens=" + opt_value(c.max_output_tokens),
        "use_original_query=" + std::string(c.use_original_query ? "true" : "false"),
    };
    return out;
}

std::string json_line(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

}  // namespace

std::shared_ptr<llm::ChatProvider> make_provider(const ProviderOptions& options) {
    const auto& name = options.name;
    if (name == "mock-identity") return std::make_shared<llm::IdentityProvider>();
    if (name == "mock-reverse") return std::make_shared<llm::ReverseProvider>();
    if (name == "mock-oracle") {
        if (!options.qrels) throw UsageError("provider mock-oracle needs --qrels");
        return std::make_shared<llm::OracleProvider>(options.qrels);
    }
    if (name == "mock-scripted") {
        if (!options.script) throw UsageError("provider mock-scripted needs --script");
        return std::make_shared<llm::ScriptedProvider>(llm::load_script(*options.script));
    }
    auto registry = llm::ProviderRegistry::defaults();
    if (options.providers_file) registry.merge_json_file(*options.providers_file);
    const auto* spec = registry.find(name);
    if (!spec) {
        std::string known = "mock-identity, mock-reverse, mock-oracle, mock-scripted";
        for (const auto& n : registry.names()) known += ", " + n;
        throw UsageError("unknown provider \"" + name + "\" (known: " + known + ")");
    }
    return std::make_shared<llm::OpenAICompatibleProvider>(*spec, nullptr, nullptr);
}

std::string run_tag(const RerankConfig& config) {
    return "insertrank:" + std::string(to_string(config.score_mode)) + ":" +
           std::string(to_string(config.order_mode.kind));
}

Run retrieve_all(const Bm25Index& index, const std::vector<Query>& queries, std::size_t k, unsigned concurrency) {
    std::vector<std::vector<ScoredCandidate>> hits(queries.size());
    parallel_for(queries.size(), concurrency, [&](std::size_t i) { hits[i] = index.retrieve_topk(queries[i], k); });
    Run run;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        std::vector<RunEntry> entries;
        entries.reserve(hits[i].size());
        for (const auto& h : hits[i]) entries.push_back({h.doc_id, h.score});
        run.set(queries[i].query_id, std::move(entries));
    }
    return run;
}

BatchResult rerank_all(const std::vector<Query>& queries, const Run& first_stage, std::size_t candidates,
                       const CorpusStore& corpus, const RerankConfig& config, llm::ChatClient& client,
                       const llm::ResponseCache* cache, unsigned concurrency) {
    struct Slot {
        std::optional<RerankOutcome> outcome;
        std::string error;
        std::string error_kind;
    };

    std::vector<const Query*> todo;
    for (const auto& q : queries) {
        if (first_stage.find(q.query_id)) {
            todo.push_back(&q);
        } else {
            log::warn("query \"" + q.query_id + "\" has no first-stage list; skipped");
        }
    }

    std::vector<Slot> slots(todo.size());
    parallel_for(todo.size(), concurrency, [&](std::size_t i) {
        const Query& q = *todo[i];
        const auto& list = *first_stage.find(q.query_id);
        std::vector<ScoredCandidate> pool;
        for (std::size_t r = 0; r < std::min(candidates, list.size()); ++r) {
            pool.push_back({list[r].doc_id, list[r].score, r + 1});
        }
        try {
            slots[i].outcome = rerank_query(q, pool, corpus, config, client, cache);
        } catch (const llm::LlmError& e) {
            slots[i].error = e.what();
            slots[i].error_kind = std::string(llm::to_string(e.kind()));
        } catch (const std::exception& e) {
            slots[i].error = "query " + q.query_id + ": " + e.what();
            slots[i].error_kind = "data";
        }
    });

    BatchResult result;
    for (std::size_t i = 0; i < todo.size(); ++i) {
        const auto& qid = todo[i]->query_id;
        const auto& slot = slots[i];
        json rec{{"query_id", qid}};
        if (!slot.outcome) {
            log::warn(slot.error);
            result.failed_queries.push_back(qid);
            rec["error"] = slot.error;
            rec["error_kind"] = slot.error_kind;
        } else {
            const auto& o = *slot.outcome;
            result.run.set(qid, o.run_entries());
            rec["prompt_digest"] = o.prompt_digest.empty() ? json(nullptr) : json(o.prompt_digest);
            rec["repairs"] = o.repairs;
            rec["raw_response_path"] = cache && !o.prompt_digest.empty()
                                           ? json(cache->raw_response_path(o.prompt_digest).string())
                                           : json(nullptr);
        }
        result.outcome_lines.push_back(json_line(rec));
    }
    return result;
}

// ---------------------------------------------------------------------------
// experiment config

void ExperimentConfig::validate() const {
    if (splits.empty()) throw UsageError("experiment config lists no splits");
    if (score_modes.empty()) throw UsageError("experiment config lists no score modes");
    if (orders.empty()) throw UsageError("experiment config lists no orders");
    if (std::find(orders.begin(), orders.end(), OrderMode::Kind::shuffle) != orders.end() && seeds.empty()) {
        throw UsageError("order shuffle needs at least one seed");
    }
    if (rerank.provider.empty()) throw UsageError("experiment config has no provider");
    if (rerank.model.empty()) throw UsageError("experiment config has no model");
    if (candidates < 1) throw UsageError("candidates must be at least 1");
    if (eval_k < 1) throw UsageError("k must be at least 1");
    try {
        rerank.validate();
        bm25.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    std::vector<std::string> names;
    for (const auto& s : splits) {
        if (s.name.empty()) throw UsageError("every split needs a name");
        if (std::find(names.begin(), names.end(), s.name) != names.end()) {
            throw UsageError("split \"" + s.name + "\" appears twice");
        }
        names.push_back(s.name);
        if (s.corpus.has_value() == s.index.has_value()) {
            throw UsageError("split \"" + s.name + "\" needs exactly one of corpus or index");
        }
        auto need = [&](const fs::path& p) {
            if (!fs::exists(p)) throw DataError("split \"" + s.name + "\": " + p.string() + " does not exist");
        };
        if (s.corpus) need(*s.corpus);
        if (s.index) need(*s.index);
        need(s.queries);
        need(s.qrels);
        if (s.reformulations) need(*s.reformulations);
    }
    if (script && !fs::exists(*script)) throw DataError("script " + script->string() + " does not exist");
}

std::vector<std::string> ExperimentConfig::effective_lines() const {
    std::vector<std::string> out{"command=ablate"};
    for (const auto& s : splits) {
        out.push_back("split." + s.name + "=corpus:" + opt_string(s.corpus) + " index:" + opt_string(s.index) +
                      " queries:" + s.queries.string() + " reformulations:" + opt_string(s.reformulations) +
                      " qrels:" + s.qrels.string());
    }
    out.push_back("bm25.k1=" + detail::format_fixed(bm25.k1, 4));
    out.push_back("bm25.b=" + detail::format_fixed(bm25.b, 4));
    out.push_back("candidates=" + std::to_string(candidates));
    out.push_back("k=" + std::to_string(eval_k));
    for (auto& l : rerank_lines(rerank)) {
        if (l.rfind("score_mode=", 0) == 0 || l.rfind("order=", 0) == 0 || l.rfind("seed=", 0) == 0) continue;
        out.push_back(l);
    }
    std::string modes, ords, sds;
    for (auto m : score_modes) modes += (modes.empty() ? "" : ",") + std::string(to_string(m));
    for (auto o : orders) ords += (ords.empty() ? "" : ",") + std::string(to_string(o));
    for (auto s : seeds) sds += (sds.empty() ? "" : ",") + std::to_string(s);
    out.push_back("score_modes=" + modes);
    out.push_back("orders=" + ords);
    out.push_back("seeds=" + (sds.empty() ? std::string("none") : sds));
    return out;
}

namespace {

template <typename T>
T yaml_as(const YAML::Node& node, const std::string& key) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw UsageError("config key \"" + key + "\" has the wrong type");
    }
}

void reject_unknown(const YAML::Node& node, std::initializer_list<std::string_view> known, const std::string& where) {
    for (const auto& kv : node) {
        auto key = kv.first.as<std::string>();
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw UsageError("unknown key \"" + key + "\" in " + where);
        }
    }
}

}  // namespace

ExperimentConfig load_experiment_config(const fs::path& path) {
    if (!fs::exists(path)) throw DataError("cannot open experiment config " + path.string());
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::Exception& e) {
        throw UsageError("malformed experiment config " + path.string() + ": " + e.what());
    }
    if (!root.IsMap()) throw UsageError("experiment config must be a mapping");
    reject_unknown(root,
                   {"splits", "bm25", "candidates", "k", "provider", "model", "topk", "template", "max_doc_tokens",
                    "temperature", "max_output_tokens", "score_decimals", "use_original_query", "score_modes",
                    "orders", "seeds", "out_dir", "cache_dir", "script", "providers", "concurrency"},
                   "experiment config");

    const fs::path base = path.parent_path();
    auto resolve = [&](const YAML::Node& n, const std::string& key) {
        fs::path p = yaml_as<std::string>(n, key);
        return p.is_absolute() ? p : base / p;
    };

    ExperimentConfig c;
    if (auto splits = root["splits"]) {
        if (!splits.IsSequence()) throw UsageError("\"splits\" must be a list");
        for (const auto& s : splits) {
            reject_unknown(s, {"name", "corpus", "index", "queries", "reformulations", "qrels"}, "a split");
            SplitConfig sc;
            if (!s["name"] || !s["queries"] || !s["qrels"]) {
                throw UsageError("every split needs name, queries and qrels");
            }
            sc.name = yaml_as<std::string>(s["name"], "name");
            if (s["corpus"]) sc.corpus = resolve(s["corpus"], "corpus");
            if (s["index"]) sc.index = resolve(s["index"], "index");
            sc.queries = resolve(s["queries"], "queries");
            if (s["reformulations"]) sc.reformulations = resolve(s["reformulations"], "reformulations");
            sc.qrels = resolve(s["qrels"], "qrels");
            c.splits.push_back(std::move(sc));
        }
    }
    if (auto b = root["bm25"]) {
        reject_unknown(b, {"k1", "b"}, "bm25");
        if (b["k1"]) c.bm25.k1 = yaml_as<double>(b["k1"], "bm25.k1");
        if (b["b"]) c.bm25.b = yaml_as<double>(b["b"], "bm25.b");
    }
    if (root["candidates"]) c.candidates = yaml_as<std::size_t>(root["candidates"], "candidates");
    if (root["k"]) c.eval_k = yaml_as<std::size_t>(root["k"], "k");
    if (root["provider"]) c.rerank.provider = yaml_as<std::string>(root["provider"], "provider");
    if (root["model"]) c.rerank.model = yaml_as<std::string>(root["model"], "model");
    if (root["topk"]) c.rerank.topk = yaml_as<std::size_t>(root["topk"], "topk");
    try {
        if (root["template"]) c.rerank.prompt_template = parse_template(yaml_as<std::string>(root["template"], "template"));
        if (auto modes = root["score_modes"]) {
            for (const auto& m : modes) c.score_modes.push_back(parse_score_mode(yaml_as<std::string>(m, "score_modes")));
        }
        if (auto orders = root["orders"]) {
            for (const auto& o : orders) c.orders.push_back(parse_order_kind(yaml_as<std::string>(o, "orders")));
        }
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (root["max_doc_tokens"] && !root["max_doc_tokens"].IsNull()) {
        c.rerank.max_doc_tokens = yaml_as<std::size_t>(root["max_doc_tokens"], "max_doc_tokens");
    }
    if (root["temperature"]) c.rerank.temperature = yaml_as<double>(root["temperature"], "temperature");
    if (root["max_output_tokens"] && !root["max_output_tokens"].IsNull()) {
        c.rerank.max_output_tokens = yaml_as<int>(root["max_output_tokens"], "max_output_tokens");
    }
    if (auto d = root["score_decimals"]) {
        reject_unknown(d, {"raw", "norm01", "norm0100"}, "score_decimals");
        if (d["raw"]) c.rerank.precision.raw = yaml_as<int>(d["raw"], "score_decimals.raw");
        if (d["norm01"]) c.rerank.precision.norm01 = yaml_as<int>(d["norm01"], "score_decimals.norm01");
        if (d["norm0100"]) c.rerank.precision.norm0100 = yaml_as<int>(d["norm0100"], "score_decimals.norm0100");
    }
    if (root["use_original_query"]) {
        c.rerank.use_original_query = yaml_as<bool>(root["use_original_query"], "use_original_query");
    }
    if (auto seeds = root["seeds"]) {
        for (const auto& s : seeds) c.seeds.push_back(yaml_as<std::uint64_t>(s, "seeds"));
    }
    if (root["out_dir"]) c.out_dir = resolve(root["out_dir"], "out_dir");
    if (root["cache_dir"]) c.cache_dir = resolve(root["cache_dir"], "cache_dir");
    if (root["script"]) c.script = resolve(root["script"], "script");
    if (root["providers"]) c.providers_file = resolve(root["providers"], "providers");
    if (root["concurrency"]) c.concurrency = yaml_as<unsigned>(root["concurrency"], "concurrency");
    return c;
}

// ---------------------------------------------------------------------------
// commands

namespace {

struct IndexArgs {
    fs::path corpus, out;
    double k1 = 0.9, b = 0.4;
    unsigned threads = 0;
};

int cmd_index(const IndexArgs& a, std::ostream& out) {
    Bm25Params params{a.k1, a.b};
    try {
        params.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto started = std::chrono::steady_clock::now();
    auto corpus = load_corpus(a.corpus);
    unsigned threads = a.threads ? a.threads : std::max(1u, std::thread::hardware_concurrency());
    auto index = Bm25Index::build(std::move(corpus), params, threads);
    index.save(a.out);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    out << "documents\t" << index.doc_count() << "\n"
        << "avgdl\t" << detail::format_fixed(index.avgdl(), 4) << "\n"
        << "vocabulary\t" << index.vocabulary_size() << "\n"
        << "build_seconds\t" << detail::format_fixed(secs, 3) << "\n";
    return kExitOk;
}

struct RetrieveArgs {
    fs::path index, queries, out;
    std::optional<fs::path> reformulations;
    std::size_t k = 100;
    unsigned concurrency = 4;
    bool no_header = false;
};

int cmd_retrieve(const RetrieveArgs& a, std::ostream& out) {
    if (a.k < 1) throw UsageError("--k must be at least 1");
    auto index = Bm25Index::load(a.index);
    auto queries = load_query_set(a.queries, a.reformulations);
    auto run = retrieve_all(index, queries, a.k, a.concurrency);
    std::vector<std::string> header;
    if (!a.no_header) {
        header = {"command=retrieve",
                  "index=" + a.index.string(),
                  "queries=" + a.queries.string(),
                  "reformulations=" + opt_string(a.reformulations),
                  "k=" + std::to_string(a.k),
                  "bm25.k1=" + detail::format_fixed(index.params().k1, 4),
                  "bm25.b=" + detail::format_fixed(index.params().b, 4)};
    }
    write_run(run, a.out, "bm25", header);
    out << "retrieved\t" << run.size() << " queries\n";
    return kExitOk;
}

struct RerankArgs {
    fs::path index, queries, run, out;
    std::optional<fs::path> reformulations, qrels, script, providers, cache_dir, outcomes;
    std::string provider, model, score_mode = "raw", order = "bm25_desc", prompt_template = "bright";
    std::optional<std::uint64_t> seed;
    std::size_t topk = 10, candidates = 100;
    std::optional<std::size_t> max_doc_tokens;
    std::optional<int> score_decimals, max_output_tokens;
    double temperature = 0.0;
    bool use_original_query = false, no_cache = false, no_header = false;
    unsigned concurrency = 4;
};

int cmd_rerank(const RerankArgs& a, std::ostream& out) {
    RerankConfig cfg;
    try {
        cfg.score_mode = parse_score_mode(a.score_mode);
        cfg.order_mode.kind = parse_order_kind(a.order);
        cfg.prompt_template = parse_template(a.prompt_template);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (cfg.order_mode.kind == OrderMode::Kind::shuffle) {
        if (!a.seed) throw UsageError("--order shuffle requires --seed");
        cfg.order_mode.seed = *a.seed;
    }
    cfg.topk = a.topk;
    cfg.max_doc_tokens = a.max_doc_tokens;
    if (a.score_decimals) {
        cfg.precision.raw = cfg.precision.norm01 = cfg.precision.norm0100 = *a.score_decimals;
    }
    cfg.use_original_query = a.use_original_query;
    cfg.provider = a.provider;
    cfg.model = a.model;
    cfg.temperature = a.temperature;
    cfg.max_output_tokens = a.max_output_tokens;
    if (a.candidates < 1) throw UsageError("--candidates must be at least 1");
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    ProviderOptions popts{a.provider, nullptr, a.script, a.providers};
    if (a.qrels) popts.qrels = load_qrels_file(*a.qrels);
    auto provider = make_provider(popts);

    auto index = Bm25Index::load(a.index);
    auto queries = load_query_set(a.queries, a.reformulations);
    auto first_stage = read_run(a.run);

    std::optional<llm::ResponseCache> cache;
    if (!a.no_cache) {
        cache.emplace(a.cache_dir ? *a.cache_dir : (a.out.has_parent_path() ? a.out.parent_path() : fs::path(".")) / "cache");
    }
    llm::ChatClient client(provider, llm::RetryPolicy{}, {}, std::max(1u, a.concurrency));
    auto result = rerank_all(queries, first_stage, a.candidates, index.corpus(), cfg, client,
                             cache ? &*cache : nullptr, a.concurrency);

    std::vector<std::string> header;
    if (!a.no_header) {
        header = {"command=rerank",
                  "index=" + a.index.string(),
                  "queries=" + a.queries.string(),
                  "reformulations=" + opt_string(a.reformulations),
                  "run=" + a.run.string(),
                  "candidates=" + std::to_string(a.candidates)};
        for (auto& l : rerank_lines(cfg)) header.push_back(std::move(l));
    }
    write_run(result.run, a.out, run_tag(cfg), header);

    auto outcomes_path = a.outcomes ? *a.outcomes : fs::path(a.out.string() + ".outcomes.jsonl");
    std::string log_text = json_line(json{{"effective_config", header}}) + "\n";
    for (const auto& l : result.outcome_lines) log_text += l + "\n";
    write_text_file(outcomes_path, log_text);

    out << "reranked\t" << result.run.size() << " queries\n";
    if (!result.failed_queries.empty()) {
        out << "failed\t" << result.failed_queries.size() << " queries\n";
        return kExitFailure;
    }
    return kExitOk;
}

struct EvalArgs {
    fs::path run, qrels;
    std::size_t k = 10;
    bool per_query = false;
    std::string gain = "linear";
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (a.k < 1) throw UsageError("--k must be at least 1");
    const Gain gain = a.gain == "exponential" ? Gain::exponential : Gain::linear;
    auto qrels = load_qrels_file(a.qrels);
    auto run = read_run(a.run);
    auto report = evaluate_run(run, *qrels, a.k, gain);
    const auto metric = "ndcg@" + std::to_string(a.k);
    if (a.per_query) {
        out << "query_id\t" << metric << "\n";
        for (const auto& [qid, v] : report.per_query) out << qid << "\t" << detail::format_fixed(v, 4) << "\n";
    }
    out << metric << " " << detail::format_fixed(report.mean, 4) << "\n";
    return kExitOk;
}

struct ReformulateArgs {
    fs::path queries, out;
    std::optional<fs::path> script, providers, cache_dir;
    std::string provider, model;
    std::string prompt_template = HydeConfig{}.prompt_template;
    std::optional<int> max_output_tokens;
    double temperature = 0.0;
    bool no_cache = false;
    unsigned concurrency = 4;
};

int cmd_reformulate(const ReformulateArgs& a, std::ostream& out) {
    if (a.prompt_template.find("{query}") == std::string::npos) {
        throw UsageError("--template must contain {query}");
    }
    auto provider = make_provider({a.provider, nullptr, a.script, a.providers});
    auto queries = load_queries(a.queries, query_format_for(a.queries));
    std::optional<llm::ResponseCache> cache;
    if (!a.no_cache) {
        cache.emplace(a.cache_dir ? *a.cache_dir : (a.out.has_parent_path() ? a.out.parent_path() : fs::path(".")) / "cache");
    }
    llm::ChatClient client(provider, llm::RetryPolicy{}, {}, std::max(1u, a.concurrency));
    HydeConfig cfg{a.provider, a.model, a.prompt_template, a.temperature, a.max_output_tokens};

    std::vector<std::string> errors(queries.size());
    parallel_for(queries.size(), a.concurrency, [&](std::size_t i) {
        try {
            queries[i].reformulated = hyde_reformulate(queries[i], cfg, client, cache ? &*cache : nullptr);
        } catch (const llm::LlmError& e) {
            errors[i] = e.what();
        }
    });
    std::size_t failed = 0;
    for (const auto& e : errors) {
        if (!e.empty()) {
            log::warn(e);
            ++failed;
        }
    }

    std::ostringstream body;
    body << commented({"command=reformulate", "queries=" + a.queries.string(), "provider=" + a.provider,
                       "model=" + a.model, "template=" + detail::escape_tsv(a.prompt_template),
                       "temperature=" + detail::format_fixed(a.temperature, 3),
                       "max_output_tokens=" + opt_value(a.max_output_tokens)});
    write_reformulations(queries, body);
    write_text_file(a.out, body.str());
    out << "reformulated\t" << (queries.size() - failed) << " queries\n";
    return failed ? kExitFailure : kExitOk;
}

struct AblateArgs {
    fs::path config;
    std::optional<std::string> provider, model;
    std::optional<fs::path> out_dir, cache_dir, script, providers;
    std::optional<unsigned> concurrency;
};

std::string cell_name(ScoreMode mode, OrderMode::Kind order, std::optional<std::uint64_t> seed) {
    std::string s = std::string(to_string(mode)) + "_" + std::string(to_string(order));
    if (seed) s += "_seed" + std::to_string(*seed);
    return s;
}

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
    auto cfg = load_experiment_config(a.config);
    if (a.provider) cfg.rerank.provider = *a.provider;
    if (a.model) cfg.rerank.model = *a.model;
    if (a.out_dir) cfg.out_dir = *a.out_dir;
    if (a.cache_dir) cfg.cache_dir = *a.cache_dir;
    if (a.script) cfg.script = *a.script;
    if (a.providers) cfg.providers_file = *a.providers;
    if (a.concurrency) cfg.concurrency = *a.concurrency;
    cfg.validate();

    const auto header = cfg.effective_lines();
    llm::ResponseCache cache(cfg.cache_dir ? *cfg.cache_dir : cfg.out_dir / "cache");
    AblationTable table;
    bool any_failed = false;

    for (const auto& split : cfg.splits) {
        auto index = split.index ? Bm25Index::load(*split.index)
                                 : Bm25Index::build(load_corpus(*split.corpus), cfg.bm25,
                                                    std::max(1u, std::thread::hardware_concurrency()));
        auto queries = load_query_set(split.queries, split.reformulations);
        auto qrels = load_qrels_file(split.qrels);
        auto first_stage = retrieve_all(index, queries, cfg.candidates, cfg.concurrency);
        const auto split_dir = cfg.out_dir / split.name;
        write_run(first_stage, split_dir / "bm25.trec", "bm25", header);

        auto provider = make_provider({cfg.rerank.provider, qrels, cfg.script, cfg.providers_file});
        llm::ChatClient client(provider, llm::RetryPolicy{}, {}, std::max(1u, cfg.concurrency));

        for (auto order : cfg.orders) {
            std::vector<std::optional<std::uint64_t>> seeds{std::nullopt};
            if (order == OrderMode::Kind::shuffle) seeds.assign(cfg.seeds.begin(), cfg.seeds.end());
            for (const auto& seed : seeds) {
                for (auto mode : cfg.score_modes) {
                    RerankConfig rc = cfg.rerank;
                    rc.score_mode = mode;
                    rc.order_mode = {order, seed.value_or(0)};
                    std::string row = variant_label(mode, order);
                    if (seed && cfg.seeds.size() > 1) row += " [seed " + std::to_string(*seed) + "]";

                    std::optional<EvalReport> report;
                    try {
                        auto result = rerank_all(queries, first_stage, cfg.candidates, index.corpus(), rc, client,
                                                 &cache, cfg.concurrency);
                        const auto name = cell_name(mode, order, seed);
                        auto cell_header = header;
                        cell_header.push_back("split=" + split.name);
                        for (auto& l : rerank_lines(rc)) cell_header.push_back(std::move(l));
                        write_run(result.run, split_dir / (name + ".trec"), run_tag(rc), cell_header);
                        std::string log_text = json_line(json{{"effective_config", cell_header}}) + "\n";
                        for (const auto& l : result.outcome_lines) log_text += l + "\n";
                        write_text_file(split_dir / (name + ".outcomes.jsonl"), log_text);
                        if (result.failed_queries.empty()) {
                            report = evaluate_run(result.run, *qrels, cfg.eval_k);
                        } else {
                            log::warn(split.name + " / " + row + ": " + std::to_string(result.failed_queries.size()) +
                                      " queries failed; cell left empty");
                        }
                    } catch (const llm::LlmError& e) {
                        log::warn(split.name + " / " + row + ": " + e.what());
                    }
                    if (!report) any_failed = true;
                    table.add(row, split.name, report);
                }
            }
        }
    }

    const auto text = table.to_text();
    write_text_file(cfg.out_dir / "ablation.txt", commented(header) + text);
    write_text_file(cfg.out_dir / "ablation.tsv", commented(header) + table.to_tsv());
    out << "NDCG@" << cfg.eval_k << "\n" << text;
    return any_failed ? kExitFailure : kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"BM25 retrieval with score-aware listwise LLM reranking", "insertrank"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every command");

    IndexArgs ia;
    auto* index = app.add_subcommand("index", "Build a BM25 index from a JSONL corpus");
    index->add_option("--corpus", ia.corpus, "Corpus JSONL (_id, title, text)")->required();
    index->add_option("--out", ia.out, "Index file to write")->required();
    index->add_option("--k1", ia.k1, "BM25 k1")->capture_default_str();
    index->add_option("--b", ia.b, "BM25 b")->capture_default_str();
    index->add_option("--threads", ia.threads, "Tokenizer threads (0 = all cores)");

    RetrieveArgs ra;
    auto* retrieve = app.add_subcommand("retrieve", "Write a first-stage BM25 run");
    retrieve->add_option("--index", ra.index, "Index file")->required();
    retrieve->add_option("--queries", ra.queries, "Queries (.jsonl or TSV)")->required();
    retrieve->add_option("--reformulations", ra.reformulations, "TSV of query_id and reformulated text");
    retrieve->add_option("--k", ra.k, "Documents per query")->capture_default_str();
    retrieve->add_option("--out", ra.out, "Run file to write")->required();
    retrieve->add_option("--concurrency", ra.concurrency, "Queries processed in parallel")->capture_default_str();
    retrieve->add_flag("--no-header", ra.no_header, "Omit the effective-config comment lines");

    RerankArgs rr;
    auto* rerank = app.add_subcommand("rerank", "Rerank a first-stage run with an LLM");
    rerank->add_option("--index", rr.index, "Index file (supplies document texts)")->required();
    rerank->add_option("--queries", rr.queries, "Queries (.jsonl or TSV)")->required();
    rerank->add_option("--reformulations", rr.reformulations, "TSV of query_id and reformulated text");
    rerank->add_flag("--use-original-query", rr.use_original_query, "Prompt with the original query text");
    rerank->add_option("--run", rr.run, "First-stage run")->required();
    rerank->add_option("--candidates", rr.candidates, "Candidates per query taken from the run")->capture_default_str();
    rerank->add_option("--provider", rr.provider, "Provider name")->required();
    rerank->add_option("--model", rr.model, "Model name")->required();
    rerank->add_option("--score-mode", rr.score_mode, "none, raw, norm01 or norm0100")
        ->check(CLI::IsMember({"none", "raw", "norm01", "norm0100"}))
        ->capture_default_str();
    rerank->add_option("--order", rr.order, "bm25_desc or shuffle")
        ->check(CLI::IsMember({"bm25_desc", "shuffle"}))
        ->capture_default_str();
    rerank->add_option("--seed", rr.seed, "Shuffle seed (required with --order shuffle)");
    rerank->add_option("--topk", rr.topk, "Ranked documents requested per query")->capture_default_str();
    rerank->add_option("--max-doc-tokens", rr.max_doc_tokens, "Whitespace tokens kept per document");
    rerank->add_option("--template", rr.prompt_template, "bright or r2med")
        ->check(CLI::IsMember({"bright", "r2med"}))
        ->capture_default_str();
    rerank->add_option("--score-decimals", rr.score_decimals, "Override printed score precision");
    rerank->add_option("--temperature", rr.temperature, "Sampling temperature")->capture_default_str();
    rerank->add_option("--max-output-tokens", rr.max_output_tokens, "Completion token limit");
    rerank->add_option("--qrels", rr.qrels, "Judgments (mock-oracle only)");
    rerank->add_option("--script", rr.script, "Reply script (mock-scripted only)");
    rerank->add_option("--providers", rr.providers, "JSON file adding or overriding HTTP providers");
    rerank->add_option("--cache-dir", rr.cache_dir, "Response cache (default: <out dir>/cache)");
    rerank->add_flag("--no-cache", rr.no_cache, "Do not read or write the response cache");
    rerank->add_option("--outcomes", rr.outcomes, "Outcome log (default: <out>.outcomes.jsonl)");
    rerank->add_option("--out", rr.out, "Reranked run to write")->required();
    rerank->add_option("--concurrency", rr.concurrency, "Queries in flight")->capture_default_str();
    rerank->add_flag("--no-header", rr.no_header, "Omit the effective-config comment lines");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Mean NDCG@k of a run");
    eval->add_option("--run", ea.run, "Run file")->required();
    eval->add_option("--qrels", ea.qrels, "Judgments (TREC 4-column or BEIR TSV)")->required();
    eval->add_option("--k", ea.k, "Cutoff")->capture_default_str();
    eval->add_flag("--per-query", ea.per_query, "Also print one TSV row per query");
    eval->add_option("--gain", ea.gain, "linear or exponential")
        ->check(CLI::IsMember({"linear", "exponential"}))
        ->capture_default_str();

    ReformulateArgs fa;
    auto* reformulate = app.add_subcommand("reformulate", "Generate hypothetical-document query reformulations");
    reformulate->add_option("--queries", fa.queries, "Queries (.jsonl or TSV)")->required();
    reformulate->add_option("--provider", fa.provider, "Provider name")->required();
    reformulate->add_option("--model", fa.model, "Model name")->required();
    reformulate->add_option("--template", fa.prompt_template, "Prompt with a {query} placeholder")
        ->capture_default_str();
    reformulate->add_option("--temperature", fa.temperature, "Sampling temperature")->capture_default_str();
    reformulate->add_option("--max-output-tokens", fa.max_output_tokens, "Completion token limit");
    reformulate->add_option("--script", fa.script, "Reply script (mock-scripted only)");
    reformulate->add_option("--providers", fa.providers, "JSON file adding or overriding HTTP providers");
    reformulate->add_option("--cache-dir", fa.cache_dir, "Response cache (default: <out dir>/cache)");
    reformulate->add_flag("--no-cache", fa.no_cache, "Do not read or write the response cache");
    reformulate->add_option("--out", fa.out, "Reformulation TSV to write")->required();
    reformulate->add_option("--concurrency", fa.concurrency, "Queries in flight")->capture_default_str();

    AblateArgs aa;
    auto* ablate = app.add_subcommand("ablate", "Sweep score modes and orders and tabulate NDCG");
    ablate->add_option("--config", aa.config, "Experiment YAML")->required();
    ablate->add_option("--provider", aa.provider, "Override the provider");
    ablate->add_option("--model", aa.model, "Override the model");
    ablate->add_option("--out-dir", aa.out_dir, "Override the output directory");
    ablate->add_option("--cache-dir", aa.cache_dir, "Override the cache directory");
    ablate->add_option("--script", aa.script, "Override the reply script");
    ablate->add_option("--providers", aa.providers, "Override the provider registry file");
    ablate->add_option("--concurrency", aa.concurrency, "Override the concurrency");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return kExitUsage;
    }

    try {
        if (*index) return cmd_index(ia, out);
        if (*retrieve) return cmd_retrieve(ra, out);
        if (*rerank) return cmd_rerank(rr, out);
        if (*eval) return cmd_eval(ea, out);
        if (*reformulate) return cmd_reformulate(fa, out);
        if (*ablate) return cmd_ablate(aa, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

int main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace insertrank::cli
