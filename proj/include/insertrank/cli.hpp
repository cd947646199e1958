#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "insertrank/bm25.hpp"
#include "insertrank/corpus.hpp"
#include "insertrank/llm.hpp"
#include "insertrank/rerank.hpp"
#include "insertrank/run.hpp"

namespace insertrank::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Bad flags or configuration. Maps to exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Provider selection: "mock-identity", "mock-reverse", "mock-oracle" (needs
/// qrels), "mock-scripted" (needs a script) or any name in the HTTP provider
/// registry, optionally extended by a JSON file.
struct ProviderOptions {
    std::string name;
    std::shared_ptr<const Qrels> qrels;
    std::optional<std::filesystem::path> script;
    std::optional<std::filesystem::path> providers_file;
};

/// Throws UsageError for unknown names or missing mock inputs.
std::shared_ptr<llm::ChatProvider> make_provider(const ProviderOptions& options);

struct BatchResult {
    Run run;
    /// JSONL outcome records in query order.
    std::vector<std::string> outcome_lines;
    std::vector<std::string> failed_queries;
};

/// Reranks every query that has a first-stage list, using at most
/// `candidates` entries of it. Queries run concurrently on up to
/// `concurrency` threads; results keep the query order. A failing query is
/// logged and left out of the run.
BatchResult rerank_all(const std::vector<Query>& queries, const Run& first_stage, std::size_t candidates,
                       const CorpusStore& corpus, const RerankConfig& config, llm::ChatClient& client,
                       const llm::ResponseCache* cache, unsigned concurrency);

/// First-stage retrieval for every query, in query order.
Run retrieve_all(const Bm25Index& index, const std::vector<Query>& queries, std::size_t k, unsigned concurrency);

/// Reranked run tag: "insertrank:<score_mode>:<order_mode>".
std::string run_tag(const RerankConfig& config);

struct SplitConfig {
    std::string name;
    std::optional<std::filesystem::path> corpus;
    std::optional<std::filesystem::path> index;
    std::filesystem::path queries;
    std::optional<std::filesystem::path> reformulations;
    std::filesystem::path qrels;
};

/// Everything an ablation sweep needs. Loaded from YAML; relative paths are
/// resolved against the config file's directory.
struct ExperimentConfig {
    std::vector<SplitConfig> splits;
    Bm25Params bm25;
    std::size_t candidates = 100;
    std::size_t eval_k = 10;
    RerankConfig rerank;  // provider, model, topk, template, truncation, precision
    std::vector<ScoreMode> score_modes;
    std::vector<OrderMode::Kind> orders;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path out_dir = "ablation";
    std::optional<std::filesystem::path> cache_dir;  // default <out_dir>/cache
    std::optional<std::filesystem::path> script;
    std::optional<std::filesystem::path> providers_file;
    unsigned concurrency = 4;

    /// Throws UsageError on empty setting lists, a shuffle without seeds,
    /// missing provider/model or splits without data. Throws DataError when
    /// a referenced file does not exist.
    void validate() const;
    /// "key=value" lines for output headers.
    [[nodiscard]] std::vector<std::string> effective_lines() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int main(int argc, char** argv);

}  // namespace insertrank::cli
