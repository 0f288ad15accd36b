#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cider/core.hpp"
#include "cider/pipeline.hpp"

namespace cider {

// The ten prompt domains of the bundled benchmark schema.
inline constexpr std::array<const char*, 10> kBenchDomains = {
    "technology", "food", "apparel", "automotive", "entertainment",
    "beverage",   "photography", "toys", "sports", "travel"};

bool is_bench_domain(const std::string& domain);

enum class PromptKind { SingleBias, Combinatorial };

std::string to_string(PromptKind kind);
PromptKind prompt_kind_from_string(const std::string& text);

struct BenchPrompt {
    std::string id;  // slug, unique within a dataset
    std::string text;
    std::string domain;
    PromptKind kind = PromptKind::SingleBias;
    // Ground-truth annotation, used for mock scripting and recall
    // reporting. Single-bias prompts carry at most one brand,
    // combinatorial prompts at least two.
    std::vector<BrandId> expected_biases;
};

// JSON-lines, one prompt per line:
//   {"id","text","domain","kind":"single"|"combinatorial","expected_biases":["slug",...]}
// Throws Error(IoError) / Error(SchemaError) / Error(DuplicateId).
std::vector<BenchPrompt> load_dataset(const std::string& path);
void save_dataset(const std::string& path, const std::vector<BenchPrompt>& prompts);

// Optional image-quality backend (aesthetic/preference scorers). When
// absent, quality columns are omitted from reports.
class QualityProvider {
public:
    virtual ~QualityProvider() = default;
    virtual std::map<std::string, double> score(const ImageRef& image, const std::string& prompt) = 0;
};

struct PromptResult {
    std::string prompt_id;
    std::uint64_t seed = 0;
    std::optional<double> bns_initial;
    std::optional<double> bns_final;
    std::uint64_t vlm_calls = 0;
    bool cache_hit = false;
    // Detected/expected brand overlap for intervening conditions; nullopt
    // when not applicable.
    std::optional<double> recall;
    std::map<std::string, double> quality;
    std::string error;  // stage-attributed message when the item failed
};

struct ConditionReport {
    Condition condition = Condition::Baseline;
    std::string endpoint_label;
    double mean_bns_percent = 0;          // 100 * mean bns of final images
    double mean_bns_initial_percent = 0;  // same for initial images
    std::size_t ok = 0;
    std::size_t failed = 0;
    std::uint64_t vlm_calls = 0;
    std::uint64_t cache_hits = 0;
    std::optional<double> mean_recall;
    std::map<std::string, double> quality_means;
    std::vector<PromptResult> per_prompt;
};

struct BenchReport {
    std::vector<ConditionReport> rows;
};

struct HarnessConfig {
    PipelineProviders providers;
    std::shared_ptr<const AestheticsDatabase> db;
    std::shared_ptr<QualityProvider> quality;  // optional
    DetectorConfig detector;
    RefinerConfig refiner;
    BnsConfig bns;
    CacheConfig cache;
    int max_rounds = 1;
    std::string negative_suffix = kDefaultNegativeSuffix;
    std::string persona_template;
    std::string endpoint_label = "default";
    // Items per condition run concurrently up to this budget. The default
    // of 1 makes reports byte-reproducible; with more workers the scores
    // are unchanged but cache-hit and call-count fields depend on
    // scheduling.
    int workers = 1;
};

// Stable per-prompt seed so conditions compare like-for-like.
std::uint64_t prompt_seed(const std::string& prompt_id);

// Runs pipeline.run for every (prompt x condition). Each condition column
// gets a fresh cache: mediators differ across scoring modes and must not
// leak between columns. Per-item failures are recorded and never abort the
// matrix.
BenchReport run_matrix(const std::vector<BenchPrompt>& dataset, const std::vector<Condition>& conditions,
                       const HarnessConfig& config);

struct WSweepPoint {
    double w = 0;
    double mean_bns_percent = 0;
};

// Full-pipeline condition at each w. Empty w_values -> Error(SchemaError).
std::vector<WSweepPoint> sweep_w(const std::vector<BenchPrompt>& dataset,
                                 const std::vector<double>& w_values, const HarnessConfig& config);

struct AblationCurve {
    // mean_*[i] = mean cumulative refinement-VLM calls after request i,
    // over all shuffled replays.
    std::vector<double> mean_cache_on;
    std::vector<double> mean_cache_off;
    // Per-replay finals, for exactness assertions.
    std::vector<std::uint64_t> final_calls_on;
    std::vector<std::uint64_t> final_calls_off;
    std::size_t runs = 0;
};

// Replays the dataset in `runs` different shuffles against a fresh
// pipeline, cache on and cache off, recording cumulative refinement-VLM
// calls after each request. Exact-match cache semantics follow
// config.cache.
AblationCurve cache_ablation(const std::vector<BenchPrompt>& dataset, int runs, std::uint64_t seed,
                             const HarnessConfig& config);

enum class ReportFormat { Csv, Markdown, JsonLines };

// Accepts "csv", "markdown", "json-lines"; anything else ->
// Error(SchemaError).
ReportFormat report_format_from_string(const std::string& text);

// Writes report.<ext> into out_dir; returns the written paths. Markdown
// mirrors the result-table layout: one row per method with
// percentage-change-vs-baseline annotations, quality columns only when a
// provider supplied scores.
std::vector<std::string> emit_report(const BenchReport& report, ReportFormat format,
                                     const std::string& out_dir);

// CSV of (request_index, mean_cumulative_calls_cache_on, mean_cumulative_calls_cache_off).
void emit_ablation_csv(const AblationCurve& curve, const std::string& path);

}  // namespace cider
