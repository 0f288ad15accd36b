#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cider/config.hpp"
#include "cider/error.hpp"
#include "cider/util.hpp"

namespace fs = std::filesystem;
using namespace cider;

namespace {

// Exit taxonomy: 1 = configuration/usage/file problems, 2 = provider
// failures, 3 = internal invariant violations.
int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::ProviderUnavailable:
        case ErrorKind::MalformedVlmOutput:
        case ErrorKind::BiasMismatch:
        case ErrorKind::ScoreOutOfRange:
            return 2;
        case ErrorKind::IoError:
        case ErrorKind::SchemaVersionMismatch:
        case ErrorKind::CorruptFile:
        case ErrorKind::SchemaError:
        case ErrorKind::DuplicateId:
        case ErrorKind::ConfigError:
        case ErrorKind::EmptyExemplars:
        case ErrorKind::EmptyInput:
            return 1;
        case ErrorKind::DimensionMismatch:
        case ErrorKind::ZeroNorm:
        case ErrorKind::SourceBiasMismatch:
        case ErrorKind::Internal:
            return 3;
    }
    return 3;
}

struct GlobalFlags {
    std::optional<std::string> config_path;
    std::optional<std::string> provider_mode;
    std::optional<std::string> mock_script;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    bool json = false;
    bool print_config = false;
    int verbosity = 0;
};

AppConfig effective_config(const GlobalFlags& flags) {
    AppConfig config = load_app_config(flags.config_path);
    if (flags.provider_mode) config.provider_mode = *flags.provider_mode;
    if (flags.mock_script) config.mock_script_path = *flags.mock_script;
    if (flags.out_dir) config.out_dir = *flags.out_dir;
    if (config.provider_mode != "mock" && config.provider_mode != "remote")
        raise(ErrorKind::ConfigError, "providers.mode must be \"mock\" or \"remote\"");
    return config;
}

ImageRef image_from_path(const std::string& path) {
    if (!fs::exists(path)) raise(ErrorKind::IoError, "image file not found: " + path);
    ImageRef image;
    image.id = fs::path(path).stem().string();
    image.path = path;
    return image;
}

std::vector<Condition> parse_conditions(const std::vector<std::string>& names) {
    std::vector<Condition> out;
    for (const auto& name : names) out.push_back(condition_from_string(name));
    return out;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) raise(ErrorKind::IoError, "cannot create output directory " + dir + ": " + ec.message());
}

int cmd_run(const GlobalFlags& flags, const std::string& prompt_text, const std::string& condition_name,
            std::optional<double> w_override, int max_rounds_override) {
    AppConfig config = effective_config(flags);
    if (w_override) config.refiner.w = *w_override;
    if (max_rounds_override > 0) config.max_rounds = max_rounds_override;
    Condition condition = condition_from_string(condition_name);

    ProviderRuntime runtime = build_providers(config);
    const bool intervening = condition == Condition::CiderNoScoring || condition == Condition::CiderFull;
    std::string persona = intervening ? resolve_persona(config) : std::string("unused");

    DetectorConfig detector = config.detector;
    if (!config.label_map_path.empty()) detector.label_to_brand = load_label_map(config.label_map_path);

    auto db = resolve_database(config);
    auto cache = resolve_cache(config);
    Pipeline pipeline(runtime.providers, db, cache, detector, config.refiner, config.bns, persona);

    PipelineConfig pc;
    pc.condition = condition;
    pc.max_rounds = config.max_rounds;
    pc.seed = flags.seed.value_or(0);
    pc.negative_suffix = config.negative_suffix;

    RunRecord record = pipeline.run(make_prompt(prompt_text), pc);

    ensure_out_dir(config.out_dir);
    const std::string record_name =
        "run-" + util::to_hex(util::fnv1a64(prompt_text + "\x1f" + std::to_string(pc.seed) + "\x1f" +
                                            to_string(condition))) +
        ".json";
    const std::string record_path = config.out_dir + "/" + record_name;
    util::write_file(record_path, to_json(record).dump(2) + "\n");
    if (!config.cache_path.empty()) cache->save(config.cache_path);

    if (flags.json) {
        std::cout << to_json(record).dump(2) << "\n";
    } else {
        std::printf("condition:     %s\n", to_string(record.condition).c_str());
        std::printf("prompt:        %s\n", record.prompt.text.c_str());
        std::printf("biases found:  %s\n",
                    record.bias_set.empty() ? "(none)" : record.bias_set.key().c_str());
        if (record.mediator && !record.mediator->modifiers.empty()) {
            std::printf("modifiers:\n");
            for (const auto& m : record.mediator->modifiers)
                std::printf("  - %s  [%s, score %.4f]\n", m.text.c_str(),
                            m.source_bias.canonical_name.c_str(), m.score);
        }
        if (record.refined) std::printf("refined:       %s\n", record.refined->rendered_text.c_str());
        std::printf("bns initial:   %.6f\n", record.bns_initial);
        std::printf("bns final:     %.6f\n", record.bns_final);
        std::printf("vlm calls:     %llu%s\n", static_cast<unsigned long long>(record.vlm_calls),
                    record.cache_hit ? " (cache hit)" : "");
        std::printf("record:        %s\n", record_path.c_str());
    }
    return 0;
}

int cmd_bench(const GlobalFlags& flags, const std::string& dataset_path,
              const std::vector<std::string>& condition_names, const std::vector<std::string>& formats,
              int workers_override) {
    AppConfig config = effective_config(flags);
    if (workers_override > 0) config.workers = workers_override;

    auto dataset = load_dataset(dataset_path);
    ProviderRuntime runtime = build_providers(config);
    HarnessConfig harness = make_harness_config(config, runtime);

    BenchReport report = run_matrix(dataset, parse_conditions(condition_names), harness);

    ensure_out_dir(config.out_dir);
    std::vector<std::string> written;
    for (const auto& format : formats) {
        auto paths = emit_report(report, report_format_from_string(format), config.out_dir);
        written.insert(written.end(), paths.begin(), paths.end());
    }

    if (flags.json) {
        Json j = Json::array();
        for (const auto& row : report.rows)
            j.push_back(Json{{"method", to_string(row.condition)},
                             {"mean_bns_percent", row.mean_bns_percent},
                             {"ok", row.ok},
                             {"failed", row.failed},
                             {"vlm_calls", row.vlm_calls},
                             {"cache_hits", row.cache_hits}});
        std::cout << j.dump(2) << "\n";
    } else {
        for (const auto& row : report.rows)
            std::printf("%-18s BNS(%%) %8.2f   ok %zu  failed %zu  vlm %llu  cache-hits %llu\n",
                        to_string(row.condition).c_str(), row.mean_bns_percent, row.ok, row.failed,
                        static_cast<unsigned long long>(row.vlm_calls),
                        static_cast<unsigned long long>(row.cache_hits));
        for (const auto& p : written) std::printf("wrote %s\n", p.c_str());
    }
    return 0;
}

int cmd_sweep_w(const GlobalFlags& flags, const std::string& dataset_path, std::vector<double> w_values) {
    AppConfig config = effective_config(flags);
    auto dataset = load_dataset(dataset_path);
    ProviderRuntime runtime = build_providers(config);
    HarnessConfig harness = make_harness_config(config, runtime);

    auto points = sweep_w(dataset, w_values, harness);

    ensure_out_dir(config.out_dir);
    std::string csv = "w,mean_bns_percent\n";
    for (const auto& p : points) {
        char line[64];
        std::snprintf(line, sizeof(line), "%.4f,%.6f\n", p.w, p.mean_bns_percent);
        csv += line;
    }
    const std::string path = config.out_dir + "/sweep_w.csv";
    util::write_file(path, csv);

    if (flags.json) {
        Json j = Json::array();
        for (const auto& p : points)
            j.push_back(Json{{"w", p.w}, {"mean_bns_percent", p.mean_bns_percent}});
        std::cout << j.dump(2) << "\n";
    } else {
        for (const auto& p : points) std::printf("w=%.2f  BNS(%%) %8.2f\n", p.w, p.mean_bns_percent);
        std::printf("wrote %s\n", path.c_str());
    }
    return 0;
}

int cmd_cache_ablation(const GlobalFlags& flags, const std::string& dataset_path, int runs) {
    AppConfig config = effective_config(flags);
    auto dataset = load_dataset(dataset_path);
    ProviderRuntime runtime = build_providers(config);
    HarnessConfig harness = make_harness_config(config, runtime);

    AblationCurve curve = cache_ablation(dataset, runs, flags.seed.value_or(0), harness);

    ensure_out_dir(config.out_dir);
    const std::string path = config.out_dir + "/cache_ablation.csv";
    emit_ablation_csv(curve, path);

    if (flags.json) {
        std::cout << Json{{"requests", curve.mean_cache_on.size()},
                          {"runs", curve.runs},
                          {"final_mean_cache_on", curve.mean_cache_on.back()},
                          {"final_mean_cache_off", curve.mean_cache_off.back()},
                          {"curve_csv", path}}
                         .dump(2)
                  << "\n";
    } else {
        std::printf("requests: %zu, runs: %zu\n", curve.mean_cache_on.size(), curve.runs);
        std::printf("final cumulative VLM calls: cache on %.2f, cache off %.2f\n",
                    curve.mean_cache_on.back(), curve.mean_cache_off.back());
        std::printf("wrote %s\n", path.c_str());
    }
    return 0;
}

int cmd_aesthetics_ingest(const GlobalFlags& flags, const std::string& db_path, const std::string& brand,
                          const std::string& display, const std::string& style_id,
                          const std::string& description, const std::vector<std::string>& image_paths) {
    AppConfig config = effective_config(flags);
    ProviderRuntime runtime = build_providers(config);

    auto db = fs::exists(db_path)
                  ? AestheticsDatabase::load(db_path)
                  : AestheticsDatabase(runtime.providers.embedder->dim());
    std::vector<ImageRef> exemplars;
    for (const auto& p : image_paths) exemplars.push_back(image_from_path(p));

    StyleEntry entry = db.ingest_style(*runtime.providers.embedder, make_brand(brand, display), style_id,
                                       description, exemplars);
    db.save(db_path);

    if (flags.json) {
        std::cout << Json{{"style_id", entry.style_id},
                          {"brand", entry.brand.canonical_name},
                          {"exemplar_count", entry.exemplar_count},
                          {"db", db_path}}
                         .dump(2)
                  << "\n";
    } else {
        std::printf("ingested style '%s' (%u exemplars) into %s\n", entry.style_id.c_str(),
                    entry.exemplar_count, db_path.c_str());
    }
    return 0;
}

int cmd_aesthetics_list(const GlobalFlags& flags, const std::string& db_path) {
    auto db = AestheticsDatabase::load(db_path);
    if (flags.json) {
        Json j = Json::array();
        for (const auto& e : db.entries())
            j.push_back(Json{{"style_id", e.style_id},
                             {"brand", e.brand.canonical_name},
                             {"description", e.description},
                             {"exemplar_count", e.exemplar_count}});
        std::cout << j.dump(2) << "\n";
    } else {
        for (const auto& e : db.entries())
            std::printf("%-24s %-12s %3u exemplars  %s\n", e.style_id.c_str(),
                        e.brand.canonical_name.c_str(), e.exemplar_count, e.description.c_str());
    }
    return 0;
}

int cmd_aesthetics_match(const GlobalFlags& flags, const std::string& db_path, const std::string& image_path,
                         double threshold) {
    AppConfig config = effective_config(flags);
    ProviderRuntime runtime = build_providers(config);
    auto db = AestheticsDatabase::load(db_path);

    ImageRef image = image_from_path(image_path);
    Embedding query = runtime.providers.embedder->embed_image(image);
    auto matches = db.match(query, threshold);

    if (flags.json) {
        Json j = Json::array();
        for (const auto& m : matches)
            j.push_back(Json{{"style_id", m.entry.style_id},
                             {"brand", m.entry.brand.canonical_name},
                             {"similarity", m.similarity}});
        std::cout << j.dump(2) << "\n";
    } else {
        for (const auto& m : matches)
            std::printf("%-24s %-12s similarity %.6f\n", m.entry.style_id.c_str(),
                        m.entry.brand.canonical_name.c_str(), m.similarity);
        if (matches.empty()) std::printf("no styles above threshold %.3f\n", threshold);
    }
    return 0;
}

std::shared_ptr<RedirectionCache> cache_for_cli(const AppConfig& config,
                                                const std::optional<std::string>& cache_override) {
    AppConfig effective = config;
    if (cache_override) effective.cache_path = *cache_override;
    return resolve_cache(effective);
}

int cmd_cache_stats(const GlobalFlags& flags, const std::optional<std::string>& cache_path) {
    AppConfig config = effective_config(flags);
    auto cache = cache_for_cli(config, cache_path);
    CacheStats stats = cache->stats();
    if (flags.json) {
        std::cout << Json{{"entries", stats.entries},
                          {"hits", stats.hits},
                          {"misses", stats.misses},
                          {"evictions", stats.evictions},
                          {"vlm_calls_saved", stats.vlm_calls_saved}}
                         .dump(2)
                  << "\n";
    } else {
        std::printf("entries %llu  hits %llu  misses %llu  evictions %llu  vlm-calls-saved %llu\n",
                    static_cast<unsigned long long>(stats.entries),
                    static_cast<unsigned long long>(stats.hits),
                    static_cast<unsigned long long>(stats.misses),
                    static_cast<unsigned long long>(stats.evictions),
                    static_cast<unsigned long long>(stats.vlm_calls_saved));
    }
    return 0;
}

int cmd_cache_clear(const GlobalFlags& flags, const std::optional<std::string>& cache_path) {
    AppConfig config = effective_config(flags);
    std::string path = cache_path.value_or(config.cache_path);
    if (path.empty())
        raise(ErrorKind::ConfigError, "cache clear needs a cache file: set cache.path or pass --cache");
    RedirectionCache fresh(config.cache);
    fresh.save(path);
    if (!flags.json) std::printf("cleared cache at %s\n", path.c_str());
    return 0;
}

int cmd_cache_export(const GlobalFlags& flags, const std::optional<std::string>& cache_path,
                     const std::optional<std::string>& out_file) {
    AppConfig config = effective_config(flags);
    auto cache = cache_for_cli(config, cache_path);
    Json j = Json::array();
    for (const auto& e : cache->entries())
        j.push_back(Json{{"key", e.key},
                         {"bias_set", to_json(e.bias_records)},
                         {"mediator", to_json(e.mediator)},
                         {"hits", e.hits}});
    std::string body = j.dump(2) + "\n";
    if (out_file) {
        util::write_file(*out_file, body);
        if (!flags.json) std::printf("exported %zu entries to %s\n", j.size(), out_file->c_str());
    } else {
        std::cout << body;
    }
    return 0;
}

int cmd_bns(const GlobalFlags& flags, const std::string& image_path) {
    AppConfig config = effective_config(flags);
    ProviderRuntime runtime = build_providers(config);

    ImageRef image = image_from_path(image_path);
    JudgeReport report = judge_image(*runtime.providers.judge, image);
    std::vector<double> scores;
    for (const auto& f : report.findings) scores.push_back(f.confidence);
    double score = bns(scores, config.bns);

    if (flags.json) {
        Json findings = Json::array();
        for (const auto& f : report.findings)
            findings.push_back(Json{{"brand", f.brand.canonical_name}, {"confidence", f.confidence}});
        std::cout << Json{{"image", image.id}, {"bns", score}, {"findings", std::move(findings)}}.dump(2)
                  << "\n";
    } else {
        std::printf("bns: %.6f\n", score);
        for (const auto& f : report.findings)
            std::printf("  %-16s confidence %.3f\n", f.brand.canonical_name.c_str(), f.confidence);
        if (report.findings.empty()) std::printf("  no brand findings\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Brand-bias detection and prompt-refinement pipeline"};
    app.require_subcommand(0, 1);
    app.fallthrough();  // global flags may follow the subcommand

    GlobalFlags flags;
    std::string config_path_raw, provider_mode_raw, mock_script_raw, out_dir_raw;
    std::uint64_t seed_raw = 0;
    app.add_option("--config", config_path_raw, "TOML config file");
    app.add_option("--providers", provider_mode_raw, "Provider mode: mock or remote");
    app.add_option("--mock-script", mock_script_raw, "Mock provider script (JSON)");
    app.add_option("--out", out_dir_raw, "Output directory");
    auto* seed_opt = app.add_option("--seed", seed_raw, "Generation seed");
    app.add_flag("--json", flags.json, "Machine-readable output");
    app.add_flag("--print-config", flags.print_config, "Print the effective config and exit");
    app.add_flag("-v,--verbose", flags.verbosity, "Verbose logging");

    // run
    auto* run = app.add_subcommand("run", "Run the pipeline once for a prompt");
    std::string run_prompt, run_condition = "cider-full";
    double run_w = -1.0;
    int run_max_rounds = 0;
    run->add_option("--prompt", run_prompt, "Prompt text")->required();
    run->add_option("--condition", run_condition,
                    "baseline | negative-prompt | cider-no-scoring | cider-full");
    run->add_option("--w", run_w, "Scoring weight override");
    run->add_option("--max-rounds", run_max_rounds, "Detect/refine rounds");

    // bench
    auto* bench = app.add_subcommand("bench", "Run the condition matrix over a dataset");
    std::string bench_dataset;
    std::vector<std::string> bench_conditions = {"baseline", "negative-prompt", "cider-no-scoring",
                                                 "cider-full"};
    std::vector<std::string> bench_formats = {"csv", "markdown"};
    int bench_workers = 0;
    bench->add_option("--dataset", bench_dataset, "JSON-lines prompt dataset")->required();
    bench->add_option("--conditions", bench_conditions, "Conditions to run")->delimiter(',');
    bench->add_option("--format", bench_formats, "Report formats: csv, markdown, json-lines")
        ->delimiter(',');
    bench->add_option("--workers", bench_workers, "Concurrent items per condition");

    // sweep-w
    auto* sweep = app.add_subcommand("sweep-w", "Mean BNS(%) as a function of the scoring weight");
    std::string sweep_dataset;
    std::vector<double> sweep_values = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    sweep->add_option("--dataset", sweep_dataset, "JSON-lines prompt dataset")->required();
    sweep->add_option("--w", sweep_values, "Weights to evaluate")->delimiter(',');

    // cache-ablation
    auto* ablation = app.add_subcommand("cache-ablation", "Cumulative VLM calls with and without cache");
    std::string ablation_dataset;
    int ablation_runs = 20;
    ablation->add_option("--dataset", ablation_dataset, "JSON-lines prompt dataset")->required();
    ablation->add_option("--runs", ablation_runs, "Shuffled replays to average");

    // aesthetics
    auto* aesthetics = app.add_subcommand("aesthetics", "Manage the brand-style database");
    aesthetics->require_subcommand(1);
    auto* ingest = aesthetics->add_subcommand("ingest", "Add or replace a style from exemplar images");
    std::string ing_db, ing_brand, ing_display, ing_style, ing_desc;
    std::vector<std::string> ing_images;
    ingest->add_option("--db", ing_db, "Database file")->required();
    ingest->add_option("--brand", ing_brand, "Brand slug")->required();
    ingest->add_option("--display", ing_display, "Brand display name");
    ingest->add_option("--style", ing_style, "Style id (slug)")->required();
    ingest->add_option("--description", ing_desc, "Style description")->required();
    ingest->add_option("--images", ing_images, "Exemplar image files")->required();
    auto* list = aesthetics->add_subcommand("list", "List stored styles");
    std::string list_db;
    list->add_option("--db", list_db, "Database file")->required();
    auto* match = aesthetics->add_subcommand("match", "Match an image against stored styles");
    std::string match_db, match_image;
    double match_threshold = kDefaultImplicitThreshold;
    match->add_option("--db", match_db, "Database file")->required();
    match->add_option("--image", match_image, "Image file")->required();
    match->add_option("--threshold", match_threshold, "Similarity threshold in [-1,1]");

    // cache
    auto* cache_cmd = app.add_subcommand("cache", "Inspect or reset the redirection cache");
    cache_cmd->require_subcommand(1);
    std::string cache_file;
    auto* cache_file_opt = cache_cmd->add_option("--cache", cache_file, "Cache file (defaults to cache.path)");
    auto* stats_cmd = cache_cmd->add_subcommand("stats", "Counters and entry count");
    auto* clear_cmd = cache_cmd->add_subcommand("clear", "Reset the cache file");
    auto* export_cmd = cache_cmd->add_subcommand("export", "Dump entries as JSON");
    std::string export_out;
    auto* export_out_opt = export_cmd->add_option("--out-file", export_out, "Write to file instead of stdout");

    // bns
    auto* bns_cmd = app.add_subcommand("bns", "Score one image with the neutrality judge");
    std::string bns_image;
    bns_cmd->add_option("--image", bns_image, "Image file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage problems are config errors
    }

    if (!config_path_raw.empty()) flags.config_path = config_path_raw;
    if (!provider_mode_raw.empty()) flags.provider_mode = provider_mode_raw;
    if (!mock_script_raw.empty()) flags.mock_script = mock_script_raw;
    if (!out_dir_raw.empty()) flags.out_dir = out_dir_raw;
    if (seed_opt->count() > 0) flags.seed = seed_raw;
    util::set_log_verbosity(flags.verbosity);

    try {
        if (flags.print_config) {
            std::cout << effective_config(flags).to_json().dump(2) << "\n";
            return 0;
        }
        if (run->parsed())
            return cmd_run(flags, run_prompt, run_condition,
                           run_w >= 0.0 ? std::optional<double>(run_w) : std::nullopt, run_max_rounds);
        if (bench->parsed())
            return cmd_bench(flags, bench_dataset, bench_conditions, bench_formats, bench_workers);
        if (sweep->parsed()) return cmd_sweep_w(flags, sweep_dataset, sweep_values);
        if (ablation->parsed()) return cmd_cache_ablation(flags, ablation_dataset, ablation_runs);
        if (aesthetics->parsed()) {
            if (ingest->parsed())
                return cmd_aesthetics_ingest(flags, ing_db, ing_brand, ing_display, ing_style, ing_desc,
                                             ing_images);
            if (list->parsed()) return cmd_aesthetics_list(flags, list_db);
            if (match->parsed()) return cmd_aesthetics_match(flags, match_db, match_image, match_threshold);
        }
        if (cache_cmd->parsed()) {
            std::optional<std::string> cache_override;
            if (cache_file_opt->count() > 0) cache_override = cache_file;
            if (stats_cmd->parsed()) return cmd_cache_stats(flags, cache_override);
            if (clear_cmd->parsed()) return cmd_cache_clear(flags, cache_override);
            if (export_cmd->parsed()) {
                std::optional<std::string> out_file;
                if (export_out_opt->count() > 0) out_file = export_out;
                return cmd_cache_export(flags, cache_override, out_file);
            }
        }
        if (bns_cmd->parsed()) return cmd_bns(flags, bns_image);

        std::cout << app.help() << "\n";
        return 1;
    } catch (const Error& e) {
        if (e.stage().empty())
            std::fprintf(stderr, "error: %s\n", e.what());
        else
            std::fprintf(stderr, "error [stage: %s]: %s\n", e.stage().c_str(), e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 3;
    }
}
