#include "cider/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>

#include "cider/error.hpp"
#include "cider/util.hpp"

namespace cider {

namespace {

std::string fmt(double value, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
    return buf;
}

std::string fmt_signed_percent(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%+.1f%%", value);
    return buf;
}

}  // namespace

bool is_bench_domain(const std::string& domain) {
    for (const char* d : kBenchDomains)
        if (domain == d) return true;
    return false;
}

std::string to_string(PromptKind kind) {
    return kind == PromptKind::SingleBias ? "single" : "combinatorial";
}

PromptKind prompt_kind_from_string(const std::string& text) {
    if (text == "single") return PromptKind::SingleBias;
    if (text == "combinatorial") return PromptKind::Combinatorial;
    raise(ErrorKind::SchemaError, "unknown prompt kind: '" + text + "'");
}

std::vector<BenchPrompt> load_dataset(const std::string& path) {
    std::string content = util::read_file(path);
    std::vector<BenchPrompt> prompts;
    std::set<std::string> seen_ids;

    std::istringstream lines(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            raise(ErrorKind::SchemaError, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        try {
            BenchPrompt p;
            p.id = j.at("id").get<std::string>();
            p.text = j.at("text").get<std::string>();
            p.domain = j.at("domain").get<std::string>();
            p.kind = prompt_kind_from_string(j.at("kind").get<std::string>());
            for (const auto& b : j.at("expected_biases")) p.expected_biases.push_back(make_brand(b.get<std::string>()));

            if (!util::is_slug(p.id))
                raise(ErrorKind::SchemaError, path + ":" + std::to_string(line_no) + ": id is not a slug");
            if (util::trim(p.text).empty())
                raise(ErrorKind::SchemaError, path + ":" + std::to_string(line_no) + ": empty prompt text");
            if (!is_bench_domain(p.domain))
                raise(ErrorKind::SchemaError,
                      path + ":" + std::to_string(line_no) + ": unknown domain '" + p.domain + "'");
            if (p.kind == PromptKind::SingleBias && p.expected_biases.size() > 1)
                raise(ErrorKind::SchemaError,
                      path + ":" + std::to_string(line_no) + ": single-bias prompt lists several brands");
            if (p.kind == PromptKind::Combinatorial && p.expected_biases.size() < 2)
                raise(ErrorKind::SchemaError,
                      path + ":" + std::to_string(line_no) + ": combinatorial prompt needs >= 2 brands");
            if (!seen_ids.insert(p.id).second)
                raise(ErrorKind::DuplicateId, "duplicate prompt id '" + p.id + "' in " + path);
            prompts.push_back(std::move(p));
        } catch (const Json::exception& e) {
            raise(ErrorKind::SchemaError, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (prompts.empty()) raise(ErrorKind::SchemaError, "dataset " + path + " contains no prompts");
    return prompts;
}

void save_dataset(const std::string& path, const std::vector<BenchPrompt>& prompts) {
    std::string out;
    for (const auto& p : prompts) {
        Json biases = Json::array();
        for (const auto& b : p.expected_biases) biases.push_back(b.canonical_name);
        Json j{{"id", p.id},
               {"text", p.text},
               {"domain", p.domain},
               {"kind", to_string(p.kind)},
               {"expected_biases", std::move(biases)}};
        out += j.dump();
        out += '\n';
    }
    util::write_file(path, out);
}

std::uint64_t prompt_seed(const std::string& prompt_id) {
    return util::fnv1a64("seed\x1f" + prompt_id);
}

namespace {

Pipeline make_pipeline(const HarnessConfig& config, std::shared_ptr<RedirectionCache> cache) {
    return Pipeline(config.providers, config.db, std::move(cache), config.detector, config.refiner,
                    config.bns, config.persona_template);
}

void aggregate(ConditionReport& row) {
    double sum_final = 0, sum_initial = 0, sum_recall = 0;
    std::size_t recall_n = 0;
    std::map<std::string, std::pair<double, std::size_t>> quality_acc;
    for (const auto& pr : row.per_prompt) {
        if (!pr.error.empty()) {
            ++row.failed;
            continue;
        }
        ++row.ok;
        sum_final += pr.bns_final.value_or(0.0);
        sum_initial += pr.bns_initial.value_or(0.0);
        row.vlm_calls += pr.vlm_calls;
        if (pr.cache_hit) ++row.cache_hits;
        if (pr.recall) {
            sum_recall += *pr.recall;
            ++recall_n;
        }
        for (const auto& [name, value] : pr.quality) {
            auto& acc = quality_acc[name];
            acc.first += value;
            acc.second += 1;
        }
    }
    const double n = static_cast<double>(row.ok);
    row.mean_bns_percent = row.ok == 0 ? std::nan("") : 100.0 * sum_final / n;
    row.mean_bns_initial_percent = row.ok == 0 ? std::nan("") : 100.0 * sum_initial / n;
    if (recall_n > 0) row.mean_recall = sum_recall / static_cast<double>(recall_n);
    for (const auto& [name, acc] : quality_acc)
        row.quality_means[name] = acc.first / static_cast<double>(acc.second);
}

}  // namespace

BenchReport run_matrix(const std::vector<BenchPrompt>& dataset, const std::vector<Condition>& conditions,
                       const HarnessConfig& config) {
    if (dataset.empty()) raise(ErrorKind::SchemaError, "run_matrix over an empty dataset");
    if (conditions.empty()) raise(ErrorKind::SchemaError, "run_matrix without conditions");
    if (config.workers < 1) raise(ErrorKind::ConfigError, "workers must be >= 1");

    BenchReport report;
    for (Condition condition : conditions) {
        auto cache = std::make_shared<RedirectionCache>(config.cache);
        Pipeline pipeline = make_pipeline(config, cache);

        ConditionReport row;
        row.condition = condition;
        row.endpoint_label = config.endpoint_label;
        row.per_prompt.resize(dataset.size());

        const bool intervening =
            condition == Condition::CiderNoScoring || condition == Condition::CiderFull;

#pragma omp parallel for schedule(dynamic) num_threads(config.workers) if (config.workers > 1)
        for (long long i = 0; i < static_cast<long long>(dataset.size()); ++i) {
            const BenchPrompt& bp = dataset[i];
            PromptResult pr;
            pr.prompt_id = bp.id;
            pr.seed = prompt_seed(bp.id);
            try {
                PipelineConfig pc;
                pc.condition = condition;
                pc.max_rounds = config.max_rounds;
                pc.seed = pr.seed;
                pc.negative_suffix = config.negative_suffix;
                RunRecord rec = pipeline.run(make_prompt(bp.text), pc);

                pr.bns_initial = rec.bns_initial;
                pr.bns_final = rec.bns_final;
                pr.vlm_calls = rec.vlm_calls;
                pr.cache_hit = rec.cache_hit;
                if (intervening && !bp.expected_biases.empty()) {
                    std::size_t found = 0;
                    for (const auto& b : bp.expected_biases)
                        if (rec.bias_set.contains_brand(b.canonical_name)) ++found;
                    pr.recall = static_cast<double>(found) / static_cast<double>(bp.expected_biases.size());
                }
                if (config.quality) pr.quality = config.quality->score(rec.final_image, bp.text);
            } catch (const Error& e) {
                pr.error = e.stage().empty() ? e.what() : "[" + e.stage() + "] " + e.what();
            } catch (const std::exception& e) {
                pr.error = e.what();
            }
            row.per_prompt[static_cast<std::size_t>(i)] = std::move(pr);
        }

        aggregate(row);
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::vector<WSweepPoint> sweep_w(const std::vector<BenchPrompt>& dataset,
                                 const std::vector<double>& w_values, const HarnessConfig& config) {
    if (w_values.empty()) raise(ErrorKind::SchemaError, "sweep_w needs at least one w value");
    for (double w : w_values)
        if (w < 0.0 || w > 1.0) raise(ErrorKind::ConfigError, "w outside [0,1]: " + std::to_string(w));

    std::vector<WSweepPoint> points;
    for (double w : w_values) {
        HarnessConfig per_w = config;
        per_w.refiner.w = w;
        BenchReport report = run_matrix(dataset, {Condition::CiderFull}, per_w);
        points.push_back(WSweepPoint{w, report.rows.front().mean_bns_percent});
    }
    return points;
}

AblationCurve cache_ablation(const std::vector<BenchPrompt>& dataset, int runs, std::uint64_t seed,
                             const HarnessConfig& config) {
    if (runs < 1) raise(ErrorKind::ConfigError, "cache_ablation needs runs >= 1");
    if (dataset.empty()) raise(ErrorKind::SchemaError, "cache_ablation over an empty dataset");

    const std::size_t n = dataset.size();
    AblationCurve curve;
    curve.runs = static_cast<std::size_t>(runs);
    curve.final_calls_on.resize(curve.runs);
    curve.final_calls_off.resize(curve.runs);
    std::vector<std::vector<std::uint64_t>> cum_on(curve.runs), cum_off(curve.runs);

#pragma omp parallel for schedule(dynamic) if (runs > 1)
    for (long long r = 0; r < static_cast<long long>(curve.runs); ++r) {
        // Deterministic Fisher-Yates shuffle per replay.
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        util::SplitMix64 rng(seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(r + 1));
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[rng.next_below(i)]);

        for (int pass = 0; pass < 2; ++pass) {
            const bool with_cache = pass == 0;
            auto cache = with_cache ? std::make_shared<RedirectionCache>(config.cache) : nullptr;
            Pipeline pipeline = make_pipeline(config, cache);

            std::vector<std::uint64_t>& cum = with_cache ? cum_on[r] : cum_off[r];
            cum.resize(n);
            std::uint64_t total = 0;
            for (std::size_t k = 0; k < n; ++k) {
                const BenchPrompt& bp = dataset[order[k]];
                try {
                    PipelineConfig pc;
                    pc.condition = Condition::CiderFull;
                    pc.max_rounds = config.max_rounds;
                    pc.seed = prompt_seed(bp.id);
                    pc.negative_suffix = config.negative_suffix;
                    RunRecord rec = pipeline.run(make_prompt(bp.text), pc);
                    total += rec.vlm_calls;
                } catch (const std::exception& e) {
                    util::log_warn("ablation item '" + bp.id + "' failed: " + e.what());
                }
                cum[k] = total;
            }
            (with_cache ? curve.final_calls_on : curve.final_calls_off)[r] = total;
        }
    }

    curve.mean_cache_on.assign(n, 0.0);
    curve.mean_cache_off.assign(n, 0.0);
    for (std::size_t r = 0; r < curve.runs; ++r) {
        for (std::size_t k = 0; k < n; ++k) {
            curve.mean_cache_on[k] += static_cast<double>(cum_on[r][k]);
            curve.mean_cache_off[k] += static_cast<double>(cum_off[r][k]);
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        curve.mean_cache_on[k] /= static_cast<double>(curve.runs);
        curve.mean_cache_off[k] /= static_cast<double>(curve.runs);
    }
    return curve;
}

ReportFormat report_format_from_string(const std::string& text) {
    if (text == "csv") return ReportFormat::Csv;
    if (text == "markdown") return ReportFormat::Markdown;
    if (text == "json-lines") return ReportFormat::JsonLines;
    raise(ErrorKind::SchemaError, "unknown report format: '" + text + "'");
}

namespace {

std::vector<std::string> quality_columns(const BenchReport& report) {
    std::set<std::string> names;
    for (const auto& row : report.rows)
        for (const auto& [name, value] : row.quality_means) names.insert(name);
    return {names.begin(), names.end()};
}

const ConditionReport* baseline_row(const BenchReport& report) {
    for (const auto& row : report.rows)
        if (row.condition == Condition::Baseline) return &row;
    return nullptr;
}

std::string emit_csv(const BenchReport& report) {
    const auto quality = quality_columns(report);
    std::string out = "method,endpoint,mean_bns_percent,mean_bns_initial_percent,ok,failed,vlm_calls,"
                      "cache_hits,mean_recall";
    for (const auto& q : quality) out += ",quality_" + q;
    out += '\n';
    for (const auto& row : report.rows) {
        out += to_string(row.condition) + "," + row.endpoint_label + "," + fmt(row.mean_bns_percent) +
               "," + fmt(row.mean_bns_initial_percent) + "," + std::to_string(row.ok) + "," +
               std::to_string(row.failed) + "," + std::to_string(row.vlm_calls) + "," +
               std::to_string(row.cache_hits) + ",";
        if (row.mean_recall) out += fmt(*row.mean_recall);
        for (const auto& q : quality) {
            out += ",";
            auto it = row.quality_means.find(q);
            if (it != row.quality_means.end()) out += fmt(it->second);
        }
        out += '\n';
    }
    return out;
}

std::string annotated(double value, const double* base, int precision) {
    std::string cell = fmt(value, precision);
    if (base != nullptr && *base != 0.0 && !std::isnan(*base) && !std::isnan(value)) {
        double change = 100.0 * (value - *base) / *base;
        cell += " (" + fmt_signed_percent(change) + ")";
    }
    return cell;
}

std::string emit_markdown(const BenchReport& report) {
    const auto quality = quality_columns(report);
    const ConditionReport* base = baseline_row(report);

    std::string out = "| Method | BNS(%) |";
    for (const auto& q : quality) out += " " + q + " |";
    out += "\n| --- | --- |";
    for (std::size_t i = 0; i < quality.size(); ++i) out += " --- |";
    out += '\n';

    for (const auto& row : report.rows) {
        const bool is_base = base == &row;
        out += "| " + to_string(row.condition) + " | ";
        out += annotated(row.mean_bns_percent, (!is_base && base) ? &base->mean_bns_percent : nullptr, 2);
        out += " |";
        for (const auto& q : quality) {
            auto it = row.quality_means.find(q);
            out += " ";
            if (it == row.quality_means.end()) {
                out += "-";
            } else {
                const double* base_q = nullptr;
                if (!is_base && base) {
                    auto bit = base->quality_means.find(q);
                    if (bit != base->quality_means.end()) base_q = &bit->second;
                }
                out += annotated(it->second, base_q, 2);
            }
            out += " |";
        }
        out += '\n';
    }
    return out;
}

Json row_to_json(const ConditionReport& row) {
    Json per_prompt = Json::array();
    for (const auto& pr : row.per_prompt) {
        Json p{{"prompt_id", pr.prompt_id}, {"seed", pr.seed}};
        if (pr.error.empty()) {
            p["bns_initial"] = pr.bns_initial.value_or(0.0);
            p["bns_final"] = pr.bns_final.value_or(0.0);
            p["vlm_calls"] = pr.vlm_calls;
            p["cache_hit"] = pr.cache_hit;
            if (pr.recall) p["recall"] = *pr.recall;
            if (!pr.quality.empty()) p["quality"] = pr.quality;
        } else {
            p["error"] = pr.error;
        }
        per_prompt.push_back(std::move(p));
    }
    Json j{{"method", to_string(row.condition)},
           {"endpoint", row.endpoint_label},
           {"mean_bns_percent", row.mean_bns_percent},
           {"mean_bns_initial_percent", row.mean_bns_initial_percent},
           {"ok", row.ok},
           {"failed", row.failed},
           {"vlm_calls", row.vlm_calls},
           {"cache_hits", row.cache_hits}};
    if (row.mean_recall) j["mean_recall"] = *row.mean_recall;
    if (!row.quality_means.empty()) j["quality_means"] = row.quality_means;
    j["per_prompt"] = std::move(per_prompt);
    return j;
}

std::string emit_jsonl(const BenchReport& report) {
    std::string out;
    for (const auto& row : report.rows) {
        out += row_to_json(row).dump();
        out += '\n';
    }
    return out;
}

}  // namespace

std::vector<std::string> emit_report(const BenchReport& report, ReportFormat format,
                                     const std::string& out_dir) {
    if (report.rows.empty()) raise(ErrorKind::SchemaError, "emit_report of an empty report");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) raise(ErrorKind::IoError, "cannot create output directory " + out_dir + ": " + ec.message());

    std::string path;
    std::string content;
    switch (format) {
        case ReportFormat::Csv:
            path = out_dir + "/report.csv";
            content = emit_csv(report);
            break;
        case ReportFormat::Markdown:
            path = out_dir + "/report.md";
            content = emit_markdown(report);
            break;
        case ReportFormat::JsonLines:
            path = out_dir + "/report.jsonl";
            content = emit_jsonl(report);
            break;
    }
    util::write_file(path, content);
    return {path};
}

void emit_ablation_csv(const AblationCurve& curve, const std::string& path) {
    std::string out = "request_index,mean_cumulative_calls_cache_on,mean_cumulative_calls_cache_off\n";
    for (std::size_t i = 0; i < curve.mean_cache_on.size(); ++i)
        out += std::to_string(i) + "," + fmt(curve.mean_cache_on[i]) + "," +
               fmt(curve.mean_cache_off[i]) + "\n";
    util::write_file(path, out);
}

}  // namespace cider
