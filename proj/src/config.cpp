#include "cider/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <set>

#include "cider/error.hpp"
#include "cider/util.hpp"

#ifndef CIDER_DEFAULT_PERSONA_PATH
#define CIDER_DEFAULT_PERSONA_PATH "assets/persona_prompt_v1.txt"
#endif

namespace cider {

namespace {

[[noreturn]] void config_error(const std::string& origin, std::size_t line, const std::string& message) {
    raise(ErrorKind::ConfigError, origin + ":" + std::to_string(line) + ": " + message);
}

std::string interpolate_env(const std::string& text, const std::string& origin, std::size_t line) {
    std::string out;
    for (std::size_t i = 0; i < text.size();) {
        if (text[i] == '\\' && i + 1 < text.size() && text[i + 1] == '$') {
            out.push_back('$');
            i += 2;
            continue;
        }
        if (text[i] == '$' && i + 1 < text.size() && text[i + 1] == '{') {
            auto end = text.find('}', i + 2);
            if (end == std::string::npos) config_error(origin, line, "unterminated ${...} reference");
            std::string name = text.substr(i + 2, end - i - 2);
            if (name.empty()) config_error(origin, line, "empty environment reference");
            const char* value = std::getenv(name.c_str());
            if (value == nullptr)
                config_error(origin, line, "environment variable " + name + " is not set");
            out += value;
            i = end + 1;
            continue;
        }
        out.push_back(text[i]);
        ++i;
    }
    return out;
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (c == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

bool valid_key(const std::string& key) {
    if (key.empty()) return false;
    for (char c : key) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '_' || c == '-' || c == '.';
        if (!ok) return false;
    }
    return true;
}

TomlConfig::Value parse_scalar(const std::string& raw, const std::string& origin, std::size_t line_no) {
    if (!raw.empty() && raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"') config_error(origin, line_no, "unterminated string");
        std::string body = raw.substr(1, raw.size() - 2);
        std::string unescaped;
        for (std::size_t i = 0; i < body.size(); ++i) {
            if (body[i] == '\\' && i + 1 < body.size()) {
                char next = body[i + 1];
                if (next == '"') unescaped.push_back('"');
                else if (next == '\\') unescaped.push_back('\\');
                else if (next == 'n') unescaped.push_back('\n');
                else if (next == 't') unescaped.push_back('\t');
                else if (next == '$') { unescaped.push_back('\\'); unescaped.push_back('$'); }
                else config_error(origin, line_no, std::string("unknown escape \\") + next);
                ++i;
            } else if (body[i] == '"') {
                config_error(origin, line_no, "unescaped quote inside string");
            } else {
                unescaped.push_back(body[i]);
            }
        }
        return interpolate_env(unescaped, origin, line_no);
    }
    if (raw == "true") return true;
    if (raw == "false") return false;

    errno = 0;
    char* end = nullptr;
    long long as_int = std::strtoll(raw.c_str(), &end, 10);
    if (errno == 0 && end != nullptr && *end == '\0' && !raw.empty())
        return static_cast<std::int64_t>(as_int);

    errno = 0;
    double as_double = std::strtod(raw.c_str(), &end);
    if (errno == 0 && end != nullptr && *end == '\0' && !raw.empty()) return as_double;

    config_error(origin, line_no, "cannot parse value: " + raw);
}

}  // namespace

TomlConfig TomlConfig::parse_file(const std::string& path) {
    return parse_string(util::read_file(path), path);
}

TomlConfig TomlConfig::parse_string(const std::string& text, const std::string& origin) {
    TomlConfig config;
    std::string section;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        std::string line = text.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
        start = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        line = util::trim(strip_comment(line));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') config_error(origin, line_no, "unterminated section header");
            section = util::trim(line.substr(1, line.size() - 2));
            if (!valid_key(section)) config_error(origin, line_no, "invalid section name: " + section);
            continue;
        }

        auto eq = line.find('=');
        if (eq == std::string::npos) config_error(origin, line_no, "expected key = value");
        std::string key = util::trim(line.substr(0, eq));
        std::string raw = util::trim(line.substr(eq + 1));
        if (!valid_key(key)) config_error(origin, line_no, "invalid key: " + key);
        if (raw.empty()) config_error(origin, line_no, "missing value for key: " + key);

        std::string full_key = section.empty() ? key : section + "." + key;
        if (config.values_.count(full_key)) config_error(origin, line_no, "duplicate key: " + full_key);
        config.values_.emplace(std::move(full_key), parse_scalar(raw, origin, line_no));
    }
    return config;
}

std::optional<std::string> TomlConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
    raise(ErrorKind::ConfigError, "config key '" + key + "' is not a string");
}

std::optional<std::int64_t> TomlConfig::get_int(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (const auto* v = std::get_if<std::int64_t>(&it->second)) return *v;
    raise(ErrorKind::ConfigError, "config key '" + key + "' is not an integer");
}

std::optional<double> TomlConfig::get_double(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (const auto* v = std::get_if<double>(&it->second)) return *v;
    if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
    raise(ErrorKind::ConfigError, "config key '" + key + "' is not a number");
}

std::optional<bool> TomlConfig::get_bool(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (const auto* v = std::get_if<bool>(&it->second)) return *v;
    raise(ErrorKind::ConfigError, "config key '" + key + "' is not a boolean");
}

namespace {

const std::set<std::string> kKnownKeys = {
    "providers.mode", "providers.mock_script", "providers.mock_seed", "providers.timeout_ms",
    "providers.endpoints.t2i", "providers.endpoints.vlm", "providers.endpoints.judge",
    "providers.endpoints.embed", "providers.endpoints.detector",
    "embedding.dim",
    "detector.explicit_threshold", "detector.implicit_threshold", "detector.label_map",
    "aesthetics.db_path",
    "refiner.w", "refiner.candidates_per_feature", "refiner.selected_per_feature",
    "refiner.max_total_modifiers", "refiner.modifier_template", "refiner.persona_path",
    "bns.gamma", "bns.alpha",
    "pipeline.max_rounds", "pipeline.negative_suffix",
    "cache.capacity", "cache.allow_superset_cover", "cache.path",
    "bench.workers", "bench.out_dir", "bench.endpoint_label",
};

}  // namespace

AppConfig load_app_config(const std::optional<std::string>& config_path) {
    AppConfig app;
    if (!config_path) return app;

    TomlConfig toml = TomlConfig::parse_file(*config_path);
    for (const auto& [key, value] : toml.values())
        if (!kKnownKeys.count(key)) util::log_warn("unknown config key '" + key + "' in " + *config_path);

    if (auto v = toml.get_string("providers.mode")) app.provider_mode = *v;
    if (app.provider_mode != "mock" && app.provider_mode != "remote")
        raise(ErrorKind::ConfigError, "providers.mode must be \"mock\" or \"remote\"");
    if (auto v = toml.get_string("providers.mock_script")) app.mock_script_path = *v;
    if (auto v = toml.get_int("providers.mock_seed")) app.mock_seed = static_cast<std::uint64_t>(*v);
    if (auto v = toml.get_int("providers.timeout_ms")) app.timeout_ms = static_cast<int>(*v);
    for (const char* name : {"t2i", "vlm", "judge", "embed", "detector"})
        if (auto v = toml.get_string(std::string("providers.endpoints.") + name))
            app.endpoints[name] = *v;

    if (auto v = toml.get_int("embedding.dim")) app.embedding_dim = static_cast<std::size_t>(*v);

    if (auto v = toml.get_double("detector.explicit_threshold")) app.detector.explicit_threshold = *v;
    if (auto v = toml.get_double("detector.implicit_threshold")) app.detector.implicit_threshold = *v;
    if (auto v = toml.get_string("detector.label_map")) app.label_map_path = *v;

    if (auto v = toml.get_string("aesthetics.db_path")) app.aesthetics_db_path = *v;

    if (auto v = toml.get_double("refiner.w")) app.refiner.w = *v;
    if (auto v = toml.get_int("refiner.candidates_per_feature"))
        app.refiner.candidates_per_feature = static_cast<int>(*v);
    if (auto v = toml.get_int("refiner.selected_per_feature"))
        app.refiner.selected_per_feature = static_cast<int>(*v);
    if (auto v = toml.get_int("refiner.max_total_modifiers"))
        app.refiner.max_total_modifiers = static_cast<int>(*v);
    if (auto v = toml.get_string("refiner.modifier_template")) app.refiner.modifier_template = *v;
    if (auto v = toml.get_string("refiner.persona_path")) app.persona_path = *v;

    if (auto v = toml.get_double("bns.gamma")) app.bns.gamma = *v;
    if (auto v = toml.get_double("bns.alpha")) app.bns.alpha = *v;

    if (auto v = toml.get_int("pipeline.max_rounds")) app.max_rounds = static_cast<int>(*v);
    if (auto v = toml.get_string("pipeline.negative_suffix")) app.negative_suffix = *v;

    if (auto v = toml.get_int("cache.capacity")) app.cache.capacity = static_cast<std::size_t>(*v);
    if (auto v = toml.get_bool("cache.allow_superset_cover")) app.cache.allow_superset_cover = *v;
    if (auto v = toml.get_string("cache.path")) app.cache_path = *v;

    if (auto v = toml.get_int("bench.workers")) app.workers = static_cast<int>(*v);
    if (auto v = toml.get_string("bench.out_dir")) app.out_dir = *v;
    if (auto v = toml.get_string("bench.endpoint_label")) app.endpoint_label = *v;

    return app;
}

Json AppConfig::to_json() const {
    Json j;
    j["providers"] = Json{{"mode", provider_mode},
                          {"mock_script", mock_script_path},
                          {"mock_seed", mock_seed},
                          {"timeout_ms", timeout_ms},
                          {"endpoints", endpoints}};
    j["embedding"] = Json{{"dim", embedding_dim}};
    j["detector"] = Json{{"explicit_threshold", detector.explicit_threshold},
                         {"implicit_threshold", detector.implicit_threshold},
                         {"label_map", label_map_path}};
    j["aesthetics"] = Json{{"db_path", aesthetics_db_path}};
    j["refiner"] = Json{{"w", refiner.w},
                        {"candidates_per_feature", refiner.candidates_per_feature},
                        {"selected_per_feature", refiner.selected_per_feature},
                        {"max_total_modifiers", refiner.max_total_modifiers},
                        {"modifier_template", refiner.modifier_template},
                        {"persona_path", persona_path}};
    j["bns"] = Json{{"gamma", bns.gamma}, {"alpha", bns.alpha}};
    j["pipeline"] = Json{{"max_rounds", max_rounds}, {"negative_suffix", negative_suffix}};
    j["cache"] = Json{{"capacity", cache.capacity},
                      {"allow_superset_cover", cache.allow_superset_cover},
                      {"path", cache_path}};
    j["bench"] = Json{{"workers", workers}, {"out_dir", out_dir}, {"endpoint_label", endpoint_label}};
    return j;
}

std::string endpoint_env_var(const std::string& provider) {
    if (provider == "t2i") return "CIDER_T2I_URL";
    if (provider == "vlm") return "CIDER_VLM_URL";
    if (provider == "judge") return "CIDER_JUDGE_URL";
    if (provider == "embed") return "CIDER_EMBED_URL";
    if (provider == "detector") return "CIDER_DETECTOR_URL";
    raise(ErrorKind::Internal, "unknown provider name: " + provider);
}

RemoteEndpoint resolve_endpoint(const AppConfig& config, const std::string& provider) {
    auto it = config.endpoints.find(provider);
    if (it != config.endpoints.end() && !it->second.empty())
        return RemoteEndpoint{it->second, config.timeout_ms};
    const std::string env_name = endpoint_env_var(provider);
    if (const char* env = std::getenv(env_name.c_str()); env != nullptr && *env != '\0')
        return RemoteEndpoint{env, config.timeout_ms};
    raise(ErrorKind::ConfigError, "missing endpoint for '" + provider +
                                      "': set providers.endpoints." + provider + " or " + env_name);
}

ProviderRuntime build_providers(const AppConfig& config) {
    ProviderRuntime runtime;
    if (config.provider_mode == "mock") {
        MockScript script;
        if (!config.mock_script_path.empty()) {
            // A script is a self-contained fixture; its dim and seed stand.
            script = load_mock_script(config.mock_script_path);
        } else {
            script.embedding_dim = config.embedding_dim;
            script.embedding_seed = config.mock_seed;
        }
        runtime.mocks = build_mock_stack(script);
        runtime.providers = runtime.mocks.providers();
        runtime.quality = runtime.mocks.quality;
        return runtime;
    }
    runtime.providers.t2i = std::make_shared<RemoteTextToImage>(resolve_endpoint(config, "t2i"));
    runtime.providers.embedder = std::make_shared<RemoteEmbeddingProvider>(
        resolve_endpoint(config, "embed"), config.embedding_dim);
    runtime.providers.logo_detector =
        std::make_shared<RemoteLogoDetector>(resolve_endpoint(config, "detector"));
    runtime.providers.vlm = std::make_shared<RemoteVlm>(resolve_endpoint(config, "vlm"));
    runtime.providers.judge = std::make_shared<RemoteJudge>(resolve_endpoint(config, "judge"));
    return runtime;
}

std::string resolve_persona(const AppConfig& config) {
    const std::string path = config.persona_path.empty() ? CIDER_DEFAULT_PERSONA_PATH : config.persona_path;
    try {
        return load_persona(path);
    } catch (const Error&) {
        raise(ErrorKind::ConfigError, "cannot read persona template at " + path +
                                          " (set refiner.persona_path)");
    }
}

std::shared_ptr<const AestheticsDatabase> resolve_database(const AppConfig& config) {
    if (config.aesthetics_db_path.empty() || !std::filesystem::exists(config.aesthetics_db_path))
        return std::make_shared<AestheticsDatabase>(config.embedding_dim);
    return std::make_shared<AestheticsDatabase>(AestheticsDatabase::load(config.aesthetics_db_path));
}

std::shared_ptr<RedirectionCache> resolve_cache(const AppConfig& config) {
    if (!config.cache_path.empty() && std::filesystem::exists(config.cache_path))
        return std::shared_ptr<RedirectionCache>(RedirectionCache::load(config.cache_path, config.cache));
    return std::make_shared<RedirectionCache>(config.cache);
}

HarnessConfig make_harness_config(const AppConfig& config, const ProviderRuntime& runtime) {
    HarnessConfig harness;
    harness.providers = runtime.providers;
    harness.db = resolve_database(config);
    harness.quality = runtime.quality;
    harness.detector = config.detector;
    if (!config.label_map_path.empty()) harness.detector.label_to_brand = load_label_map(config.label_map_path);
    harness.refiner = config.refiner;
    harness.bns = config.bns;
    harness.cache = config.cache;
    harness.max_rounds = config.max_rounds;
    harness.negative_suffix = config.negative_suffix;
    harness.persona_template = resolve_persona(config);
    harness.endpoint_label = config.endpoint_label;
    harness.workers = config.workers;
    return harness;
}

}  // namespace cider
