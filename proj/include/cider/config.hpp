#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "cider/bench.hpp"
#include "cider/providers_mock.hpp"
#include "cider/providers_remote.hpp"

namespace cider {

// Strict subset of TOML, sufficient for this tool's configuration:
// [dotted.sections], bare keys, quoted strings (with \" \\ \n \t escapes),
// integers, floats, booleans, # comments. "${VAR}" inside strings expands
// from the environment; a missing variable is a hard error naming it.
// No arrays, no tables-in-arrays, no multi-line strings.
class TomlConfig {
public:
    using Value = std::variant<std::string, std::int64_t, double, bool>;

    static TomlConfig parse_file(const std::string& path);
    static TomlConfig parse_string(const std::string& text, const std::string& origin = "<config>");

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::optional<std::string> get_string(const std::string& key) const;
    std::optional<std::int64_t> get_int(const std::string& key) const;
    std::optional<double> get_double(const std::string& key) const;  // accepts integer values
    std::optional<bool> get_bool(const std::string& key) const;

    const std::map<std::string, Value>& values() const { return values_; }

private:
    std::map<std::string, Value> values_;
};

// Effective tool configuration: compiled-in defaults, overlaid by the
// config file, overlaid by CLI flags (the CLI applies those itself).
struct AppConfig {
    std::string provider_mode = "mock";  // "mock" | "remote"
    std::string mock_script_path;        // empty = built-in empty script
    std::uint64_t mock_seed = 0x5eed;
    std::map<std::string, std::string> endpoints;  // t2i, vlm, judge, embed, detector
    int timeout_ms = 10000;

    std::size_t embedding_dim = kDefaultMockEmbeddingDim;

    DetectorConfig detector;
    std::string label_map_path;

    std::string aesthetics_db_path;

    RefinerConfig refiner;
    std::string persona_path;  // empty = bundled asset

    BnsConfig bns;

    int max_rounds = 1;
    std::string negative_suffix = kDefaultNegativeSuffix;

    CacheConfig cache;
    std::string cache_path;

    int workers = 1;
    std::string out_dir = "out";
    std::string endpoint_label = "default";

    Json to_json() const;
};

// Defaults + config file when given. Unknown keys warn, they never fail.
AppConfig load_app_config(const std::optional<std::string>& config_path);

// The environment variable consulted when the config file does not name an
// endpoint: CIDER_T2I_URL, CIDER_VLM_URL, CIDER_JUDGE_URL, CIDER_EMBED_URL,
// CIDER_DETECTOR_URL.
std::string endpoint_env_var(const std::string& provider);

// Resolved endpoint or Error(ConfigError) naming both the config key and
// the environment variable.
RemoteEndpoint resolve_endpoint(const AppConfig& config, const std::string& provider);

struct ProviderRuntime {
    PipelineProviders providers;
    std::shared_ptr<QualityProvider> quality;  // mock mode only, when scripted
    MockStack mocks;                           // populated in mock mode
};

ProviderRuntime build_providers(const AppConfig& config);

// Bundled persona template (config.persona_path overrides the baked-in
// asset path).
std::string resolve_persona(const AppConfig& config);

// Loaded database when configured, else an empty one at the configured dim.
std::shared_ptr<const AestheticsDatabase> resolve_database(const AppConfig& config);

// Loaded cache when the configured file exists, else a fresh one.
std::shared_ptr<RedirectionCache> resolve_cache(const AppConfig& config);

HarnessConfig make_harness_config(const AppConfig& config, const ProviderRuntime& runtime);

}  // namespace cider
