#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "cider/aesthetics_db.hpp"
#include "cider/bns.hpp"
#include "cider/core.hpp"
#include "cider/detector.hpp"
#include "cider/redirection_cache.hpp"
#include "cider/refiner.hpp"

namespace cider {

inline constexpr const char* kDefaultNegativeSuffix = ", no logos, no brand names";

class TextToImageProvider {
public:
    virtual ~TextToImageProvider() = default;
    // `negative` maps to the optional negative-conditioning field of the
    // wire contract; the pipeline's negative-prompt condition works by
    // suffixing the prompt instead and leaves it empty.
    // Throws Error(ProviderUnavailable) on backend failure.
    virtual ImageRef generate(const std::string& prompt, std::uint64_t seed,
                              const std::string& negative = "") = 0;
};

struct PipelineConfig {
    Condition condition = Condition::CiderFull;
    int max_rounds = 1;  // detect/refine/regenerate passes; 1 is the standard flow
    std::uint64_t seed = 0;
    std::string negative_suffix = kDefaultNegativeSuffix;
};

struct PipelineProviders {
    std::shared_ptr<TextToImageProvider> t2i;
    std::shared_ptr<EmbeddingProvider> embedder;
    std::shared_ptr<LogoDetectionProvider> logo_detector;
    std::shared_ptr<VlmProvider> vlm;
    std::shared_ptr<JudgeProvider> judge;
};

// End-to-end orchestrator: generate, detect, consult the cache or run the
// refiner, augment, regenerate, and judge, producing one RunRecord per
// invocation. A run is sequential across stages; independent runs may be
// executed concurrently (the shared cache serializes itself).
//
// Errors escaping a run carry the failing stage: "t2i", "detect", "cache",
// "refine", "regenerate", or "judge".
class Pipeline {
public:
    // `cache` may be null (every refinement goes to the VLM); `db` may be
    // empty but not null.
    Pipeline(PipelineProviders providers, std::shared_ptr<const AestheticsDatabase> db,
             std::shared_ptr<RedirectionCache> cache, DetectorConfig detector_config,
             RefinerConfig refiner_config, BnsConfig bns_config, std::string persona_template);

    // One T2I call; the returned image carries the prompt it came from.
    ImageRef generate(const std::string& prompt_text, std::uint64_t seed);

    RunRecord run(const Prompt& prompt, const PipelineConfig& config);

    const RedirectionCache* cache() const { return cache_.get(); }

private:
    double judge_bns(const ImageRef& image);

    PipelineProviders providers_;
    std::shared_ptr<const AestheticsDatabase> db_;
    std::shared_ptr<RedirectionCache> cache_;
    DetectorConfig detector_config_;
    RefinerConfig refiner_config_;
    BnsConfig bns_config_;
    std::string persona_template_;
};

}  // namespace cider
