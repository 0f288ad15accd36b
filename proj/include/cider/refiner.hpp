#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cider/core.hpp"
#include "cider/embedding.hpp"

namespace cider {

// One core aesthetic/semantic feature of a detected bias.
struct FeatureRecord {
    std::string feature_id;  // slug
    BrandId bias;
    std::string description;
};

// A proposed alternative concept for one feature.
struct CandidateModifier {
    std::string text;
    std::string feature_id;
    std::optional<double> score;
};

struct BiasDeconstruction {
    BrandId brand;
    std::vector<FeatureRecord> features;
    // feature_id -> proposed alternatives, at least one per feature.
    std::map<std::string, std::vector<CandidateModifier>> alternatives;
};

struct DeconstructionResponse {
    std::string core_subject;
    std::vector<BiasDeconstruction> biases;
};

struct VlmRequest {
    std::string system;  // persona template, placeholders resolved
    ImageRef image;
    std::vector<BiasRecord> biases;
    std::string prompt_text;
};

// Vision-language backend. Returns the raw reply document; the refiner
// owns parsing, validation, and the single retry.
class VlmProvider {
public:
    virtual ~VlmProvider() = default;
    virtual std::string complete(const VlmRequest& request) = 0;
};

struct RefinerConfig {
    double w = 0.4;                   // divergence weight in the candidate score
    int candidates_per_feature = 5;   // alternatives requested from the VLM per feature
    int selected_per_feature = 1;
    bool scoring_enabled = true;      // false = direct rewrite (first-listed candidate)
    int max_total_modifiers = 6;      // global cap on the mediator size
    std::string modifier_template = "featuring {}";
};

void validate(const RefinerConfig& config);

struct DeconstructionOutcome {
    DeconstructionResponse response;
    int vlm_calls = 0;  // provider calls issued, including the parse retry
};

// Appends the mediator to the prompt: base text, then each modifier through
// the template, comma-joined. The base text is preserved verbatim and a
// trailing comma on it never doubles up.
// Throws Error(EmptyInput) for an empty mediator, Error(ConfigError) for a
// template without "{}".
RefinedPrompt augment_prompt(const Prompt& prompt, const MediatorSet& mediator,
                             const std::string& modifier_template = "featuring {}");

std::string load_persona(const std::string& path);

// Candidate generation and selection around the VLM.
class Refiner {
public:
    Refiner(std::shared_ptr<EmbeddingProvider> embedder, std::shared_ptr<VlmProvider> vlm,
            RefinerConfig config, std::string persona_template);

    const RefinerConfig& config() const { return config_; }

    // One VLM request (plus at most one retry on a malformed reply), parsed
    // and validated. Requires a non-empty bias set.
    // Throws Error(MalformedVlmOutput) after the retry fails,
    // Error(BiasMismatch) immediately when the reply references a brand
    // outside `biases`, Error(ProviderUnavailable) from the backend.
    DeconstructionOutcome deconstruct(const ImageRef& image, const BiasSet& biases,
                                      const Prompt& prompt) const;

    // The candidate score: w * (1 - cos(E_cand, E_feature)) +
    // (1 - w) * cos(E_cand, E_subject). Always in [-1, 2]; checked on
    // every call.
    double score_candidate(const CandidateModifier& candidate, const FeatureRecord& feature,
                           const std::string& core_subject, double w) const;

    // Scoring on: per feature, keep the top selected_per_feature candidates
    // by score, ties broken by candidate text ascending. Scoring off: keep
    // the first candidate the VLM listed per feature. The union across
    // features and biases is ordered by (source_bias, feature_id) and
    // capped at max_total_modifiers.
    MediatorSet select_modifiers(const DeconstructionResponse& response,
                                 const RefinerConfig& config) const;

private:
    DeconstructionResponse parse_and_validate(const std::string& raw, const BiasSet& biases,
                                              const Prompt& prompt) const;

    std::shared_ptr<EmbeddingProvider> embedder_;
    std::shared_ptr<VlmProvider> vlm_;
    RefinerConfig config_;
    std::string persona_template_;
};

}  // namespace cider
