#include "cider/pipeline.hpp"

#include "cider/error.hpp"
#include "cider/util.hpp"

namespace cider {

namespace {

template <typename Fn>
auto run_stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (Error& e) {
        if (e.stage().empty()) e.set_stage(name);
        throw;
    } catch (const std::exception& e) {
        Error wrapped(ErrorKind::Internal, std::string("unexpected failure: ") + e.what());
        wrapped.set_stage(name);
        throw wrapped;
    }
}

}  // namespace

Pipeline::Pipeline(PipelineProviders providers, std::shared_ptr<const AestheticsDatabase> db,
                   std::shared_ptr<RedirectionCache> cache, DetectorConfig detector_config,
                   RefinerConfig refiner_config, BnsConfig bns_config, std::string persona_template)
    : providers_(std::move(providers)), db_(std::move(db)), cache_(std::move(cache)),
      detector_config_(std::move(detector_config)), refiner_config_(std::move(refiner_config)),
      bns_config_(bns_config), persona_template_(std::move(persona_template)) {
    if (!providers_.t2i) raise(ErrorKind::ConfigError, "pipeline needs a t2i provider");
    if (!providers_.judge) raise(ErrorKind::ConfigError, "pipeline needs a judge provider");
    if (!db_) raise(ErrorKind::ConfigError, "pipeline needs an aesthetics database (may be empty)");
    validate(refiner_config_);
    validate(bns_config_);
}

ImageRef Pipeline::generate(const std::string& prompt_text, std::uint64_t seed) {
    if (util::trim(prompt_text).empty()) raise(ErrorKind::EmptyInput, "generate with an empty prompt");
    ImageRef image = providers_.t2i->generate(prompt_text, seed);
    if (!image.valid())
        raise(ErrorKind::ProviderUnavailable, "t2i returned an image without exactly one payload");
    image.source_prompt = prompt_text;
    return image;
}

double Pipeline::judge_bns(const ImageRef& image) {
    JudgeReport report = judge_image(*providers_.judge, image);
    std::vector<double> scores;
    scores.reserve(report.findings.size());
    for (const auto& f : report.findings) scores.push_back(f.confidence);
    return bns(std::move(scores), bns_config_);
}

RunRecord Pipeline::run(const Prompt& prompt, const PipelineConfig& config) {
    if (util::trim(prompt.text).empty()) raise(ErrorKind::EmptyInput, "run with an empty prompt");
    if (config.max_rounds < 1) raise(ErrorKind::ConfigError, "max_rounds must be >= 1");

    const bool intervening =
        config.condition == Condition::CiderNoScoring || config.condition == Condition::CiderFull;
    if (intervening) {
        if (!providers_.embedder) raise(ErrorKind::ConfigError, "cider conditions need an embedding provider");
        if (!providers_.logo_detector) raise(ErrorKind::ConfigError, "cider conditions need a logo detector");
        if (!providers_.vlm) raise(ErrorKind::ConfigError, "cider conditions need a VLM provider");
    }

    RunRecord record;
    record.prompt = prompt;
    record.condition = config.condition;
    record.seed = config.seed;

    std::string initial_text = prompt.text;
    if (config.condition == Condition::NegativePrompt) initial_text += config.negative_suffix;
    record.initial_image = run_stage("t2i", [&] { return generate(initial_text, config.seed); });

    ImageRef current = record.initial_image;

    if (intervening) {
        Detector detector(providers_.logo_detector, providers_.embedder, detector_config_);
        RefinerConfig refiner_config = refiner_config_;
        refiner_config.scoring_enabled = config.condition == Condition::CiderFull;
        Refiner refiner(providers_.embedder, providers_.vlm, refiner_config, persona_template_);

        record.bias_set = run_stage("detect", [&] { return detector.detect_all(current, *db_); });

        BiasSet round_biases = record.bias_set;
        Prompt current_prompt = prompt;
        std::vector<Modifier> applied;

        for (int round = 0; round < config.max_rounds && !round_biases.empty(); ++round) {
            MediatorSet mediator;
            bool from_cache = false;
            if (cache_) {
                auto hit = run_stage("cache", [&] { return cache_->lookup(round_biases); });
                if (hit) {
                    mediator = std::move(*hit);
                    from_cache = true;
                }
            }
            if (!from_cache) {
                DeconstructionOutcome outcome = run_stage(
                    "refine", [&] { return refiner.deconstruct(current, round_biases, current_prompt); });
                record.vlm_calls += static_cast<std::uint64_t>(outcome.vlm_calls);
                current_prompt.core_subject = outcome.response.core_subject;
                if (!record.prompt.core_subject) record.prompt.core_subject = outcome.response.core_subject;
                mediator = run_stage(
                    "refine", [&] { return refiner.select_modifiers(outcome.response, refiner_config); });
                if (cache_) run_stage("cache", [&] { cache_->insert(round_biases, mediator); });
            }
            if (round == 0) record.cache_hit = from_cache;
            record.mediator = mediator;
            if (mediator.empty()) break;  // refinement produced nothing applicable

            RefinedPrompt refined = run_stage("refine", [&] {
                return augment_prompt(current_prompt, mediator, refiner_config.modifier_template);
            });
            applied.insert(applied.end(), mediator.modifiers.begin(), mediator.modifiers.end());
            current_prompt.text = refined.rendered_text;
            // Same seed as the initial generation: isolates the prompt
            // intervention from sampling noise.
            current = run_stage("regenerate", [&] { return generate(refined.rendered_text, config.seed); });

            record.refined = RefinedPrompt{record.prompt, applied, refined.rendered_text};
            if (round + 1 < config.max_rounds)
                round_biases = run_stage("detect", [&] { return detector.detect_all(current, *db_); });
        }
    }

    record.final_image = current;
    record.bns_initial = run_stage("judge", [&] { return judge_bns(record.initial_image); });
    record.bns_final = current.id == record.initial_image.id
                           ? record.bns_initial
                           : run_stage("judge", [&] { return judge_bns(current); });
    return record;
}

}  // namespace cider
