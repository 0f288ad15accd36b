#include "cider/refiner.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "cider/error.hpp"
#include "cider/kernels.hpp"
#include "cider/util.hpp"

namespace cider {

namespace {

constexpr double kScoreSlack = 1e-9;

void check_score_bounds(double score, const std::string& candidate_text) {
    if (!(score >= -1.0 - kScoreSlack && score <= 2.0 + kScoreSlack))
        raise(ErrorKind::Internal,
              "candidate score " + std::to_string(score) + " outside [-1,2] for '" + candidate_text + "'");
}

std::string replace_all(std::string text, const std::string& needle, const std::string& replacement) {
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), replacement);
        pos += replacement.size();
    }
    return text;
}

}  // namespace

void validate(const RefinerConfig& config) {
    if (config.w < 0.0 || config.w > 1.0)
        raise(ErrorKind::ConfigError, "refiner w outside [0,1]: " + std::to_string(config.w));
    if (config.candidates_per_feature < 1) raise(ErrorKind::ConfigError, "candidates_per_feature must be >= 1");
    if (config.selected_per_feature < 1 || config.selected_per_feature > config.candidates_per_feature)
        raise(ErrorKind::ConfigError, "selected_per_feature must be in [1, candidates_per_feature]");
    if (config.max_total_modifiers < 1) raise(ErrorKind::ConfigError, "max_total_modifiers must be >= 1");
    if (config.modifier_template.find("{}") == std::string::npos)
        raise(ErrorKind::ConfigError, "modifier template needs a {} placeholder");
}

RefinedPrompt augment_prompt(const Prompt& prompt, const MediatorSet& mediator,
                             const std::string& modifier_template) {
    if (mediator.empty()) raise(ErrorKind::EmptyInput, "augment_prompt with an empty mediator");
    if (modifier_template.find("{}") == std::string::npos)
        raise(ErrorKind::ConfigError, "modifier template needs a {} placeholder");

    std::string rendered = prompt.text;
    std::string tail = util::trim(prompt.text);
    rendered += (!tail.empty() && tail.back() == ',') ? " " : ", ";
    for (std::size_t i = 0; i < mediator.modifiers.size(); ++i) {
        if (i > 0) rendered += ", ";
        rendered += replace_all(modifier_template, "{}", mediator.modifiers[i].text);
    }
    return RefinedPrompt{prompt, mediator.modifiers, std::move(rendered)};
}

std::string load_persona(const std::string& path) {
    return util::read_file(path);
}

Refiner::Refiner(std::shared_ptr<EmbeddingProvider> embedder, std::shared_ptr<VlmProvider> vlm,
                 RefinerConfig config, std::string persona_template)
    : embedder_(std::move(embedder)), vlm_(std::move(vlm)), config_(std::move(config)),
      persona_template_(std::move(persona_template)) {
    validate(config_);
    if (persona_template_.empty()) raise(ErrorKind::ConfigError, "persona template is empty");
}

DeconstructionOutcome Refiner::deconstruct(const ImageRef& image, const BiasSet& biases,
                                           const Prompt& prompt) const {
    if (biases.empty()) raise(ErrorKind::EmptyInput, "deconstruct requires a non-empty bias set");

    VlmRequest request;
    request.system = replace_all(persona_template_, "{K}", std::to_string(config_.candidates_per_feature));
    request.image = image;
    request.biases = biases.records();
    request.prompt_text = prompt.text;

    int calls = 0;
    std::string raw = vlm_->complete(request);
    ++calls;
    try {
        return DeconstructionOutcome{parse_and_validate(raw, biases, prompt), calls};
    } catch (const Error& first) {
        if (first.kind() != ErrorKind::MalformedVlmOutput) throw;
        util::log_warn(std::string("malformed VLM reply, retrying once: ") + first.what());
    }
    raw = vlm_->complete(request);
    ++calls;
    try {
        return DeconstructionOutcome{parse_and_validate(raw, biases, prompt), calls};
    } catch (const Error& second) {
        if (second.kind() == ErrorKind::MalformedVlmOutput)
            raise(ErrorKind::MalformedVlmOutput, std::string("retry also failed: ") + second.what());
        throw;
    }
}

DeconstructionResponse Refiner::parse_and_validate(const std::string& raw, const BiasSet& biases,
                                                   const Prompt& prompt) const {
    Json j;
    try {
        j = Json::parse(raw);
    } catch (const Json::exception&) {
        raise(ErrorKind::MalformedVlmOutput, "reply is not a JSON document");
    }
    if (!j.is_object() || !j.contains("biases") || !j.at("biases").is_array())
        raise(ErrorKind::MalformedVlmOutput, "reply lacks a 'biases' array");

    DeconstructionResponse response;
    response.core_subject = util::trim(j.value("core_subject", ""));
    if (response.core_subject.empty()) response.core_subject = prompt.text;

    std::map<std::string, BrandId> known;
    for (const auto& b : biases.brands()) known.emplace(b.canonical_name, b);

    std::set<std::string> seen_brands;
    for (const auto& bias_json : j.at("biases")) {
        if (!bias_json.is_object() || !bias_json.contains("brand") || !bias_json.contains("features") ||
            !bias_json.at("features").is_array())
            raise(ErrorKind::MalformedVlmOutput, "bias entry lacks 'brand' or 'features'");

        std::string slug = bias_json.at("brand").is_string() ? bias_json.at("brand").get<std::string>() : "";
        auto it = known.find(slug);
        if (it == known.end())
            raise(ErrorKind::BiasMismatch, "reply references brand '" + slug + "' outside the detected set");
        if (!seen_brands.insert(slug).second)
            raise(ErrorKind::MalformedVlmOutput, "duplicate bias entry for brand '" + slug + "'");

        BiasDeconstruction decon;
        decon.brand = it->second;
        std::string brand_lower = util::to_lower(decon.brand.display_name);
        std::string slug_lower = util::to_lower(decon.brand.canonical_name);

        for (const auto& feature_json : bias_json.at("features")) {
            if (!feature_json.is_object() || !feature_json.contains("id") ||
                !feature_json.contains("description") || !feature_json.contains("alternatives") ||
                !feature_json.at("alternatives").is_array())
                raise(ErrorKind::MalformedVlmOutput, "feature entry lacks id/description/alternatives");

            FeatureRecord feature;
            feature.feature_id = util::trim(feature_json.at("id").is_string()
                                                ? feature_json.at("id").get<std::string>()
                                                : "");
            feature.bias = decon.brand;
            feature.description = util::trim(feature_json.at("description").is_string()
                                                 ? feature_json.at("description").get<std::string>()
                                                 : "");
            if (feature.feature_id.empty() || feature.description.empty())
                raise(ErrorKind::MalformedVlmOutput, "feature with empty id or description");
            if (decon.alternatives.count(feature.feature_id))
                raise(ErrorKind::MalformedVlmOutput, "duplicate feature id '" + feature.feature_id + "'");

            std::vector<CandidateModifier> candidates;
            std::set<std::string> seen_texts;
            for (const auto& alt : feature_json.at("alternatives")) {
                std::string text = util::trim(alt.is_string() ? alt.get<std::string>() : "");
                if (text.empty()) raise(ErrorKind::MalformedVlmOutput, "empty alternative phrase");
                std::string lower = util::to_lower(text);
                if (lower == brand_lower || lower == slug_lower)
                    raise(ErrorKind::MalformedVlmOutput,
                          "alternative '" + text + "' names the bias brand itself");
                if (!seen_texts.insert(lower).second) continue;  // silently drop duplicates
                candidates.push_back(CandidateModifier{std::move(text), feature.feature_id, std::nullopt});
            }
            if (candidates.empty())
                raise(ErrorKind::MalformedVlmOutput,
                      "feature '" + feature.feature_id + "' has no usable alternatives");

            decon.alternatives.emplace(feature.feature_id, std::move(candidates));
            decon.features.push_back(std::move(feature));
        }
        response.biases.push_back(std::move(decon));
    }
    return response;
}

double Refiner::score_candidate(const CandidateModifier& candidate, const FeatureRecord& feature,
                                const std::string& core_subject, double w) const {
    if (w < 0.0 || w > 1.0) raise(ErrorKind::ConfigError, "w outside [0,1]: " + std::to_string(w));
    Embedding e_cand = embedder_->embed_text(candidate.text);
    Embedding e_feature = embedder_->embed_text(feature.description);
    Embedding e_subject = embedder_->embed_text(core_subject);
    double score = w * (1.0 - cosine(e_cand, e_feature)) + (1.0 - w) * cosine(e_cand, e_subject);
    check_score_bounds(score, candidate.text);
    return score;
}

MediatorSet Refiner::select_modifiers(const DeconstructionResponse& response,
                                      const RefinerConfig& config) const {
    validate(config);
    std::vector<Modifier> picked;

    if (!config.scoring_enabled) {
        // Direct rewrite: take the first candidate the VLM listed per
        // feature, no scoring pass.
        for (const auto& bias : response.biases)
            for (const auto& feature : bias.features)
                picked.push_back(Modifier{bias.alternatives.at(feature.feature_id).front().text,
                                          feature.feature_id, bias.brand, 0.0});
    } else {
        // Embed every distinct text once, then score feature-by-feature.
        std::vector<std::string> texts;
        std::map<std::string, std::size_t> index;
        auto intern = [&](const std::string& t) {
            if (index.emplace(t, texts.size()).second) texts.push_back(t);
        };
        intern(response.core_subject);
        for (const auto& bias : response.biases)
            for (const auto& feature : bias.features) {
                intern(feature.description);
                for (const auto& cand : bias.alternatives.at(feature.feature_id)) intern(cand.text);
            }
        std::vector<Embedding> embeddings = embed_texts(*embedder_, texts);
        const std::size_t dim = embedder_->dim();
        for (std::size_t i = 0; i < embeddings.size(); ++i)
            if (embeddings[i].size() != dim)
                raise(ErrorKind::DimensionMismatch, "embedding for '" + texts[i] + "' has dim " +
                                                        std::to_string(embeddings[i].size()) +
                                                        ", provider declares " + std::to_string(dim));
        auto vec_of = [&](const std::string& t) -> const Embedding& { return embeddings[index.at(t)]; };
        const Embedding& subject = vec_of(response.core_subject);

        for (const auto& bias : response.biases) {
            for (const auto& feature : bias.features) {
                const auto& candidates = bias.alternatives.at(feature.feature_id);
                std::vector<double> matrix(candidates.size() * dim);
                for (std::size_t c = 0; c < candidates.size(); ++c) {
                    const Embedding& e = vec_of(candidates[c].text);
                    std::copy(e.begin(), e.end(), matrix.begin() + c * dim);
                }
                std::vector<double> scores(candidates.size());
                kernels::blend_scores(config.w, matrix, candidates.size(), vec_of(feature.description),
                                      subject, scores);
                for (std::size_t c = 0; c < candidates.size(); ++c)
                    check_score_bounds(scores[c], candidates[c].text);

                std::vector<std::size_t> order(candidates.size());
                std::iota(order.begin(), order.end(), 0);
                std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                    if (scores[a] != scores[b]) return scores[a] > scores[b];
                    return candidates[a].text < candidates[b].text;
                });
                std::size_t take = std::min<std::size_t>(config.selected_per_feature, order.size());
                for (std::size_t k = 0; k < take; ++k)
                    picked.push_back(Modifier{candidates[order[k]].text, feature.feature_id, bias.brand,
                                              scores[order[k]]});
            }
        }
    }

    sort_modifiers(picked);
    if (picked.size() > static_cast<std::size_t>(config.max_total_modifiers))
        picked.resize(static_cast<std::size_t>(config.max_total_modifiers));
    return MediatorSet{std::move(picked), Provenance::FreshVlm};
}

}  // namespace cider
