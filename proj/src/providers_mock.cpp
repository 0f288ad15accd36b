#include "cider/providers_mock.hpp"

#include <set>

#include "cider/error.hpp"
#include "cider/util.hpp"

namespace cider {

namespace {

Embedding embedding_from_json(const Json& j) {
    Embedding e;
    for (const auto& v : j) e.push_back(v.get<double>());
    return e;
}

Json embedding_to_json(const Embedding& e) {
    Json j = Json::array();
    for (double v : e) j.push_back(v);
    return j;
}

}  // namespace

MockScript mock_script_from_json(const Json& j) {
    MockScript script;
    try {
        script.embedding_dim = j.value("embedding_dim", script.embedding_dim);
        script.embedding_seed = j.value("embedding_seed", script.embedding_seed);
        if (j.contains("pinned_text_embeddings"))
            for (const auto& [text, vec] : j.at("pinned_text_embeddings").items())
                script.pinned_text_embeddings.emplace(text, embedding_from_json(vec));
        if (j.contains("pinned_image_embeddings"))
            for (const auto& [id, vec] : j.at("pinned_image_embeddings").items())
                script.pinned_image_embeddings.emplace(id, embedding_from_json(vec));
        if (j.contains("detector_rules")) {
            for (const auto& r : j.at("detector_rules")) {
                MockDetectorRule rule;
                rule.label = r.at("label").get<std::string>();
                rule.confidence = r.value("confidence", rule.confidence);
                if (r.contains("box")) {
                    const Json& b = r.at("box");
                    rule.box = BoundingBox{b.at(0).get<double>(), b.at(1).get<double>(),
                                           b.at(2).get<double>(), b.at(3).get<double>()};
                }
                rule.trigger = r.value("trigger", "");
                if (r.contains("suppressors"))
                    for (const auto& s : r.at("suppressors")) rule.suppressors.push_back(s.get<std::string>());
                script.detector_rules.push_back(std::move(rule));
            }
        }
        if (j.contains("judge_rules")) {
            for (const auto& r : j.at("judge_rules")) {
                MockJudgeRule rule;
                rule.brand = make_brand(r.at("brand").get<std::string>(), r.value("display", ""));
                rule.confidence = r.value("confidence", rule.confidence);
                rule.trigger = r.value("trigger", "");
                if (r.contains("suppressors"))
                    for (const auto& s : r.at("suppressors"))
                        rule.suppressors.push_back(MockJudgeSuppressor{s.at("phrase").get<std::string>(),
                                                                       s.at("factor").get<double>()});
                script.judge_rules.push_back(std::move(rule));
            }
        }
        if (j.contains("vlm_raw_replies"))
            for (const auto& [key, reply] : j.at("vlm_raw_replies").items())
                script.vlm_raw_replies.emplace(key, reply.get<std::string>());
        script.vlm_synthesize_default = j.value("vlm_synthesize_default", true);
        if (j.contains("quality_scores"))
            for (const auto& [name, value] : j.at("quality_scores").items())
                script.quality_scores.emplace(name, value.get<double>());
    } catch (const Json::exception& e) {
        raise(ErrorKind::SchemaError, std::string("mock script: ") + e.what());
    }
    return script;
}

Json to_json(const MockScript& script) {
    Json j;
    j["embedding_dim"] = script.embedding_dim;
    j["embedding_seed"] = script.embedding_seed;
    if (!script.pinned_text_embeddings.empty()) {
        Json pinned = Json::object();
        for (const auto& [text, vec] : script.pinned_text_embeddings) pinned[text] = embedding_to_json(vec);
        j["pinned_text_embeddings"] = std::move(pinned);
    }
    if (!script.pinned_image_embeddings.empty()) {
        Json pinned = Json::object();
        for (const auto& [id, vec] : script.pinned_image_embeddings) pinned[id] = embedding_to_json(vec);
        j["pinned_image_embeddings"] = std::move(pinned);
    }
    if (!script.detector_rules.empty()) {
        Json rules = Json::array();
        for (const auto& r : script.detector_rules) {
            Json rule{{"label", r.label},
                      {"confidence", r.confidence},
                      {"box", {r.box.x, r.box.y, r.box.w, r.box.h}},
                      {"trigger", r.trigger}};
            if (!r.suppressors.empty()) rule["suppressors"] = r.suppressors;
            rules.push_back(std::move(rule));
        }
        j["detector_rules"] = std::move(rules);
    }
    if (!script.judge_rules.empty()) {
        Json rules = Json::array();
        for (const auto& r : script.judge_rules) {
            Json rule{{"brand", r.brand.canonical_name},
                      {"display", r.brand.display_name},
                      {"confidence", r.confidence},
                      {"trigger", r.trigger}};
            if (!r.suppressors.empty()) {
                Json sups = Json::array();
                for (const auto& s : r.suppressors)
                    sups.push_back(Json{{"phrase", s.phrase}, {"factor", s.factor}});
                rule["suppressors"] = std::move(sups);
            }
            rules.push_back(std::move(rule));
        }
        j["judge_rules"] = std::move(rules);
    }
    if (!script.vlm_raw_replies.empty()) j["vlm_raw_replies"] = script.vlm_raw_replies;
    j["vlm_synthesize_default"] = script.vlm_synthesize_default;
    if (!script.quality_scores.empty()) j["quality_scores"] = script.quality_scores;
    return j;
}

MockScript load_mock_script(const std::string& path) {
    Json j;
    try {
        j = Json::parse(util::read_file(path));
    } catch (const Json::exception& e) {
        raise(ErrorKind::CorruptFile, "mock script " + path + ": " + e.what());
    }
    return mock_script_from_json(j);
}

ImageRef MockTextToImage::generate(const std::string& prompt, std::uint64_t seed,
                                   const std::string& negative) {
    calls_.fetch_add(1);
    last_seed_.store(seed);
    std::string payload = prompt;
    if (!negative.empty()) payload += "\x1f<negative>" + negative;
    ImageRef image;
    image.id = "img-" + util::to_hex(util::fnv1a64(payload + "\x1f" + std::to_string(seed)));
    image.content = payload;
    image.source_prompt = prompt;
    return image;
}

ScriptedEmbeddingProvider::ScriptedEmbeddingProvider(std::size_t dim, std::uint64_t seed,
                                                     std::map<std::string, Embedding> text_overrides,
                                                     std::map<std::string, Embedding> image_overrides)
    : dim_(dim), fallback_(dim, seed), text_overrides_(std::move(text_overrides)),
      image_overrides_(std::move(image_overrides)) {}

Embedding ScriptedEmbeddingProvider::embed_text(const std::string& text) {
    calls_.fetch_add(1);
    if (text.empty()) raise(ErrorKind::EmptyInput, "embed_text of empty string");
    auto it = text_overrides_.find(text);
    if (it != text_overrides_.end()) return it->second;
    return fallback_.embed_text(text);
}

Embedding ScriptedEmbeddingProvider::embed_image(const ImageRef& image) {
    calls_.fetch_add(1);
    auto it = image_overrides_.find(image.id);
    if (it != image_overrides_.end()) return it->second;
    return fallback_.embed_image(image);
}

MockLogoDetector::MockLogoDetector(std::vector<MockDetectorRule> rules) : rules_(std::move(rules)) {}

std::vector<LogoDetection> MockLogoDetector::detect(const ImageRef& image) {
    calls_.fetch_add(1);
    const std::string bytes = image.load_bytes();
    std::vector<LogoDetection> out;
    for (const auto& rule : rules_) {
        if (!rule.trigger.empty() && !util::contains(bytes, rule.trigger)) continue;
        bool suppressed = false;
        for (const auto& s : rule.suppressors)
            if (util::contains(bytes, s)) {
                suppressed = true;
                break;
            }
        if (suppressed) continue;
        out.push_back(LogoDetection{rule.label, rule.confidence, rule.box});
    }
    return out;
}

MockJudge::MockJudge(std::vector<MockJudgeRule> rules) : rules_(std::move(rules)) {}

JudgeReport MockJudge::judge(const ImageRef& image) {
    calls_.fetch_add(1);
    const std::string bytes = image.load_bytes();
    JudgeReport report;
    report.image_id = image.id;
    for (const auto& rule : rules_) {
        if (!rule.trigger.empty() && !util::contains(bytes, rule.trigger)) continue;
        double confidence = rule.confidence;
        for (const auto& s : rule.suppressors)
            if (util::contains(bytes, s.phrase)) confidence *= s.factor;
        if (confidence > 0.0) report.findings.push_back(JudgeFinding{rule.brand, confidence});
    }
    return report;
}

MockVlm::MockVlm(std::map<std::string, std::string> raw_replies, bool synthesize_default)
    : raw_replies_(std::move(raw_replies)), synthesize_default_(synthesize_default) {}

std::string MockVlm::complete(const VlmRequest& request) {
    calls_.fetch_add(1);
    const std::string key = canonical_key(request.biases);
    auto it = raw_replies_.find(key);
    if (it != raw_replies_.end()) return it->second;
    if (synthesize_default_) return synthesize_reply(request);
    raise(ErrorKind::ProviderUnavailable, "mock VLM has no reply scripted for key '" + key + "'");
}

std::string MockVlm::synthesize_reply(const VlmRequest& request) {
    Json reply;
    reply["core_subject"] = request.prompt_text;
    Json biases = Json::array();
    std::set<std::string> seen;
    for (const auto& record : request.biases) {
        if (!seen.insert(record.brand.canonical_name).second) continue;
        const std::string& slug = record.brand.canonical_name;
        Json feature{{"id", slug + "-signature-style"},
                     {"description", "the signature " + record.brand.display_name + " styling"},
                     {"alternatives",
                      {"a plain unbranded design with neutral detailing",
                       "an understated generic look with muted colors",
                       "a vendor-free variant with simple geometry"}}};
        biases.push_back(Json{{"brand", slug}, {"features", Json::array({std::move(feature)})}});
    }
    reply["biases"] = std::move(biases);
    return reply.dump();
}

MockQualityProvider::MockQualityProvider(std::map<std::string, double> scores)
    : scores_(std::move(scores)) {}

std::map<std::string, double> MockQualityProvider::score(const ImageRef& image, const std::string& prompt) {
    (void)image;
    (void)prompt;
    return scores_;
}

PipelineProviders MockStack::providers() const {
    return PipelineProviders{t2i, embedder, detector, vlm, judge};
}

MockStack build_mock_stack(const MockScript& script) {
    MockStack stack;
    stack.t2i = std::make_shared<MockTextToImage>();
    stack.embedder = std::make_shared<ScriptedEmbeddingProvider>(
        script.embedding_dim, script.embedding_seed, script.pinned_text_embeddings,
        script.pinned_image_embeddings);
    stack.detector = std::make_shared<MockLogoDetector>(script.detector_rules);
    stack.vlm = std::make_shared<MockVlm>(script.vlm_raw_replies, script.vlm_synthesize_default);
    stack.judge = std::make_shared<MockJudge>(script.judge_rules);
    if (!script.quality_scores.empty())
        stack.quality = std::make_shared<MockQualityProvider>(script.quality_scores);
    return stack;
}

}  // namespace cider
