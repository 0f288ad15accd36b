#include "cider/core.hpp"

#include <algorithm>
#include <set>

#include "cider/error.hpp"
#include "cider/util.hpp"

namespace cider {

Prompt make_prompt(const std::string& text) {
    if (util::trim(text).empty()) raise(ErrorKind::EmptyInput, "prompt text is empty");
    return Prompt{text, std::nullopt};
}

BrandId make_brand(const std::string& canonical_name, const std::string& display_name) {
    if (!util::is_slug(canonical_name))
        raise(ErrorKind::SchemaError, "brand name is not a lowercase slug: '" + canonical_name + "'");
    return BrandId{canonical_name, display_name.empty() ? util::display_from_slug(canonical_name) : display_name};
}

std::string ImageRef::load_bytes() const {
    if (content) return *content;
    if (path) return util::read_file(*path);
    raise(ErrorKind::EmptyInput, "image '" + id + "' has neither content nor path");
}

std::string to_string(BiasKind kind) {
    return kind == BiasKind::Explicit ? "explicit" : "implicit";
}

BiasKind bias_kind_from_string(const std::string& text) {
    if (text == "explicit") return BiasKind::Explicit;
    if (text == "implicit") return BiasKind::Implicit;
    raise(ErrorKind::SchemaError, "unknown bias kind: '" + text + "'");
}

BiasRecord make_explicit_bias(BrandId brand, double confidence, BoundingBox box, std::string detector_label) {
    if (confidence < 0.0 || confidence > 1.0)
        raise(ErrorKind::SchemaError, "confidence outside [0,1]: " + std::to_string(confidence));
    if (box.w <= 0 || box.h <= 0) raise(ErrorKind::SchemaError, "explicit evidence requires a positive-area box");
    return BiasRecord{std::move(brand), BiasKind::Explicit, confidence,
                      ExplicitEvidence{box, std::move(detector_label)}};
}

BiasRecord make_implicit_bias(BrandId brand, double confidence, std::string style_id, double similarity) {
    if (confidence < 0.0 || confidence > 1.0)
        raise(ErrorKind::SchemaError, "confidence outside [0,1]: " + std::to_string(confidence));
    return BiasRecord{std::move(brand), BiasKind::Implicit, confidence,
                      ImplicitEvidence{std::move(style_id), similarity}};
}

std::string canonical_key(const std::vector<BiasRecord>& records) {
    std::set<std::string> tokens;
    for (const auto& r : records) tokens.insert(r.brand.canonical_name + ":" + to_string(r.kind));
    std::string key;
    for (const auto& t : tokens) {
        if (!key.empty()) key += '|';
        key += t;
    }
    return key;
}

void BiasSet::add(const BiasRecord& record) {
    auto identity = std::make_pair(record.brand.canonical_name, record.kind);
    auto it = records_.find(identity);
    if (it == records_.end()) {
        records_.emplace(std::move(identity), record);
    } else if (record.confidence > it->second.confidence) {
        it->second = record;
    }
    // Equal confidence keeps the earlier record.
}

void BiasSet::merge(const BiasSet& other) {
    for (const auto& [identity, record] : other.records_) add(record);
}

std::vector<BiasRecord> BiasSet::records() const {
    std::vector<BiasRecord> out;
    out.reserve(records_.size());
    for (const auto& [identity, record] : records_) out.push_back(record);
    return out;
}

std::vector<BrandId> BiasSet::brands() const {
    std::vector<BrandId> out;
    for (const auto& [identity, record] : records_) {
        if (out.empty() || !(out.back() == record.brand)) out.push_back(record.brand);
    }
    return out;
}

bool BiasSet::contains(const BrandId& brand, BiasKind kind) const {
    return records_.count({brand.canonical_name, kind}) > 0;
}

bool BiasSet::contains_brand(const std::string& canonical_name) const {
    return records_.count({canonical_name, BiasKind::Explicit}) > 0 ||
           records_.count({canonical_name, BiasKind::Implicit}) > 0;
}

std::string BiasSet::key() const {
    return canonical_key(records());
}

void sort_modifiers(std::vector<Modifier>& modifiers) {
    std::sort(modifiers.begin(), modifiers.end(), [](const Modifier& a, const Modifier& b) {
        if (a.source_bias.canonical_name != b.source_bias.canonical_name)
            return a.source_bias.canonical_name < b.source_bias.canonical_name;
        if (a.replaces_feature != b.replaces_feature) return a.replaces_feature < b.replaces_feature;
        return a.text < b.text;
    });
}

std::string to_string(Condition condition) {
    switch (condition) {
        case Condition::Baseline: return "baseline";
        case Condition::NegativePrompt: return "negative-prompt";
        case Condition::CiderNoScoring: return "cider-no-scoring";
        case Condition::CiderFull: return "cider-full";
    }
    return "unknown";
}

Condition condition_from_string(const std::string& text) {
    if (text == "baseline") return Condition::Baseline;
    if (text == "negative-prompt") return Condition::NegativePrompt;
    if (text == "cider-no-scoring") return Condition::CiderNoScoring;
    if (text == "cider-full") return Condition::CiderFull;
    raise(ErrorKind::ConfigError, "unknown condition: '" + text + "'");
}

Json to_json(const BrandId& brand) {
    return Json{{"canonical_name", brand.canonical_name}, {"display_name", brand.display_name}};
}

BrandId brand_from_json(const Json& j) {
    return make_brand(j.at("canonical_name").get<std::string>(), j.value("display_name", ""));
}

Json to_json(const BiasRecord& record) {
    Json j{{"brand", to_json(record.brand)},
           {"kind", to_string(record.kind)},
           {"confidence", record.confidence}};
    if (record.kind == BiasKind::Explicit) {
        const auto& ev = std::get<ExplicitEvidence>(record.evidence);
        j["evidence"] = Json{{"box", {ev.box.x, ev.box.y, ev.box.w, ev.box.h}},
                             {"detector_label", ev.detector_label}};
    } else {
        const auto& ev = std::get<ImplicitEvidence>(record.evidence);
        j["evidence"] = Json{{"style_id", ev.style_id}, {"similarity", ev.similarity}};
    }
    return j;
}

BiasRecord bias_record_from_json(const Json& j) {
    BrandId brand = brand_from_json(j.at("brand"));
    BiasKind kind = bias_kind_from_string(j.at("kind").get<std::string>());
    double confidence = j.at("confidence").get<double>();
    const Json& ev = j.at("evidence");
    if (kind == BiasKind::Explicit) {
        const Json& box = ev.at("box");
        return make_explicit_bias(std::move(brand), confidence,
                                  BoundingBox{box.at(0).get<double>(), box.at(1).get<double>(),
                                              box.at(2).get<double>(), box.at(3).get<double>()},
                                  ev.at("detector_label").get<std::string>());
    }
    return make_implicit_bias(std::move(brand), confidence, ev.at("style_id").get<std::string>(),
                              ev.at("similarity").get<double>());
}

Json to_json(const BiasSet& set) {
    Json records = Json::array();
    for (const auto& r : set.records()) records.push_back(to_json(r));
    return Json{{"key", set.key()}, {"records", std::move(records)}};
}

BiasSet bias_set_from_json(const Json& j) {
    BiasSet set;
    for (const auto& r : j.at("records")) set.add(bias_record_from_json(r));
    return set;
}

Json to_json(const Modifier& modifier) {
    return Json{{"text", modifier.text},
                {"replaces_feature", modifier.replaces_feature},
                {"source_bias", to_json(modifier.source_bias)},
                {"score", modifier.score}};
}

Modifier modifier_from_json(const Json& j) {
    return Modifier{j.at("text").get<std::string>(), j.at("replaces_feature").get<std::string>(),
                    brand_from_json(j.at("source_bias")), j.at("score").get<double>()};
}

Json to_json(const MediatorSet& mediator) {
    Json mods = Json::array();
    for (const auto& m : mediator.modifiers) mods.push_back(to_json(m));
    return Json{{"modifiers", std::move(mods)},
                {"provenance", mediator.provenance == Provenance::FreshVlm ? "fresh-vlm" : "cache-hit"}};
}

MediatorSet mediator_from_json(const Json& j) {
    MediatorSet out;
    for (const auto& m : j.at("modifiers")) out.modifiers.push_back(modifier_from_json(m));
    out.provenance = j.at("provenance").get<std::string>() == "cache-hit" ? Provenance::CacheHit
                                                                          : Provenance::FreshVlm;
    return out;
}

Json to_json(const ImageRef& image) {
    Json j{{"id", image.id}, {"source_prompt", image.source_prompt}};
    if (image.content) j["content_b64"] = util::base64_encode(*image.content);
    if (image.path) j["path"] = *image.path;
    return j;
}

ImageRef image_from_json(const Json& j) {
    ImageRef image;
    image.id = j.at("id").get<std::string>();
    image.source_prompt = j.value("source_prompt", "");
    if (j.contains("content_b64")) {
        auto bytes = util::base64_decode(j.at("content_b64").get<std::string>());
        image.content = std::string(bytes.begin(), bytes.end());
    }
    if (j.contains("path")) image.path = j.at("path").get<std::string>();
    return image;
}

Json to_json(const RunRecord& record) {
    Json j;
    j["schema_version"] = kRunRecordSchemaVersion;
    j["prompt"] = Json{{"text", record.prompt.text}};
    if (record.prompt.core_subject) j["prompt"]["core_subject"] = *record.prompt.core_subject;
    j["condition"] = to_string(record.condition);
    j["seed"] = record.seed;
    j["initial_image"] = to_json(record.initial_image);
    j["bias_set"] = to_json(record.bias_set);
    if (record.mediator) j["mediator"] = to_json(*record.mediator);
    if (record.refined) {
        Json mods = Json::array();
        for (const auto& m : record.refined->modifiers) mods.push_back(to_json(m));
        j["refined"] = Json{{"base_text", record.refined->base.text},
                            {"modifiers", std::move(mods)},
                            {"rendered_text", record.refined->rendered_text}};
    }
    j["final_image"] = to_json(record.final_image);
    j["bns_initial"] = record.bns_initial;
    j["bns_final"] = record.bns_final;
    j["vlm_calls"] = record.vlm_calls;
    j["cache_hit"] = record.cache_hit;
    return j;
}

RunRecord run_record_from_json(const Json& j) {
    if (j.value("schema_version", 0) != kRunRecordSchemaVersion)
        raise(ErrorKind::SchemaVersionMismatch,
              "run record schema version " + std::to_string(j.value("schema_version", 0)));
    RunRecord record;
    record.prompt.text = j.at("prompt").at("text").get<std::string>();
    if (j.at("prompt").contains("core_subject"))
        record.prompt.core_subject = j.at("prompt").at("core_subject").get<std::string>();
    record.condition = condition_from_string(j.at("condition").get<std::string>());
    record.seed = j.at("seed").get<std::uint64_t>();
    record.initial_image = image_from_json(j.at("initial_image"));
    record.bias_set = bias_set_from_json(j.at("bias_set"));
    if (j.contains("mediator")) record.mediator = mediator_from_json(j.at("mediator"));
    if (j.contains("refined")) {
        RefinedPrompt refined;
        refined.base.text = j.at("refined").at("base_text").get<std::string>();
        for (const auto& m : j.at("refined").at("modifiers")) refined.modifiers.push_back(modifier_from_json(m));
        refined.rendered_text = j.at("refined").at("rendered_text").get<std::string>();
        record.refined = std::move(refined);
    }
    record.final_image = image_from_json(j.at("final_image"));
    record.bns_initial = j.at("bns_initial").get<double>();
    record.bns_final = j.at("bns_final").get<double>();
    record.vlm_calls = j.at("vlm_calls").get<std::uint64_t>();
    record.cache_hit = j.at("cache_hit").get<bool>();
    return record;
}

}  // namespace cider
