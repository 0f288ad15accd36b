#include "cider/detector.hpp"

#include <algorithm>

#include "cider/error.hpp"
#include "cider/util.hpp"

namespace cider {

std::map<std::string, BrandId> load_label_map(const std::string& path) {
    std::string text = util::read_file(path);
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::exception& e) {
        raise(ErrorKind::CorruptFile, "label map " + path + ": " + e.what());
    }
    std::map<std::string, BrandId> table;
    try {
        for (const auto& [label, brand] : j.items()) table.emplace(label, brand_from_json(brand));
    } catch (const Json::exception& e) {
        raise(ErrorKind::CorruptFile, "label map " + path + ": " + e.what());
    }
    return table;
}

void save_label_map(const std::string& path, const std::map<std::string, BrandId>& table) {
    Json j = Json::object();
    for (const auto& [label, brand] : table) j[label] = to_json(brand);
    util::write_file(path, j.dump(2) + "\n");
}

Detector::Detector(std::shared_ptr<LogoDetectionProvider> logo_provider,
                   std::shared_ptr<EmbeddingProvider> embedder, DetectorConfig config)
    : logo_provider_(std::move(logo_provider)), embedder_(std::move(embedder)), config_(std::move(config)) {
    if (config_.explicit_threshold < 0.0 || config_.explicit_threshold > 1.0)
        raise(ErrorKind::ConfigError, "explicit threshold outside [0,1]");
    if (config_.implicit_threshold < -1.0 || config_.implicit_threshold > 1.0)
        raise(ErrorKind::ConfigError, "implicit threshold outside [-1,1]");
}

BiasSet Detector::detect_explicit(const ImageRef& image) const {
    BiasSet out;
    for (const auto& det : logo_provider_->detect(image)) {
        if (det.confidence < config_.explicit_threshold) continue;
        auto it = config_.label_to_brand.find(det.label);
        if (it == config_.label_to_brand.end()) {
            util::log_warn("dropping detection with unmapped label '" + det.label + "'");
            continue;
        }
        out.add(make_explicit_bias(it->second, det.confidence, det.box, det.label));
    }
    return out;
}

BiasSet Detector::detect_implicit(const ImageRef& image, const AestheticsDatabase& db) const {
    BiasSet out;
    if (db.empty()) return out;
    Embedding query = embedder_->embed_image(image);
    for (const auto& m : db.match(query, config_.implicit_threshold)) {
        double confidence = std::clamp(m.similarity, 0.0, 1.0);
        out.add(make_implicit_bias(m.entry.brand, confidence, m.entry.style_id, m.similarity));
    }
    return out;
}

BiasSet Detector::detect_all(const ImageRef& image, const AestheticsDatabase& db) const {
    BiasSet all = detect_explicit(image);
    all.merge(detect_implicit(image, db));
    return all;
}

}  // namespace cider
