#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cider/aesthetics_db.hpp"
#include "cider/core.hpp"
#include "cider/embedding.hpp"

namespace cider {

inline constexpr double kDefaultExplicitThreshold = 0.5;

// A raw logo/trademark detection as returned by the detection backend,
// before label-to-brand mapping.
struct LogoDetection {
    std::string label;
    double confidence = 0;  // [0, 1]
    BoundingBox box;
};

class LogoDetectionProvider {
public:
    virtual ~LogoDetectionProvider() = default;
    // Throws Error(ProviderUnavailable) on backend failure.
    virtual std::vector<LogoDetection> detect(const ImageRef& image) = 0;
};

struct DetectorConfig {
    double explicit_threshold = kDefaultExplicitThreshold;   // keep detections with confidence >= this
    double implicit_threshold = kDefaultImplicitThreshold;   // aesthetics-db match threshold
    std::map<std::string, BrandId> label_to_brand;           // unknown labels are dropped with a warning
};

// Reads/writes the label table as {"label": {"canonical_name","display_name"}, ...}.
std::map<std::string, BrandId> load_label_map(const std::string& path);
void save_label_map(const std::string& path, const std::map<std::string, BrandId>& table);

// Two-channel bias detector: explicit logo hits from the detection provider
// plus implicit style matches against the aesthetics database, unioned into
// one BiasSet. Stateless given its config; safe to call concurrently.
class Detector {
public:
    Detector(std::shared_ptr<LogoDetectionProvider> logo_provider,
             std::shared_ptr<EmbeddingProvider> embedder, DetectorConfig config);

    const DetectorConfig& config() const { return config_; }

    // Explicit channel: provider detections filtered by the confidence
    // threshold, labels mapped to brands.
    BiasSet detect_explicit(const ImageRef& image) const;

    // Implicit channel: embeds the image and converts thresholded style
    // matches to records with confidence = clamp(similarity, 0, 1).
    BiasSet detect_implicit(const ImageRef& image, const AestheticsDatabase& db) const;

    // Union of both channels; an empty result means no intervention is
    // needed.
    BiasSet detect_all(const ImageRef& image, const AestheticsDatabase& db) const;

private:
    std::shared_ptr<LogoDetectionProvider> logo_provider_;
    std::shared_ptr<EmbeddingProvider> embedder_;
    DetectorConfig config_;
};

}  // namespace cider
