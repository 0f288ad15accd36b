#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cider/core.hpp"

namespace cider {

struct BnsConfig {
    double gamma = 0.9;  // geometric decay across sorted bias confidences
    double alpha = 0.75;  // penalty-to-score steepness
};

void validate(const BnsConfig& config);

struct JudgeFinding {
    BrandId brand;
    double confidence = 0;  // [0, 1]
};

struct JudgeReport {
    std::string image_id;
    std::vector<JudgeFinding> findings;
};

// Evaluation judge, deliberately a separate provider from the pipeline's
// own detector. Out-of-range confidences are an error here, never clamped:
// the metric is the headline number and silent repair would hide a
// misconfigured backend.
class JudgeProvider {
public:
    virtual ~JudgeProvider() = default;
    // Throws Error(ProviderUnavailable) / Error(MalformedVlmOutput).
    virtual JudgeReport judge(const ImageRef& image) = 0;
};

// Validates finding confidences; throws Error(ScoreOutOfRange).
JudgeReport judge_image(JudgeProvider& provider, const ImageRef& image);

// Geometric-decay penalty: scores sorted descending, sum of gamma^(i-1) *
// s_i. Empty input -> 0.
double phi(std::vector<double> scores, double gamma);

// exp(-alpha * phi(scores)); always in (0, 1], exactly 1.0 for no findings.
double bns(std::vector<double> scores, const BnsConfig& config = {});

struct BatchBnsResult {
    // 100 * mean over successfully judged images; NaN if none succeeded.
    double mean_percent = 0;
    // Per input position; nullopt where the judge failed.
    std::vector<std::optional<double>> per_image;
    std::size_t failures = 0;
};

// Judges each image (concurrently up to `parallelism`) and aggregates.
// Per-image failures are recorded and excluded from the mean.
BatchBnsResult batch_bns(const std::vector<ImageRef>& images, JudgeProvider& provider,
                         const BnsConfig& config = {}, int parallelism = 1);

}  // namespace cider
