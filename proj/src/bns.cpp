#include "cider/bns.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "cider/error.hpp"
#include "cider/util.hpp"

namespace cider {

void validate(const BnsConfig& config) {
    if (!(config.gamma > 0.0 && config.gamma <= 1.0))
        raise(ErrorKind::ConfigError, "gamma outside (0,1]: " + std::to_string(config.gamma));
    if (!(config.alpha > 0.0))
        raise(ErrorKind::ConfigError, "alpha must be > 0: " + std::to_string(config.alpha));
}

JudgeReport judge_image(JudgeProvider& provider, const ImageRef& image) {
    if (!image.content && !image.path) raise(ErrorKind::EmptyInput, "judge of an image without payload");
    JudgeReport report = provider.judge(image);
    for (const auto& f : report.findings)
        if (!(f.confidence >= 0.0 && f.confidence <= 1.0))
            raise(ErrorKind::ScoreOutOfRange, "judge confidence " + std::to_string(f.confidence) +
                                                  " for brand '" + f.brand.canonical_name + "'");
    return report;
}

double phi(std::vector<double> scores, double gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0))
        raise(ErrorKind::ConfigError, "gamma outside (0,1]: " + std::to_string(gamma));
    for (double s : scores)
        if (!(s >= 0.0 && s <= 1.0))
            raise(ErrorKind::ScoreOutOfRange, "bias score outside [0,1]: " + std::to_string(s));
    std::sort(scores.begin(), scores.end(), std::greater<double>());
    double weight = 1.0;
    double penalty = 0.0;
    for (double s : scores) {
        penalty += weight * s;
        weight *= gamma;
    }
    return penalty;
}

double bns(std::vector<double> scores, const BnsConfig& config) {
    validate(config);
    if (scores.empty()) return 1.0;
    return std::exp(-config.alpha * phi(std::move(scores), config.gamma));
}

BatchBnsResult batch_bns(const std::vector<ImageRef>& images, JudgeProvider& provider,
                         const BnsConfig& config, int parallelism) {
    if (images.empty()) raise(ErrorKind::EmptyInput, "batch_bns of an empty image list");
    validate(config);
    if (parallelism < 1) raise(ErrorKind::ConfigError, "parallelism must be >= 1");

    BatchBnsResult result;
    result.per_image.assign(images.size(), std::nullopt);
    std::vector<std::string> errors(images.size());

#pragma omp parallel for schedule(dynamic) num_threads(parallelism) if (parallelism > 1)
    for (long long i = 0; i < static_cast<long long>(images.size()); ++i) {
        try {
            JudgeReport report = judge_image(provider, images[i]);
            std::vector<double> scores;
            scores.reserve(report.findings.size());
            for (const auto& f : report.findings) scores.push_back(f.confidence);
            result.per_image[i] = bns(std::move(scores), config);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }

    double sum = 0.0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (result.per_image[i]) {
            sum += *result.per_image[i];
            ++ok;
        } else {
            ++result.failures;
            util::log_warn("judge failed for image '" + images[i].id + "': " + errors[i]);
        }
    }
    result.mean_percent = ok == 0 ? std::nan("") : 100.0 * sum / static_cast<double>(ok);
    return result;
}

}  // namespace cider
