#include "cider/kernels.hpp"

#include <cassert>
#include <cmath>

#include "cider/util.hpp"

namespace cider::kernels {

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    assert(a.size() == b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm(std::span<const double> a) noexcept {
    return std::sqrt(dot(a, a));
}

double cosine_raw(std::span<const double> a, std::span<const double> b) noexcept {
    return dot(a, b) / (norm(a) * norm(b));
}

void cosine_batch_serial(std::span<const double> query, std::span<const double> matrix,
                         std::size_t rows, std::span<double> out) {
    const std::size_t dim = query.size();
    assert(matrix.size() == rows * dim && out.size() == rows);
    for (std::size_t r = 0; r < rows; ++r)
        out[r] = cosine_raw(query, matrix.subspan(r * dim, dim));
}

void cosine_batch(std::span<const double> query, std::span<const double> matrix,
                  std::size_t rows, std::span<double> out) {
    const std::size_t dim = query.size();
    assert(matrix.size() == rows * dim && out.size() == rows);
#pragma omp parallel for schedule(static) if (rows > 64)
    for (long long r = 0; r < static_cast<long long>(rows); ++r)
        out[r] = cosine_raw(query, matrix.subspan(static_cast<std::size_t>(r) * dim, dim));
}

namespace {

inline double blend_one(double w, std::span<const double> candidate, std::span<const double> feature,
                        std::span<const double> subject) noexcept {
    return w * (1.0 - cosine_raw(candidate, feature)) + (1.0 - w) * cosine_raw(candidate, subject);
}

}  // namespace

void blend_scores_serial(double w, std::span<const double> candidates, std::size_t rows,
                         std::span<const double> feature, std::span<const double> subject,
                         std::span<double> out) {
    const std::size_t dim = feature.size();
    assert(candidates.size() == rows * dim && subject.size() == dim && out.size() == rows);
    for (std::size_t r = 0; r < rows; ++r)
        out[r] = blend_one(w, candidates.subspan(r * dim, dim), feature, subject);
}

void blend_scores(double w, std::span<const double> candidates, std::size_t rows,
                  std::span<const double> feature, std::span<const double> subject,
                  std::span<double> out) {
    const std::size_t dim = feature.size();
    assert(candidates.size() == rows * dim && subject.size() == dim && out.size() == rows);
#pragma omp parallel for schedule(static) if (rows > 64)
    for (long long r = 0; r < static_cast<long long>(rows); ++r)
        out[r] = blend_one(w, candidates.subspan(static_cast<std::size_t>(r) * dim, dim), feature, subject);
}

void synth_unit_vector(std::uint64_t seed, std::span<double> out) noexcept {
    util::SplitMix64 rng(seed);
    // Box-Muller on splitmix uniforms; platform-independent, unlike
    // std::normal_distribution.
    std::size_t i = 0;
    while (i < out.size()) {
        double u1 = rng.next_double();
        double u2 = rng.next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * M_PI * u2;
        out[i++] = radius * std::cos(angle);
        if (i < out.size()) out[i++] = radius * std::sin(angle);
    }
    double n = norm(out);
    if (n == 0.0) {
        // Unreachable in practice; keep the output well-defined anyway.
        out[0] = 1.0;
        n = 1.0;
    }
    for (double& v : out) v /= n;
}

void synth_unit_vectors_serial(std::span<const std::uint64_t> seeds, std::size_t dim,
                               std::span<double> out) {
    assert(out.size() == seeds.size() * dim);
    for (std::size_t r = 0; r < seeds.size(); ++r)
        synth_unit_vector(seeds[r], out.subspan(r * dim, dim));
}

void synth_unit_vectors(std::span<const std::uint64_t> seeds, std::size_t dim,
                        std::span<double> out) {
    assert(out.size() == seeds.size() * dim);
#pragma omp parallel for schedule(static) if (seeds.size() > 16)
    for (long long r = 0; r < static_cast<long long>(seeds.size()); ++r)
        synth_unit_vector(seeds[r], out.subspan(static_cast<std::size_t>(r) * dim, dim));
}

}  // namespace cider::kernels
