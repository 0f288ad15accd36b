#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cider::kernels {

// Data-parallel inner loops shared by the similarity scan, the candidate
// scorer, and the deterministic embedding mock. Each kernel comes in a
// `_serial` reference form and a default form that parallelizes across
// items with OpenMP. Parallelism is only ever across rows; every row is
// computed by the same scalar code path, so the two forms are bit-identical
// and the unit tests assert exact equality. The benchmark target times one
// against the other.

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double norm(std::span<const double> a) noexcept;

// Unchecked cosine; callers validate dimensions and norms.
double cosine_raw(std::span<const double> a, std::span<const double> b) noexcept;

// Cosine of `query` against each row of a row-major matrix.
void cosine_batch_serial(std::span<const double> query, std::span<const double> matrix,
                         std::size_t rows, std::span<double> out);
void cosine_batch(std::span<const double> query, std::span<const double> matrix,
                  std::size_t rows, std::span<double> out);

// Per-row blend of divergence from `feature` and relevance to `subject`:
//   out[i] = w * (1 - cos(row_i, feature)) + (1 - w) * cos(row_i, subject)
void blend_scores_serial(double w, std::span<const double> candidates, std::size_t rows,
                         std::span<const double> feature, std::span<const double> subject,
                         std::span<double> out);
void blend_scores(double w, std::span<const double> candidates, std::size_t rows,
                  std::span<const double> feature, std::span<const double> subject,
                  std::span<double> out);

// Deterministic unit vector from a 64-bit seed: splitmix64 stream through a
// Box-Muller transform, then normalized. Pure function of (seed, dim).
void synth_unit_vector(std::uint64_t seed, std::span<double> out) noexcept;

// One row per seed, row-major output of shape (seeds.size(), dim).
void synth_unit_vectors_serial(std::span<const std::uint64_t> seeds, std::size_t dim,
                               std::span<double> out);
void synth_unit_vectors(std::span<const std::uint64_t> seeds, std::size_t dim,
                        std::span<double> out);

}  // namespace cider::kernels
