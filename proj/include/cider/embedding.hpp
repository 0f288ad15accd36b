#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cider/core.hpp"

namespace cider {

// A fixed-dimension real vector. Providers guarantee dim >= 2 and finite
// values; cosine() additionally rejects zero-norm inputs.
using Embedding = std::vector<double>;

inline constexpr std::size_t kDefaultMockEmbeddingDim = 64;

// dot(a,b) / (|a| |b|), in [-1, 1] up to rounding.
// Throws Error(DimensionMismatch) and Error(ZeroNorm).
double cosine(const Embedding& a, const Embedding& b);

// Text/image embedding backend. Implementations are reentrant: any number
// of embed calls may be in flight concurrently.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::size_t dim() const = 0;
    // Throws Error(EmptyInput) for empty text, Error(ProviderUnavailable)
    // on backend failure.
    virtual Embedding embed_text(const std::string& text) = 0;
    virtual Embedding embed_image(const ImageRef& image) = 0;
};

// Deterministic provider for tests and offline runs: seeds a counter-based
// PRNG with a stable 64-bit hash of the input (plus the configured seed),
// draws `dim` standard normals and normalizes. Outputs are unit vectors,
// roughly uniform on the sphere, so unrelated inputs land near-orthogonal
// at moderate dim.
class MockEmbeddingProvider : public EmbeddingProvider {
public:
    explicit MockEmbeddingProvider(std::size_t dim = kDefaultMockEmbeddingDim,
                                   std::uint64_t seed = 0x5eed);

    std::size_t dim() const override { return dim_; }
    Embedding embed_text(const std::string& text) override;
    Embedding embed_image(const ImageRef& image) override;

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

// Batch helpers. Results are identical to sequential evaluation; the mock
// path parallelizes across inputs.
std::vector<Embedding> embed_texts(EmbeddingProvider& provider, const std::vector<std::string>& texts);
std::vector<Embedding> embed_images(EmbeddingProvider& provider, const std::vector<ImageRef>& images);

}  // namespace cider
