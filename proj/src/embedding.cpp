#include "cider/embedding.hpp"

#include <cmath>
#include <exception>

#include "cider/error.hpp"
#include "cider/kernels.hpp"
#include "cider/util.hpp"

namespace cider {

double cosine(const Embedding& a, const Embedding& b) {
    if (a.size() != b.size())
        raise(ErrorKind::DimensionMismatch,
              "cosine of dim " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double na = kernels::norm(a);
    double nb = kernels::norm(b);
    if (na == 0.0 || nb == 0.0) raise(ErrorKind::ZeroNorm, "cosine of a zero vector");
    return kernels::dot(a, b) / (na * nb);
}

MockEmbeddingProvider::MockEmbeddingProvider(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
    if (dim_ < 2) raise(ErrorKind::ConfigError, "embedding dim must be >= 2");
}

Embedding MockEmbeddingProvider::embed_text(const std::string& text) {
    if (text.empty()) raise(ErrorKind::EmptyInput, "embed_text of empty string");
    Embedding out(dim_);
    kernels::synth_unit_vector(util::fnv1a64(text) ^ seed_, out);
    return out;
}

Embedding MockEmbeddingProvider::embed_image(const ImageRef& image) {
    std::string bytes = image.load_bytes();
    if (bytes.empty()) raise(ErrorKind::EmptyInput, "embed_image of empty payload (image '" + image.id + "')");
    Embedding out(dim_);
    // Domain-separated from the text hash so a prompt and an image that
    // happens to carry the same bytes as that prompt still collide — the
    // mock T2I renders a prompt as its own bytes on purpose.
    kernels::synth_unit_vector(util::fnv1a64("img\x1f" + bytes) ^ seed_, out);
    return out;
}

namespace {

template <typename Input, typename Fn>
std::vector<Embedding> embed_batch(const std::vector<Input>& inputs, Fn&& one) {
    std::vector<Embedding> out(inputs.size());
    std::vector<std::exception_ptr> errors(inputs.size());
#pragma omp parallel for schedule(dynamic) if (inputs.size() > 4)
    for (long long i = 0; i < static_cast<long long>(inputs.size()); ++i) {
        try {
            out[i] = one(inputs[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace

std::vector<Embedding> embed_texts(EmbeddingProvider& provider, const std::vector<std::string>& texts) {
    return embed_batch(texts, [&](const std::string& t) { return provider.embed_text(t); });
}

std::vector<Embedding> embed_images(EmbeddingProvider& provider, const std::vector<ImageRef>& images) {
    return embed_batch(images, [&](const ImageRef& img) { return provider.embed_image(img); });
}

}  // namespace cider
