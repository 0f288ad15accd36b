#pragma once

#include <cstdint>
#include <string>

#include "cider/bns.hpp"
#include "cider/detector.hpp"
#include "cider/embedding.hpp"
#include "cider/pipeline.hpp"
#include "cider/refiner.hpp"

namespace cider {

// HTTP-backed providers. Every wire contract is a single JSON POST to the
// configured URL; non-200 responses and transport failures raise
// Error(ProviderUnavailable). Clients are created per request, so each
// provider is safe to call concurrently.

struct RemoteEndpoint {
    std::string url;  // http(s)://host[:port]/path
    int timeout_ms = 10000;
};

// POST {"kind":"text"|"image","payload":<string|base64>}
// <-   {"embedding":[...],"dim":N}
class RemoteEmbeddingProvider : public EmbeddingProvider {
public:
    RemoteEmbeddingProvider(RemoteEndpoint endpoint, std::size_t dim);

    std::size_t dim() const override { return dim_; }
    Embedding embed_text(const std::string& text) override;
    Embedding embed_image(const ImageRef& image) override;

private:
    Embedding request(const std::string& kind, const std::string& payload);

    RemoteEndpoint endpoint_;
    std::size_t dim_;
};

// POST {"image_b64":...}
// <-   {"detections":[{"label","confidence","box":[x,y,w,h]},...]}
class RemoteLogoDetector : public LogoDetectionProvider {
public:
    explicit RemoteLogoDetector(RemoteEndpoint endpoint);
    std::vector<LogoDetection> detect(const ImageRef& image) override;

private:
    RemoteEndpoint endpoint_;
};

// POST {"system","image_b64","biases":[{"brand","kind","confidence"},...],"prompt"}
// <-   the reply document itself; parsing and the retry live in the refiner.
class RemoteVlm : public VlmProvider {
public:
    explicit RemoteVlm(RemoteEndpoint endpoint);
    std::string complete(const VlmRequest& request) override;

private:
    RemoteEndpoint endpoint_;
};

// POST {"image_b64":...}
// <-   {"findings":[{"brand","confidence"},...]}
class RemoteJudge : public JudgeProvider {
public:
    explicit RemoteJudge(RemoteEndpoint endpoint);
    JudgeReport judge(const ImageRef& image) override;

private:
    RemoteEndpoint endpoint_;
};

// POST {"prompt","seed"[,"negative"]}
// <-   {"image_b64","id"}
class RemoteTextToImage : public TextToImageProvider {
public:
    explicit RemoteTextToImage(RemoteEndpoint endpoint);
    ImageRef generate(const std::string& prompt, std::uint64_t seed, const std::string& negative) override;

private:
    RemoteEndpoint endpoint_;
};

}  // namespace cider
