#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cider/bench.hpp"
#include "cider/bns.hpp"
#include "cider/detector.hpp"
#include "cider/embedding.hpp"
#include "cider/pipeline.hpp"
#include "cider/refiner.hpp"

namespace cider {

// Scripted, fully deterministic provider stack for tests and offline runs.
// The mock T2I "renders" a prompt as its own bytes; detector and judge
// rules then fire on substring triggers against those bytes, so a modifier
// phrase appended to the prompt can provably suppress a finding.

struct MockDetectorRule {
    std::string label;
    double confidence = 0.9;
    BoundingBox box{8, 8, 64, 32};
    // Fire when the image bytes contain `trigger` (empty = always) and
    // none of the suppressor phrases.
    std::string trigger;
    std::vector<std::string> suppressors;
};

struct MockJudgeSuppressor {
    std::string phrase;
    double factor = 0.0;  // multiplies the finding confidence; 0 removes it
};

struct MockJudgeRule {
    BrandId brand;
    double confidence = 0.9;
    std::string trigger;
    std::vector<MockJudgeSuppressor> suppressors;
};

struct MockScript {
    std::size_t embedding_dim = kDefaultMockEmbeddingDim;
    std::uint64_t embedding_seed = 0x5eed;
    // Exact-vector overrides. Trusted fixtures: dimensions are not checked
    // at load time, a wrong-dim pin surfaces as DimensionMismatch in use.
    std::map<std::string, Embedding> pinned_text_embeddings;
    std::map<std::string, Embedding> pinned_image_embeddings;  // keyed by image id

    std::vector<MockDetectorRule> detector_rules;
    std::vector<MockJudgeRule> judge_rules;

    // Raw reply per canonical bias-set key; lets a script inject malformed
    // documents. Keys not listed get a synthesized valid reply when
    // vlm_synthesize_default is set.
    std::map<std::string, std::string> vlm_raw_replies;
    bool vlm_synthesize_default = true;

    // Non-empty map enables the mock quality provider with these constant
    // per-metric scores.
    std::map<std::string, double> quality_scores;
};

MockScript mock_script_from_json(const Json& j);
Json to_json(const MockScript& script);
MockScript load_mock_script(const std::string& path);

class MockTextToImage : public TextToImageProvider {
public:
    ImageRef generate(const std::string& prompt, std::uint64_t seed, const std::string& negative) override;

    std::uint64_t calls() const { return calls_.load(); }
    std::uint64_t last_seed() const { return last_seed_.load(); }

private:
    std::atomic<std::uint64_t> calls_{0};
    std::atomic<std::uint64_t> last_seed_{0};
};

// Text embeddings may be pinned per exact text, image embeddings per image
// id; everything else falls back to the hash-seeded mock.
class ScriptedEmbeddingProvider : public EmbeddingProvider {
public:
    ScriptedEmbeddingProvider(std::size_t dim, std::uint64_t seed,
                              std::map<std::string, Embedding> text_overrides = {},
                              std::map<std::string, Embedding> image_overrides = {});

    std::size_t dim() const override { return dim_; }
    Embedding embed_text(const std::string& text) override;
    Embedding embed_image(const ImageRef& image) override;

    std::uint64_t calls() const { return calls_.load(); }

private:
    std::size_t dim_;
    MockEmbeddingProvider fallback_;
    std::map<std::string, Embedding> text_overrides_;
    std::map<std::string, Embedding> image_overrides_;
    std::atomic<std::uint64_t> calls_{0};
};

class MockLogoDetector : public LogoDetectionProvider {
public:
    explicit MockLogoDetector(std::vector<MockDetectorRule> rules);

    std::vector<LogoDetection> detect(const ImageRef& image) override;
    std::uint64_t calls() const { return calls_.load(); }

private:
    std::vector<MockDetectorRule> rules_;
    std::atomic<std::uint64_t> calls_{0};
};

class MockJudge : public JudgeProvider {
public:
    explicit MockJudge(std::vector<MockJudgeRule> rules);

    JudgeReport judge(const ImageRef& image) override;
    std::uint64_t calls() const { return calls_.load(); }

private:
    std::vector<MockJudgeRule> rules_;
    std::atomic<std::uint64_t> calls_{0};
};

class MockVlm : public VlmProvider {
public:
    MockVlm(std::map<std::string, std::string> raw_replies, bool synthesize_default = true);

    std::string complete(const VlmRequest& request) override;
    std::uint64_t calls() const { return calls_.load(); }

    // Valid reply fabricated from the request: the prompt as core subject,
    // one signature-style feature per brand with three neutral
    // alternatives.
    static std::string synthesize_reply(const VlmRequest& request);

private:
    std::map<std::string, std::string> raw_replies_;
    bool synthesize_default_;
    std::atomic<std::uint64_t> calls_{0};
};

class MockQualityProvider : public QualityProvider {
public:
    explicit MockQualityProvider(std::map<std::string, double> scores);
    std::map<std::string, double> score(const ImageRef& image, const std::string& prompt) override;

private:
    std::map<std::string, double> scores_;
};

// The full provider stack a script describes, ready to hand to a Pipeline
// or HarnessConfig.
struct MockStack {
    std::shared_ptr<MockTextToImage> t2i;
    std::shared_ptr<ScriptedEmbeddingProvider> embedder;
    std::shared_ptr<MockLogoDetector> detector;
    std::shared_ptr<MockVlm> vlm;
    std::shared_ptr<MockJudge> judge;
    std::shared_ptr<MockQualityProvider> quality;  // null unless scripted

    PipelineProviders providers() const;
};

MockStack build_mock_stack(const MockScript& script);

}  // namespace cider
