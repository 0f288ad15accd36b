#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include "cider/error.hpp"
#include "cider/kernels.hpp"
#include "cider/providers_mock.hpp"
#include "cider/refiner.hpp"
#include "cider/util.hpp"

using namespace cider;

namespace {

// Replays a fixed sequence of raw replies and counts calls.
class SequenceVlm : public VlmProvider {
public:
    explicit SequenceVlm(std::vector<std::string> replies) : replies_(std::move(replies)) {}

    std::string complete(const VlmRequest&) override {
        int i = calls_.fetch_add(1);
        return replies_[std::min<std::size_t>(i, replies_.size() - 1)];
    }
    int calls() const { return calls_.load(); }

private:
    std::vector<std::string> replies_;
    std::atomic<int> calls_{0};
};

std::string valid_apple_reply() {
    Json j{{"core_subject", "laptop"},
           {"biases",
            Json::array({Json{{"brand", "apple"},
                              {"features", Json::array({Json{
                                               {"id", "unibody-shell"},
                                               {"description", "seamless silver aluminum unibody"},
                                               {"alternatives",
                                                {"a matte slate-gray minimalist laptop",
                                                 "a deep navy laptop with visible hex screws",
                                                 "a two-tone beige retro laptop",
                                                 "a brushed copper laptop",
                                                 "a translucent smoke-gray laptop"}}}})}}})}};
    return j.dump();
}

BiasSet apple_biases() {
    BiasSet set;
    set.add(make_explicit_bias(make_brand("apple"), 0.92, BoundingBox{4, 4, 40, 40}, "apple-mark"));
    return set;
}

ImageRef test_image() {
    return ImageRef{"img-1", "laptop pixels", std::nullopt, "a laptop on a desk"};
}

Embedding unit2(double x, std::size_t dim, std::size_t other_axis = 1) {
    Embedding e(dim, 0.0);
    e[0] = x;
    e[other_axis] = std::sqrt(1.0 - x * x);
    return e;
}

// Test-side scoring oracle with its own arithmetic.
double oracle_cosine(const Embedding& a, const Embedding& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double oracle_score(double w, const Embedding& cand, const Embedding& feature, const Embedding& subject) {
    return w * (1.0 - oracle_cosine(cand, feature)) + (1.0 - w) * oracle_cosine(cand, subject);
}

}  // namespace

TEST_CASE("deconstruct parses a valid reply in one call") {
    auto embedder = std::make_shared<MockEmbeddingProvider>();
    auto vlm = std::make_shared<SequenceVlm>(std::vector<std::string>{valid_apple_reply()});
    Refiner refiner(embedder, vlm, RefinerConfig{}, "persona {K}");

    auto outcome = refiner.deconstruct(test_image(), apple_biases(), make_prompt("a laptop on a desk"));
    CHECK(outcome.vlm_calls == 1);
    CHECK(vlm->calls() == 1);
    CHECK(outcome.response.core_subject == "laptop");
    REQUIRE(outcome.response.biases.size() == 1);
    CHECK(outcome.response.biases[0].brand.canonical_name == "apple");
    REQUIRE(outcome.response.biases[0].features.size() == 1);
    CHECK(outcome.response.biases[0].alternatives.at("unibody-shell").size() == 5);
}

TEST_CASE("two malformed replies exhaust the retry") {
    auto embedder = std::make_shared<MockEmbeddingProvider>();
    auto vlm = std::make_shared<SequenceVlm>(std::vector<std::string>{"not json", "still not json"});
    Refiner refiner(embedder, vlm, RefinerConfig{}, "persona {K}");
    try {
        refiner.deconstruct(test_image(), apple_biases(), make_prompt("a laptop"));
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MalformedVlmOutput);
    }
    CHECK(vlm->calls() == 2);  // exactly one retry
}

TEST_CASE("a malformed reply followed by a valid one succeeds with two calls") {
    auto embedder = std::make_shared<MockEmbeddingProvider>();
    auto vlm = std::make_shared<SequenceVlm>(std::vector<std::string>{"garbage", valid_apple_reply()});
    Refiner refiner(embedder, vlm, RefinerConfig{}, "persona {K}");
    auto outcome = refiner.deconstruct(test_image(), apple_biases(), make_prompt("a laptop"));
    CHECK(outcome.vlm_calls == 2);
    CHECK(vlm->calls() == 2);
}

TEST_CASE("a reply naming a foreign brand fails immediately without retry") {
    Json j{{"core_subject", "laptop"},
           {"biases", Json::array({Json{{"brand", "nike"},
                                        {"features", Json::array()}}})}};
    auto embedder = std::make_shared<MockEmbeddingProvider>();
    auto vlm = std::make_shared<SequenceVlm>(std::vector<std::string>{j.dump()});
    Refiner refiner(embedder, vlm, RefinerConfig{}, "persona {K}");
    try {
        refiner.deconstruct(test_image(), apple_biases(), make_prompt("a laptop"));
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BiasMismatch);
    }
    CHECK(vlm->calls() == 1);
}

TEST_CASE("schema violations are malformed output") {
    auto embedder = std::make_shared<MockEmbeddingProvider>();
    auto check_malformed = [&](const Json& reply) {
        auto vlm = std::make_shared<SequenceVlm>(std::vector<std::string>{reply.dump(), reply.dump()});
        Refiner refiner(embedder, vlm, RefinerConfig{}, "persona {K}");
        try {
            refiner.deconstruct(test_image(), apple_biases(), make_prompt("a laptop"));
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::MalformedVlmOutput);
        }
        CHECK(vlm->calls() == 2);
    };

    SUBCASE("empty alternatives") {
        check_malformed(Json{
            {"core_subject", "laptop"},
            {"biases", Json::array({Json{{"brand", "apple"},
                                         {"features", Json::array({Json{{"id", "f"},
                                                                        {"description", "d"},
                                                                        {"alternatives", Json::array()}}})}}})}});
    }
    SUBCASE("alternative equals the brand name") {
        check_malformed(Json{
            {"core_subject", "laptop"},
            {"biases", Json::array({Json{{"brand", "apple"},
                                         {"features", Json::array({Json{{"id", "f"},
                                                                        {"description", "d"},
                                                                        {"alternatives", {"APPLE"}}}})}}})}});
    }
    SUBCASE("missing features") {
        check_malformed(Json{{"core_subject", "laptop"},
                             {"biases", Json::array({Json{{"brand", "apple"}}})}});
    }
}

TEST_CASE("deconstruct requires a non-empty bias set") {
    auto embedder = std::make_shared<MockEmbeddingProvider>();
    auto vlm = std::make_shared<SequenceVlm>(std::vector<std::string>{valid_apple_reply()});
    Refiner refiner(embedder, vlm, RefinerConfig{}, "persona {K}");
    CHECK_THROWS_AS(refiner.deconstruct(test_image(), BiasSet{}, make_prompt("a laptop")), Error);
    CHECK(vlm->calls() == 0);
}

TEST_CASE("missing core subject falls back to the prompt text") {
    Json j{{"biases",
            Json::array({Json{{"brand", "apple"},
                              {"features", Json::array({Json{{"id", "f"},
                                                             {"description", "d"},
                                                             {"alternatives", {"alt one"}}}})}}})}};
    auto embedder = std::make_shared<MockEmbeddingProvider>();
    auto vlm = std::make_shared<SequenceVlm>(std::vector<std::string>{j.dump()});
    Refiner refiner(embedder, vlm, RefinerConfig{}, "persona {K}");
    auto outcome = refiner.deconstruct(test_image(), apple_biases(), make_prompt("a laptop on a desk"));
    CHECK(outcome.response.core_subject == "a laptop on a desk");
}

TEST_CASE("score_candidate endpoint reductions") {
    auto embedder = std::make_shared<MockEmbeddingProvider>();
    auto vlm = std::make_shared<SequenceVlm>(std::vector<std::string>{valid_apple_reply()});
    Refiner refiner(embedder, vlm, RefinerConfig{}, "persona {K}");

    FeatureRecord feature{"f", make_brand("apple"), "seamless aluminum"};
    CandidateModifier same_as_feature{"seamless aluminum", "f", std::nullopt};
    // w=1 with candidate text identical to the feature: divergence term is 0.
    CHECK(refiner.score_candidate(same_as_feature, feature, "laptop", 1.0) ==
          doctest::Approx(0.0).epsilon(1e-12));

    CandidateModifier other{"a woven rattan shell", "f", std::nullopt};
    double at_zero = refiner.score_candidate(other, feature, "laptop", 0.0);
    double direct = cosine(embedder->embed_text(other.text), embedder->embed_text("laptop"));
    CHECK(at_zero == direct);  // w=0 reduces to pure relevance
}

TEST_CASE("score_candidate with pinned cosines matches hand arithmetic") {
    const std::size_t dim = 8;
    std::map<std::string, Embedding> pins = {
        {"candidate", [&] { Embedding e(dim, 0.0); e[0] = 1.0; return e; }()},
        {"feature-desc", unit2(0.2, dim, 1)},
        {"subject", unit2(0.8, dim, 2)},
    };
    auto embedder = std::make_shared<ScriptedEmbeddingProvider>(dim, 1, pins);
    auto vlm = std::make_shared<SequenceVlm>(std::vector<std::string>{valid_apple_reply()});
    Refiner refiner(embedder, vlm, RefinerConfig{}, "persona {K}");

    FeatureRecord feature{"f", make_brand("apple"), "feature-desc"};
    CandidateModifier candidate{"candidate", "f", std::nullopt};
    // S = 0.4*(1-0.2) + 0.6*0.8 = 0.80
    CHECK(refiner.score_candidate(candidate, feature, "subject", 0.4) ==
          doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("score is affine in w") {
    auto embedder = std::make_shared<MockEmbeddingProvider>();
    auto vlm = std::make_shared<SequenceVlm>(std::vector<std::string>{valid_apple_reply()});
    Refiner refiner(embedder, vlm, RefinerConfig{}, "persona {K}");

    FeatureRecord feature{"f", make_brand("apple"), "brushed chrome curves"};
    CandidateModifier candidate{"a pale sandstone finish", "f", std::nullopt};
    const std::string subject = "a desk lamp";

    double s0 = refiner.score_candidate(candidate, feature, subject, 0.0);
    double s1 = refiner.score_candidate(candidate, feature, subject, 1.0);
    for (double w : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        double expected = s0 + w * (s1 - s0);
        CHECK(refiner.score_candidate(candidate, feature, subject, w) ==
              doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("select_modifiers keeps the top candidate by pinned score") {
    const std::size_t dim = 8;
    std::map<std::string, Embedding> pins = {
        {"subject", [&] { Embedding e(dim, 0.0); e[0] = 1.0; return e; }()},
        {"feature-desc", [&] { Embedding e(dim, 0.0); e[3] = 1.0; return e; }()},
        {"x", unit2(0.9, dim, 1)},
        {"y", unit2(0.5, dim, 1)},
        {"z", unit2(0.1, dim, 1)},
    };
    auto embedder = std::make_shared<ScriptedEmbeddingProvider>(dim, 1, pins);
    auto vlm = std::make_shared<SequenceVlm>(std::vector<std::string>{valid_apple_reply()});
    RefinerConfig config;
    config.w = 0.0;  // pure relevance: scores are exactly the pinned cosines
    Refiner refiner(embedder, vlm, config, "persona {K}");

    DeconstructionResponse response;
    response.core_subject = "subject";
    BiasDeconstruction decon;
    decon.brand = make_brand("apple");
    decon.features.push_back(FeatureRecord{"f", decon.brand, "feature-desc"});
    decon.alternatives["f"] = {CandidateModifier{"y", "f", std::nullopt},
                               CandidateModifier{"x", "f", std::nullopt},
                               CandidateModifier{"z", "f", std::nullopt}};
    response.biases.push_back(decon);

    SUBCASE("scoring on: argmax wins") {
        MediatorSet m = refiner.select_modifiers(response, config);
        REQUIRE(m.modifiers.size() == 1);
        CHECK(m.modifiers[0].text == "x");
        CHECK(m.modifiers[0].score == doctest::Approx(0.9).epsilon(1e-12));
        CHECK(m.provenance == Provenance::FreshVlm);
    }
    SUBCASE("scoring off: first listed wins") {
        RefinerConfig rewrite = config;
        rewrite.scoring_enabled = false;
        MediatorSet m = refiner.select_modifiers(response, rewrite);
        REQUIRE(m.modifiers.size() == 1);
        CHECK(m.modifiers[0].text == "y");
        CHECK(m.modifiers[0].score == 0.0);
    }
    SUBCASE("equal scores break ties lexicographically") {
        DeconstructionResponse tied = response;
        Embedding shared = unit2(0.7, dim, 1);
        std::map<std::string, Embedding> tie_pins = pins;
        tie_pins["oak"] = shared;
        tie_pins["pine"] = shared;
        auto tie_embedder = std::make_shared<ScriptedEmbeddingProvider>(dim, 1, tie_pins);
        Refiner tie_refiner(tie_embedder, vlm, config, "persona {K}");
        tied.biases[0].alternatives["f"] = {CandidateModifier{"pine", "f", std::nullopt},
                                            CandidateModifier{"oak", "f", std::nullopt}};
        MediatorSet m = tie_refiner.select_modifiers(tied, config);
        REQUIRE(m.modifiers.size() == 1);
        CHECK(m.modifiers[0].text == "oak");
    }
}

TEST_CASE("select_modifiers matches an exhaustive oracle on random instances") {
    const std::size_t dim = 16;
    util::SplitMix64 rng(4242);

    for (int iter = 0; iter < 60; ++iter) {
        const std::size_t n_candidates = 2 + rng.next_below(19);
        std::map<std::string, Embedding> pins;
        auto random_unit = [&](std::uint64_t seed) {
            Embedding e(dim);
            cider::kernels::synth_unit_vector(seed, e);
            return e;
        };
        pins["subject"] = random_unit(rng.next());
        pins["feature-desc"] = random_unit(rng.next());

        std::vector<CandidateModifier> candidates;
        for (std::size_t c = 0; c < n_candidates; ++c) {
            std::string text = "cand-" + std::to_string(c);
            // occasional exact duplicates of a previous vector force ties
            if (c > 0 && rng.next_below(4) == 0)
                pins[text] = pins["cand-" + std::to_string(rng.next_below(c))];
            else
                pins[text] = random_unit(rng.next());
            candidates.push_back(CandidateModifier{text, "f", std::nullopt});
        }

        RefinerConfig config;
        config.w = 0.01 * static_cast<double>(rng.next_below(101));
        config.selected_per_feature = 1 + static_cast<int>(rng.next_below(3));
        config.candidates_per_feature = 20;
        config.max_total_modifiers = 20;

        auto embedder = std::make_shared<ScriptedEmbeddingProvider>(dim, 1, pins);
        auto vlm = std::make_shared<SequenceVlm>(std::vector<std::string>{"unused"});
        Refiner refiner(embedder, vlm, config, "persona {K}");

        DeconstructionResponse response;
        response.core_subject = "subject";
        BiasDeconstruction decon;
        decon.brand = make_brand("brand");
        decon.features.push_back(FeatureRecord{"f", decon.brand, "feature-desc"});
        decon.alternatives["f"] = candidates;
        response.biases.push_back(decon);

        MediatorSet got = refiner.select_modifiers(response, config);

        // Brute force: score every candidate independently, rank, take top-k.
        std::vector<std::pair<double, std::string>> scored;
        for (const auto& cand : candidates)
            scored.emplace_back(
                oracle_score(config.w, pins.at(cand.text), pins.at("feature-desc"), pins.at("subject")),
                cand.text);
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        const std::size_t take = std::min<std::size_t>(config.selected_per_feature, scored.size());

        REQUIRE(got.modifiers.size() == take);
        std::vector<std::string> got_texts;
        for (const auto& m : got.modifiers) got_texts.push_back(m.text);
        std::sort(got_texts.begin(), got_texts.end());
        std::vector<std::string> want_texts;
        for (std::size_t k = 0; k < take; ++k) want_texts.push_back(scored[k].second);
        std::sort(want_texts.begin(), want_texts.end());
        CHECK(got_texts == want_texts);

        for (const auto& m : got.modifiers) {
            double expected = oracle_score(config.w, pins.at(m.text), pins.at("feature-desc"),
                                           pins.at("subject"));
            CHECK(m.score == expected);  // bit-exact against the oracle arithmetic
        }
    }
}

TEST_CASE("augment_prompt renders the template") {
    Prompt prompt = make_prompt("a laptop on a desk");
    MediatorSet m;
    m.modifiers.push_back(
        Modifier{"a matte slate-gray minimalist laptop", "f", make_brand("apple"), 0.9});
    RefinedPrompt refined = augment_prompt(prompt, m);
    CHECK(refined.rendered_text ==
          "a laptop on a desk, featuring a matte slate-gray minimalist laptop");
    CHECK(refined.rendered_text.find(prompt.text) == 0);
}

TEST_CASE("augment_prompt keeps modifier order and joins with commas") {
    Prompt prompt = make_prompt("a kitchen scene");
    MediatorSet m;
    m.modifiers.push_back(Modifier{"first phrase", "f1", make_brand("a"), 0.5});
    m.modifiers.push_back(Modifier{"second phrase", "f2", make_brand("b"), 0.4});
    RefinedPrompt refined = augment_prompt(prompt, m);
    CHECK(refined.rendered_text == "a kitchen scene, featuring first phrase, featuring second phrase");
}

TEST_CASE("augment_prompt avoids double commas after a trailing comma") {
    Prompt prompt = make_prompt("a kitchen scene,");
    MediatorSet m;
    m.modifiers.push_back(Modifier{"soft daylight", "f", make_brand("a"), 0.5});
    RefinedPrompt refined = augment_prompt(prompt, m);
    CHECK(refined.rendered_text == "a kitchen scene, featuring soft daylight");
    CHECK(refined.rendered_text.find(prompt.text) == 0);  // base verbatim, comma included
    CHECK(refined.rendered_text.find(",,") == std::string::npos);
}

TEST_CASE("augment_prompt rejects an empty mediator and a bad template") {
    Prompt prompt = make_prompt("x");
    CHECK_THROWS_AS(augment_prompt(prompt, MediatorSet{}), Error);
    MediatorSet m;
    m.modifiers.push_back(Modifier{"y", "f", make_brand("a"), 0.0});
    CHECK_THROWS_AS(augment_prompt(prompt, m, "no placeholder"), Error);
}

TEST_CASE("the global modifier cap truncates after sorting") {
    auto embedder = std::make_shared<MockEmbeddingProvider>();
    auto vlm = std::make_shared<SequenceVlm>(std::vector<std::string>{"unused"});
    RefinerConfig config;
    config.scoring_enabled = false;
    config.max_total_modifiers = 2;
    Refiner refiner(embedder, vlm, config, "persona {K}");

    DeconstructionResponse response;
    response.core_subject = "subject";
    for (const std::string& brand : {"zeta", "alpha", "mid"}) {
        BiasDeconstruction decon;
        decon.brand = make_brand(brand);
        decon.features.push_back(FeatureRecord{"f", decon.brand, "feature"});
        decon.alternatives["f"] = {CandidateModifier{brand + "-alt", "f", std::nullopt}};
        response.biases.push_back(decon);
    }
    MediatorSet m = refiner.select_modifiers(response, config);
    REQUIRE(m.modifiers.size() == 2);
    CHECK(m.modifiers[0].source_bias.canonical_name == "alpha");
    CHECK(m.modifiers[1].source_bias.canonical_name == "mid");
}
