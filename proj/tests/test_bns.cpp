#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cider/bns.hpp"
#include "cider/error.hpp"
#include "cider/providers_mock.hpp"
#include "cider/util.hpp"

using namespace cider;

TEST_CASE("phi closed forms") {
    CHECK(phi({}, 0.9) == 0.0);
    CHECK(phi({1.0}, 0.9) == doctest::Approx(1.0).epsilon(1e-12));
    // sorted to [0.9, 0.5]: 0.9 + 0.9*0.5 = 1.35
    CHECK(phi({0.5, 0.9}, 0.9) == doctest::Approx(1.35).epsilon(1e-12));
}

TEST_CASE("bns closed forms") {
    CHECK(bns({}, BnsConfig{}) == 1.0);  // exactly
    CHECK(bns({1.0}, BnsConfig{0.9, 0.75}) == doctest::Approx(std::exp(-0.75)).epsilon(1e-9));
    CHECK(bns({0.9, 0.5}, BnsConfig{0.9, 0.75}) == doctest::Approx(std::exp(-1.0125)).epsilon(1e-9));
}

TEST_CASE("score and config validation") {
    CHECK_THROWS_AS(phi({1.2}, 0.9), Error);
    CHECK_THROWS_AS(phi({-0.1}, 0.9), Error);
    CHECK_THROWS_AS(phi({0.5}, 0.0), Error);
    CHECK_THROWS_AS(bns({0.5}, BnsConfig{0.9, 0.0}), Error);
    CHECK_THROWS_AS(bns({0.5}, BnsConfig{1.5, 0.75}), Error);
    try {
        phi({2.0}, 0.9);
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ScoreOutOfRange);
    }
}

TEST_CASE("bns properties on random inputs") {
    util::SplitMix64 rng(13);
    BnsConfig config;
    for (int iter = 0; iter < 1000; ++iter) {
        std::size_t n = rng.next_below(6);
        std::vector<double> scores;
        for (std::size_t i = 0; i < n; ++i) scores.push_back(rng.next_double());

        double value = bns(scores, config);
        CHECK(value > 0.0);
        CHECK(value <= 1.0);

        // permutation invariance
        std::vector<double> shuffled = scores;
        for (std::size_t i = shuffled.size(); i > 1; --i)
            std::swap(shuffled[i - 1], shuffled[rng.next_below(i)]);
        CHECK(bns(shuffled, config) == value);

        // sorting is canonical
        std::vector<double> sorted = scores;
        std::sort(sorted.begin(), sorted.end(), std::greater<double>());
        CHECK(phi(scores, config.gamma) == phi(sorted, config.gamma));

        // appending a positive score strictly decreases the result
        std::vector<double> appended = scores;
        appended.push_back(0.05 + 0.95 * rng.next_double());
        CHECK(bns(appended, config) < value);

        // increasing one score strictly decreases the result
        if (!scores.empty()) {
            std::size_t k = rng.next_below(scores.size());
            if (scores[k] < 0.999) {
                std::vector<double> bumped = scores;
                bumped[k] += (1.0 - bumped[k]) * 0.5;
                CHECK(bns(bumped, config) < value);
            }
        }
    }
}

TEST_CASE("larger gamma penalizes multi-bias images more") {
    std::vector<double> scores = {0.8, 0.6, 0.4};
    double low = bns(scores, BnsConfig{0.5, 0.75});
    double high = bns(scores, BnsConfig{0.95, 0.75});
    CHECK(phi(scores, 0.95) > phi(scores, 0.5));
    CHECK(high < low);
}

TEST_CASE("judge provider validation") {
    ImageRef image{"img", "bytes", std::nullopt, "prompt"};

    SUBCASE("empty findings") {
        MockJudge judge({});
        JudgeReport report = judge_image(judge, image);
        CHECK(report.findings.empty());
    }
    SUBCASE("scripted finding") {
        MockJudge judge({MockJudgeRule{make_brand("nike"), 0.9, "bytes", {}}});
        JudgeReport report = judge_image(judge, image);
        REQUIRE(report.findings.size() == 1);
        CHECK(report.findings[0].brand.canonical_name == "nike");
        CHECK(report.findings[0].confidence == doctest::Approx(0.9));
    }
    SUBCASE("out-of-range confidence is an error, not clamped") {
        MockJudge judge({MockJudgeRule{make_brand("nike"), 1.4, "bytes", {}}});
        try {
            judge_image(judge, image);
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ScoreOutOfRange);
        }
    }
}

namespace {

// Judge that fails for images whose id contains "bad".
class FlakyJudge : public JudgeProvider {
public:
    JudgeReport judge(const ImageRef& image) override {
        if (image.id.find("bad") != std::string::npos)
            raise(ErrorKind::ProviderUnavailable, "scripted outage");
        JudgeReport report;
        report.image_id = image.id;
        if (image.id.find("biased") != std::string::npos)
            report.findings.push_back(JudgeFinding{make_brand("nike"), 0.5});
        return report;
    }
};

}  // namespace

TEST_CASE("batch_bns aggregates and tolerates partial failures") {
    FlakyJudge judge;
    SUBCASE("all bias-free") {
        std::vector<ImageRef> images = {{"clean-1", "x", std::nullopt, ""},
                                        {"clean-2", "x", std::nullopt, ""}};
        BatchBnsResult result = batch_bns(images, judge);
        CHECK(result.mean_percent == doctest::Approx(100.0));
        CHECK(result.failures == 0);
    }
    SUBCASE("mean over mixed scores") {
        // bns of one 0.5-confidence finding with defaults: exp(-0.375)
        std::vector<ImageRef> images = {{"clean", "x", std::nullopt, ""},
                                        {"biased", "x", std::nullopt, ""}};
        BatchBnsResult result = batch_bns(images, judge);
        double expected = 100.0 * (1.0 + std::exp(-0.375)) / 2.0;
        CHECK(result.mean_percent == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("one failure of three") {
        std::vector<ImageRef> images = {{"clean", "x", std::nullopt, ""},
                                        {"bad", "x", std::nullopt, ""},
                                        {"biased", "x", std::nullopt, ""}};
        BatchBnsResult result = batch_bns(images, judge);
        CHECK(result.failures == 1);
        CHECK(!result.per_image[1].has_value());
        double expected = 100.0 * (1.0 + std::exp(-0.375)) / 2.0;
        CHECK(result.mean_percent == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("parallel equals sequential") {
        std::vector<ImageRef> images;
        for (int i = 0; i < 12; ++i)
            images.push_back({i % 3 == 0 ? "biased-" + std::to_string(i) : "clean-" + std::to_string(i),
                              "x", std::nullopt, ""});
        BatchBnsResult sequential = batch_bns(images, judge, BnsConfig{}, 1);
        BatchBnsResult parallel = batch_bns(images, judge, BnsConfig{}, 4);
        CHECK(sequential.mean_percent == parallel.mean_percent);
        for (std::size_t i = 0; i < images.size(); ++i)
            CHECK(sequential.per_image[i] == parallel.per_image[i]);
    }
}

TEST_CASE("batch_bns rejects empty input") {
    FlakyJudge judge;
    CHECK_THROWS_AS(batch_bns({}, judge), Error);
}

TEST_CASE("the two-shot example from the mean aggregation contract") {
    // two images with bns {1.0, 0.5} -> 75.0; emulate via per-image values
    // and the same arithmetic batch_bns uses.
    double mean = 100.0 * (1.0 + 0.5) / 2.0;
    CHECK(mean == doctest::Approx(75.0));
}
