#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <thread>

#include "cider/error.hpp"
#include "cider/providers_remote.hpp"
#include "cider/util.hpp"

using namespace cider;

namespace {

// Loopback test server; handlers are installed per test case.
class LoopbackServer {
public:
    LoopbackServer() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LoopbackServer() {
        server_.stop();
        thread_.join();
    }

    httplib::Server& server() { return server_; }
    std::string url(const std::string& path) const {
        return "http://127.0.0.1:" + std::to_string(port_) + path;
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

ImageRef image_with_bytes(const std::string& bytes) {
    return ImageRef{"img-x", bytes, std::nullopt, "prompt"};
}

}  // namespace

TEST_CASE("remote embedding provider speaks the wire contract") {
    LoopbackServer loopback;
    Json last_request;
    loopback.server().Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        last_request = Json::parse(req.body);
        Json reply{{"embedding", {0.0, 0.6, 0.8}}, {"dim", 3}};
        res.set_content(reply.dump(), "application/json");
    });

    RemoteEmbeddingProvider provider(RemoteEndpoint{loopback.url("/embed"), 2000}, 3);

    SUBCASE("text request") {
        Embedding e = provider.embed_text("a laptop");
        CHECK(e == Embedding{0.0, 0.6, 0.8});
        CHECK(last_request.at("kind") == "text");
        CHECK(last_request.at("payload") == "a laptop");
    }
    SUBCASE("image request carries base64") {
        Embedding e = provider.embed_image(image_with_bytes("raw-bytes"));
        CHECK(e.size() == 3);
        CHECK(last_request.at("kind") == "image");
        CHECK(last_request.at("payload") == util::base64_encode("raw-bytes"));
    }
}

TEST_CASE("remote embedding dim mismatch is a provider failure") {
    LoopbackServer loopback;
    loopback.server().Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(Json{{"embedding", {1.0, 0.0}}, {"dim", 2}}.dump(), "application/json");
    });
    RemoteEmbeddingProvider provider(RemoteEndpoint{loopback.url("/embed"), 2000}, 3);
    try {
        provider.embed_text("x");
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ProviderUnavailable);
    }
}

TEST_CASE("non-200 responses raise ProviderUnavailable") {
    LoopbackServer loopback;
    loopback.server().Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
        res.status = 503;
    });
    RemoteEmbeddingProvider provider(RemoteEndpoint{loopback.url("/embed"), 2000}, 3);
    try {
        provider.embed_text("x");
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ProviderUnavailable);
        CHECK(std::string(e.what()).find("503") != std::string::npos);
    }
}

TEST_CASE("unreachable endpoints raise ProviderUnavailable") {
    // port 9 on localhost: nothing listens there
    RemoteEmbeddingProvider provider(RemoteEndpoint{"http://127.0.0.1:9/embed", 300}, 3);
    try {
        provider.embed_text("x");
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ProviderUnavailable);
    }
}

TEST_CASE("slow endpoints time out as ProviderUnavailable") {
    LoopbackServer loopback;
    loopback.server().Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(400));
        res.set_content(Json{{"embedding", {1.0, 0.0, 0.0}}, {"dim", 3}}.dump(), "application/json");
    });
    RemoteEmbeddingProvider provider(RemoteEndpoint{loopback.url("/embed"), 50}, 3);
    CHECK_THROWS_AS(provider.embed_text("x"), Error);
}

TEST_CASE("remote t2i decodes the generated image") {
    LoopbackServer loopback;
    Json last_request;
    loopback.server().Post("/t2i", [&](const httplib::Request& req, httplib::Response& res) {
        last_request = Json::parse(req.body);
        Json reply{{"image_b64", util::base64_encode("fake pixels")}, {"id", "img-9"}};
        res.set_content(reply.dump(), "application/json");
    });

    RemoteTextToImage provider(RemoteEndpoint{loopback.url("/t2i"), 2000});
    ImageRef image = provider.generate("a laptop", 42, "");
    CHECK(image.id == "img-9");
    CHECK(image.content == "fake pixels");
    CHECK(image.source_prompt == "a laptop");
    CHECK(last_request.at("prompt") == "a laptop");
    CHECK(last_request.at("seed") == 42);
    CHECK(!last_request.contains("negative"));

    provider.generate("a laptop", 42, "no logos");
    CHECK(last_request.at("negative") == "no logos");
}

TEST_CASE("remote logo detector parses detections") {
    LoopbackServer loopback;
    loopback.server().Post("/detect", [&](const httplib::Request& req, httplib::Response& res) {
        Json body = Json::parse(req.body);
        REQUIRE(body.contains("image_b64"));
        Json reply{{"detections",
                    Json::array({Json{{"label", "nike-swoosh"},
                                      {"confidence", 0.91},
                                      {"box", {4.0, 8.0, 120.0, 60.0}}}})}};
        res.set_content(reply.dump(), "application/json");
    });

    RemoteLogoDetector provider(RemoteEndpoint{loopback.url("/detect"), 2000});
    auto detections = provider.detect(image_with_bytes("pixels"));
    REQUIRE(detections.size() == 1);
    CHECK(detections[0].label == "nike-swoosh");
    CHECK(detections[0].confidence == doctest::Approx(0.91));
    CHECK(detections[0].box.w == doctest::Approx(120.0));
}

TEST_CASE("remote judge slugifies free-form brand labels") {
    LoopbackServer loopback;
    loopback.server().Post("/judge", [&](const httplib::Request&, httplib::Response& res) {
        Json reply{{"findings", Json::array({Json{{"brand", "Burger King"}, {"confidence", 0.55}}})}};
        res.set_content(reply.dump(), "application/json");
    });

    RemoteJudge provider(RemoteEndpoint{loopback.url("/judge"), 2000});
    JudgeReport report = provider.judge(image_with_bytes("pixels"));
    REQUIRE(report.findings.size() == 1);
    CHECK(report.findings[0].brand.canonical_name == "burger-king");
    CHECK(report.findings[0].brand.display_name == "Burger King");
    CHECK(report.findings[0].confidence == doctest::Approx(0.55));
}

TEST_CASE("remote vlm returns the reply document verbatim") {
    LoopbackServer loopback;
    Json last_request;
    const std::string document = R"({"core_subject":"laptop","biases":[]})";
    loopback.server().Post("/vlm", [&](const httplib::Request& req, httplib::Response& res) {
        last_request = Json::parse(req.body);
        res.set_content(document, "application/json");
    });

    RemoteVlm provider(RemoteEndpoint{loopback.url("/vlm"), 2000});
    VlmRequest request;
    request.system = "persona";
    request.image = image_with_bytes("pixels");
    request.biases = {make_explicit_bias(make_brand("apple"), 0.9, BoundingBox{1, 1, 2, 2}, "apple-mark")};
    request.prompt_text = "a laptop";

    CHECK(provider.complete(request) == document);
    CHECK(last_request.at("system") == "persona");
    CHECK(last_request.at("prompt") == "a laptop");
    REQUIRE(last_request.at("biases").size() == 1);
    CHECK(last_request.at("biases")[0].at("brand") == "apple");
    CHECK(last_request.at("biases")[0].at("kind") == "explicit");
    CHECK(last_request.contains("image_b64"));
}

TEST_CASE("malformed endpoint URLs are config errors") {
    VlmRequest request;
    request.image = image_with_bytes("pixels");
    auto expect_config_error = [&](const std::string& url) {
        try {
            RemoteVlm(RemoteEndpoint{url, 100}).complete(request);
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ConfigError);
        }
    };
    expect_config_error("ftp://host/x");
    expect_config_error("no-scheme");
}
