#include "cider/providers_remote.hpp"

#include <httplib.h>

#include "cider/error.hpp"
#include "cider/util.hpp"

namespace cider {

namespace {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        raise(ErrorKind::ConfigError, "endpoint URL lacks a scheme: " + url);
    std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        raise(ErrorKind::ConfigError, "unsupported endpoint scheme '" + scheme + "' in " + url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (scheme == "https")
        raise(ErrorKind::ConfigError, "built without TLS support, cannot use " + url);
#endif
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return SplitUrl{url, "/"};
    return SplitUrl{url.substr(0, path_start), url.substr(path_start)};
}

// One client per request keeps the providers reentrant.
std::string post_json(const RemoteEndpoint& endpoint, const Json& body) {
    SplitUrl url = split_url(endpoint.url);
    httplib::Client client(url.base);
    client.set_connection_timeout(0, endpoint.timeout_ms * 1000LL);
    client.set_read_timeout(0, endpoint.timeout_ms * 1000LL);
    client.set_write_timeout(0, endpoint.timeout_ms * 1000LL);

    auto res = client.Post(url.path, body.dump(), "application/json");
    if (!res)
        raise(ErrorKind::ProviderUnavailable,
              "no response from " + endpoint.url + " (" + httplib::to_string(res.error()) + ")");
    if (res->status != 200)
        raise(ErrorKind::ProviderUnavailable,
              endpoint.url + " returned HTTP " + std::to_string(res->status));
    return res->body;
}

Json post_json_expect_json(const RemoteEndpoint& endpoint, const Json& body) {
    std::string raw = post_json(endpoint, body);
    try {
        return Json::parse(raw);
    } catch (const Json::exception& e) {
        raise(ErrorKind::ProviderUnavailable,
              endpoint.url + " returned a non-JSON body: " + std::string(e.what()));
    }
}

std::string image_b64(const ImageRef& image) {
    return util::base64_encode(image.load_bytes());
}

}  // namespace

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEndpoint endpoint, std::size_t dim)
    : endpoint_(std::move(endpoint)), dim_(dim) {
    if (dim_ < 2) raise(ErrorKind::ConfigError, "embedding dim must be >= 2");
}

Embedding RemoteEmbeddingProvider::request(const std::string& kind, const std::string& payload) {
    Json response = post_json_expect_json(endpoint_, Json{{"kind", kind}, {"payload", payload}});
    try {
        Embedding out;
        for (const auto& v : response.at("embedding")) out.push_back(v.get<double>());
        std::size_t declared = response.value("dim", out.size());
        if (declared != out.size() || out.size() != dim_)
            raise(ErrorKind::ProviderUnavailable,
                  endpoint_.url + " returned dim " + std::to_string(out.size()) + ", expected " +
                      std::to_string(dim_));
        return out;
    } catch (const Json::exception& e) {
        raise(ErrorKind::ProviderUnavailable, endpoint_.url + " embedding response: " + e.what());
    }
}

Embedding RemoteEmbeddingProvider::embed_text(const std::string& text) {
    if (text.empty()) raise(ErrorKind::EmptyInput, "embed_text of empty string");
    return request("text", text);
}

Embedding RemoteEmbeddingProvider::embed_image(const ImageRef& image) {
    return request("image", image_b64(image));
}

RemoteLogoDetector::RemoteLogoDetector(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::vector<LogoDetection> RemoteLogoDetector::detect(const ImageRef& image) {
    Json response = post_json_expect_json(endpoint_, Json{{"image_b64", image_b64(image)}});
    try {
        std::vector<LogoDetection> out;
        for (const auto& det : response.at("detections")) {
            const Json& box = det.at("box");
            out.push_back(LogoDetection{det.at("label").get<std::string>(),
                                        det.at("confidence").get<double>(),
                                        BoundingBox{box.at(0).get<double>(), box.at(1).get<double>(),
                                                    box.at(2).get<double>(), box.at(3).get<double>()}});
        }
        return out;
    } catch (const Json::exception& e) {
        raise(ErrorKind::ProviderUnavailable, endpoint_.url + " detector response: " + e.what());
    }
}

RemoteVlm::RemoteVlm(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::string RemoteVlm::complete(const VlmRequest& request) {
    Json biases = Json::array();
    for (const auto& r : request.biases)
        biases.push_back(Json{{"brand", r.brand.canonical_name},
                              {"kind", to_string(r.kind)},
                              {"confidence", r.confidence}});
    Json body{{"system", request.system},
              {"image_b64", image_b64(request.image)},
              {"biases", std::move(biases)},
              {"prompt", request.prompt_text}};
    return post_json(endpoint_, body);
}

RemoteJudge::RemoteJudge(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

JudgeReport RemoteJudge::judge(const ImageRef& image) {
    Json response = post_json_expect_json(endpoint_, Json{{"image_b64", image_b64(image)}});
    try {
        JudgeReport report;
        report.image_id = image.id;
        for (const auto& f : response.at("findings")) {
            std::string label = f.at("brand").get<std::string>();
            report.findings.push_back(
                JudgeFinding{BrandId{util::slugify(label), label}, f.at("confidence").get<double>()});
        }
        return report;
    } catch (const Json::exception& e) {
        raise(ErrorKind::ProviderUnavailable, endpoint_.url + " judge response: " + e.what());
    }
}

RemoteTextToImage::RemoteTextToImage(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

ImageRef RemoteTextToImage::generate(const std::string& prompt, std::uint64_t seed,
                                     const std::string& negative) {
    Json body{{"prompt", prompt}, {"seed", seed}};
    if (!negative.empty()) body["negative"] = negative;
    Json response = post_json_expect_json(endpoint_, body);
    try {
        auto bytes = util::base64_decode(response.at("image_b64").get<std::string>());
        ImageRef image;
        image.id = response.at("id").get<std::string>();
        image.content = std::string(bytes.begin(), bytes.end());
        image.source_prompt = prompt;
        return image;
    } catch (const Json::exception& e) {
        raise(ErrorKind::ProviderUnavailable, endpoint_.url + " t2i response: " + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::CorruptFile)
            raise(ErrorKind::ProviderUnavailable, endpoint_.url + " returned invalid image base64");
        throw;
    }
}

}  // namespace cider
