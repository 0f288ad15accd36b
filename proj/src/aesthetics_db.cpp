#include "cider/aesthetics_db.hpp"

#include <algorithm>
#include <cmath>

#include "cider/error.hpp"
#include "cider/kernels.hpp"
#include "cider/util.hpp"

namespace cider {

AestheticsDatabase::AestheticsDatabase(std::size_t embedding_dim) : dim_(embedding_dim) {
    if (dim_ < 2) raise(ErrorKind::ConfigError, "aesthetics database dim must be >= 2");
}

StyleEntry AestheticsDatabase::ingest_style(EmbeddingProvider& provider, const BrandId& brand,
                                            const std::string& style_id, const std::string& description,
                                            const std::vector<ImageRef>& exemplars) {
    if (exemplars.empty()) raise(ErrorKind::EmptyExemplars, "style '" + style_id + "' has no exemplar images");
    if (!util::is_slug(style_id)) raise(ErrorKind::SchemaError, "style_id is not a slug: '" + style_id + "'");
    if (provider.dim() != dim_)
        raise(ErrorKind::DimensionMismatch, "provider dim " + std::to_string(provider.dim()) +
                                                " != database dim " + std::to_string(dim_));

    std::vector<Embedding> embeddings = embed_images(provider, exemplars);
    Embedding mean(dim_, 0.0);
    for (const auto& e : embeddings)
        for (std::size_t i = 0; i < dim_; ++i) mean[i] += e[i];
    for (double& v : mean) v /= static_cast<double>(embeddings.size());

    double n = kernels::norm(mean);
    if (n == 0.0) raise(ErrorKind::ZeroNorm, "exemplar mean for style '" + style_id + "' has zero norm");
    for (double& v : mean) v /= n;

    StyleEntry entry{style_id, brand, description, std::move(mean),
                     static_cast<std::uint32_t>(exemplars.size())};
    upsert(entry);
    return entry;
}

std::vector<StyleMatch> AestheticsDatabase::match(const Embedding& query, double threshold) const {
    if (query.size() != dim_)
        raise(ErrorKind::DimensionMismatch,
              "query dim " + std::to_string(query.size()) + " != database dim " + std::to_string(dim_));
    if (threshold < -1.0 || threshold > 1.0)
        raise(ErrorKind::ConfigError, "match threshold outside [-1,1]: " + std::to_string(threshold));

    std::vector<double> sims(entries_.size());
    if (!entries_.empty()) kernels::cosine_batch(query, packed_, entries_.size(), sims);

    std::vector<StyleMatch> out;
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (sims[i] >= threshold) out.push_back(StyleMatch{entries_[i], sims[i]});
    // entries_ is style_id-ascending, so a stable sort leaves ties in
    // style_id order.
    std::stable_sort(out.begin(), out.end(),
                     [](const StyleMatch& a, const StyleMatch& b) { return a.similarity > b.similarity; });
    return out;
}

void AestheticsDatabase::upsert(StyleEntry entry) {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), entry.style_id,
                               [](const StyleEntry& e, const std::string& id) { return e.style_id < id; });
    if (it != entries_.end() && it->style_id == entry.style_id)
        *it = std::move(entry);
    else
        entries_.insert(it, std::move(entry));
    repack();
}

void AestheticsDatabase::repack() {
    packed_.resize(entries_.size() * dim_);
    for (std::size_t r = 0; r < entries_.size(); ++r)
        std::copy(entries_[r].centroid.begin(), entries_[r].centroid.end(), packed_.begin() + r * dim_);
}

void AestheticsDatabase::save(const std::string& path) const {
    Json j;
    j["version"] = kAestheticsSchemaVersion;
    j["dim"] = dim_;
    Json entries = Json::array();
    for (const auto& e : entries_) {
        entries.push_back(Json{{"style_id", e.style_id},
                               {"brand", to_json(e.brand)},
                               {"description", e.description},
                               {"exemplar_count", e.exemplar_count},
                               {"centroid_b64", util::doubles_to_b64(e.centroid)}});
    }
    j["entries"] = std::move(entries);
    util::write_file(path, j.dump(2) + "\n");
}

AestheticsDatabase AestheticsDatabase::load(const std::string& path) {
    std::string text = util::read_file(path);
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::exception& e) {
        raise(ErrorKind::CorruptFile, "aesthetics database " + path + ": " + e.what());
    }
    try {
        int version = j.at("version").get<int>();
        if (version != kAestheticsSchemaVersion)
            raise(ErrorKind::SchemaVersionMismatch,
                  "aesthetics database schema version " + std::to_string(version));
        AestheticsDatabase db(j.at("dim").get<std::size_t>());
        for (const auto& entry : j.at("entries")) {
            StyleEntry e;
            e.style_id = entry.at("style_id").get<std::string>();
            e.brand = brand_from_json(entry.at("brand"));
            e.description = entry.at("description").get<std::string>();
            e.exemplar_count = entry.at("exemplar_count").get<std::uint32_t>();
            e.centroid = util::b64_to_doubles(entry.at("centroid_b64").get<std::string>());
            if (e.centroid.size() != db.dim_)
                raise(ErrorKind::CorruptFile, "centroid dim mismatch for style '" + e.style_id + "'");
            if (e.exemplar_count == 0)
                raise(ErrorKind::CorruptFile, "exemplar_count must be >= 1 for style '" + e.style_id + "'");
            db.upsert(std::move(e));
        }
        return db;
    } catch (const Json::exception& e) {
        raise(ErrorKind::CorruptFile, "aesthetics database " + path + ": " + e.what());
    }
}

}  // namespace cider
