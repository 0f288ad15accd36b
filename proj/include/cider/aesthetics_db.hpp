#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cider/core.hpp"
#include "cider/embedding.hpp"

namespace cider {

// Default implicit-match threshold. Deliberately conservative; tune per
// database by sweeping labeled pairs (see README).
inline constexpr double kDefaultImplicitThreshold = 0.65;

inline constexpr int kAestheticsSchemaVersion = 1;

// One curated brand style: the unit-norm centroid of its exemplar images.
struct StyleEntry {
    std::string style_id;  // slug
    BrandId brand;
    std::string description;
    Embedding centroid;  // unit norm within 1e-6
    std::uint32_t exemplar_count = 0;
};

struct StyleMatch {
    StyleEntry entry;
    double similarity = 0;
};

// Store of brand-style centroid embeddings with thresholded similarity
// lookup. Read-mostly: concurrent match() calls are safe; ingest/save need
// exclusive access (single-writer contract, no internal locking).
class AestheticsDatabase {
public:
    explicit AestheticsDatabase(std::size_t embedding_dim);

    std::size_t embedding_dim() const { return dim_; }
    int version() const { return kAestheticsSchemaVersion; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    // Ascending style_id.
    const std::vector<StyleEntry>& entries() const { return entries_; }

    // Centroid = normalized mean of the exemplar embeddings. Adds or
    // replaces the entry. Throws Error(EmptyExemplars) and propagates
    // embedding-provider failures.
    StyleEntry ingest_style(EmbeddingProvider& provider, const BrandId& brand, const std::string& style_id,
                            const std::string& description, const std::vector<ImageRef>& exemplars);

    // All entries with cosine(query, centroid) >= threshold, sorted by
    // similarity descending, ties by style_id ascending.
    std::vector<StyleMatch> match(const Embedding& query, double threshold) const;

    void save(const std::string& path) const;
    static AestheticsDatabase load(const std::string& path);

private:
    void upsert(StyleEntry entry);
    void repack();

    std::size_t dim_;
    std::vector<StyleEntry> entries_;  // sorted by style_id
    std::vector<double> packed_;       // row-major centroids, rows follow entries_
};

}  // namespace cider
