#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cider/core.hpp"

namespace cider {

inline constexpr int kCacheSchemaVersion = 1;

struct CacheConfig {
    std::size_t capacity = 1024;
    bool allow_superset_cover = true;
};

struct CacheStats {
    std::uint64_t entries = 0;
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t evictions = 0;
    std::uint64_t vlm_calls_saved = 0;
};

struct CacheEntry {
    std::string key;  // canonical_key of bias_records
    BiasSet bias_records;
    MediatorSet mediator;
    std::int64_t created_at_ms = 0;
    std::int64_t last_used_ms = 0;
    std::uint64_t last_used_tick = 0;  // logical recency; drives LRU deterministically
    std::uint64_t hits = 0;
};

// Maps previously seen bias sets to their selected mediators so repeat
// biases skip the VLM. Lookup is exact-match first; optionally an entry
// whose bias set strictly covers the query is reused, with the returned
// modifiers restricted to the queried brands. LRU eviction.
//
// Thread contract: all operations serialize on one internal mutex, so
// concurrent lookups are safe and writers never interleave.
class RedirectionCache {
public:
    explicit RedirectionCache(CacheConfig config = {});

    const CacheConfig& config() const { return config_; }

    // Returns the covering mediator (provenance CacheHit) or nullopt.
    // Covering entries whose restriction to the queried brands is empty are
    // skipped. Bumps hit/miss counters and entry recency.
    std::optional<MediatorSet> lookup(const BiasSet& biases);

    // Upserts at the canonical key and evicts least-recently-used entries
    // beyond capacity. Every modifier's source_bias must be one of the
    // queried brands (Error(SourceBiasMismatch) otherwise).
    void insert(const BiasSet& biases, const MediatorSet& mediator);

    CacheStats stats() const;
    std::size_t size() const;
    // Sorted by key; for export and persistence.
    std::vector<CacheEntry> entries() const;
    void clear();

    void save(const std::string& path) const;
    // unique_ptr because the cache owns a mutex and cannot move.
    static std::unique_ptr<RedirectionCache> load(const std::string& path, CacheConfig config = {});

private:
    void touch(const std::string& key);
    void evict_over_capacity();

    struct Slot {
        CacheEntry entry;
        std::list<std::string>::iterator lru_position;
    };

    mutable std::mutex mutex_;
    CacheConfig config_;
    std::unordered_map<std::string, Slot> map_;
    std::list<std::string> lru_;  // front = most recently used
    std::uint64_t tick_ = 0;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
    std::uint64_t evictions_ = 0;
    std::uint64_t vlm_calls_saved_ = 0;
};

}  // namespace cider
