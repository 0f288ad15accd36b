#include "cider/redirection_cache.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include "cider/error.hpp"
#include "cider/util.hpp"

namespace cider {

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::set<std::pair<std::string, BiasKind>> identity_set(const BiasSet& biases) {
    std::set<std::pair<std::string, BiasKind>> out;
    for (const auto& r : biases.records()) out.emplace(r.brand.canonical_name, r.kind);
    return out;
}

}  // namespace

RedirectionCache::RedirectionCache(CacheConfig config) : config_(config) {
    if (config_.capacity < 1) raise(ErrorKind::ConfigError, "cache capacity must be >= 1");
}

void RedirectionCache::touch(const std::string& key) {
    Slot& slot = map_.at(key);
    lru_.splice(lru_.begin(), lru_, slot.lru_position);
    slot.entry.last_used_ms = now_ms();
    slot.entry.last_used_tick = ++tick_;
}

std::optional<MediatorSet> RedirectionCache::lookup(const BiasSet& biases) {
    if (biases.empty()) raise(ErrorKind::EmptyInput, "cache lookup with an empty bias set");
    std::lock_guard<std::mutex> lock(mutex_);

    const std::string key = biases.key();
    auto it = map_.find(key);
    if (it != map_.end()) {
        touch(key);
        it->second.entry.hits += 1;
        hits_ += 1;
        vlm_calls_saved_ += 1;
        MediatorSet out = it->second.entry.mediator;
        out.provenance = Provenance::CacheHit;
        return out;
    }

    if (config_.allow_superset_cover) {
        const auto query = identity_set(biases);
        std::set<std::string> query_brands;
        for (const auto& [name, kind] : query) query_brands.insert(name);

        // Candidate covers: strict supersets, preferring the smallest set,
        // then the most recently used.
        std::vector<const Slot*> covers;
        for (const auto& [entry_key, slot] : map_) {
            const auto entry_ids = identity_set(slot.entry.bias_records);
            if (entry_ids.size() <= query.size()) continue;
            if (!std::includes(entry_ids.begin(), entry_ids.end(), query.begin(), query.end())) continue;
            covers.push_back(&slot);
        }
        std::sort(covers.begin(), covers.end(), [](const Slot* a, const Slot* b) {
            std::size_t sa = a->entry.bias_records.size();
            std::size_t sb = b->entry.bias_records.size();
            if (sa != sb) return sa < sb;
            return a->entry.last_used_tick > b->entry.last_used_tick;
        });
        for (const Slot* slot : covers) {
            MediatorSet filtered;
            filtered.provenance = Provenance::CacheHit;
            for (const auto& m : slot->entry.mediator.modifiers)
                if (query_brands.count(m.source_bias.canonical_name)) filtered.modifiers.push_back(m);
            if (filtered.modifiers.empty()) continue;  // nothing reusable in this cover
            const std::string cover_key = slot->entry.key;
            touch(cover_key);
            map_.at(cover_key).entry.hits += 1;
            hits_ += 1;
            vlm_calls_saved_ += 1;
            return filtered;
        }
    }

    misses_ += 1;
    return std::nullopt;
}

void RedirectionCache::insert(const BiasSet& biases, const MediatorSet& mediator) {
    if (biases.empty()) raise(ErrorKind::EmptyInput, "cache insert with an empty bias set");
    for (const auto& m : mediator.modifiers)
        if (!biases.contains_brand(m.source_bias.canonical_name))
            raise(ErrorKind::SourceBiasMismatch,
                  "modifier '" + m.text + "' sourced from '" + m.source_bias.canonical_name +
                      "', which is not in the inserted bias set");

    std::lock_guard<std::mutex> lock(mutex_);
    const std::string key = biases.key();
    auto it = map_.find(key);
    if (it != map_.end()) {
        it->second.entry.bias_records = biases;
        it->second.entry.mediator = mediator;
        touch(key);
        return;
    }
    lru_.push_front(key);
    CacheEntry entry;
    entry.key = key;
    entry.bias_records = biases;
    entry.mediator = mediator;
    entry.created_at_ms = now_ms();
    entry.last_used_ms = entry.created_at_ms;
    entry.last_used_tick = ++tick_;
    map_.emplace(key, Slot{std::move(entry), lru_.begin()});
    evict_over_capacity();
}

void RedirectionCache::evict_over_capacity() {
    while (map_.size() > config_.capacity) {
        const std::string& victim = lru_.back();
        map_.erase(victim);
        lru_.pop_back();
        evictions_ += 1;
    }
}

CacheStats RedirectionCache::stats() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return CacheStats{map_.size(), hits_, misses_, evictions_, vlm_calls_saved_};
}

std::size_t RedirectionCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return map_.size();
}

std::vector<CacheEntry> RedirectionCache::entries() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<CacheEntry> out;
    out.reserve(map_.size());
    for (const auto& [key, slot] : map_) out.push_back(slot.entry);
    std::sort(out.begin(), out.end(), [](const CacheEntry& a, const CacheEntry& b) { return a.key < b.key; });
    return out;
}

void RedirectionCache::clear() {
    std::lock_guard<std::mutex> lock(mutex_);
    map_.clear();
    lru_.clear();
    tick_ = 0;
    hits_ = misses_ = evictions_ = vlm_calls_saved_ = 0;
}

void RedirectionCache::save(const std::string& path) const {
    std::lock_guard<std::mutex> lock(mutex_);
    Json j;
    j["version"] = kCacheSchemaVersion;
    j["tick"] = tick_;
    j["counters"] = Json{{"hits", hits_},
                         {"misses", misses_},
                         {"evictions", evictions_},
                         {"vlm_calls_saved", vlm_calls_saved_}};
    Json entries = Json::array();
    std::vector<const CacheEntry*> ordered;
    for (const auto& [key, slot] : map_) ordered.push_back(&slot.entry);
    std::sort(ordered.begin(), ordered.end(),
              [](const CacheEntry* a, const CacheEntry* b) { return a->key < b->key; });
    for (const CacheEntry* e : ordered) {
        entries.push_back(Json{{"key", e->key},
                               {"bias_set", to_json(e->bias_records)},
                               {"mediator", to_json(e->mediator)},
                               {"created_at_ms", e->created_at_ms},
                               {"last_used_ms", e->last_used_ms},
                               {"last_used_tick", e->last_used_tick},
                               {"hits", e->hits}});
    }
    j["entries"] = std::move(entries);
    util::write_file(path, j.dump(2) + "\n");
}

std::unique_ptr<RedirectionCache> RedirectionCache::load(const std::string& path, CacheConfig config) {
    std::string text = util::read_file(path);
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::exception& e) {
        raise(ErrorKind::CorruptFile, "cache file " + path + ": " + e.what());
    }
    try {
        int version = j.at("version").get<int>();
        if (version != kCacheSchemaVersion)
            raise(ErrorKind::SchemaVersionMismatch, "cache schema version " + std::to_string(version));

        auto cache = std::make_unique<RedirectionCache>(config);
        cache->tick_ = j.at("tick").get<std::uint64_t>();
        cache->hits_ = j.at("counters").at("hits").get<std::uint64_t>();
        cache->misses_ = j.at("counters").at("misses").get<std::uint64_t>();
        cache->evictions_ = j.at("counters").at("evictions").get<std::uint64_t>();
        cache->vlm_calls_saved_ = j.at("counters").at("vlm_calls_saved").get<std::uint64_t>();

        std::vector<CacheEntry> loaded;
        for (const auto& e : j.at("entries")) {
            CacheEntry entry;
            entry.key = e.at("key").get<std::string>();
            entry.bias_records = bias_set_from_json(e.at("bias_set"));
            entry.mediator = mediator_from_json(e.at("mediator"));
            entry.created_at_ms = e.at("created_at_ms").get<std::int64_t>();
            entry.last_used_ms = e.at("last_used_ms").get<std::int64_t>();
            entry.last_used_tick = e.at("last_used_tick").get<std::uint64_t>();
            entry.hits = e.at("hits").get<std::uint64_t>();
            if (entry.key != entry.bias_records.key())
                raise(ErrorKind::CorruptFile, "cache entry key does not match its bias set");
            loaded.push_back(std::move(entry));
        }
        // Rebuild recency order: most recent tick first.
        std::sort(loaded.begin(), loaded.end(),
                  [](const CacheEntry& a, const CacheEntry& b) { return a.last_used_tick > b.last_used_tick; });
        for (auto& entry : loaded) {
            cache->lru_.push_back(entry.key);
            auto pos = std::prev(cache->lru_.end());
            std::string key = entry.key;
            cache->map_.emplace(std::move(key), Slot{std::move(entry), pos});
        }
        cache->evict_over_capacity();
        return cache;
    } catch (const Json::exception& e) {
        raise(ErrorKind::CorruptFile, "cache file " + path + ": " + e.what());
    }
}

}  // namespace cider
