#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cider/json.hpp"

namespace cider {

// Shared vocabulary for the whole pipeline. Everything here is an immutable
// value object once built; instances can be copied and shared across threads
// freely.

struct Prompt {
    std::string text;
    // Principal semantic subject of the prompt; filled in by the refiner.
    std::optional<std::string> core_subject;
};

// Throws Error(EmptyInput) if the text is empty after trimming.
Prompt make_prompt(const std::string& text);

struct BrandId {
    std::string canonical_name;  // lowercase ASCII slug, [a-z0-9-]+
    std::string display_name;

    friend bool operator==(const BrandId& a, const BrandId& b) {
        return a.canonical_name == b.canonical_name;
    }
    friend bool operator<(const BrandId& a, const BrandId& b) {
        return a.canonical_name < b.canonical_name;
    }
};

// Validates the slug; display name defaults to a title-cased slug.
BrandId make_brand(const std::string& canonical_name, const std::string& display_name = "");

struct ImageRef {
    std::string id;
    // Exactly one of content / path is populated.
    std::optional<std::string> content;  // raw bytes
    std::optional<std::string> path;
    std::string source_prompt;

    bool valid() const { return content.has_value() != path.has_value(); }
    // Returns the payload, reading from disk for path-backed images.
    std::string load_bytes() const;
};

enum class BiasKind { Explicit, Implicit };

std::string to_string(BiasKind kind);
BiasKind bias_kind_from_string(const std::string& text);

struct BoundingBox {
    double x = 0, y = 0, w = 0, h = 0;
};

struct ExplicitEvidence {
    BoundingBox box;
    std::string detector_label;
};

struct ImplicitEvidence {
    std::string style_id;
    double similarity = 0;  // cosine, in [-1, 1]
};

struct BiasRecord {
    BrandId brand;
    BiasKind kind = BiasKind::Explicit;
    double confidence = 0;  // [0, 1]
    std::variant<ExplicitEvidence, ImplicitEvidence> evidence;
};

BiasRecord make_explicit_bias(BrandId brand, double confidence, BoundingBox box, std::string detector_label);
BiasRecord make_implicit_bias(BrandId brand, double confidence, std::string style_id, double similarity);

// Sorted, '|'-joined "canonical_name:kind" tokens; "" for an empty set.
// Pure: identical record sets give identical keys regardless of order.
std::string canonical_key(const std::vector<BiasRecord>& records);

// Set of detected biases keyed by (brand, kind). Inserting a duplicate
// identity keeps the record with the higher confidence; ties keep the
// earlier record.
class BiasSet {
public:
    void add(const BiasRecord& record);
    void merge(const BiasSet& other);

    bool empty() const { return records_.empty(); }
    std::size_t size() const { return records_.size(); }
    // Deterministic order: ascending (brand, kind).
    std::vector<BiasRecord> records() const;
    std::vector<BrandId> brands() const;
    bool contains(const BrandId& brand, BiasKind kind) const;
    bool contains_brand(const std::string& canonical_name) const;
    std::string key() const;

    friend bool operator==(const BiasSet& a, const BiasSet& b) { return a.key() == b.key(); }

private:
    std::map<std::pair<std::string, BiasKind>, BiasRecord> records_;
};

struct Modifier {
    std::string text;
    std::string replaces_feature;  // feature id the modifier substitutes
    BrandId source_bias;
    double score = 0;  // selection-time value; 0 when scoring was disabled
};

enum class Provenance { FreshVlm, CacheHit };

struct MediatorSet {
    // Kept sorted by (source_bias, replaces_feature, text) by producers.
    std::vector<Modifier> modifiers;
    Provenance provenance = Provenance::FreshVlm;

    bool empty() const { return modifiers.empty(); }
};

// Canonical modifier ordering used everywhere a MediatorSet is built.
void sort_modifiers(std::vector<Modifier>& modifiers);

struct RefinedPrompt {
    Prompt base;
    std::vector<Modifier> modifiers;
    std::string rendered_text;  // always contains base.text verbatim
};

enum class Condition { Baseline, NegativePrompt, CiderNoScoring, CiderFull };

std::string to_string(Condition condition);
// Accepts the CLI spellings ("baseline", "negative-prompt", "cider-no-scoring",
// "cider-full"). Throws Error(ConfigError) on anything else.
Condition condition_from_string(const std::string& text);

// Full trace of one pipeline execution.
struct RunRecord {
    Prompt prompt;
    Condition condition = Condition::Baseline;
    ImageRef initial_image;
    BiasSet bias_set;
    std::optional<MediatorSet> mediator;
    std::optional<RefinedPrompt> refined;
    ImageRef final_image;
    double bns_initial = 0;
    double bns_final = 0;
    std::uint64_t vlm_calls = 0;  // refinement VLM calls (incl. parse retries)
    bool cache_hit = false;
    std::uint64_t seed = 0;
};

// JSON round trips. RunRecord serialization is schema-versioned; the byte
// layout is stable for identical inputs.
Json to_json(const BrandId& brand);
BrandId brand_from_json(const Json& j);
Json to_json(const BiasRecord& record);
BiasRecord bias_record_from_json(const Json& j);
Json to_json(const BiasSet& set);
BiasSet bias_set_from_json(const Json& j);
Json to_json(const Modifier& modifier);
Modifier modifier_from_json(const Json& j);
Json to_json(const MediatorSet& mediator);
MediatorSet mediator_from_json(const Json& j);
Json to_json(const ImageRef& image);
ImageRef image_from_json(const Json& j);
Json to_json(const RunRecord& record);
RunRecord run_record_from_json(const Json& j);

inline constexpr int kRunRecordSchemaVersion = 1;

}  // namespace cider
