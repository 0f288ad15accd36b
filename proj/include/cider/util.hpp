#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cider::util {

// FNV-1a, 64-bit. Stable across platforms and runs; used wherever the
// artifact needs a reproducible hash (mock providers, per-prompt seeds).
std::uint64_t fnv1a64(std::string_view data) noexcept;
std::uint64_t fnv1a64(const void* data, std::size_t len) noexcept;

// splitmix64: tiny counter-based PRNG. Every stream is a pure function of
// its seed, which keeps the deterministic mocks reproducible bit-for-bit.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() noexcept;
    // Uniform in [0, 1).
    double next_double() noexcept;
    // Uniform in [0, n).
    std::uint64_t next_below(std::uint64_t n) noexcept;
};

std::string base64_encode(const void* data, std::size_t len);
std::string base64_encode(std::string_view data);
// Throws Error(CorruptFile) on invalid input.
std::vector<std::uint8_t> base64_decode(std::string_view encoded);

// Little-endian packing for vector payloads; bit-exact round trip.
std::string doubles_to_b64(const std::vector<double>& values);
std::vector<double> b64_to_doubles(std::string_view encoded);

std::string to_hex(std::uint64_t value);

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);
bool contains(std::string_view haystack, std::string_view needle) noexcept;

// Lowercase ASCII slug: [a-z0-9-]+
bool is_slug(std::string_view text) noexcept;
// "burger-king" -> "Burger King"
std::string display_from_slug(std::string_view slug);
// Lenient slug for free-form labels: "Burger King" -> "burger-king";
// "unknown" when nothing survives.
std::string slugify(std::string_view text);

// Whole-file IO. Both throw Error(IoError) with the path in the message.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// Minimal stderr logging; verbosity 0 = warnings only, 1 adds info lines.
void set_log_verbosity(int level) noexcept;
int log_verbosity() noexcept;
void log_warn(const std::string& message);
void log_info(const std::string& message);

}  // namespace cider::util
