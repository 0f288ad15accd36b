#include "cider/util.hpp"

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cider/error.hpp"

namespace cider::util {

std::uint64_t fnv1a64(const void* data, std::size_t len) noexcept {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::uint64_t fnv1a64(std::string_view data) noexcept {
    return fnv1a64(data.data(), data.size());
}

std::uint64_t SplitMix64::next() noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double SplitMix64::next_double() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::uint64_t SplitMix64::next_below(std::uint64_t n) noexcept {
    return n == 0 ? 0 : next() % n;
}

namespace {

constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) noexcept {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

}  // namespace

std::string base64_encode(const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= len; i += 3) {
        std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(kB64Alphabet[(n >> 18) & 63]);
        out.push_back(kB64Alphabet[(n >> 12) & 63]);
        out.push_back(kB64Alphabet[(n >> 6) & 63]);
        out.push_back(kB64Alphabet[n & 63]);
    }
    if (len - i == 1) {
        std::uint32_t n = bytes[i] << 16;
        out.push_back(kB64Alphabet[(n >> 18) & 63]);
        out.push_back(kB64Alphabet[(n >> 12) & 63]);
        out += "==";
    } else if (len - i == 2) {
        std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(kB64Alphabet[(n >> 18) & 63]);
        out.push_back(kB64Alphabet[(n >> 12) & 63]);
        out.push_back(kB64Alphabet[(n >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::string base64_encode(std::string_view data) {
    return base64_encode(data.data(), data.size());
}

std::vector<std::uint8_t> base64_decode(std::string_view encoded) {
    if (encoded.size() % 4 != 0) raise(ErrorKind::CorruptFile, "base64 payload length not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(encoded.size() / 4 * 3);
    for (std::size_t i = 0; i < encoded.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            char c = encoded[i + k];
            if (c == '=') {
                if (i + 4 != encoded.size() || k < 2) raise(ErrorKind::CorruptFile, "misplaced base64 padding");
                vals[k] = 0;
                ++pad;
            } else {
                if (pad > 0) raise(ErrorKind::CorruptFile, "base64 data after padding");
                vals[k] = b64_value(c);
                if (vals[k] < 0) raise(ErrorKind::CorruptFile, "invalid base64 character");
            }
        }
        std::uint32_t n = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
        out.push_back(static_cast<std::uint8_t>((n >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((n >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(n & 0xff));
    }
    return out;
}

std::string doubles_to_b64(const std::vector<double>& values) {
    std::vector<std::uint8_t> bytes(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &values[i], 8);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<std::uint8_t>((bits >> (8 * b)) & 0xff);
    }
    return base64_encode(bytes.data(), bytes.size());
}

std::vector<double> b64_to_doubles(std::string_view encoded) {
    std::vector<std::uint8_t> bytes = base64_decode(encoded);
    if (bytes.size() % 8 != 0) raise(ErrorKind::CorruptFile, "vector payload is not a whole number of doubles");
    std::vector<double> values(bytes.size() / 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
        std::memcpy(&values[i], &bits, 8);
    }
    return values;
}

std::string to_hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string trim(std::string_view text) {
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return std::string(text.substr(begin, end - begin));
}

std::string to_lower(std::string_view text) {
    std::string out(text);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool contains(std::string_view haystack, std::string_view needle) noexcept {
    return haystack.find(needle) != std::string_view::npos;
}

bool is_slug(std::string_view text) noexcept {
    if (text.empty()) return false;
    for (char c : text) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
        if (!ok) return false;
    }
    return true;
}

std::string slugify(std::string_view text) {
    std::string out;
    bool pending_dash = false;
    for (char c : text) {
        char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if ((lower >= 'a' && lower <= 'z') || (lower >= '0' && lower <= '9')) {
            if (pending_dash && !out.empty()) out.push_back('-');
            pending_dash = false;
            out.push_back(lower);
        } else {
            pending_dash = true;
        }
    }
    return out.empty() ? "unknown" : out;
}

std::string display_from_slug(std::string_view slug) {
    std::string out;
    bool word_start = true;
    for (char c : slug) {
        if (c == '-') {
            out.push_back(' ');
            word_start = true;
        } else {
            out.push_back(word_start ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c);
            word_start = false;
        }
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::IoError, "cannot open for reading: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) raise(ErrorKind::IoError, "read failed: " + path);
    return buf.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorKind::IoError, "cannot open for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) raise(ErrorKind::IoError, "write failed: " + path);
}

namespace {
std::atomic<int> g_verbosity{0};
}

void set_log_verbosity(int level) noexcept { g_verbosity.store(level); }
int log_verbosity() noexcept { return g_verbosity.load(); }

void log_warn(const std::string& message) {
    std::fprintf(stderr, "[warn] %s\n", message.c_str());
}

void log_info(const std::string& message) {
    if (g_verbosity.load() >= 1) std::fprintf(stderr, "[info] %s\n", message.c_str());
}

}  // namespace cider::util
