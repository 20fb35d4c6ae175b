#pragma once

// Shared error types, deterministic RNG, and small utilities.

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace patentkg {

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr int kGraphFormatVersion = 1;
inline constexpr int kModelFormatVersion = 1;
inline constexpr int kLinksFormatVersion = 1;
inline constexpr int kReportFormatVersion = 1;

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File unreadable / unwritable.
struct io_error : error { using error::error; };
// Malformed input data (names line numbers where possible).
struct parse_error : error { using error::error; };
// Versioned-file header mismatch.
struct format_error : error { using error::error; };
// Array/tensor dimension mismatch.
struct shape_error : error { using error::error; };
// Unknown entity / missing key.
struct lookup_error : error { using error::error; };
// Invalid argument combination at an operation boundary.
struct input_error : error { using error::error; };
// Invalid configuration value.
struct config_error : error { using error::error; };
// Non-finite value where a finite one is required.
struct numeric_error : error { using error::error; };
// Result cap exceeded (clique enumeration).
struct truncation_error : error { using error::error; };

// Deterministic RNG. Draws are produced by explicit bit manipulation of
// SplitMix64 output so sequences do not depend on any standard-library
// distribution implementation.
class DetRng {
public:
    explicit DetRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n), unbiased via rejection.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw input_error("DetRng: next_below(0)");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do { x = next_u64(); } while (x >= limit);
        return x % n;
    }

    bool coin() { return (next_u64() & 1u) != 0; }

    // Fisher-Yates shuffle with deterministic draw order.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string fnv1a64_hex(const std::string& s) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(s);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

template <typename T>
std::string join(const std::vector<T>& items, const std::string& sep) {
    std::ostringstream os;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) os << sep;
        os << items[i];
    }
    return os.str();
}

}  // namespace patentkg
