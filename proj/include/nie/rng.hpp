#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace nie {

/// FNV-1a 64-bit hash over raw bytes. Used for split assignment and
/// artifact integrity hashes, so the exact constants are load-bearing.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    return fnv1a64(s.data(), s.size());
}

inline std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

namespace detail {
// splitmix64 finalizer; also used to derive independent streams.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Deterministic RNG with explicitly defined integer/real mappings.
/// std::mt19937 plus the standard distributions would be reproducible per
/// libstdc++ but not across standard libraries; everything here is pinned
/// down so corpora and model initializations are byte-stable.
class DetRng {
public:
    explicit DetRng(std::uint64_t seed) : state_(detail::mix64(seed ^ 0x5851f42d4c957f2dull)) {}

    /// A sub-stream independent of (but derived from) (seed, stream).
    DetRng(std::uint64_t seed, std::uint64_t stream)
        : state_(detail::mix64(detail::mix64(seed) ^ detail::mix64(stream + 0x9e3779b97f4a7c15ull))) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return detail::mix64(state_);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_between(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(uniform_int(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller (first variate only, deterministic).
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    template <typename T>
    const T& pick(const std::vector<T>& items) {
        return items[uniform_int(items.size())];
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        if (items.empty()) return;
        for (std::size_t i = items.size() - 1; i > 0; --i) {
            std::size_t j = uniform_int(i + 1);
            std::swap(items[i], items[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace nie
