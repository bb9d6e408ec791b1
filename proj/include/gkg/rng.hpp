// Counter-based keyed randomness. Every randomized operation in the library
// is a pure function of (seed, key material), so parallel and serial
// execution plans produce identical corpora, checkpoints and reports.
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace gkg {

// splitmix64 finalizer; full-period mixing of a 64-bit counter.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// FNV-1a over raw bytes.
inline std::uint64_t hash_bytes(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b));
}

// Pure hash of (seed, key). Used wherever a decision must depend on a record
// id alone (instruction choice, donor choice) rather than on visit order.
inline std::uint64_t keyed_u64(std::uint64_t seed, std::string_view key) {
    return mix(seed, hash_bytes(key));
}

inline std::size_t keyed_below(std::uint64_t seed, std::string_view key, std::size_t n) {
    return n == 0 ? 0 : static_cast<std::size_t>(keyed_u64(seed, key) % n);
}

// Stream generator: splitmix64 over an incrementing counter under a fixed
// key. Stateless apart from the counter, so streams are reproducible and
// independent across distinct salts.
class KeyedRng {
public:
    KeyedRng(std::uint64_t seed, std::string_view salt)
        : key_(mix(seed, hash_bytes(salt))) {}

    std::uint64_t next_u64() { return splitmix64(key_ + counter_++); }

    // Uniform in [0,1) with 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    std::size_t next_below(std::size_t n) {
        return n == 0 ? 0 : static_cast<std::size_t>(next_u64() % n);
    }

    // Uniform in [-limit, limit].
    double next_symmetric(double limit) { return (2.0 * next_unit() - 1.0) * limit; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = next_below(i + 1);
            std::swap(v[i], v[j]);
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace gkg
