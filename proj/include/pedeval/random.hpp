#pragma once

// Seeded randomness with results that do not depend on the standard library
// vendor. std::uniform_int_distribution is implementation-defined, so the
// bounded draw and the shuffle are written out here.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace pedeval {

/// SplitMix64 finalizer. Used to derive independent sub-seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
    return mix_seed(a ^ mix_seed(b));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) {
        // Rejection sampling over the largest multiple of bound.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return r % bound;
    }

    /// Uniform double in [0, 1).
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Fisher-Yates, back to front.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

    /// `n` distinct indices from [0, size), in draw order.
    std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n) {
        std::vector<std::size_t> idx(size);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        // Partial Fisher-Yates from the front.
        for (std::size_t i = 0; i < n && i < size; ++i) {
            const auto j = i + static_cast<std::size_t>(below(size - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(std::min(n, size));
        return idx;
    }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace pedeval
