#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace alne {

// splitmix64; used to derive independent seed streams from one root seed.
inline uint64_t mix_seed(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t root, uint64_t stream) {
    return mix_seed(root ^ mix_seed(stream));
}

inline uint64_t derive_seed(uint64_t root, std::string_view tag) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return derive_seed(root, h);
}

// mt19937_64 with hand-rolled draw helpers. The std distributions are not
// pinned by the standard, so everything that must be reproducible goes
// through this wrapper instead.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // uniform in [0, bound), bound > 0; rejection sampling keeps it unbiased
    uint64_t bounded(uint64_t bound) {
        const uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const uint64_t r = engine_();
            if (r >= threshold) return r % bound;
        }
    }

    size_t index(size_t n) { return static_cast<size_t>(bounded(static_cast<uint64_t>(n))); }

    // uniform double in [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller, one value cached
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct values drawn from v without replacement, selection order
    template <typename T>
    std::vector<T> sample(const std::vector<T>& v, size_t k) {
        std::vector<T> pool = v;
        std::vector<T> out;
        out.reserve(k);
        for (size_t i = 0; i < k && i < pool.size(); ++i) {
            const size_t j = i + index(pool.size() - i);
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// nearest integer, ties away from zero (used for budgets and count formulas)
inline long long round_half_up(double x) {
    return static_cast<long long>(std::floor(x + 0.5));
}

}  // namespace alne
