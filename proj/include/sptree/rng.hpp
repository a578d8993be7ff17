#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace sptree {

// splitmix64 step; used for seed expansion and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace detail {

struct ZigguratTables {
    std::uint32_t kn[128];
    double wn[128];
    double fn[128];

    ZigguratTables() noexcept {
        const double m1 = 2147483648.0;
        const double vn = 9.91256303526217e-3;
        double dn = 3.442619855899;
        double tn = dn;
        double q = vn / std::exp(-0.5 * dn * dn);
        kn[0] = static_cast<std::uint32_t>((dn / q) * m1);
        kn[1] = 0;
        wn[0] = q / m1;
        wn[127] = dn / m1;
        fn[0] = 1.0;
        fn[127] = std::exp(-0.5 * dn * dn);
        for (int i = 126; i >= 1; --i) {
            dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
            kn[i + 1] = static_cast<std::uint32_t>((dn / tn) * m1);
            tn = dn;
            fn[i] = std::exp(-0.5 * dn * dn);
            wn[i] = dn / m1;
        }
    }
};

inline const ZigguratTables& ziggurat_tables() {
    static const ZigguratTables tables;
    return tables;
}

}  // namespace detail

// Counter-keyed xoshiro256++ stream. Streams derived via split() depend only on
// (key, index), never on how much the parent has been consumed, which is what
// makes replica-parallel Monte Carlo bit-reproducible under any scheduling.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix_key(seed, stream)) {
        std::uint64_t sm = key_;
        for (auto& word : state_) word = splitmix64(sm);
    }

    // Independent child stream; deterministic in (this stream's key, index).
    Rng split(std::uint64_t index) const noexcept { return Rng(key_, index + 1); }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    std::uint64_t operator()() noexcept { return next_u64(); }
    static constexpr std::uint64_t min() noexcept { return 0; }
    static constexpr std::uint64_t max() noexcept {
        return std::numeric_limits<std::uint64_t>::max();
    }

    // Uniform in [0,1) with 53 random bits.
    double uniform01() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) noexcept { return a + (b - a) * uniform01(); }

    // Unbiased integer in [0, n) (Lemire with rejection).
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
        while (true) {
            std::uint64_t x = next_u64();
            __uint128_t m = static_cast<__uint128_t>(x) * n;
            std::uint64_t lo = static_cast<std::uint64_t>(m);
            if (lo >= n) return static_cast<std::uint64_t>(m >> 64);
            std::uint64_t threshold = (0 - n) % n;
            if (lo >= threshold) return static_cast<std::uint64_t>(m >> 64);
        }
    }

    bool bernoulli(double p) noexcept { return uniform01() < p; }

    // Standard normal via the 128-layer ziggurat.
    double normal() noexcept {
        const auto& z = detail::ziggurat_tables();
        while (true) {
            const std::uint32_t bits = static_cast<std::uint32_t>(next_u64());
            const std::int32_t hz = static_cast<std::int32_t>(bits);
            const std::uint32_t iz = bits & 127u;
            const std::uint32_t az = hz < 0 ? (0u - bits) : bits;
            if (az < z.kn[iz]) return hz * z.wn[iz];
            if (iz == 0) {
                // Marsaglia tail beyond R = 3.442620
                const double r = 3.442619855899;
                double x, y;
                do {
                    x = -std::log(positive_uniform()) / r;
                    y = -std::log(positive_uniform());
                } while (y + y < x * x);
                return hz >= 0 ? r + x : -(r + x);
            }
            const double x = hz * z.wn[iz];
            if (z.fn[iz] + uniform01() * (z.fn[iz - 1] - z.fn[iz]) <
                std::exp(-0.5 * x * x)) {
                return x;
            }
        }
    }

    double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

    double exponential(double rate = 1.0) noexcept {
        return -std::log(positive_uniform()) / rate;
    }

    // Knuth inversion; fine for the small means used here (cluster counts).
    int poisson(double mean) {
        if (mean < 0) throw std::invalid_argument("poisson: negative mean");
        if (mean > 60.0) {
            // normal approximation with continuity correction; not hit by the
            // experiments but keeps the op total
            double x = std::round(mean + std::sqrt(mean) * normal());
            return x < 0 ? 0 : static_cast<int>(x);
        }
        const double limit = std::exp(-mean);
        int k = 0;
        double prod = uniform01();
        while (prod > limit) {
            ++k;
            prod *= uniform01();
        }
        return k;
    }

    std::uint64_t key() const noexcept { return key_; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    static std::uint64_t mix_key(std::uint64_t seed, std::uint64_t stream) noexcept {
        std::uint64_t sm = seed;
        std::uint64_t a = splitmix64(sm);
        sm ^= 0x6A09E667F3BCC909ULL + stream;
        std::uint64_t b = splitmix64(sm);
        return a ^ (b + 0x9E3779B97F4A7C15ULL * (stream + 1));
    }

    double positive_uniform() noexcept {
        double u;
        do {
            u = uniform01();
        } while (u <= 0.0);
        return u;
    }

    std::array<std::uint64_t, 4> state_{};
    std::uint64_t key_;
};

}  // namespace sptree
