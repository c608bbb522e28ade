#pragma once

#include <cstdint>
#include <limits>

namespace crossing {

/// SplitMix64 step; used to seed and to derive substream keys.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256++ generator. Satisfies UniformRandomBitGenerator so it plugs
/// into std:: and boost::random distributions.
class Xoshiro256pp {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256pp(std::uint64_t seed) noexcept {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(operator()() >> 11) * 0x1.0p-53; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
};

/// Independent stream domains, so that e.g. walk path 17 and ladder epoch 17
/// under the same master seed never share random numbers.
enum class StreamDomain : std::uint64_t {
    walk = 1,
    brownian = 2,
    ladder = 3,
    ladder_pool = 4,
    nested = 5,
    renewal = 6,
    validation = 7,
};

/// Counter-based substream: the generator for item `index` is a pure function
/// of (master_seed, domain, index). Results never depend on scheduling.
inline Xoshiro256pp substream(std::uint64_t master_seed, StreamDomain domain,
                              std::uint64_t index) noexcept {
    std::uint64_t key = master_seed;
    std::uint64_t a = splitmix64(key);
    key = a ^ (static_cast<std::uint64_t>(domain) * 0xd1b54a32d192ed03ULL);
    std::uint64_t b = splitmix64(key);
    key = b ^ (index * 0x8cb92ba72f3d8dd7ULL + 0x632be59bd9b4e019ULL);
    return Xoshiro256pp{splitmix64(key)};
}

}  // namespace crossing
