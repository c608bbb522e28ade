#pragma once

// 64-bit FNV-1a content hashes for provenance and cache keys.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crossing/model.hpp"
#include "crossing/pde.hpp"

namespace crossing {

class Hasher {
public:
    Hasher& bytes(const void* data, std::size_t size) noexcept {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < size; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    // Fixed-width little-endian encodings so hashes agree across platforms.
    Hasher& add(std::uint64_t v) noexcept {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        return bytes(b, 8);
    }
    Hasher& add(std::int64_t v) noexcept { return add(static_cast<std::uint64_t>(v)); }
    Hasher& add(int v) noexcept { return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
    Hasher& add(double v) noexcept { return add(std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v)); }
    Hasher& add(std::string_view s) noexcept {
        add(static_cast<std::uint64_t>(s.size()));
        return bytes(s.data(), s.size());
    }
    Hasher& add(std::span<const double> v) noexcept {
        add(static_cast<std::uint64_t>(v.size()));
        for (double x : v) add(x);
        return *this;
    }
    std::uint64_t value() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t content_hash(const Boundary& b) {
    Hasher h;
    h.add(std::string_view{"boundary"}).add(static_cast<int>(b.kind())).add(std::span<const double>{b.params()});
    h.add(b.horizon());
    return h.value();
}

inline std::uint64_t content_hash(const Payoff& p) {
    Hasher h;
    h.add(std::string_view{"payoff"}).add(static_cast<int>(p.kind())).add(std::span<const double>{p.params()});
    return h.value();
}

inline std::uint64_t content_hash(const IncrementDistribution& d) {
    Hasher h;
    h.add(std::string_view{"distribution"}).add(static_cast<int>(d.kind())).add(std::span<const double>{d.params()});
    return h.value();
}

inline std::uint64_t content_hash(const GridConfig& g) {
    Hasher h;
    h.add(std::string_view{"grid"}).add(g.y_max).add(g.t_max).add(g.ny).add(g.nt);
    h.add(static_cast<int>(g.far_field)).add(g.truncation_tolerance).add(g.rannacher_steps);
    return h.value();
}

inline std::uint64_t content_hash(const Field& f) {
    Hasher h;
    h.add(std::string_view{"field"}).add(content_hash(f.grid())).add(content_hash(f.boundary()));
    h.add(std::string_view{f.metadata().kind}).add(f.values());
    return h.value();
}

inline std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace crossing
