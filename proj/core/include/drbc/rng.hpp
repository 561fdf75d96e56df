#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace drbc {

// Philox4x32-10 counter-based generator. A (seed, stream) pair selects the
// key; every draw is addressed by an explicit counter, so any sub-sequence
// can be regenerated without replaying the ones before it.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    std::array<std::uint32_t, 4> block(std::uint64_t index, std::uint32_t sub) const;

    // Uniform on (0, 1), 53-bit resolution; never returns exactly 0 or 1.
    std::array<double, 2> uniforms(std::uint64_t index, std::uint32_t sub) const;

    // Fills `out` with independent N(0,1) draws addressed by `index`.
    void normals(std::uint64_t index, std::span<double> out) const;

private:
    std::array<std::uint32_t, 2> key_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace drbc
