#pragma once

#include <array>
#include <cstdint>

namespace driftless {

// Philox4x32-10 counter-based generator. A (key, counter) pair maps to four
// independent 32-bit words, so any draw can be regenerated from its
// coordinates without replaying a stream.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit Philox4x32(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    Counter operator()(Counter ctr) const noexcept;

    const Key& key() const noexcept { return key_; }

private:
    Key key_;
};

// Uniform in the open interval (0, 1).
double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept;

// Standard normals addressed by (seed, a, b, c). Each block of four uniforms
// yields four normals through two Box-Muller pairs.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint32_t a, std::uint32_t b, std::uint32_t c)
        : gen_(seed), a_(a), b_(b), c_(c) {}

    double operator()();

private:
    Philox4x32 gen_;
    std::uint32_t a_, b_, c_;
    std::uint32_t block_ = 0;
    std::array<double, 4> cache_{};
    int used_ = 4;
};

// Uniform doubles addressed the same way; used for permutations and init.
class UniformStream {
public:
    UniformStream(std::uint64_t seed, std::uint32_t a, std::uint32_t b, std::uint32_t c)
        : gen_(seed), a_(a), b_(b), c_(c) {}

    double operator()();

private:
    Philox4x32 gen_;
    std::uint32_t a_, b_, c_;
    std::uint32_t block_ = 0;
    std::array<double, 2> cache_{};
    int used_ = 2;
};

}  // namespace driftless
