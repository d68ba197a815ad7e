#include "driftless/rng.hpp"
#include "driftless/error.hpp"

#include <cmath>
#include <numbers>

namespace driftless {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::GridDomain: return "grid-domain error";
    case ErrorKind::InvalidSurface: return "invalid-surface error";
    case ErrorKind::Arbitrage: return "arbitrage error";
    case ErrorKind::Singular: return "singular system";
    case ErrorKind::Fit: return "fit error";
    case ErrorKind::Simulation: return "simulation error";
    case ErrorKind::Shape: return "shape mismatch";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Training: return "training error";
    case ErrorKind::Construction: return "construction error";
    case ErrorKind::Tilt: return "tilt error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Io: return "io error";
    }
    return "error";
}

namespace {

constexpr std::uint32_t kW0 = 0x9E3779B9;
constexpr std::uint32_t kW1 = 0xBB67AE85;
constexpr std::uint32_t kM0 = 0xD2511F53;
constexpr std::uint32_t kM1 = 0xCD9E8D57;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Philox4x32::Counter Philox4x32::operator()(Counter ctr) const noexcept {
    Key key = key_;
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kM0, ctr[0], hi0, lo0);
        mulhilo(kM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    // 52 random bits shifted by half a step; with 53 the top value rounds to 1.
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 12;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

double NormalStream::operator()() {
    if (used_ == 4) {
        // Two Philox blocks give the four uniforms (64 bits each).
        const auto r0 = gen_({a_, b_, c_, 2 * block_});
        const auto r1 = gen_({a_, b_, c_, 2 * block_ + 1});
        ++block_;
        const double u[4] = {to_open_unit(r0[0], r0[1]), to_open_unit(r0[2], r0[3]),
                             to_open_unit(r1[0], r1[1]), to_open_unit(r1[2], r1[3])};
        for (int k = 0; k < 2; ++k) {
            const double radius = std::sqrt(-2.0 * std::log(u[2 * k]));
            const double angle = 2.0 * std::numbers::pi * u[2 * k + 1];
            cache_[2 * k] = radius * std::cos(angle);
            cache_[2 * k + 1] = radius * std::sin(angle);
        }
        used_ = 0;
    }
    return cache_[used_++];
}

double UniformStream::operator()() {
    if (used_ == 2) {
        const auto r = gen_({a_, b_, c_, block_++});
        cache_ = {to_open_unit(r[0], r[1]), to_open_unit(r[2], r[3])};
        used_ = 0;
    }
    return cache_[used_++];
}

}  // namespace driftless
