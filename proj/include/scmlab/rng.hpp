#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace scm {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// Counter-based: the output block is a pure function of (key, counter), so any
// sample of any stream can be regenerated without replaying the sequence.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key) noexcept;

/// Inverse of the standard normal CDF (Wichura, AS 241 "PPND16"), relative
/// accuracy about 1e-16 on (0, 1). Returns -inf/+inf at 0/1.
double inverse_normal_cdf(double p) noexcept;

/// Deterministic stream of standard Gaussians.
///
/// Sample `i` of stream `(seed, stream)` is built from Philox block
/// counter = (i/2 low, i/2 high, stream low, stream high), key = (seed low,
/// seed high). The two 64-bit halves of the block give two uniforms
/// u = ((w >> 11) + 0.5) * 2^-53, which lie strictly inside (0, 1), and each is
/// mapped through `inverse_normal_cdf`. Nothing depends on the standard library's
/// distributions, so the stream is identical on every platform.
class GaussianStream {
public:
    GaussianStream(std::uint64_t seed, std::uint64_t stream) noexcept;

    /// Fill `out` with the next `out.size()` samples.
    void fill(std::span<double> out) noexcept;
    double next() noexcept;

    /// Sample at absolute position `index`, independent of the cursor.
    double at(std::uint64_t index) const noexcept;

    std::uint64_t position() const noexcept { return position_; }
    void seek(std::uint64_t index) noexcept { position_ = index; }

private:
    PhiloxKey key_;
    std::uint32_t stream_lo_;
    std::uint32_t stream_hi_;
    std::uint64_t position_ = 0;
};

}  // namespace scm
