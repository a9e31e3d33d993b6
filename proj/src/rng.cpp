#include "scmlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scm {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline double to_open_unit(std::uint64_t w) {
    return (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
}

inline double poly7(const double (&c)[8], double r) {
    return ((((((c[7] * r + c[6]) * r + c[5]) * r + c[4]) * r + c[3]) * r + c[2]) * r + c[1]) * r + c[0];
}

// AS 241 coefficients. Denominators have an implicit leading 1.
constexpr double kA[8] = {3.3871328727963666080e0, 1.3314166789178437745e+2,
                          1.9715909503065514427e+3, 1.3731693765509461125e+4,
                          4.5921953931549871457e+4, 6.7265770927008700853e+4,
                          3.3430575583588128105e+4, 2.5090809287301226727e+3};
constexpr double kB[8] = {1.0, 4.2313330701600911252e+1,
                          6.8718700749205790830e+2, 5.3941960214247511077e+3,
                          2.1213794301586595867e+4, 3.9307895800092710610e+4,
                          2.8729085735721942674e+4, 5.2264952788528545610e+3};
constexpr double kC[8] = {1.42343711074968357734e0, 4.63033784615654529590e0,
                          5.76949722146069140550e0, 3.64784832476320460504e0,
                          1.27045825245236838258e0, 2.41780725177450611770e-1,
                          2.27238449892691845833e-2, 7.74545014278341407640e-4};
constexpr double kD[8] = {1.0, 2.05319162663775882187e0,
                          1.67638483018380384940e0, 6.89767334985100004550e-1,
                          1.48103976427480074590e-1, 1.51986665636164571966e-2,
                          5.47593808499534494600e-4, 1.05075007164441684324e-9};
constexpr double kE[8] = {6.65790464350110377720e0, 5.46378491116411436990e0,
                          1.78482653991729133580e0, 2.96560571828504891230e-1,
                          2.65321895265761230930e-2, 1.24266094738807843860e-3,
                          2.71155556874348757815e-5, 2.01033439929228813265e-7};
constexpr double kF[8] = {1.0, 5.99832206555887937690e-1,
                          1.36929880922735805310e-1, 1.48753612908506148525e-2,
                          7.86869131145613259100e-4, 1.84631831751005468180e-5,
                          1.42151175831644588870e-7, 2.04426310338993978564e-15};

}  // namespace

namespace {

// Scalar locals instead of std::array let the block loop in `fill` vectorize.
inline void philox_rounds(std::uint32_t& c0, std::uint32_t& c1, std::uint32_t& c2, std::uint32_t& c3,
                          std::uint32_t k0, std::uint32_t k1) noexcept {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            k0 += kPhiloxW0;
            k1 += kPhiloxW1;
        }
        const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c0;
        const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c2;
        const std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
        const std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
        c1 = static_cast<std::uint32_t>(p1);
        c3 = static_cast<std::uint32_t>(p0);
        c0 = n0;
        c2 = n2;
    }
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept {
    philox_rounds(ctr[0], ctr[1], ctr[2], ctr[3], key[0], key[1]);
    return ctr;
}

double inverse_normal_cdf(double p) noexcept {
    if (!(p > 0.0)) return p == 0.0 ? -std::numeric_limits<double>::infinity()
                                    : std::numeric_limits<double>::quiet_NaN();
    if (!(p < 1.0)) return p == 1.0 ? std::numeric_limits<double>::infinity()
                                    : std::numeric_limits<double>::quiet_NaN();
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * poly7(kA, r) / poly7(kB, r);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = poly7(kC, r) / poly7(kD, r);
    } else {
        r -= 5.0;
        val = poly7(kE, r) / poly7(kF, r);
    }
    return q < 0.0 ? -val : val;
}

GaussianStream::GaussianStream(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      stream_lo_(static_cast<std::uint32_t>(stream)),
      stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

double GaussianStream::at(std::uint64_t index) const noexcept {
    const std::uint64_t block = index >> 1;
    const auto out = philox4x32_10({static_cast<std::uint32_t>(block),
                                    static_cast<std::uint32_t>(block >> 32), stream_lo_, stream_hi_},
                                   key_);
    const std::uint64_t w = (index & 1u)
                                ? (static_cast<std::uint64_t>(out[2]) << 32) | out[3]
                                : (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    return inverse_normal_cdf(to_open_unit(w));
}

double GaussianStream::next() noexcept { return at(position_++); }

void GaussianStream::fill(std::span<double> out) noexcept {
    std::size_t k = 0;
    const std::size_t n = out.size();
    if ((position_ & 1u) && n > 0) out[k++] = at(position_++);

    // Whole blocks are generated in three passes so the first two vectorize:
    // raw Philox words, the central rational branch for every sample, then the
    // (rare) tail branch. Results are bit-identical to `at`.
    constexpr std::size_t kChunk = 512;
    std::array<std::uint64_t, 2 * kChunk> words;
    while (n - k >= 2) {
        const std::size_t blocks = std::min(kChunk, (n - k) / 2);
        const std::uint64_t first = position_ >> 1;
        for (std::size_t b = 0; b < blocks; ++b) {
            const std::uint64_t block = first + b;
            std::uint32_t c0 = static_cast<std::uint32_t>(block), c1 = static_cast<std::uint32_t>(block >> 32);
            std::uint32_t c2 = stream_lo_, c3 = stream_hi_;
            philox_rounds(c0, c1, c2, c3, key_[0], key_[1]);
            words[2 * b] = (static_cast<std::uint64_t>(c0) << 32) | c1;
            words[2 * b + 1] = (static_cast<std::uint64_t>(c2) << 32) | c3;
        }
        double* dst = out.data() + k;
        const std::size_t m = 2 * blocks;
        for (std::size_t j = 0; j < m; ++j) {
            const double q = to_open_unit(words[j]) - 0.5;
            const double r = 0.180625 - q * q;
            dst[j] = q * poly7(kA, r) / poly7(kB, r);
        }
        for (std::size_t j = 0; j < m; ++j) {
            const double u = to_open_unit(words[j]);
            if (std::fabs(u - 0.5) > 0.425) dst[j] = inverse_normal_cdf(u);
        }
        k += m;
        position_ += m;
    }
    if (k < n) out[k] = at(position_++);
}

}  // namespace scm
