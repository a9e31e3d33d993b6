#include <cmath>
#include <vector>

#include "doctest.h"
#include "scmlab/rng.hpp"

using namespace scm;

TEST_SUITE("rng") {

TEST_CASE("philox4x32-10 known-answer vectors") {
    CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("inverse normal cdf") {
    CHECK(inverse_normal_cdf(0.5) == 0.0);
    CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
    CHECK(inverse_normal_cdf(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-13));
    for (double p : {1e-5, 0.1, 0.3, 0.45})
        CHECK(inverse_normal_cdf(p) == doctest::Approx(-inverse_normal_cdf(1 - p)).epsilon(1e-10));
    CHECK(std::isinf(inverse_normal_cdf(0.0)));
    CHECK(inverse_normal_cdf(0.0) < 0);
    CHECK(std::isinf(inverse_normal_cdf(1.0)));
}

TEST_CASE("stream fill, next and at agree") {
    GaussianStream a(7, 3), b(7, 3);
    std::vector<double> block(1001);
    a.fill(block);
    for (std::size_t i = 0; i < block.size(); ++i) {
        CHECK(block[i] == b.at(i));
        CHECK(block[i] == b.next());
    }
    CHECK(a.position() == 1001);
    // An odd starting position splits a Philox block.
    GaussianStream c(7, 3);
    c.seek(11);
    std::vector<double> tail(20);
    c.fill(tail);
    for (std::size_t i = 0; i < tail.size(); ++i) CHECK(tail[i] == block[11 + i]);
}

TEST_CASE("streams are distinct and reproducible") {
    GaussianStream a(1, 1), b(1, 2), c(2, 1), d(1, 1);
    int same_b = 0, same_c = 0;
    for (int i = 0; i < 100; ++i) {
        const double x = a.next();
        same_b += x == b.next();
        same_c += x == c.next();
        CHECK(x == d.next());
    }
    CHECK(same_b == 0);
    CHECK(same_c == 0);
}

TEST_CASE("first moments of the stream") {
    GaussianStream g(42, 0);
    std::vector<double> x(1 << 20);
    g.fill(x);
    double m1 = 0, m2 = 0, m4 = 0;
    for (double v : x) {
        m1 += v;
        m2 += v * v;
        m4 += v * v * v * v;
    }
    const double n = static_cast<double>(x.size());
    CHECK(std::fabs(m1 / n) < 5 / std::sqrt(n));
    CHECK(std::fabs(m2 / n - 1) < 5 * std::sqrt(2 / n));
    CHECK(std::fabs(m4 / n - 3) < 5 * std::sqrt(96 / n));
}

}
