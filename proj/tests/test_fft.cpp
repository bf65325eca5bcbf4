#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>

#include "fringeforge/fft.hpp"
#include "fringeforge/random.hpp"

using namespace fringeforge;

namespace {

/// O(N^2) direct DFT oracle, independent of the fast path.
ComplexGrid dft2_naive(const ComplexGrid& in) {
    ComplexGrid out(in.h, in.w);
    for (std::int64_t ky = 0; ky < in.h; ++ky) {
        for (std::int64_t kx = 0; kx < in.w; ++kx) {
            cdouble acc = 0.0;
            for (std::int64_t y = 0; y < in.h; ++y) {
                for (std::int64_t x = 0; x < in.w; ++x) {
                    const double ang = -2.0 * std::numbers::pi *
                                       (static_cast<double>(ky * y) / static_cast<double>(in.h) +
                                        static_cast<double>(kx * x) / static_cast<double>(in.w));
                    acc += in.at(y, x) * std::polar(1.0, ang);
                }
            }
            out.at(ky, kx) = acc;
        }
    }
    return out;
}

ComplexGrid random_field(std::int64_t h, std::int64_t w, std::uint64_t seed) {
    Rng rng(seed);
    ComplexGrid g(h, w);
    for (cdouble& z : g.v) z = {rng.normal(), rng.normal()};
    return g;
}

}  // namespace

TEST_CASE("delta at the origin transforms to an all-ones spectrum") {
    ComplexGrid g(8, 8);
    g.at(0, 0) = 1.0;
    ComplexGrid s = fft2(g);
    for (const cdouble& z : s.v) CHECK(std::abs(z - cdouble{1.0, 0.0}) < 1e-12);
}

TEST_CASE("pure complex exponential concentrates in a single bin") {
    const std::int64_t H = 16, W = 16;
    ComplexGrid g(H, W);
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x)
            g.at(y, x) = std::polar(1.0, 2.0 * std::numbers::pi *
                                             (3.0 * static_cast<double>(y) / static_cast<double>(H) +
                                              5.0 * static_cast<double>(x) / static_cast<double>(W)));
    ComplexGrid s = fft2(g);
    for (std::int64_t ky = 0; ky < H; ++ky)
        for (std::int64_t kx = 0; kx < W; ++kx) {
            const double mag = std::abs(s.at(ky, kx));
            if (ky == 3 && kx == 5)
                CHECK(mag == Catch::Approx(static_cast<double>(H * W)).epsilon(1e-10));
            else
                CHECK(mag < 1e-9);
        }
}

TEST_CASE("fft2 matches the direct DFT on all power-of-two sizes up to 16") {
    for (std::int64_t h : {1, 2, 4, 8, 16}) {
        for (std::int64_t w : {1, 2, 4, 8, 16}) {
            ComplexGrid g = random_field(h, w, 100 + static_cast<std::uint64_t>(h * 31 + w));
            ComplexGrid fast = fft2(g);
            ComplexGrid slow = dft2_naive(g);
            double worst = 0.0;
            for (std::size_t i = 0; i < fast.v.size(); ++i)
                worst = std::max(worst, std::abs(fast.v[i] - slow.v[i]));
            CHECK(worst <= 1e-8);
        }
    }
}

TEST_CASE("ifft2 undoes fft2 to 1e-10 at 256x256") {
    ComplexGrid g = random_field(256, 256, 7);
    ComplexGrid back = ifft2(fft2(g));
    double worst = 0.0;
    for (std::size_t i = 0; i < g.v.size(); ++i) worst = std::max(worst, std::abs(back.v[i] - g.v[i]));
    CHECK(worst <= 1e-10);
}

TEST_CASE("non-power-of-two sizes are rejected") {
    ComplexGrid g(6, 8);
    CHECK_THROWS_AS(fft2(g), std::invalid_argument);
    ComplexGrid g2(8, 12);
    CHECK_THROWS_AS(ifft2(g2), std::invalid_argument);
}

TEST_CASE("ifft2 carries the 1/(H*W) normalization") {
    ComplexGrid g(4, 4);
    for (cdouble& z : g.v) z = 1.0;  // constant field
    ComplexGrid s = fft2(g);
    CHECK(std::abs(s.at(0, 0) - cdouble{16.0, 0.0}) < 1e-12);
    ComplexGrid back = ifft2(s);
    for (const cdouble& z : back.v) CHECK(std::abs(z - cdouble{1.0, 0.0}) < 1e-12);
}
