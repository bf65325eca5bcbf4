#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "fringeforge/tensor.hpp"

namespace fringeforge {

/// Derive an independent stream seed from a master seed and an index.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    // splitmix64 finalizer
    std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(engine_);
    }

    double normal(double mean = 0.0, double sigma = 1.0) {
        std::normal_distribution<double> d(mean, sigma);
        return d(engine_);
    }

    std::uint64_t next_u64() { return engine_(); }

    Tensor normal_tensor(Shape s, double mean = 0.0, double sigma = 1.0) {
        Tensor t = Tensor::zeros(s);
        double* d = t.mut();
        for (std::int64_t i = 0; i < s.numel(); ++i) d[i] = normal(mean, sigma);
        return t;
    }

    Tensor uniform_tensor(Shape s, double lo, double hi) {
        Tensor t = Tensor::zeros(s);
        double* d = t.mut();
        for (std::int64_t i = 0; i < s.numel(); ++i) d[i] = uniform(lo, hi);
        return t;
    }

    /// Glorot-style uniform init for a [Co,Ci,kh,kw] kernel.
    Tensor conv_kernel(std::int64_t c_out, std::int64_t c_in, std::int64_t kh = 3, std::int64_t kw = 3) {
        const double fan_in = static_cast<double>(c_in * kh * kw);
        const double fan_out = static_cast<double>(c_out * kh * kw);
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        return uniform_tensor(Shape{c_out, c_in, kh, kw}, -bound, bound);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace fringeforge
