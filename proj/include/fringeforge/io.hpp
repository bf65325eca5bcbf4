#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fringeforge/tensor.hpp"

namespace fringeforge {

// QPT1 tensor framing: magic "QPT1", u8 rank (=4), four little-endian u64
// dims, then the f64 payload row-major. Round trips are bit-exact.

namespace detail {

inline void put_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void put_f64_le(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64_le(os, bits);
}

inline double get_f64_le(std::istream& is) {
    std::uint64_t bits = get_u64_le(is);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

}  // namespace detail

inline void write_qpt(std::ostream& os, const Tensor& t) {
    os.write("QPT1", 4);
    const unsigned char rank = 4;
    os.write(reinterpret_cast<const char*>(&rank), 1);
    for (int i = 0; i < 4; ++i) detail::put_u64_le(os, static_cast<std::uint64_t>(t.shape().dims[i]));
    const double* d = t.data();
    for (std::int64_t i = 0; i < t.numel(); ++i) detail::put_f64_le(os, d[i]);
}

inline Tensor read_qpt(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is.good() || std::string(magic, 4) != "QPT1")
        throw std::runtime_error("tensor stream: bad magic, expected QPT1");
    unsigned char rank = 0;
    is.read(reinterpret_cast<char*>(&rank), 1);
    if (rank != 4) throw std::runtime_error("tensor stream: unsupported rank " + std::to_string(rank));
    Shape s;
    for (int i = 0; i < 4; ++i) s.dims[i] = static_cast<std::int64_t>(detail::get_u64_le(is));
    s.validate();
    std::vector<double> data(static_cast<std::size_t>(s.numel()));
    for (double& v : data) v = detail::get_f64_le(is);
    if (!is.good()) throw std::runtime_error("tensor stream: truncated payload");
    return Tensor(s, std::move(data));
}

inline void save_qpt(const std::string& path, const Tensor& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    write_qpt(f, t);
    if (!f.good()) throw std::runtime_error("write failed: " + path);
}

inline Tensor load_qpt(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    return read_qpt(f);
}

/// 16-bit binary PGM (P5, maxval 65535, big-endian samples per Netpbm).
/// The declared [lo, hi] value range maps linearly onto [0, 65535] and is
/// recorded in the comment line.
inline void save_pgm16(const std::string& path, const Tensor& t, double lo, double hi) {
    if (t.shape().n() != 1 || t.shape().c() != 1)
        throw std::invalid_argument("pgm export needs a [1,1,H,W] tensor, got " + t.shape().str());
    if (!(hi > lo)) throw std::invalid_argument("pgm export: empty value range");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);

    const std::int64_t H = t.shape().h(), W = t.shape().w();
    std::ostringstream header;
    header << "P5\n# range " << lo << " " << hi << "\n" << W << " " << H << "\n65535\n";
    f << header.str();
    const double* d = t.data();
    const double scale = 65535.0 / (hi - lo);
    for (std::int64_t i = 0; i < H * W; ++i) {
        double v = (d[i] - lo) * scale;
        v = std::clamp(v, 0.0, 65535.0);
        const auto q = static_cast<std::uint16_t>(std::lround(v));
        const unsigned char b[2] = {static_cast<unsigned char>(q >> 8), static_cast<unsigned char>(q & 0xff)};
        f.write(reinterpret_cast<const char*>(b), 2);
    }
    if (!f.good()) throw std::runtime_error("write failed: " + path);
}

}  // namespace fringeforge
