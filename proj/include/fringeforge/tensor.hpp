#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fringeforge {

class Tape;

/// Dense 4-axis shape [batch, channel, height, width].
struct Shape {
    std::array<std::int64_t, 4> dims{1, 1, 1, 1};

    Shape() = default;
    Shape(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) : dims{n, c, h, w} {}

    std::int64_t n() const { return dims[0]; }
    std::int64_t c() const { return dims[1]; }
    std::int64_t h() const { return dims[2]; }
    std::int64_t w() const { return dims[3]; }

    std::int64_t numel() const { return dims[0] * dims[1] * dims[2] * dims[3]; }

    bool operator==(const Shape&) const = default;

    std::string str() const {
        return "[" + std::to_string(dims[0]) + "," + std::to_string(dims[1]) + "," +
               std::to_string(dims[2]) + "," + std::to_string(dims[3]) + "]";
    }

    void validate() const {
        for (auto d : dims)
            if (d <= 0) throw std::invalid_argument("tensor shape must be positive, got " + str());
    }
};

/// Dense 4-axis array of 64-bit reals, row-major. Buffers are shared on copy;
/// mutation detaches, so tensors held by a tape stay stable.
class Tensor {
public:
    Tensor() = default;

    Tensor(Shape s, std::vector<double> values) : shape_(s) {
        s.validate();
        if (static_cast<std::int64_t>(values.size()) != s.numel())
            throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                        " does not match shape " + s.str());
        data_ = std::make_shared<std::vector<double>>(std::move(values));
    }

    static Tensor zeros(Shape s) { return full(s, 0.0); }
    static Tensor ones(Shape s) { return full(s, 1.0); }

    static Tensor full(Shape s, double v) {
        s.validate();
        Tensor t;
        t.shape_ = s;
        t.data_ = std::make_shared<std::vector<double>>(static_cast<std::size_t>(s.numel()), v);
        return t;
    }

    static Tensor scalar(double v) { return full(Shape{1, 1, 1, 1}, v); }

    bool defined() const { return data_ != nullptr; }
    const Shape& shape() const { return shape_; }
    std::int64_t numel() const { return shape_.numel(); }
    bool is_scalar() const { return defined() && shape_ == Shape{1, 1, 1, 1}; }

    const double* data() const { return data_->data(); }

    /// Writable pointer; clones the buffer first if it is shared.
    double* mut() {
        if (!data_) throw std::logic_error("mutating an undefined tensor");
        if (data_.use_count() > 1) data_ = std::make_shared<std::vector<double>>(*data_);
        return data_->data();
    }

    double at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return (*data_)[static_cast<std::size_t>(index(n, c, h, w))];
    }

    std::int64_t index(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return ((n * shape_.c() + c) * shape_.h() + h) * shape_.w() + w;
    }

    double item() const {
        if (!is_scalar()) throw std::invalid_argument("item() needs a [1,1,1,1] tensor, got " + shape_.str());
        return (*data_)[0];
    }

    const std::vector<double>& vec() const { return *data_; }

    /// Deep copy, untracked.
    Tensor clone() const {
        Tensor t;
        t.shape_ = shape_;
        if (data_) t.data_ = std::make_shared<std::vector<double>>(*data_);
        return t;
    }

    /// Same buffer, untracked.
    Tensor detached() const {
        Tensor t;
        t.shape_ = shape_;
        t.data_ = data_;
        return t;
    }

    // Tape tracking. Set by ops; -1 node means untracked.
    Tape* tape() const { return tape_; }
    int node() const { return node_; }
    bool tracked() const { return tape_ != nullptr && node_ >= 0; }
    void set_tracking(Tape* t, int node) {
        tape_ = t;
        node_ = node;
    }

private:
    Shape shape_{};
    std::shared_ptr<std::vector<double>> data_;
    Tape* tape_ = nullptr;
    int node_ = -1;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!(a.shape() == b.shape()))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                                    b.shape().str());
}

}  // namespace fringeforge
