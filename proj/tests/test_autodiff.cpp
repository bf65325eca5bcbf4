#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fringeforge/autodiff.hpp"
#include "fringeforge/ops.hpp"
#include "fringeforge/random.hpp"

using namespace fringeforge;

namespace {

Tensor random_tensor(Shape s, std::uint64_t seed) {
    Rng rng(seed);
    return rng.normal_tensor(s);
}

/// Scalar projection of an op output against a fixed random field, so the
/// finite-difference probe exercises every output element.
Tensor project(const Tensor& out, std::uint64_t seed) {
    return sum(mul(out, random_tensor(out.shape(), seed)));
}

}  // namespace

TEST_CASE("backward on sum gives all-ones gradient") {
    Tape tape;
    Tensor x = tape.leaf(random_tensor(Shape{2, 1, 3, 3}, 11));
    Tensor loss = sum(x);
    tape.backward(loss);
    Tensor g = tape.grad(x);
    for (std::int64_t i = 0; i < g.numel(); ++i) CHECK(g.data()[i] == 1.0);
}

TEST_CASE("backward on sum of squares over two gives x") {
    Tape tape;
    Tensor raw = random_tensor(Shape{1, 2, 4, 4}, 12);
    Tensor x = tape.leaf(raw);
    Tensor loss = scale(sum(mul(x, x)), 0.5);
    tape.backward(loss);
    Tensor g = tape.grad(x);
    for (std::int64_t i = 0; i < g.numel(); ++i) CHECK(g.data()[i] == Catch::Approx(raw.data()[i]).epsilon(1e-12));
}

TEST_CASE("fan-out accumulates additively") {
    Tape tape;
    Parameter p("p", Tensor::scalar(1.5));
    Tensor t = tape.watch(p);
    Tensor loss = sum(add(t, t));
    tape.backward(loss);
    CHECK(p.grad.item() == 2.0);
}

TEST_CASE("backward rejects a non-scalar loss") {
    Tape tape;
    Tensor x = tape.leaf(random_tensor(Shape{1, 1, 2, 2}, 13));
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
}

TEST_CASE("parameter gradients keep the parameter shape") {
    Tape tape;
    Parameter k("k", random_tensor(Shape{2, 3, 3, 3}, 14));
    Parameter b("b", Tensor::zeros(Shape{1, 2, 1, 1}));
    Tensor x = random_tensor(Shape{1, 3, 4, 4}, 15);
    Tensor out = conv2d(x, tape.watch(k), tape.watch(b), 1);
    tape.backward(sum(out));
    CHECK(k.grad.shape() == k.value.shape());
    CHECK(b.grad.shape() == b.value.shape());
}

TEST_CASE("conv2d padded sum of ones") {
    Tensor x = Tensor::ones(Shape{1, 1, 3, 3});
    Tensor k = Tensor::ones(Shape{1, 1, 3, 3});
    Tensor b = Tensor::zeros(Shape{1, 1, 1, 1});
    Tensor y = conv2d(x, k, b, 1);
    CHECK(y.at(0, 0, 1, 1) == 9.0);
    CHECK(y.at(0, 0, 0, 0) == 4.0);
    CHECK(y.at(0, 0, 0, 2) == 4.0);
    CHECK(y.at(0, 0, 2, 0) == 4.0);
    CHECK(y.at(0, 0, 2, 2) == 4.0);
    CHECK(y.at(0, 0, 0, 1) == 6.0);
}

TEST_CASE("conv2d with the delta kernel is the identity at stride 1") {
    Tensor x = random_tensor(Shape{2, 1, 5, 7}, 16);
    Tensor k = Tensor::zeros(Shape{1, 1, 3, 3});
    k.mut()[4] = 1.0;  // center tap
    Tensor y = conv2d(x, k, Tensor::zeros(Shape{1, 1, 1, 1}), 1);
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d stride 2 output geometry is ceil(size/2)") {
    Tensor x = random_tensor(Shape{1, 2, 6, 6}, 17);
    Tensor k = random_tensor(Shape{3, 2, 3, 3}, 18);
    Tensor y = conv2d(x, k, Tensor::zeros(Shape{1, 3, 1, 1}), 2);
    CHECK(y.shape() == Shape{1, 3, 3, 3});
}

TEST_CASE("conv2d names the offending axes on mismatch") {
    Tensor x = random_tensor(Shape{1, 2, 4, 4}, 19);
    Tensor k = random_tensor(Shape{3, 5, 3, 3}, 20);
    CHECK_THROWS_WITH(conv2d(x, k, Tensor::zeros(Shape{1, 3, 1, 1}), 1),
                      Catch::Matchers::ContainsSubstring("channel axis"));
}

TEST_CASE("conv2d gradient matches central finite differences") {
    Tensor x = random_tensor(Shape{2, 3, 5, 5}, 21);
    Tensor k = random_tensor(Shape{4, 3, 3, 3}, 22);
    Tensor b = random_tensor(Shape{1, 4, 1, 1}, 23);
    for (int stride : {1, 2}) {
        const double err = grad_check(
            [stride](Tape&, const std::vector<Tensor>& in) {
                return project(conv2d(in[0], in[1], in[2], stride), 77);
            },
            {x, k, b}, 1e-5);
        CHECK(err <= 1e-4);
    }
}

TEST_CASE("batch_norm is the identity on standardized input with unit affine") {
    // two channels, constructed to have exact mean 0 and variance 1
    Tensor x = Tensor::zeros(Shape{1, 2, 2, 2});
    double* d = x.mut();
    const double vals[4] = {1.0, -1.0, 1.0, -1.0};
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 4; ++i) d[c * 4 + i] = vals[i];
    Tensor y = batch_norm(x, Tensor::ones(Shape{1, 2, 1, 1}), Tensor::zeros(Shape{1, 2, 1, 1}), nullptr,
                          true, 0.0);
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == Catch::Approx(x.data()[i]).margin(1e-12));
}

TEST_CASE("batch_norm flattens constant input") {
    Tensor x = Tensor::full(Shape{2, 1, 3, 3}, 4.2);
    Tensor y = batch_norm(x, Tensor::ones(Shape{1, 1, 1, 1}), Tensor::zeros(Shape{1, 1, 1, 1}), nullptr,
                          true);
    for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(std::abs(y.data()[i]) < 1e-9);
}

TEST_CASE("batch_norm rejects channel mismatch") {
    Tensor x = random_tensor(Shape{1, 3, 2, 2}, 24);
    CHECK_THROWS_AS(
        batch_norm(x, Tensor::ones(Shape{1, 2, 1, 1}), Tensor::zeros(Shape{1, 2, 1, 1}), nullptr, true),
        std::invalid_argument);
}

TEST_CASE("batch_norm gradient matches central finite differences") {
    Tensor x = random_tensor(Shape{4, 2, 4, 4}, 25);
    Tensor gamma = random_tensor(Shape{1, 2, 1, 1}, 26);
    Tensor beta = random_tensor(Shape{1, 2, 1, 1}, 27);
    const double err = grad_check(
        [](Tape&, const std::vector<Tensor>& in) {
            return project(batch_norm(in[0], in[1], in[2], nullptr, true), 78);
        },
        {x, gamma, beta}, 1e-5);
    CHECK(err <= 1e-4);
}

TEST_CASE("batch_norm inference path uses running statistics") {
    BatchNormStats stats(1);
    stats.running_mean.mut()[0] = 2.0;
    stats.running_var.mut()[0] = 4.0;
    Tensor x = Tensor::full(Shape{1, 1, 1, 2}, 6.0);
    Tensor y = batch_norm(x, Tensor::ones(Shape{1, 1, 1, 1}), Tensor::zeros(Shape{1, 1, 1, 1}), &stats,
                          false, 0.0);
    CHECK(y.data()[0] == Catch::Approx(2.0).epsilon(1e-12));  // (6-2)/sqrt(4)
}

TEST_CASE("relu6 clamps at both ends") {
    Tensor x(Shape{1, 1, 1, 3}, {-1.0, 3.0, 7.0});
    Tensor y = relu6(x);
    CHECK(y.data()[0] == 0.0);
    CHECK(y.data()[1] == 3.0);
    CHECK(y.data()[2] == 6.0);
}

TEST_CASE("sigmoid values and asymptote") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(20.0) > 1.0 - 1e-8);
    Tensor t = Tensor::scalar(0.0);
    CHECK(sigmoid(t).item() == 0.5);
}

TEST_CASE("sigmoid derivative at one matches finite differences") {
    const double err = grad_check(
        [](Tape&, const std::vector<Tensor>& in) { return sigmoid(in[0]); }, {Tensor::scalar(1.0)}, 1e-5);
    CHECK(err <= 1e-6);
    // closed form sigma'(1) = sigma(1)(1 - sigma(1))
    Tape tape;
    Tensor x = tape.leaf(Tensor::scalar(1.0));
    tape.backward(sigmoid(x));
    const double s = sigmoid(1.0);
    CHECK(tape.grad(x).item() == Catch::Approx(s * (1.0 - s)).epsilon(1e-12));
}

TEST_CASE("bilinear_resize preserves constants") {
    Tensor x = Tensor::full(Shape{1, 1, 5, 3}, 2.75);
    for (auto [th, tw] : {std::pair<int, int>{7, 9}, {2, 2}, {16, 4}}) {
        Tensor y = bilinear_resize(x, th, tw);
        for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == 2.75);
    }
}

TEST_CASE("bilinear_resize to the source size is bit-identical") {
    Tensor x = random_tensor(Shape{2, 3, 6, 5}, 28);
    Tensor y = bilinear_resize(x, 6, 5);
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("bilinear_resize matches the hand-computed 2x2 -> 4x4 table") {
    // half-pixel centers, edge clamped: source coords {-0.25, 0.25, 0.75, 1.25}
    Tensor x(Shape{1, 1, 2, 2}, {0.0, 1.0, 2.0, 3.0});
    Tensor y = bilinear_resize(x, 4, 4);
    const double expected[16] = {0.0, 0.25, 0.75, 1.0,  0.5, 0.75, 1.25, 1.5,
                                 1.5, 1.75, 2.25, 2.5,  2.0, 2.25, 2.75, 3.0};
    for (int i = 0; i < 16; ++i) CHECK(y.data()[i] == Catch::Approx(expected[i]).margin(1e-15));
}

TEST_CASE("bilinear_resize gradient matches central finite differences") {
    Tensor x = random_tensor(Shape{1, 2, 4, 6}, 29);
    const double err = grad_check(
        [](Tape&, const std::vector<Tensor>& in) { return project(bilinear_resize(in[0], 7, 3), 79); },
        {x}, 1e-5);
    CHECK(err <= 1e-4);
}

TEST_CASE("avg_pool_to constant and identity cases") {
    Tensor c = Tensor::full(Shape{1, 2, 5, 7}, -1.25);
    Tensor y = avg_pool_to(c, 3, 3);
    CHECK(y.shape() == Shape{1, 2, 3, 3});
    for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == -1.25);

    Tensor x = random_tensor(Shape{1, 1, 3, 3}, 30);
    Tensor same = avg_pool_to(x, 3, 3);
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(same.data()[i] == x.data()[i]);
}

TEST_CASE("avg_pool_to rejects inputs below the target size") {
    CHECK_THROWS_AS(avg_pool_to(Tensor::ones(Shape{1, 1, 2, 5}), 3, 3), std::invalid_argument);
}

TEST_CASE("avg_pool_to matches a brute-force window oracle") {
    // 6x6 field of row indices: output rows must average row pairs
    Tensor x = Tensor::zeros(Shape{1, 1, 6, 6});
    for (int y0 = 0; y0 < 6; ++y0)
        for (int x0 = 0; x0 < 6; ++x0) x.mut()[y0 * 6 + x0] = static_cast<double>(y0);
    Tensor y = avg_pool_to(x, 3, 3);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) CHECK(y.at(0, 0, r, c) == Catch::Approx(2.0 * r + 0.5).margin(1e-12));

    // randomized against an independent window average
    Tensor z = random_tensor(Shape{1, 2, 7, 5}, 31);
    Tensor p = avg_pool_to(z, 3, 3);
    for (std::int64_t ch = 0; ch < 2; ++ch) {
        for (std::int64_t oy = 0; oy < 3; ++oy) {
            for (std::int64_t ox = 0; ox < 3; ++ox) {
                const std::int64_t y_lo = oy * 7 / 3, y_hi = ((oy + 1) * 7 + 2) / 3;
                const std::int64_t x_lo = ox * 5 / 3, x_hi = ((ox + 1) * 5 + 2) / 3;
                double acc = 0.0;
                for (std::int64_t yy = y_lo; yy < y_hi; ++yy)
                    for (std::int64_t xx = x_lo; xx < x_hi; ++xx) acc += z.at(0, ch, yy, xx);
                acc /= static_cast<double>((y_hi - y_lo) * (x_hi - x_lo));
                CHECK(p.at(0, ch, oy, ox) == Catch::Approx(acc).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("weighted_sum trivial selections") {
    std::vector<Tensor> xs = {random_tensor(Shape{1, 1, 2, 2}, 32), random_tensor(Shape{1, 1, 2, 2}, 33),
                              random_tensor(Shape{1, 1, 2, 2}, 34)};
    Tensor zero = weighted_sum(xs, std::vector<double>{0.0, 0.0, 0.0});
    for (std::int64_t i = 0; i < zero.numel(); ++i) CHECK(zero.data()[i] == 0.0);

    Tensor pick = weighted_sum(xs, std::vector<double>{0.0, 1.0, 0.0});
    for (std::int64_t i = 0; i < pick.numel(); ++i) CHECK(pick.data()[i] == xs[1].data()[i]);
}

TEST_CASE("weighted_sum rejects empty and mismatched inputs") {
    CHECK_THROWS_AS(weighted_sum(std::vector<Tensor>{}, std::vector<double>{}), std::invalid_argument);
    std::vector<Tensor> xs = {Tensor::ones(Shape{1, 1, 2, 2}), Tensor::ones(Shape{1, 1, 2, 3})};
    CHECK_THROWS_AS(weighted_sum(xs, std::vector<double>{1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("weighted_sum is linear in the weights") {
    std::vector<Tensor> xs = {random_tensor(Shape{1, 1, 3, 3}, 35), random_tensor(Shape{1, 1, 3, 3}, 36)};
    const double a = 2.5;
    Tensor lhs = weighted_sum(xs, std::vector<double>{a * 0.3, a * -0.7});
    Tensor rhs = scale(weighted_sum(xs, std::vector<double>{0.3, -0.7}), a);
    for (std::int64_t i = 0; i < lhs.numel(); ++i)
        CHECK(lhs.data()[i] == Catch::Approx(rhs.data()[i]).margin(1e-12));
}

TEST_CASE("weighted_sum gradients reach inputs and weights") {
    std::vector<Tensor> ins = {random_tensor(Shape{1, 1, 3, 3}, 37), random_tensor(Shape{1, 1, 3, 3}, 38),
                               random_tensor(Shape{1, 1, 3, 3}, 39)};
    std::vector<Tensor> all = ins;
    all.push_back(Tensor::scalar(0.4));
    all.push_back(Tensor::scalar(-1.1));
    all.push_back(Tensor::scalar(0.9));
    const double err = grad_check(
        [](Tape&, const std::vector<Tensor>& in) {
            std::vector<Tensor> xs(in.begin(), in.begin() + 3);
            std::vector<Tensor> ws(in.begin() + 3, in.end());
            return project(weighted_sum(xs, ws), 80);
        },
        all, 1e-5);
    CHECK(err <= 1e-4);

    // the weight gradient is the inner product of upstream grad and input
    Tape tape;
    Parameter w("w", Tensor::scalar(0.7));
    std::vector<Tensor> ws = {tape.watch(w)};
    Tensor out = weighted_sum({ins[0]}, ws);
    tape.backward(sum(out));
    double dot = 0.0;
    for (std::int64_t i = 0; i < ins[0].numel(); ++i) dot += ins[0].data()[i];
    CHECK(w.grad.item() == Catch::Approx(dot).epsilon(1e-12));
}

TEST_CASE("grad_check on a linear map is exact to rounding") {
    Tensor x = random_tensor(Shape{1, 1, 2, 3}, 40);
    const double err = grad_check(
        [](Tape&, const std::vector<Tensor>& in) { return sum(in[0]); }, {x}, 1e-5);
    CHECK(err < 1e-10);
}

TEST_CASE("grad_check on relu6 away from the kinks") {
    // values kept clear of 0 and 6 so the subgradient convention is irrelevant
    Tensor x(Shape{1, 1, 2, 3}, {0.5, 2.0, 5.5, -0.5, -2.0, 6.5});
    const double err = grad_check(
        [](Tape&, const std::vector<Tensor>& in) { return project(relu6(in[0]), 81); }, {x}, 1e-5);
    CHECK(err <= 1e-6);
}

TEST_CASE("grad_check validates its step range") {
    CHECK_THROWS_AS(grad_check([](Tape&, const std::vector<Tensor>& in) { return sum(in[0]); },
                               {Tensor::ones(Shape{1, 1, 1, 1})}, 1e-2),
                    std::invalid_argument);
}

TEST_CASE("composite fuse-then-decode stage passes the gradient check") {
    // one decoder stage: conv branches, weighted fusion, then decode
    Tensor src_a = random_tensor(Shape{1, 2, 4, 4}, 41);
    Tensor src_b = random_tensor(Shape{1, 3, 8, 8}, 42);
    Tensor k_a = random_tensor(Shape{4, 2, 3, 3}, 43);
    Tensor k_b = random_tensor(Shape{4, 3, 3, 3}, 44);
    Tensor k_d = random_tensor(Shape{4, 4, 3, 3}, 45);
    Tensor bias = Tensor::zeros(Shape{1, 4, 1, 1});
    Tensor theta_a = Tensor::scalar(0.3);
    Tensor theta_b = Tensor::scalar(-0.6);

    auto net = [&](Tape&, const std::vector<Tensor>& in) {
        Tensor up = bilinear_resize(conv2d(in[0], in[2], bias, 1), 8, 8);  // small source
        Tensor down = conv2d(in[1], in[3], bias, 1);                       // already at size
        Tensor fused = weighted_sum({batch_norm(up, in[5], in[6], nullptr, true),
                                     batch_norm(down, in[5], in[6], nullptr, true)},
                                    std::vector<Tensor>{sigmoid(in[7]), sigmoid(in[8])});
        Tensor dec = relu6(batch_norm(conv2d(relu6(fused), in[4], bias, 1), in[5], in[6], nullptr, true));
        return project(dec, 82);
    };
    Tensor gamma = random_tensor(Shape{1, 4, 1, 1}, 50);
    Tensor beta = random_tensor(Shape{1, 4, 1, 1}, 51);
    const double err = grad_check(net, {src_a, src_b, k_a, k_b, k_d, gamma, beta, theta_a, theta_b}, 1e-5);
    CHECK(err <= 1e-4);
}

TEST_CASE("forward evaluation is deterministic") {
    Tensor x = random_tensor(Shape{1, 2, 6, 6}, 46);
    Tensor k = random_tensor(Shape{3, 2, 3, 3}, 47);
    Tensor b = random_tensor(Shape{1, 3, 1, 1}, 48);
    Tensor y1 = relu6(conv2d(bilinear_resize(x, 9, 9), k, b, 2));
    Tensor y2 = relu6(conv2d(bilinear_resize(x, 9, 9), k, b, 2));
    for (std::int64_t i = 0; i < y1.numel(); ++i) CHECK(y1.data()[i] == y2.data()[i]);
}

TEST_CASE("finite inputs keep every op finite") {
    Rng rng(49);
    Tensor x = rng.uniform_tensor(Shape{2, 2, 5, 5}, -50.0, 50.0);
    Tensor k = rng.uniform_tensor(Shape{2, 2, 3, 3}, -5.0, 5.0);
    Tensor outs[] = {conv2d(x, k, Tensor::zeros(Shape{1, 2, 1, 1}), 1),
                     batch_norm(x, Tensor::ones(Shape{1, 2, 1, 1}), Tensor::zeros(Shape{1, 2, 1, 1}),
                                nullptr, true),
                     bilinear_resize(x, 11, 3), avg_pool_to(x, 3, 3), relu6(x), sigmoid(x)};
    for (const Tensor& t : outs)
        for (std::int64_t i = 0; i < t.numel(); ++i) CHECK(std::isfinite(t.data()[i]));
}
