#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "i2i/gradcheck.hpp"
#include "i2i/ops.hpp"
#include "i2i/rng.hpp"
#include "i2i/tensor.hpp"

#include "oracles.hpp"

using i2i::Shape5;
using i2i::Tensor;
using i2i::TensorT;
using i2i::Tape;
using i2i::TapeT;

TEST_CASE("layout: flat buffer is W-fastest and offsets round-trip") {
    const Shape5 s{2, 3, 2, 2, 3};
    Tensor t(s);
    std::int64_t expected = 0;
    for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t c = 0; c < s.c; ++c)
            for (std::int64_t d = 0; d < s.d; ++d)
                for (std::int64_t h = 0; h < s.h; ++h)
                    for (std::int64_t w = 0; w < s.w; ++w) {
                        CHECK(s.offset(n, c, d, h, w) == expected);
                        t.at_mut(n, c, d, h, w) = static_cast<float>(expected);
                        ++expected;
                    }
    const auto flat = t.data();
    REQUIRE(flat.size() == static_cast<std::size_t>(s.numel()));
    for (std::size_t i = 0; i < flat.size(); ++i) CHECK(flat[i] == static_cast<float>(i));
}

TEST_CASE("construction: full, from_data, and extent validation") {
    const Tensor ones = Tensor::full(Shape5{1, 2, 2, 2, 2}, 1.5f);
    for (float v : ones.data()) CHECK(v == 1.5f);

    const Tensor t = Tensor::from_data(Shape5{1, 1, 1, 1, 3}, {1.0f, 2.0f, 3.0f});
    CHECK(t.at(0, 0, 0, 0, 2) == 3.0f);

    CHECK_THROWS_AS(Tensor::from_data(Shape5{1, 1, 1, 1, 3}, {1.0f}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor(Shape5{1, 0, 1, 1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor(Shape5{1, 1, -2, 1, 1}), std::invalid_argument);
}

TEST_CASE("value() only accepts scalars") {
    CHECK(Tensor::full(Shape5{}, 4.25f).value() == 4.25f);
    CHECK_THROWS_AS(Tensor::full(Shape5{1, 1, 1, 1, 2}, 0.0f).value(), std::invalid_argument);
}

TEST_CASE("backward of a sum is an all-ones gradient") {
    i2i::Rng rng(i2i::split_seed(42, "tensor-sum"));
    Tensor x = oracle::random_tensor<float>(Shape5{1, 2, 3, 2, 3}, rng);
    Tape tape;
    Tensor xr = tape.leaf(x);
    Tensor loss = i2i::sum_all(xr);
    tape.backward(loss);
    const auto& g = tape.grad(xr);
    REQUIRE(g.size() == static_cast<std::size_t>(x.numel()));
    for (float v : g) CHECK(v == 1.0f);
}

TEST_CASE("disjoint branches accumulate independent gradients") {
    Tape tape;
    Tensor a = tape.leaf(Tensor::full(Shape5{1, 1, 2, 2, 2}, 0.5f));
    Tensor b = tape.leaf(Tensor::full(Shape5{1, 1, 1, 1, 3}, -1.0f));
    Tensor loss = i2i::add(i2i::sum_all(a), i2i::scale(i2i::sum_all(b), 2.0f));
    tape.backward(loss);
    for (float v : tape.grad(a)) CHECK(v == 1.0f);
    for (float v : tape.grad(b)) CHECK(v == 2.0f);
}

TEST_CASE("a leaf the loss never touches keeps a zero gradient") {
    Tape tape;
    Tensor used = tape.leaf(Tensor::full(Shape5{}, 3.0f));
    Tensor unused = tape.leaf(Tensor::full(Shape5{1, 1, 2, 2, 2}, 7.0f));
    Tensor loss = i2i::scale(used, 2.0f);
    tape.backward(loss);
    for (float v : tape.grad(unused)) CHECK(v == 0.0f);
    CHECK(tape.grad(used)[0] == 2.0f);
}

TEST_CASE("the same value reused twice accumulates both contributions") {
    Tape tape;
    Tensor x = tape.leaf(Tensor::full(Shape5{}, 1.5f));
    Tensor loss = i2i::add(x, i2i::scale(x, 3.0f));  // d/dx (x + 3x) = 4
    tape.backward(loss);
    CHECK(tape.grad(x)[0] == 4.0f);
}

TEST_CASE("backward rejects bad losses and foreign tensors") {
    Tape tape;
    Tensor x = tape.leaf(Tensor::full(Shape5{1, 1, 1, 1, 4}, 1.0f));
    CHECK_THROWS_AS(tape.backward(x), std::invalid_argument);  // not scalar

    Tape other;
    Tensor y = other.leaf(Tensor::full(Shape5{}, 1.0f));
    CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);

    CHECK_THROWS_AS(tape.grad(x), std::logic_error);  // backward has not run

    Tensor loss = i2i::sum_all(x);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.grad(y), std::invalid_argument);
}

TEST_CASE("operations on off-tape tensors stay off tape; mixed tapes are rejected") {
    Tensor a = Tensor::full(Shape5{1, 1, 2, 2, 2}, 1.0f);
    Tensor b = Tensor::full(Shape5{1, 1, 2, 2, 2}, 2.0f);
    Tensor c = i2i::add(a, b);
    CHECK(!c.on_tape());
    CHECK(c.at(0, 0, 1, 1, 1) == 3.0f);

    Tape t1, t2;
    Tensor r1 = t1.leaf(a);
    Tensor r2 = t2.leaf(b);
    CHECK_THROWS_AS(i2i::add(r1, r2), std::invalid_argument);
}

TEST_CASE("a constant input participates in the value but gets no gradient slot") {
    Tape tape;
    Tensor x = tape.leaf(Tensor::full(Shape5{1, 1, 1, 1, 2}, 2.0f));
    Tensor k = Tensor::full(Shape5{1, 1, 1, 1, 2}, 5.0f);  // off tape
    Tensor loss = i2i::sum_all(i2i::add(x, k));
    tape.backward(loss);
    CHECK(loss.value() == 14.0f);
    for (float v : tape.grad(x)) CHECK(v == 1.0f);
    CHECK(k.slot() == -1);
}

TEST_CASE("repeated backward runs produce bit-identical gradients") {
    i2i::Rng rng(i2i::split_seed(42, "tensor-repeat"));
    Tensor x = oracle::random_tensor<float>(Shape5{1, 2, 2, 3, 2}, rng);
    auto run = [&]() {
        Tape tape;
        Tensor xr = tape.leaf(x);
        Tensor loss = i2i::sum_all(i2i::sigmoid(xr));
        tape.backward(loss);
        return tape.grad(xr);
    };
    const auto g1 = run();
    const auto g2 = run();
    REQUIRE(g1.size() == g2.size());
    for (std::size_t i = 0; i < g1.size(); ++i)
        CHECK(std::memcmp(&g1[i], &g2[i], sizeof(float)) == 0);
}

TEST_CASE("grad_check accepts an exact gradient") {
    i2i::Rng rng(i2i::split_seed(42, "gc-exact"));
    TensorT<double> x = oracle::random_tensor<double>(Shape5{1, 1, 2, 2, 2}, rng);
    auto fn = [](TapeT<double>& tape, std::vector<TensorT<double>>& ps) {
        (void)tape;
        return i2i::sum_all(i2i::scale(ps[0], 3.0));
    };
    const auto report = i2i::grad_check<double>(fn, {x}, 1e-4);
    CHECK(report.max_rel_error <= 1e-10);
}

TEST_CASE("grad_check flags a deliberately wrong backward rule") {
    // Forward computes 2x but the recorded backward claims the factor is 1.7,
    // so the checker must report a large relative error.
    auto broken_double = [](const TensorT<double>& x) {
        TensorT<double> y(x.shape());
        const auto xv = x.data();
        auto yv = y.mutable_data();
        for (std::size_t i = 0; i < xv.size(); ++i) yv[i] = 2.0 * xv[i];
        auto* tp = x.tape();
        if (!tp) return y;
        TensorT<double> out = tp->adopt(std::move(y));
        const int xs = x.slot(), ys = out.slot();
        const std::size_t total = xv.size();
        tp->push_node(ys, {xs}, [=](TapeT<double>& t) {
            const auto& gy = t.grad(ys);
            auto& gx = t.grad_mut(xs);
            for (std::size_t i = 0; i < total; ++i) gx[i] += 1.7 * gy[i];
        });
        return out;
    };
    i2i::Rng rng(i2i::split_seed(42, "gc-broken"));
    TensorT<double> x = oracle::random_tensor<double>(Shape5{1, 1, 2, 2, 2}, rng);
    auto fn = [&](TapeT<double>& tape, std::vector<TensorT<double>>& ps) {
        (void)tape;
        return i2i::sum_all(broken_double(ps[0]));
    };
    const auto report = i2i::grad_check<double>(fn, {x}, 1e-4);
    CHECK(report.max_rel_error >= 1e-2);
    CHECK(report.worst_param == 0);
}

TEST_CASE("composite conv + sigmoid backward matches central differences") {
    i2i::Rng rng(i2i::split_seed(42, "tensor-composite"));
    TensorT<double> x = oracle::random_tensor<double>(Shape5{1, 2, 3, 3, 3}, rng);
    TensorT<double> k = oracle::random_tensor<double>(Shape5{2, 2, 3, 3, 3}, rng, -0.5, 0.5);
    TensorT<double> b = oracle::random_tensor<double>(Shape5{1, 2, 1, 1, 1}, rng, -0.1, 0.1);
    auto fn = [](TapeT<double>& tape, std::vector<TensorT<double>>& ps) {
        (void)tape;
        return i2i::sum_all(i2i::sigmoid(i2i::conv3d(ps[0], ps[1], ps[2])));
    };
    const auto report = i2i::grad_check<double>(fn, {x, k, b}, 1e-4);
    CAPTURE(report.worst_param);
    CAPTURE(report.analytic);
    CAPTURE(report.numeric);
    CHECK(report.max_rel_error <= 1e-6);
}
