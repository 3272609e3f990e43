#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/gradcheck.hpp"
#include "toxspan/ad/ops.hpp"

using namespace toxspan;
using namespace toxspan::ad;
using toxspan::testing::grad_check;
using toxspan::testing::random_tensor;

namespace {

constexpr double kGradTol = 1e-4;

void expect_grad_ok(const toxspan::testing::GraphFn& fn, const std::vector<Tensor>& inputs)
{
    const auto r = grad_check(fn, inputs);
    EXPECT_GT(r.checked, 0u);
    EXPECT_LE(r.max_rel_error, kGradTol);
}

} // namespace

TEST(Tensor, ShapeChecks)
{
    EXPECT_THROW(Tensor(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
    EXPECT_THROW(Tensor::from_rows({{1, 2}, {3}}), ShapeError);
    auto t = Tensor::from_rows({{1, 2}, {3, 4}});
    EXPECT_EQ(t(1, 0), 3.0);
    EXPECT_THROW((void)t.item(), ShapeError);
    EXPECT_THROW((void)t.reshaped(3, 1), ShapeError);
}

TEST(Ops, MatmulByHand)
{
    Tape tape;
    auto a = tape.constant(Tensor::from_rows({{1, 2}}));
    auto b = tape.constant(Tensor::from_rows({{3}, {4}}));
    EXPECT_EQ(matmul(a, b).value().item(), 11.0);
    EXPECT_THROW(matmul(a, a), ShapeError);
}

TEST(Ops, ShapeErrorsNameShapes)
{
    Tape tape;
    auto a = tape.constant(Tensor(2, 3));
    auto b = tape.constant(Tensor(3, 2));
    try {
        add(a, b);
        FAIL();
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("(2, 3)"), std::string::npos);
        EXPECT_NE(msg.find("(3, 2)"), std::string::npos);
    }
    EXPECT_THROW(concat({a, b}, Axis::Rows), ShapeError);
    EXPECT_THROW(slice(a, Axis::Cols, 2, 4), ShapeError);
    std::vector<std::size_t> bad{5};
    EXPECT_THROW(gather_rows(a, bad), ShapeError);
}

TEST(Ops, TanhDerivativeAtZero)
{
    Tape tape;
    auto x = tape.leaf(Tensor::scalar(0.0), true);
    auto y = tanh(x);
    tape.backward(y);
    EXPECT_DOUBLE_EQ(x.grad().item(), 1.0);
}

TEST(Ops, LogSumExp)
{
    Tape tape;
    EXPECT_DOUBLE_EQ(log_sum_exp(tape.constant(Tensor::row({0, 0})), Axis::Cols).value().item(), std::log(2.0));
    EXPECT_DOUBLE_EQ(log_sum_exp(tape.constant(Tensor::row({1000, 1000})), Axis::Cols).value().item(),
                     1000.0 + std::log(2.0));
    EXPECT_DOUBLE_EQ(log_sum_exp(tape.constant(Tensor::row({-1000, -1000})), Axis::Cols).value().item(),
                     -1000.0 + std::log(2.0));
    EXPECT_DOUBLE_EQ(log_sum_exp(tape.constant(Tensor::row({3.5})), Axis::Cols).value().item(), 3.5);
}

TEST(Ops, LogSumExpBounds)
{
    std::mt19937_64 rng(1);
    Tape tape;
    for (int trial = 0; trial < 100; ++trial) {
        auto x = random_tensor(rng, 3, 5, -50, 50);
        auto lse = log_sum_exp(tape.constant(x), Axis::Cols).value();
        for (std::size_t r = 0; r < 3; ++r) {
            double m = x(r, 0);
            for (std::size_t c = 1; c < 5; ++c) m = std::max(m, x(r, c));
            EXPECT_GE(lse[r], m);
            EXPECT_LE(lse[r], m + std::log(5.0) + 1e-12);
        }
    }
}

TEST(Ops, Softmax)
{
    Tape tape;
    auto p = softmax(tape.constant(Tensor::row({0, 0})), Axis::Cols).value();
    EXPECT_DOUBLE_EQ(p[0], 0.5);
    EXPECT_DOUBLE_EQ(p[1], 0.5);
    auto q = softmax(tape.constant(Tensor::row({std::log(1.0), std::log(3.0)})), Axis::Cols).value();
    EXPECT_NEAR(q[0], 0.25, 1e-15);
    EXPECT_NEAR(q[1], 0.75, 1e-15);

    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        auto x = random_tensor(rng, 4, 3, -5, 5);
        auto shifted = x;
        for (auto& v : shifted.data()) v += 17.25;
        auto a = softmax(tape.constant(x), Axis::Cols).value();
        auto b = softmax(tape.constant(shifted), Axis::Cols).value();
        for (std::size_t r = 0; r < 4; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < 3; ++c) {
                s += a(r, c);
                EXPECT_NEAR(a(r, c), b(r, c), 1e-12);
            }
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Ops, DetachBlocksGradient)
{
    Tape tape;
    auto x = tape.leaf(Tensor::row({1.5, -2.0}), true);
    auto d = detach(x);
    EXPECT_EQ(d.value(), x.value());
    tape.backward(sum(mul(d, x)));
    EXPECT_EQ(x.grad(), x.value()); // not 2x

    Tape t2;
    auto y = t2.leaf(Tensor::row({3.0}), true);
    auto dy = detach(y);
    t2.backward(sum(mul(dy, dy)));
    EXPECT_EQ(y.grad().item(), 0.0);
}

TEST(Ops, L2Normalize)
{
    Tape tape;
    auto v = l2_normalize(tape.constant(Tensor::row({3, 4})), 1e-12).value();
    EXPECT_DOUBLE_EQ(v[0], 0.6);
    EXPECT_DOUBLE_EQ(v[1], 0.8);
    auto z = l2_normalize(tape.constant(Tensor::row({0, 0, 0})), 1e-12).value();
    for (double x : z.data()) EXPECT_EQ(x, 0.0);
    EXPECT_THROW(l2_normalize(tape.constant(Tensor::row({1})), 0.0), std::invalid_argument);

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        auto x = random_tensor(rng, 3, 4, -2, 2);
        EXPECT_NEAR(l2_normalize(tape.constant(x), 1e-12).value().norm(), 1.0, 1e-12);
    }
}

TEST(Backward, SquaredSum)
{
    Tape tape;
    auto x = tape.leaf(Tensor::row({1, 2}), true);
    auto unused = tape.leaf(Tensor::row({5, 5}), true);
    tape.backward(sum(mul(x, x)));
    EXPECT_EQ(x.grad(), Tensor::row({2, 4}));
    EXPECT_EQ(unused.grad(), Tensor::row({0, 0}));
}

TEST(Backward, RejectsNonScalarLoss)
{
    Tape tape;
    auto x = tape.leaf(Tensor::row({1, 2}), true);
    EXPECT_THROW(tape.backward(x), ShapeError);
}

TEST(Backward, SecondCallResetsInsteadOfAccumulating)
{
    Tape tape;
    auto x = tape.leaf(Tensor::row({1, 2}), true);
    auto loss = sum(mul(x, x));
    tape.backward(loss);
    const auto first = x.grad();
    tape.backward(loss);
    EXPECT_EQ(x.grad(), first);
}

TEST(Backward, ExternalLeafReadsInPlace)
{
    Tensor w = Tensor::row({2.0, -1.0});
    Tape tape;
    auto v = tape.external(w, true);
    tape.backward(sum(mul(v, v)));
    EXPECT_EQ(v.grad(), Tensor::row({4.0, -2.0}));
}

// Finite-difference checks, one per differentiable op.

TEST(GradCheck, Elementwise)
{
    std::mt19937_64 rng(10);
    auto a = random_tensor(rng, 3, 4);
    auto b = random_tensor(rng, 3, 4);
    auto row = random_tensor(rng, 1, 4);
    auto col = random_tensor(rng, 3, 1);
    auto pos = random_tensor(rng, 3, 4, 0.5, 2.0);
    expect_grad_ok([](Tape&, const std::vector<Var>& v) { return sum(mul(add(v[0], v[1]), v[1])); }, {a, b});
    expect_grad_ok([](Tape&, const std::vector<Var>& v) { return sum(mul(sub(v[0], v[1]), v[0])); }, {a, row});
    expect_grad_ok([](Tape&, const std::vector<Var>& v) { return sum(tanh(mul(v[0], v[1]))); }, {a, col});
    expect_grad_ok([](Tape&, const std::vector<Var>& v) { return sum(mul(sigmoid(v[0]), v[0])); }, {a});
    expect_grad_ok([](Tape&, const std::vector<Var>& v) { return sum(exp(scale(v[0], 0.7))); }, {a});
    expect_grad_ok([](Tape&, const std::vector<Var>& v) { return sum(mul(log(v[0]), v[0])); }, {pos});
}

TEST(GradCheck, LinearAndStructural)
{
    std::mt19937_64 rng(11);
    auto a = random_tensor(rng, 3, 4);
    auto b = random_tensor(rng, 4, 2);
    auto c = random_tensor(rng, 2, 4);
    expect_grad_ok([](Tape&, const std::vector<Var>& v) { return sum(tanh(matmul(v[0], v[1]))); }, {a, b});
    expect_grad_ok(
        [](Tape&, const std::vector<Var>& v) {
            auto cat = concat({v[0], v[1]}, Axis::Rows);
            return sum(mul(cat, cat));
        },
        {a, c});
    expect_grad_ok(
        [](Tape&, const std::vector<Var>& v) {
            auto cat = concat({v[0], reshape(v[1], 3, 2)}, Axis::Cols);
            return sum(tanh(cat));
        },
        {a, random_tensor(rng, 2, 3)});
    expect_grad_ok(
        [](Tape&, const std::vector<Var>& v) {
            auto cols = slice(v[0], Axis::Cols, 1, 3);
            return add(sum(mul(slice(v[0], Axis::Rows, 1, 3), slice(v[0], Axis::Rows, 0, 2))), sum(mul(cols, cols)));
        },
        {random_tensor(rng, 4, 4)});
    expect_grad_ok(
        [](Tape&, const std::vector<Var>& v) {
            std::vector<std::size_t> ids{2, 0, 2, 1};
            return sum(tanh(gather_rows(v[0], ids)));
        },
        {a});
}

TEST(GradCheck, Reductions)
{
    std::mt19937_64 rng(12);
    auto a = random_tensor(rng, 3, 5, -3, 3);
    for (auto axis : {Axis::Rows, Axis::Cols}) {
        expect_grad_ok([axis](Tape&, const std::vector<Var>& v) { return sum(tanh(sum(v[0], axis))); }, {a});
        expect_grad_ok([axis](Tape&, const std::vector<Var>& v) { return sum(mul(max(v[0], axis), max(v[0], axis))); },
                       {a});
        expect_grad_ok([axis](Tape&, const std::vector<Var>& v) { return sum(tanh(log_sum_exp(v[0], axis))); }, {a});
        expect_grad_ok(
            [axis](Tape& t, const std::vector<Var>& v) {
                auto w = t.constant(Tensor::from_rows({{1, -2, 3, 0.5, 1}, {0, 1, -1, 2, 0.3}, {2, 2, -1, 1, 1}}));
                return sum(mul(softmax(v[0], axis), w));
            },
            {a});
        expect_grad_ok(
            [axis](Tape& t, const std::vector<Var>& v) {
                auto w = t.constant(Tensor::from_rows({{1, -2, 3, 0.5, 1}, {0, 1, -1, 2, 0.3}, {2, 2, -1, 1, 1}}));
                return sum(mul(log_softmax(v[0], axis), w));
            },
            {a});
    }
    expect_grad_ok([](Tape&, const std::vector<Var>& v) { return mean(mul(v[0], v[0])); }, {a});
}

TEST(GradCheck, L2Normalize)
{
    std::mt19937_64 rng(13);
    expect_grad_ok(
        [](Tape& t, const std::vector<Var>& v) {
            auto w = t.constant(Tensor::from_rows({{1, -2, 3}, {0.5, 1, 0}}));
            return sum(mul(l2_normalize(v[0], 1e-12), w));
        },
        {random_tensor(rng, 2, 3)});
}

TEST(GradCheck, RandomCompositeGraphs)
{
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        std::mt19937_64 rng(seed);
        auto x = random_tensor(rng, 4, 3);
        auto w = random_tensor(rng, 3, 5);
        auto b = random_tensor(rng, 1, 5);
        auto u = random_tensor(rng, 5, 2);
        expect_grad_ok(
            [](Tape&, const std::vector<Var>& v) {
                auto h = tanh(add(matmul(v[0], v[1]), v[2]));
                auto gate = sigmoid(slice(h, Axis::Cols, 0, 2));
                auto out = mul(gate, matmul(h, v[3]));
                auto pooled = concat({max(out, Axis::Rows), log_sum_exp(out, Axis::Rows)}, Axis::Cols);
                return add(sum(log_softmax(pooled, Axis::Cols)), mean(exp(scale(out, 0.3))));
            },
            {x, w, b, u});
    }
}
