#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/crf_oracle.hpp"
#include "support/gradcheck.hpp"
#include "toxspan/crf.hpp"
#include "toxspan/crf_ops.hpp"

using namespace toxspan;
using namespace toxspan::ad;
using toxspan::testing::enumerate_crf;
using toxspan::testing::random_tensor;

namespace {

crf::CrfParams random_params(std::mt19937_64& rng, std::size_t K, double spread = 2.0)
{
    return {random_tensor(rng, K, K, -spread, spread), random_tensor(rng, 1, K, -spread, spread),
            random_tensor(rng, 1, K, -spread, spread)};
}

} // namespace

TEST(Crf, SingleStepIsLogSoftmax)
{
    std::mt19937_64 rng(1);
    auto p = random_params(rng, 3);
    auto em = random_tensor(rng, 1, 3, -3, 3);
    double z = 0;
    for (std::size_t k = 0; k < 3; ++k) z += std::exp(em[k] + p.start[k] + p.stop[k]);
    for (std::size_t k = 0; k < 3; ++k) {
        std::vector<std::size_t> tag{k};
        EXPECT_NEAR(crf::log_likelihood(em, p, tag), em[k] + p.start[k] + p.stop[k] - std::log(z), 1e-12);
    }
}

TEST(Crf, SingleTagIsCertain)
{
    std::mt19937_64 rng(2);
    auto p = random_params(rng, 1);
    auto em = random_tensor(rng, 5, 1, -3, 3);
    std::vector<std::size_t> tags(5, 0);
    EXPECT_NEAR(crf::log_likelihood(em, p, tags), 0.0, 1e-12);
}

TEST(Crf, MatchesEnumerationT3)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = random_params(rng, 3);
        auto em = random_tensor(rng, 3, 3, -3, 3);
        auto oracle = enumerate_crf(em, p.transitions, p.start, p.stop);
        EXPECT_NEAR(crf::log_partition(em, p), oracle.log_z, 1e-8);
        for (std::size_t i = 0; i < oracle.paths.size(); ++i) {
            EXPECT_NEAR(crf::log_likelihood(em, p, oracle.paths[i]), oracle.scores[i] - oracle.log_z, 1e-8);
        }
        auto marg = crf::marginals(em, p);
        for (std::size_t i = 0; i < marg.size(); ++i) EXPECT_NEAR(marg[i], oracle.marginals[i], 1e-8);
    }
}

TEST(Crf, ProbabilitiesSumToOne)
{
    std::mt19937_64 rng(4);
    for (std::size_t T = 1; T <= 4; ++T) {
        auto p = random_params(rng, 3);
        auto em = random_tensor(rng, T, 3, -3, 3);
        auto oracle = enumerate_crf(em, p.transitions, p.start, p.stop);
        double total = 0;
        for (const auto& path : oracle.paths) total += std::exp(crf::log_likelihood(em, p, path));
        EXPECT_NEAR(total, 1.0, 1e-8);
    }
}

TEST(Crf, ViterbiMatchesEnumerationT4)
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = random_params(rng, 3);
        auto em = random_tensor(rng, 4, 3, -3, 3);
        auto oracle = enumerate_crf(em, p.transitions, p.start, p.stop);
        EXPECT_EQ(oracle.paths.size(), 81u);
        auto path = crf::viterbi(em, p);
        EXPECT_EQ(path, oracle.best_path);
        EXPECT_NEAR(crf::path_score(em, p, path), oracle.best_score, 1e-12);
    }
}

TEST(Crf, ViterbiBeatsRandomPaths)
{
    std::mt19937_64 rng(6);
    auto p = random_params(rng, 3);
    auto em = random_tensor(rng, 12, 3, -3, 3);
    const auto best = crf::path_score(em, p, crf::viterbi(em, p));
    std::uniform_int_distribution<std::size_t> tag(0, 2);
    for (int i = 0; i < 100; ++i) {
        std::vector<std::size_t> path(12);
        for (auto& t : path) t = tag(rng);
        EXPECT_GE(best, crf::path_score(em, p, path));
    }
}

TEST(Crf, ZeroTransitionsDecouple)
{
    std::mt19937_64 rng(7);
    auto p = crf::CrfParams::zeros(3);
    auto em = random_tensor(rng, 6, 3, -3, 3);
    auto path = crf::viterbi(em, p);
    auto marg = crf::marginals(em, p);
    for (std::size_t t = 0; t < 6; ++t) {
        std::size_t arg = 0;
        double z = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            if (em(t, k) > em(t, arg)) arg = k;
            z += std::exp(em(t, k));
        }
        EXPECT_EQ(path[t], arg);
        for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(marg(t, k), std::exp(em(t, k)) / z, 1e-12);
    }
}

TEST(Crf, ViterbiTiesPreferLowerIndex)
{
    auto p = crf::CrfParams::zeros(3);
    Tensor em(3, 3, 0.0);
    EXPECT_EQ(crf::viterbi(em, p), (std::vector<std::size_t>{0, 0, 0}));
    em(1, 2) = 1.0;
    em(1, 1) = 1.0;
    EXPECT_EQ(crf::viterbi(em, p), (std::vector<std::size_t>{0, 1, 0}));
}

TEST(Crf, RowShiftInvariance)
{
    std::mt19937_64 rng(8);
    auto p = random_params(rng, 3);
    auto em = random_tensor(rng, 5, 3, -3, 3);
    auto shifted = em;
    for (std::size_t k = 0; k < 3; ++k) shifted(2, k) += 4.5;
    EXPECT_EQ(crf::viterbi(em, p), crf::viterbi(shifted, p));
    auto a = crf::marginals(em, p);
    auto b = crf::marginals(shifted, p);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Crf, MarginalsRowStochasticAndViterbiSupported)
{
    std::mt19937_64 rng(9);
    auto p = random_params(rng, 3, 5.0);
    auto em = random_tensor(rng, 30, 3, -5, 5);
    auto marg = crf::marginals(em, p);
    auto path = crf::viterbi(em, p);
    for (std::size_t t = 0; t < 30; ++t) {
        double s = 0;
        for (std::size_t k = 0; k < 3; ++k) s += marg(t, k);
        EXPECT_NEAR(s, 1.0, 1e-10);
        EXPECT_GT(marg(t, path[t]), 0.0);
    }
}

TEST(Crf, LengthAndShapeErrors)
{
    auto p = crf::CrfParams::zeros(3);
    Tensor em(2, 3);
    std::vector<std::size_t> tags{0};
    EXPECT_THROW(crf::log_likelihood(em, p, tags), std::invalid_argument);
    EXPECT_THROW(crf::viterbi(Tensor(0, 3), p), std::invalid_argument);
    EXPECT_THROW(crf::viterbi(Tensor(2, 4), p), ShapeError);
}

TEST(Crf, FusedNllMatchesPlainValue)
{
    std::mt19937_64 rng(10);
    auto p = random_params(rng, 3);
    auto em = random_tensor(rng, 4, 3, -3, 3);
    std::vector<std::size_t> tags{0, 1, 2, 2};
    Tape tape;
    crf::CrfVars vars{tape.constant(p.transitions), tape.constant(p.start), tape.constant(p.stop)};
    auto nll = crf::nll(tape.constant(em), vars, tags);
    EXPECT_NEAR(nll.value().item(), -crf::log_likelihood(em, p, tags), 1e-12);
}

TEST(Crf, FusedNllGradientsMatchFiniteDifferences)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 3; ++trial) {
        auto p = random_params(rng, 3);
        auto em = random_tensor(rng, 5, 3, -3, 3);
        std::vector<std::size_t> tags{1, 2, 0, 1, 2};
        auto r = toxspan::testing::grad_check(
            [&](Tape&, const std::vector<Var>& v) { return crf::nll(v[0], {v[1], v[2], v[3]}, tags); },
            {em, p.transitions, p.start, p.stop});
        EXPECT_LE(r.max_rel_error, 1e-4);
    }
}

TEST(Crf, ComposedMarginalsMatchPlain)
{
    std::mt19937_64 rng(12);
    auto p = random_params(rng, 3);
    auto em = random_tensor(rng, 6, 3, -3, 3);
    Tape tape;
    crf::CrfVars vars{tape.constant(p.transitions), tape.constant(p.start), tape.constant(p.stop)};
    auto lat = crf::compose_forward_backward(tape.constant(em), vars);
    EXPECT_NEAR(lat.log_z.value().item(), crf::log_partition(em, p), 1e-10);
    auto logm = crf::log_marginals(tape.constant(em), vars).value();
    auto m = crf::marginals(em, p);
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(std::exp(logm[i]), m[i], 1e-12);
}

TEST(Crf, ComposedMarginalGradientsMatchFiniteDifferences)
{
    std::mt19937_64 rng(13);
    auto p = random_params(rng, 3);
    auto em = random_tensor(rng, 4, 3, -2, 2);
    auto w = random_tensor(rng, 4, 3);
    auto r = toxspan::testing::grad_check(
        [&](Tape& t, const std::vector<Var>& v) {
            return sum(mul(crf::log_marginals(v[0], {v[1], v[2], v[3]}), t.constant(w)));
        },
        {em, p.transitions, p.start, p.stop});
    EXPECT_LE(r.max_rel_error, 1e-4);
}
