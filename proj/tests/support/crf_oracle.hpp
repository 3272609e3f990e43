#pragma once

// Exhaustive path enumeration for small linear-chain CRFs. Shares no code
// with the forward/backward/Viterbi recursions it checks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "toxspan/ad/tensor.hpp"

namespace toxspan::testing {

struct BruteForceCrf {
    double log_z{0.0};
    std::vector<std::size_t> best_path;
    double best_score{-std::numeric_limits<double>::infinity()};
    ad::Tensor marginals;
    std::vector<std::vector<std::size_t>> paths;
    std::vector<double> scores;
};

inline double brute_path_score(const ad::Tensor& em, const ad::Tensor& trans, const ad::Tensor& start,
                               const ad::Tensor& stop, const std::vector<std::size_t>& path)
{
    double s = start[path.front()] + stop[path.back()];
    for (std::size_t t = 0; t < path.size(); ++t) s += em(t, path[t]);
    for (std::size_t t = 1; t < path.size(); ++t) s += trans(path[t - 1], path[t]);
    return s;
}

inline BruteForceCrf enumerate_crf(const ad::Tensor& em, const ad::Tensor& trans, const ad::Tensor& start,
                                   const ad::Tensor& stop)
{
    const auto T = em.rows();
    const auto K = em.cols();
    BruteForceCrf out;
    std::size_t total = 1;
    for (std::size_t t = 0; t < T; ++t) total *= K;
    for (std::size_t code = 0; code < total; ++code) {
        std::vector<std::size_t> path(T);
        auto c = code;
        for (std::size_t t = T; t-- > 0;) {
            path[t] = c % K;
            c /= K;
        }
        const double s = brute_path_score(em, trans, start, stop, path);
        // enumeration order is lexicographic, so strict > keeps the lexicographically smallest argmax
        if (s > out.best_score) {
            out.best_score = s;
            out.best_path = path;
        }
        out.paths.push_back(std::move(path));
        out.scores.push_back(s);
    }
    const double m = *std::max_element(out.scores.begin(), out.scores.end());
    double z = 0.0;
    for (double s : out.scores) z += std::exp(s - m);
    out.log_z = m + std::log(z);
    out.marginals = ad::Tensor(T, K);
    for (std::size_t p = 0; p < out.paths.size(); ++p) {
        const double prob = std::exp(out.scores[p] - out.log_z);
        for (std::size_t t = 0; t < T; ++t) out.marginals(t, out.paths[p][t]) += prob;
    }
    return out;
}

} // namespace toxspan::testing
