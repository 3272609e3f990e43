#pragma once

#include <span>
#include <vector>

#include "ad/ops.hpp"
#include "crf.hpp"

namespace toxspan::crf {

struct CrfVars {
    ad::Var transitions;
    ad::Var start;
    ad::Var stop;
};

inline CrfParams values_of(const CrfVars& v)
{
    return {v.transitions.value(), v.start.value(), v.stop.value()};
}

// -log P(tags | em) as a single tape node. The backward rule is the usual
// (posterior - observed) form for emissions, transitions, start and stop.
inline ad::Var nll(const ad::Var& em, const CrfVars& p, std::span<const std::size_t> tags)
{
    const auto params = values_of(p);
    const auto& e = em.value();
    detail::check(e, params, "crf nll");
    detail::check_tags(e, tags, "crf nll");
    const auto lat = forward_backward(e, params);
    const double value = lat.log_z - path_score(e, params, tags);
    std::vector<std::size_t> path(tags.begin(), tags.end());
    return em.tape().record(
        ad::Tensor::scalar(value), {em, p.transitions, p.start, p.stop},
        [em, p, path = std::move(path), lat](ad::Tape& t, const ad::Tensor& g) {
            const double scale = g[0];
            const auto params = values_of(p);
            const auto& e = em.value();
            const auto T = e.rows();
            const auto K = e.cols();
            auto marg = marginals(lat);
            if (em.requires_grad()) {
                ad::Tensor ge = marg;
                for (std::size_t i = 0; i < T; ++i) ge(i, path[i]) -= 1.0;
                t.accumulate(em, scale * std::move(ge));
            }
            if (p.transitions.requires_grad()) {
                ad::Tensor gt = expected_transitions(e, params, lat);
                for (std::size_t i = 1; i < T; ++i) gt(path[i - 1], path[i]) -= 1.0;
                t.accumulate(p.transitions, scale * std::move(gt));
            }
            if (p.start.requires_grad()) {
                ad::Tensor gs(1, K);
                for (std::size_t j = 0; j < K; ++j) gs[j] = marg(0, j);
                gs[path.front()] -= 1.0;
                t.accumulate(p.start, scale * std::move(gs));
            }
            if (p.stop.requires_grad()) {
                ad::Tensor gs(1, K);
                for (std::size_t j = 0; j < K; ++j) gs[j] = marg(T - 1, j);
                gs[path.back()] -= 1.0;
                t.accumulate(p.stop, scale * std::move(gs));
            }
        });
}

struct ComposedLattice {
    std::vector<ad::Var> log_alpha; // each 1 x K
    std::vector<ad::Var> log_beta;  // each 1 x K
    ad::Var log_z;                  // 1 x 1
};

// Forward-backward built from primitive tape ops, so every quantity is
// differentiable through the tape (used where marginals need gradients).
inline ComposedLattice compose_forward_backward(const ad::Var& em, const CrfVars& p)
{
    using namespace ad;
    const auto T = em.shape().rows;
    const auto K = em.shape().cols;
    if (T == 0) throw std::invalid_argument("crf: empty emission matrix");
    ComposedLattice lat;
    lat.log_alpha.reserve(T);
    lat.log_beta.resize(T);
    lat.log_alpha.push_back(add(p.start, slice(em, Axis::Rows, 0, 1)));
    for (std::size_t t = 1; t < T; ++t) {
        auto prev = reshape(lat.log_alpha.back(), K, 1);
        auto scores = add(prev, p.transitions); // (i, j) = alpha_i + trans_ij
        lat.log_alpha.push_back(add(log_sum_exp(scores, Axis::Rows), slice(em, Axis::Rows, t, t + 1)));
    }
    lat.log_beta[T - 1] = p.stop;
    for (std::size_t t = T - 1; t-- > 0;) {
        auto next = add(slice(em, Axis::Rows, t + 1, t + 2), lat.log_beta[t + 1]);
        auto scores = add(p.transitions, next); // (i, j) = trans_ij + em_j + beta_j
        lat.log_beta[t] = reshape(log_sum_exp(scores, Axis::Cols), 1, K);
    }
    lat.log_z = log_sum_exp(add(lat.log_alpha.back(), p.stop), Axis::Cols);
    return lat;
}

// T x K log-posteriors through the tape.
inline ad::Var log_marginals(const ad::Var& em, const CrfVars& p)
{
    using namespace ad;
    auto lat = compose_forward_backward(em, p);
    std::vector<Var> rows;
    rows.reserve(lat.log_alpha.size());
    for (std::size_t t = 0; t < lat.log_alpha.size(); ++t) {
        rows.push_back(sub(add(lat.log_alpha[t], lat.log_beta[t]), lat.log_z));
    }
    return concat(rows, Axis::Rows);
}

} // namespace toxspan::crf
