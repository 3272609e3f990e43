#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ad/tensor.hpp"
#include "tokens.hpp"

namespace toxspan::crf {

using ad::Tensor;

// transitions(i, j) scores tag i followed by tag j; start/stop are 1 x K.
struct CrfParams {
    Tensor transitions;
    Tensor start;
    Tensor stop;

    static CrfParams zeros(std::size_t num_tags)
    {
        return {Tensor(num_tags, num_tags), Tensor(1, num_tags), Tensor(1, num_tags)};
    }
    [[nodiscard]] std::size_t num_tags() const noexcept { return transitions.rows(); }
};

namespace detail {

inline void check(const Tensor& em, const CrfParams& p, const char* op)
{
    if (em.rows() == 0) throw std::invalid_argument(std::string(op) + ": empty emission matrix");
    const auto k = p.num_tags();
    if (em.cols() != k || p.transitions.cols() != k || p.start.size() != k || p.stop.size() != k) {
        throw ad::ShapeError(std::string(op) + ": emissions " + em.shape().str() + " do not match " +
                             std::to_string(k) + " tags");
    }
}

inline void check_tags(const Tensor& em, std::span<const std::size_t> tags, const char* op)
{
    if (tags.size() != em.rows()) {
        throw std::invalid_argument(std::string(op) + ": " + std::to_string(tags.size()) + " tags for " +
                                    std::to_string(em.rows()) + " positions");
    }
    for (auto t : tags) {
        if (t >= em.cols()) throw std::invalid_argument(std::string(op) + ": tag index out of range");
    }
}

inline double log_sum_exp(std::span<const double> xs)
{
    double m = -std::numeric_limits<double>::infinity();
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

} // namespace detail

inline std::vector<std::size_t> tag_indices(const std::vector<BioTag>& tags)
{
    std::vector<std::size_t> out;
    out.reserve(tags.size());
    for (auto t : tags) out.push_back(static_cast<std::size_t>(t));
    return out;
}

inline std::vector<BioTag> to_bio(std::span<const std::size_t> path)
{
    std::vector<BioTag> out;
    out.reserve(path.size());
    for (auto t : path) out.push_back(static_cast<BioTag>(t));
    return out;
}

// Unnormalized score of one tag path.
inline double path_score(const Tensor& em, const CrfParams& p, std::span<const std::size_t> tags)
{
    detail::check(em, p, "path_score");
    detail::check_tags(em, tags, "path_score");
    double s = p.start[tags[0]] + p.stop[tags.back()];
    for (std::size_t t = 0; t < tags.size(); ++t) {
        s += em(t, tags[t]);
        if (t > 0) s += p.transitions(tags[t - 1], tags[t]);
    }
    return s;
}

struct Lattice {
    Tensor log_alpha; // T x K, includes the emission at t
    Tensor log_beta;  // T x K, excludes the emission at t, includes stop
    double log_z{0.0};
};

inline Lattice forward_backward(const Tensor& em, const CrfParams& p)
{
    detail::check(em, p, "forward_backward");
    const auto T = em.rows();
    const auto K = em.cols();
    Lattice lat{Tensor(T, K), Tensor(T, K), 0.0};
    std::vector<double> buf(K);
    for (std::size_t j = 0; j < K; ++j) lat.log_alpha(0, j) = p.start[j] + em(0, j);
    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t j = 0; j < K; ++j) {
            for (std::size_t i = 0; i < K; ++i) buf[i] = lat.log_alpha(t - 1, i) + p.transitions(i, j);
            lat.log_alpha(t, j) = em(t, j) + detail::log_sum_exp(buf);
        }
    }
    for (std::size_t j = 0; j < K; ++j) lat.log_beta(T - 1, j) = p.stop[j];
    for (std::size_t t = T - 1; t-- > 0;) {
        for (std::size_t i = 0; i < K; ++i) {
            for (std::size_t j = 0; j < K; ++j) buf[j] = p.transitions(i, j) + em(t + 1, j) + lat.log_beta(t + 1, j);
            lat.log_beta(t, i) = detail::log_sum_exp(buf);
        }
    }
    for (std::size_t j = 0; j < K; ++j) buf[j] = lat.log_alpha(T - 1, j) + p.stop[j];
    lat.log_z = detail::log_sum_exp(buf);
    return lat;
}

inline double log_partition(const Tensor& em, const CrfParams& p) { return forward_backward(em, p).log_z; }

inline double log_likelihood(const Tensor& em, const CrfParams& p, std::span<const std::size_t> tags)
{
    detail::check_tags(em, tags, "log_likelihood");
    return path_score(em, p, tags) - log_partition(em, p);
}

// Per-position posteriors, T x K.
inline Tensor marginals(const Lattice& lat)
{
    Tensor out(lat.log_alpha.shape());
    for (std::size_t t = 0; t < out.rows(); ++t)
        for (std::size_t j = 0; j < out.cols(); ++j)
            out(t, j) = std::exp(lat.log_alpha(t, j) + lat.log_beta(t, j) - lat.log_z);
    return out;
}

inline Tensor marginals(const Tensor& em, const CrfParams& p) { return marginals(forward_backward(em, p)); }

// Expected transition counts summed over positions, K x K.
inline Tensor expected_transitions(const Tensor& em, const CrfParams& p, const Lattice& lat)
{
    const auto K = em.cols();
    Tensor out(K, K);
    for (std::size_t t = 0; t + 1 < em.rows(); ++t)
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j)
                out(i, j) += std::exp(lat.log_alpha(t, i) + p.transitions(i, j) + em(t + 1, j) +
                                      lat.log_beta(t + 1, j) - lat.log_z);
    return out;
}

// Highest-scoring path; ties go to the lower tag index.
inline std::vector<std::size_t> viterbi(const Tensor& em, const CrfParams& p)
{
    detail::check(em, p, "viterbi");
    const auto T = em.rows();
    const auto K = em.cols();
    Tensor score(T, K);
    std::vector<std::size_t> back(T * K, 0);
    for (std::size_t j = 0; j < K; ++j) score(0, j) = p.start[j] + em(0, j);
    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t j = 0; j < K; ++j) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t i = 0; i < K; ++i) {
                const double s = score(t - 1, i) + p.transitions(i, j);
                if (s > best) {
                    best = s;
                    arg = i;
                }
            }
            score(t, j) = best + em(t, j);
            back[t * K + j] = arg;
        }
    }
    double best = -std::numeric_limits<double>::infinity();
    std::size_t last = 0;
    for (std::size_t j = 0; j < K; ++j) {
        const double s = score(T - 1, j) + p.stop[j];
        if (s > best) {
            best = s;
            last = j;
        }
    }
    std::vector<std::size_t> path(T);
    path[T - 1] = last;
    for (std::size_t t = T - 1; t > 0; --t) path[t - 1] = back[t * K + path[t]];
    return path;
}

} // namespace toxspan::crf
