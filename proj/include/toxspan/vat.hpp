#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ad/ops.hpp"
#include "crf_ops.hpp"
#include "errors.hpp"
#include "model.hpp"

namespace toxspan {

enum class KlMode { EmissionSoftmax, CrfMarginals };

inline std::string to_string(KlMode m)
{
    return m == KlMode::EmissionSoftmax ? "emission-softmax" : "crf-marginals";
}

inline KlMode parse_kl_mode(std::string_view s)
{
    if (s == "emission-softmax") return KlMode::EmissionSoftmax;
    if (s == "crf-marginals") return KlMode::CrfMarginals;
    throw ConfigError("unknown kl_mode '" + std::string(s) + "' (expected emission-softmax or crf-marginals)");
}

struct VatConfig {
    double epsilon{2.0}; // 0 disables the perturbation
    double eta{0.1};
    std::size_t power_iterations{2};
    double gamma{0.5};
    KlMode kl_mode{KlMode::EmissionSoftmax};
    std::uint64_t noise_seed{17};

    void validate() const
    {
        if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("vat.epsilon must be >= 0");
        if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("vat.eta must be > 0");
        if (power_iterations < 1) throw ConfigError("vat.power_iterations must be >= 1");
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("vat.gamma must lie in [0, 1]");
    }

    [[nodiscard]] bool adversarial_enabled() const noexcept { return gamma < 1.0; }

    bool operator==(const VatConfig&) const = default;
};

// Per-token log-probabilities (T x K) for an embedding sequence.
inline ad::Var token_log_distributions(const BoundModel& b, const ad::Var& e, KlMode mode)
{
    auto em = encode_emissions(b, e);
    if (mode == KlMode::EmissionSoftmax) return ad::log_softmax(em, ad::Axis::Cols);
    return crf::log_marginals(em, b.crf);
}

inline ad::Tensor token_log_distributions(const SequenceModel& m, const ad::Tensor& e, KlMode mode)
{
    ad::Tape tape;
    auto b = bind(tape, m, false);
    return token_log_distributions(b, tape.constant(e), mode).value();
}

inline ad::Tensor token_distributions(const SequenceModel& m, const ad::Tensor& e, KlMode mode)
{
    auto p = token_log_distributions(m, e, mode);
    for (auto& v : p.data()) v = std::exp(v);
    return p;
}

// Mean over positions of sum_k p_k (log p_k - log q_k); 0 log 0 counts as 0.
inline double kl_sequence(const ad::Tensor& p, const ad::Tensor& q)
{
    if (p.shape() != q.shape()) {
        throw ad::ShapeError("kl_sequence: shape mismatch " + p.shape().str() + " vs " + q.shape().str());
    }
    if (p.rows() == 0) throw ad::ShapeError("kl_sequence: empty distributions");
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) total += p[i] * (std::log(p[i]) - std::log(q[i]));
    }
    return total / static_cast<double>(p.rows());
}

// Same divergence with p given as fixed log-probabilities and q on the tape.
inline ad::Var kl_sequence(const ad::Tensor& log_p, const ad::Var& log_q)
{
    if (log_p.shape() != log_q.shape()) {
        throw ad::ShapeError("kl_sequence: shape mismatch " + log_p.shape().str() + " vs " + log_q.shape().str());
    }
    auto& tape = log_q.tape();
    ad::Tensor p = log_p;
    for (auto& v : p.data()) v = std::exp(v);
    auto diff = ad::sub(tape.constant(log_p), log_q);
    return ad::scale(ad::sum(ad::mul(tape.constant(std::move(p)), diff)), 1.0 / static_cast<double>(log_p.rows()));
}

inline constexpr double kGradientFloor = 1e-12;

struct Perturbation {
    ad::Tensor d;
    std::size_t gradient_evaluations{0};
    bool degenerate{false};
    std::vector<double> delta_norms; // ||delta|| after each power iteration
};

// Norm-bounded adversarial direction for one sentence embedding `e` given its
// clean log-distributions. Parameters are held fixed.
inline Perturbation adversarial_perturbation(const SequenceModel& m, const ad::Tensor& e, const ad::Tensor& clean_log_p,
                                             const VatConfig& cfg, std::mt19937_64& rng)
{
    Perturbation out;
    out.d = ad::Tensor(e.shape());
    if (cfg.epsilon == 0.0) return out;

    std::normal_distribution<double> normal(0.0, 1.0);
    ad::Tensor delta(e.shape());
    for (auto& v : delta.data()) v = normal(rng);
    delta *= cfg.eta / delta.norm();

    ad::Tensor g;
    double g_norm = 0.0;
    for (std::size_t it = 0; it < cfg.power_iterations; ++it) {
        ad::Tape tape;
        auto b = bind(tape, m, false);
        auto dv = tape.leaf(delta, true);
        auto kl = kl_sequence(clean_log_p, token_log_distributions(b, ad::add(tape.constant(e), dv), cfg.kl_mode));
        tape.backward(kl);
        g = dv.grad();
        ++out.gradient_evaluations;
        g_norm = g.norm();
        if (g_norm > kGradientFloor) delta = (cfg.eta / g_norm) * g;
        out.delta_norms.push_back(delta.norm());
    }
    if (g_norm > kGradientFloor) {
        out.d = (cfg.epsilon / g_norm) * g;
    } else {
        out.degenerate = true;
        out.d = (cfg.epsilon / delta.norm()) * delta;
    }
    return out;
}

inline Perturbation adversarial_perturbation(const SequenceModel& m, const ad::Tensor& e, const VatConfig& cfg,
                                             std::mt19937_64& rng)
{
    return adversarial_perturbation(m, e, token_log_distributions(m, e, cfg.kl_mode), cfg, rng);
}

struct AdversarialStats {
    std::size_t gradient_evaluations{0};
    std::size_t degenerate{0};
};

// Clean log-distributions and perturbations for each sentence of a batch;
// both are treated as constants by the adversarial loss.
struct AdversarialTargets {
    std::vector<ad::Tensor> clean_log_p;
    std::vector<ad::Tensor> d;
};

inline AdversarialTargets adversarial_targets(const SequenceModel& m, const std::vector<ad::Var>& embeddings,
                                              const VatConfig& cfg, std::mt19937_64& rng,
                                              AdversarialStats* stats = nullptr)
{
    AdversarialTargets out;
    for (const auto& e : embeddings) {
        auto clean = token_log_distributions(m, e.value(), cfg.kl_mode);
        auto pert = adversarial_perturbation(m, e.value(), clean, cfg, rng);
        if (stats) {
            stats->gradient_evaluations += pert.gradient_evaluations;
            stats->degenerate += pert.degenerate ? 1 : 0;
        }
        out.clean_log_p.push_back(std::move(clean));
        out.d.push_back(std::move(pert.d));
    }
    return out;
}

// Mean KL between the fixed clean distributions and the distributions at
// e + d; gradients reach the parameters only through the perturbed branch.
inline ad::Var adversarial_loss(const BoundModel& b, const std::vector<ad::Var>& embeddings,
                                const AdversarialTargets& targets, KlMode mode)
{
    if (embeddings.empty()) throw std::invalid_argument("adversarial_loss: empty batch");
    if (targets.d.size() != embeddings.size() || targets.clean_log_p.size() != embeddings.size()) {
        throw std::invalid_argument("adversarial_loss: targets do not match the batch");
    }
    auto& tape = embeddings.front().tape();
    std::vector<ad::Var> terms;
    terms.reserve(embeddings.size());
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        auto perturbed = ad::add(embeddings[i], tape.constant(targets.d[i]));
        terms.push_back(kl_sequence(targets.clean_log_p[i], token_log_distributions(b, perturbed, mode)));
    }
    return ad::scale(ad::sum(ad::concat(terms, ad::Axis::Rows)), 1.0 / static_cast<double>(terms.size()));
}

inline ad::Var adversarial_loss(const BoundModel& b, const std::vector<ad::Var>& embeddings, const VatConfig& cfg,
                                std::mt19937_64& rng, AdversarialStats* stats = nullptr)
{
    if (embeddings.empty()) throw std::invalid_argument("adversarial_loss: empty batch");
    return adversarial_loss(b, embeddings, adversarial_targets(*b.model, embeddings, cfg, rng, stats), cfg.kl_mode);
}

inline void check_gamma(double gamma)
{
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1], got " + std::to_string(gamma));
}

inline double total_loss(double l_sup, double l_adv, double gamma)
{
    check_gamma(gamma);
    return gamma * l_sup + (1.0 - gamma) * l_adv;
}

inline ad::Var total_loss(const ad::Var& l_sup, const ad::Var& l_adv, double gamma)
{
    check_gamma(gamma);
    if (gamma == 1.0) return l_sup;
    if (gamma == 0.0) return l_adv;
    return ad::add(ad::scale(l_sup, gamma), ad::scale(l_adv, 1.0 - gamma));
}

} // namespace toxspan
