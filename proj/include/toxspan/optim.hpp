#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ad/tensor.hpp"
#include "errors.hpp"

namespace toxspan {

struct AdamConfig {
    double learning_rate{1e-3};
    double beta1{0.9};
    double beta2{0.999};
    double epsilon{1e-8};

    void validate() const
    {
        if (!(learning_rate > 0.0)) throw ConfigError("optim.learning_rate must be > 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optim.beta1 must lie in [0, 1)");
        if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optim.beta2 must lie in [0, 1)");
        if (!(epsilon > 0.0)) throw ConfigError("optim.epsilon must be > 0");
    }

    bool operator==(const AdamConfig&) const = default;
};

class Adam {
public:
    Adam(AdamConfig cfg, std::vector<ad::Tensor*> params) : cfg_(cfg), params_(std::move(params))
    {
        cfg_.validate();
        for (const auto* p : params_) {
            m_.emplace_back(p->shape());
            v_.emplace_back(p->shape());
        }
    }

    void step(const std::vector<ad::Tensor>& grads)
    {
        if (grads.size() != params_.size()) throw std::invalid_argument("Adam::step: gradient count mismatch");
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = *params_[i];
            const auto& g = grads[i];
            if (g.shape() != p.shape()) {
                throw ad::ShapeError("Adam::step: gradient " + g.shape().str() + " for parameter " + p.shape().str());
            }
            auto& m = m_[i];
            auto& v = v_[i];
            for (std::size_t k = 0; k < p.size(); ++k) {
                m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
                v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
                p[k] -= cfg_.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.epsilon);
            }
        }
    }

    [[nodiscard]] std::size_t steps() const noexcept { return t_; }

private:
    AdamConfig cfg_;
    std::vector<ad::Tensor*> params_;
    std::vector<ad::Tensor> m_, v_;
    std::size_t t_{0};
};

inline double global_norm(const std::vector<ad::Tensor>& grads)
{
    double s = 0.0;
    for (const auto& g : grads)
        for (double x : g.data()) s += x * x;
    return std::sqrt(s);
}

// Rescales gradients so their joint L2 norm is at most `max_norm`; returns
// the norm before clipping.
inline double clip_global_norm(std::vector<ad::Tensor>& grads, double max_norm)
{
    if (!(max_norm > 0.0)) throw ConfigError("clip norm must be > 0");
    const double norm = global_norm(grads);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& g : grads) g *= s;
    }
    return norm;
}

} // namespace toxspan
