#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace toxspan {

// Gaussian kernel density estimate evaluated on `grid`.
inline std::vector<double> gaussian_kde(std::span<const double> values, double bandwidth,
                                        std::span<const double> grid)
{
    if (values.empty()) throw std::invalid_argument("gaussian_kde: no values");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("gaussian_kde: bandwidth must be positive");
    const double norm = 1.0 / (static_cast<double>(values.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
    std::vector<double> density;
    density.reserve(grid.size());
    for (double x : grid) {
        double acc = 0.0;
        for (double v : values) {
            const double u = (x - v) / bandwidth;
            acc += std::exp(-0.5 * u * u);
        }
        density.push_back(acc * norm);
    }
    return density;
}

// Scott's rule of thumb, 1.06 * sigma * n^(-1/5); falls back to 1 for degenerate samples.
inline double scott_bandwidth(std::span<const double> values)
{
    const auto n = static_cast<double>(values.size());
    if (values.size() < 2) return 1.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sigma = std::sqrt(var / (n - 1.0));
    if (!(sigma > 0.0)) return 1.0;
    return 1.06 * sigma * std::pow(n, -0.2);
}

inline std::vector<double> linspace(double lo, double hi, std::size_t count)
{
    std::vector<double> out;
    if (count == 0) return out;
    if (count == 1) return {lo};
    out.reserve(count);
    const double step = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) out.push_back(lo + step * static_cast<double>(i));
    return out;
}

} // namespace toxspan
