#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace toxspan::ad {

struct Shape {
    std::size_t rows{0};
    std::size_t cols{0};

    [[nodiscard]] std::size_t size() const noexcept { return rows * cols; }
    [[nodiscard]] std::string str() const { return "(" + std::to_string(rows) + ", " + std::to_string(cols) + ")"; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Dense row-major matrix of doubles. Vectors are 1 x n, scalars 1 x 1.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0) : shape_{rows, cols}, data_(rows * cols, fill) {}
    Tensor(Shape shape, double fill = 0.0) : Tensor(shape.rows, shape.cols, fill) {}
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data) : shape_{rows, cols}, data_(std::move(data))
    {
        if (data_.size() != rows * cols) {
            throw ShapeError("tensor data of length " + std::to_string(data_.size()) + " does not fit shape " +
                             shape_.str());
        }
    }

    static Tensor scalar(double v) { return Tensor(1, 1, v); }
    static Tensor row(std::vector<double> values)
    {
        const auto n = values.size();
        return Tensor(1, n, std::move(values));
    }
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows)
    {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        std::vector<double> data;
        data.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw ShapeError("ragged rows in Tensor::from_rows");
            data.insert(data.end(), row.begin(), row.end());
        }
        return Tensor(r, c, std::move(data));
    }

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rows() const noexcept { return shape_.rows; }
    [[nodiscard]] std::size_t cols() const noexcept { return shape_.cols; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }

    [[nodiscard]] std::span<double> row_span(std::size_t r) { return {data_.data() + r * shape_.cols, shape_.cols}; }
    [[nodiscard]] std::span<const double> row_span(std::size_t r) const
    {
        return {data_.data() + r * shape_.cols, shape_.cols};
    }

    [[nodiscard]] double item() const
    {
        if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_.str());
        return data_[0];
    }

    [[nodiscard]] bool all_finite() const
    {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    [[nodiscard]] double norm() const
    {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return std::sqrt(s);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor& operator+=(const Tensor& other)
    {
        if (other.shape_ != shape_) throw ShapeError("+= shape mismatch " + shape_.str() + " vs " + other.shape_.str());
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    Tensor& operator*=(double s)
    {
        for (auto& v : data_) v *= s;
        return *this;
    }

    // Same data, new dimensions.
    [[nodiscard]] Tensor reshaped(std::size_t rows, std::size_t cols) const
    {
        if (rows * cols != data_.size()) throw ShapeError("cannot reshape " + shape_.str() + " to (" +
                                                          std::to_string(rows) + ", " + std::to_string(cols) + ")");
        return Tensor(rows, cols, data_);
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_{};
    std::vector<double> data_;
};

inline Tensor operator*(double s, Tensor t)
{
    t *= s;
    return t;
}

} // namespace toxspan::ad
