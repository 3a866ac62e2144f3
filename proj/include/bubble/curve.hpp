#pragma once

#include <vector>

namespace bubble {

// Piecewise cubic Hermite curve on a strictly increasing grid.
// Outside [t_0, t_N] the curve is held at the end values.
class Curve {
public:
    Curve() = default;
    Curve(std::vector<double> t, std::vector<double> y, std::vector<double> dy);

    // Fritsch-Carlson monotone slopes.
    static Curve monotone(std::vector<double> t, std::vector<double> y);

    double operator()(double t) const;
    double derivative(double t) const;
    double second_derivative(double t) const;

    const std::vector<double>& knots() const { return t_; }
    const std::vector<double>& values() const { return y_; }
    const std::vector<double>& slopes() const { return dy_; }
    size_t size() const { return t_.size(); }
    bool empty() const { return t_.empty(); }

    // Index i with t_i <= t < t_{i+1}, clamped to [0, N-1].
    size_t interval(double t) const;

private:
    std::vector<double> t_, y_, dy_;
};

}  // namespace bubble
