#include "bubble/curve.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bubble {

Curve::Curve(std::vector<double> t, std::vector<double> y, std::vector<double> dy)
    : t_(std::move(t)), y_(std::move(y)), dy_(std::move(dy)) {
    if (t_.size() < 2 || y_.size() != t_.size() || dy_.size() != t_.size())
        throw std::invalid_argument("curve needs matching knot, value and slope arrays (n >= 2)");
    for (size_t i = 1; i < t_.size(); ++i)
        if (!(t_[i] > t_[i - 1])) throw std::invalid_argument("curve knots must be strictly increasing");
}

Curve Curve::monotone(std::vector<double> t, std::vector<double> y) {
    const size_t n = t.size();
    if (n < 2 || y.size() != n) throw std::invalid_argument("monotone curve needs n >= 2 matching points");
    std::vector<double> h(n - 1), s(n - 1), d(n, 0.0);
    for (size_t i = 0; i + 1 < n; ++i) {
        h[i] = t[i + 1] - t[i];
        s[i] = (y[i + 1] - y[i]) / h[i];
    }
    if (n == 2) {
        d[0] = d[1] = s[0];
    } else {
        for (size_t i = 1; i + 1 < n; ++i) {
            if (s[i - 1] * s[i] <= 0.0) {
                d[i] = 0.0;
            } else {
                // weighted harmonic mean (Fritsch-Butland)
                double w1 = 2.0 * h[i] + h[i - 1], w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
            }
        }
        auto end_slope = [](double h0, double h1, double s0, double s1) {
            double e = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
            if (e * s0 <= 0.0) return 0.0;
            if (s0 * s1 <= 0.0 && std::fabs(e) > std::fabs(3.0 * s0)) return 3.0 * s0;
            return e;
        };
        d[0] = end_slope(h[0], h[1], s[0], s[1]);
        d[n - 1] = end_slope(h[n - 2], h[n - 3], s[n - 2], s[n - 3]);
        // strictly increasing data keeps strictly positive end slopes
        if (s[0] > 0.0 && d[0] <= 0.0) d[0] = s[0];
        if (s[n - 2] > 0.0 && d[n - 1] <= 0.0) d[n - 1] = s[n - 2];
    }
    return Curve(std::move(t), std::move(y), std::move(d));
}

size_t Curve::interval(double t) const {
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    size_t i = it == t_.begin() ? 0 : size_t(it - t_.begin()) - 1;
    return std::min(i, t_.size() - 2);
}

double Curve::operator()(double t) const {
    if (t <= t_.front()) return y_.front();
    if (t >= t_.back()) return y_.back();
    size_t i = interval(t);
    double h = t_[i + 1] - t_[i], u = (t - t_[i]) / h;
    double u2 = u * u, u3 = u2 * u;
    double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u, h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
    return h00 * y_[i] + h10 * h * dy_[i] + h01 * y_[i + 1] + h11 * h * dy_[i + 1];
}

double Curve::derivative(double t) const {
    if (t < t_.front() || t > t_.back()) return 0.0;
    size_t i = interval(t);
    double h = t_[i + 1] - t_[i], u = (t - t_[i]) / h;
    double u2 = u * u;
    double d00 = 6 * u2 - 6 * u, d10 = 3 * u2 - 4 * u + 1, d01 = -6 * u2 + 6 * u, d11 = 3 * u2 - 2 * u;
    return (d00 * y_[i] + d01 * y_[i + 1]) / h + d10 * dy_[i] + d11 * dy_[i + 1];
}

double Curve::second_derivative(double t) const {
    if (t < t_.front() || t > t_.back()) return 0.0;
    size_t i = interval(t);
    double h = t_[i + 1] - t_[i], u = (t - t_[i]) / h;
    double e00 = 12 * u - 6, e10 = 6 * u - 4, e01 = -12 * u + 6, e11 = 6 * u - 2;
    return (e00 * y_[i] + e01 * y_[i + 1]) / (h * h) + (e10 * dy_[i] + e11 * dy_[i + 1]) / h;
}

}  // namespace bubble
