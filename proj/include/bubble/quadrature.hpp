#pragma once

#include <functional>
#include <vector>

namespace bubble {

using ScalarFn = std::function<double(double)>;

// Adaptive Gauss-Kronrod (15 point) on a finite interval.
double integrate(const ScalarFn& f, double a, double b, double rel_tol = 1e-13);

// Fixed 8-point Gauss-Legendre rule on [a,b]; nodes/weights on [-1,1].
double gauss_legendre(const ScalarFn& f, double a, double b);
const std::vector<double>& gl_nodes();
const std::vector<double>& gl_weights();

enum class TailStatus { Converged, Diverged, Indeterminate };

struct TailIntegral {
    double value = 0.0;
    TailStatus status = TailStatus::Indeterminate;
    int shells = 0;
};

// Integral of f over [a, T) split into dyadic shells
// [T - 2^-k h, T - 2^-(k+1) h], h = T - a. Divergence is declared when the
// shell contributions fail to decay for 8 consecutive shells.
TailIntegral tail_integrate(const ScalarFn& f, double a, double T, double rel_tol = 1e-12);

// Full integral over [0, T): regular part on [0, T/2], shells beyond.
TailIntegral integrate_to_horizon(const ScalarFn& f, double T, double rel_tol = 1e-12);

// t_i = t_end * sin(pi i / (2 (n-1))), clustered toward t_end.
std::vector<double> chebyshev_grid(double t_end, int n);

// Compensated (Neumaier) accumulator.
struct NeumaierSum {
    double sum = 0.0;
    double c = 0.0;
    void add(double x);
    double value() const { return sum + c; }
};

}  // namespace bubble
