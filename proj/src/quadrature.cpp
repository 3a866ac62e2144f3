#include "bubble/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace bubble {

namespace {

struct Panel {
    double a, b, value, error;
    int strikes;  // consecutive bisections without improvement
};

// One G7-K15 panel. Boost's error estimate is taken on [-1, 1] and then
// scaled here, since its own scaling of the tolerance is inconsistent.
Panel gk15(const ScalarFn& f, double a, double b) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    auto g = [&](double u) { return f(mid + half * u); };
    double err = 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(g, -1.0, 1.0, 0, 0.0, &err);
    return {a, b, half * v, std::fabs(half) * err, 0};
}

}  // namespace

double integrate(const ScalarFn& f, double a, double b, double rel_tol) {
    if (a == b) return 0.0;
    constexpr int max_panels = 4096;
    auto cmp = [](const Panel& x, const Panel& y) { return x.error < y.error; };
    std::vector<Panel> heap{gk15(f, a, b)};
    std::vector<Panel> settled;
    double total = heap[0].value, error = heap[0].error;
    while (!heap.empty() && error > rel_tol * std::fabs(total) && int(heap.size() + settled.size()) < max_panels) {
        std::pop_heap(heap.begin(), heap.end(), cmp);
        Panel p = heap.back();
        heap.pop_back();
        double m = 0.5 * (p.a + p.b);
        Panel l = gk15(f, p.a, m), r = gk15(f, m, p.b);
        total += l.value + r.value - p.value;
        error += l.error + r.error - p.error;
        // value settled but error not improving: roundoff limited
        const double sum = l.value + r.value;
        const bool flat = l.error + r.error >= 0.99 * p.error && std::fabs(sum - p.value) <= 1e-5 * std::fabs(sum);
        l.strikes = r.strikes = flat ? p.strikes + 1 : 0;
        const bool stuck = l.strikes >= 3 || m <= p.a || m >= p.b;
        for (Panel c : {l, r}) {
            if (stuck) {
                settled.push_back(c);
            } else {
                heap.push_back(c);
                std::push_heap(heap.begin(), heap.end(), cmp);
            }
        }
    }
    NeumaierSum s;
    for (const auto& p : heap) s.add(p.value);
    for (const auto& p : settled) s.add(p.value);
    return s.value();
}

namespace {

struct GlRule {
    std::vector<double> x, w;
};

// Symmetric 8-point rule expanded from Boost's half tables.
const GlRule& rule8() {
    static const GlRule r = [] {
        using G = boost::math::quadrature::gauss<double, 8>;
        GlRule g;
        const auto& ax = G::abscissa();
        const auto& wt = G::weights();
        for (size_t i = 0; i < ax.size(); ++i) {
            g.x.push_back(-ax[i]);
            g.w.push_back(wt[i]);
            g.x.push_back(ax[i]);
            g.w.push_back(wt[i]);
        }
        return g;
    }();
    return r;
}

}  // namespace

const std::vector<double>& gl_nodes() { return rule8().x; }
const std::vector<double>& gl_weights() { return rule8().w; }

double gauss_legendre(const ScalarFn& f, double a, double b) {
    return boost::math::quadrature::gauss<double, 8>::integrate(f, a, b);
}

TailIntegral tail_integrate(const ScalarFn& f, double a, double T, double rel_tol) {
    TailIntegral out;
    const double h = T - a;
    if (h <= 0.0) {
        out.status = TailStatus::Converged;
        return out;
    }
    NeumaierSum sum;
    std::vector<double> shells;
    int no_decay = 0;
    const double floor_width = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(T));
    for (int k = 0; k < 200; ++k) {
        double w_hi = std::ldexp(h, -k), w_lo = std::ldexp(h, -k - 1);
        if (w_lo < floor_width) break;
        double s = integrate(f, T - w_hi, T - w_lo, rel_tol * 1e-1);
        if (!std::isfinite(s)) {
            out.value = s;
            out.status = TailStatus::Diverged;
            out.shells = k + 1;
            return out;
        }
        sum.add(s);
        shells.push_back(std::fabs(s));
        out.shells = k + 1;
        const double total = std::fabs(sum.value());
        if (k == 0) continue;
        const double prev = shells[k - 1];
        const double cur = shells[k];
        if (cur > rel_tol * total && cur >= (1.0 - 1e-3) * prev)
            ++no_decay;
        else
            no_decay = 0;
        if (no_decay >= 8) {
            out.value = std::numeric_limits<double>::infinity();
            out.status = TailStatus::Diverged;
            return out;
        }
        if (cur <= rel_tol * total && prev <= 10.0 * rel_tol * total) {
            out.value = sum.value();
            out.status = TailStatus::Converged;
            return out;
        }
        if (cur == 0.0 && prev == 0.0) {
            out.value = sum.value();
            out.status = TailStatus::Converged;
            return out;
        }
    }
    // Resolution exhausted: accept a geometric tail when the last shells decay
    // at a stable ratio.
    const size_t n = shells.size();
    if (n >= 4) {
        double r1 = shells[n - 1] / shells[n - 2];
        double r2 = shells[n - 2] / shells[n - 3];
        double r3 = shells[n - 3] / shells[n - 4];
        bool stable = std::fabs(r1 - r2) < 0.02 * r2 && std::fabs(r2 - r3) < 0.02 * r3;
        if (stable && r1 < 0.98) {
            double tail = shells[n - 1] * r1 / (1.0 - r1);
            double signed_last = sum.value();
            out.value = signed_last + std::copysign(tail, signed_last);
            out.status = (tail <= 1e-3 * std::fabs(out.value) || tail <= 1e-12) ? TailStatus::Converged
                                                                                 : TailStatus::Indeterminate;
            return out;
        }
        if (shells[n - 1] <= 1e-14 * std::max(1.0, std::fabs(sum.value()))) {
            out.value = sum.value();
            out.status = TailStatus::Converged;
            return out;
        }
    }
    out.value = sum.value();
    out.status = TailStatus::Indeterminate;
    return out;
}

TailIntegral integrate_to_horizon(const ScalarFn& f, double T, double rel_tol) {
    double head = integrate(f, 0.0, 0.5 * T, rel_tol);
    TailIntegral tail = tail_integrate(f, 0.5 * T, T, rel_tol);
    if (tail.status != TailStatus::Diverged) tail.value += head;
    return tail;
}

std::vector<double> chebyshev_grid(double t_end, int n) {
    if (n < 2) throw std::invalid_argument("grid needs at least two points");
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = t_end * std::sin(M_PI * i / (2.0 * (n - 1)));
    t[0] = 0.0;
    t[n - 1] = t_end;
    return t;
}

void NeumaierSum::add(double x) {
    double t = sum + x;
    if (std::fabs(sum) >= std::fabs(x))
        c += (sum - t) + x;
    else
        c += (x - t) + sum;
    sum = t;
}

}  // namespace bubble
