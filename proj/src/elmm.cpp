#include "bubble/elmm.hpp"

#include "bubble/errors.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <sstream>

namespace bubble {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

// Points clustered toward T plus dyadic points T - 2^-k T.
std::vector<double> probe_points(double T, int n) {
    std::vector<double> pts;
    for (int i = 0; i < n; ++i) pts.push_back(T * std::sin(M_PI * i / (2.0 * n)));
    for (int k = 1; k <= 45; ++k) pts.push_back(T - std::ldexp(T, -k));
    return pts;
}

// s -> int_v^s f, signed.
ScalarFn local_integral(const ScalarFn& f, double v, double T) {
    return [f, v, T](double s) {
        if (s >= v) return integrate_toward(f, v, s, T);
        return -integrate_toward(f, s, v, T);
    };
}

double stencil_step(double t, double T) { return 1e-3 * (T - t); }

}  // namespace

double derivative5(const ScalarFn& f, double v, double h) {
    h = std::ldexp(1.0, std::ilogb(h));
    if (v >= 2.0 * h) return (f(v - 2 * h) - 8 * f(v - h) + 8 * f(v + h) - f(v + 2 * h)) / (12.0 * h);
    h *= 0.25;
    return (-25 * f(v) + 48 * f(v + h) - 36 * f(v + 2 * h) + 16 * f(v + 3 * h) - 3 * f(v + 4 * h)) / (12.0 * h);
}

TiltFunction TiltFunction::constant(double c) {
    TiltFunction y;
    y.y = [c](double) { return c; };
    y.dy = [](double) { return 0.0; };
    y.label = "constant(" + fmt(c) + ")";
    y.lower_bound = 1.0 + c;
    return y;
}

TiltFunction TiltFunction::from_solution(const Solution& sol) {
    auto s = std::make_shared<const Solution>(sol);
    TiltFunction y;
    y.y = [s](double t) { return s->y(t); };
    y.dy = [s](double t) {
        const double tn = s->t_N();
        if (t <= tn) return s->y_hat.derivative(t);
        double dn = s->model.dphi(tn), ds = s->model.dphi(t);
        if (!(dn > 0.0 && ds > 0.0)) return 0.0;
        return -s->y_hat.values().back() * dn * s->model.d2phi(t) / (ds * ds);
    };
    y.label = "y_hat";
    return y;
}

TiltFunction TiltFunction::custom(ScalarFn y, ScalarFn dy, std::string label) {
    TiltFunction f;
    f.y = std::move(y);
    f.dy = std::move(dy);
    f.label = std::move(label);
    return f;
}

std::vector<double> tilt_grid(double T) {
    auto g = chebyshev_grid(T, 257);
    g.pop_back();
    return g;
}

TiltedMeasure build_tilted_measure(const MarketModel& model, const TiltFunction& tilt, std::vector<double> grid) {
    const double T = model.horizon();
    if (grid.empty()) grid = tilt_grid(T);
    if (grid.size() < 2 || grid.front() != 0.0 || !(grid.back() < T))
        throw DomainError("tilt grid must start at 0 and end before the horizon");
    for (size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw DomainError("tilt grid must be strictly increasing");

    if (!std::isnan(tilt.lower_bound) && !(tilt.lower_bound > 0.0))
        throw ModelError("rejected tilt " + tilt.label + ": inf (1 + y) > 0 violated (certified bound " +
                         fmt(tilt.lower_bound) + ")");
    for (double t : probe_points(T, 1024)) {
        double v = 1.0 + tilt.y(t);
        if (!(v > 0.0))
            throw ModelError("rejected tilt " + tilt.label + ": inf (1 + y) > 0 violated at t=" + fmt(t));
    }

    TiltedMeasure q(model, tilt);
    auto mp = std::make_shared<const MarketModel>(model);
    const MarketModel& m = *mp;
    const ScalarFn yf = q.tilt_.y;
    q.fy_ = [mp, yf](double t) { return mp->kappa(t) * yf(t); };
    q.fh_ = [mp, yf](double t) { return mp->kappa(t) * (1.0 + yf(t)); };
    q.fc_ = [mp, yf](double t) {
        double d = mp->dphi(t);
        return d == 0.0 ? 0.0 : d * (1.0 + yf(t));
    };

    auto sq = integrate_to_horizon(
        [&](double t) {
            double v = m.dphi(t) * yf(t);
            return v * v;
        },
        T);
    if (sq.status == TailStatus::Diverged)
        throw ModelError("rejected tilt " + tilt.label + ": int (phi' y)^2 < inf violated");
    if (sq.status == TailStatus::Indeterminate) q.diagnostic += "int (phi' y)^2 not certified near T; ";

    auto tab = std::make_shared<TiltedMeasure::Table>();
    tab->t = grid;
    const size_t K = grid.size();
    tab->ly.assign(K, 0.0);
    tab->lh.assign(K, 0.0);
    tab->comp.assign(K, 0.0);
    for (size_t i = 1; i < K; ++i) {
        tab->ly[i] = tab->ly[i - 1] + integrate_toward(q.fy_, grid[i - 1], grid[i], T);
        tab->lh[i] = tab->lh[i - 1] + integrate_toward(q.fh_, grid[i - 1], grid[i], T);
        tab->comp[i] = tab->comp[i - 1] + integrate_toward(q.fc_, grid[i - 1], grid[i], T);
    }
    q.table_ = tab;

    if (!model.hazard().integrable()) {
        // kappa^H >= eps kappa^G with eps > 0
        q.lh_end_ = kInf;
        q.atom_ = 0.0;
    } else {
        auto tail = tail_integrate(q.fh_, grid.back(), T);
        if (tail.status == TailStatus::Diverged)
            throw ModelError("rejected tilt " + tilt.label + ": int kappa^G (1 + y) < inf violated with an atom at T");
        if (tail.status == TailStatus::Indeterminate) q.diagnostic += "int kappa^H not certified near T; ";
        q.lh_end_ = tab->lh.back() + tail.value;
        q.atom_ = std::exp(-q.lh_end_);
    }
    return q;
}

double TiltedMeasure::from_table(const std::vector<double>& col, const ScalarFn& f, double t) const {
    const auto& g = table_->t;
    if (t <= 0.0) return 0.0;
    auto it = std::upper_bound(g.begin(), g.end(), t);
    size_t i = size_t(it - g.begin()) - 1;
    return col[i] + integrate_toward(f, g[i], t, horizon());
}

double TiltedMeasure::log_zeta(double t) const {
    if (t < 0.0 || t >= horizon()) throw DomainError("zeta is defined on [0, T)");
    return -from_table(table_->ly, fy_, t);
}

double TiltedMeasure::zeta(double t) const { return std::exp(log_zeta(t)); }

double TiltedMeasure::cumulative(double t) const {
    if (t < 0.0 || t > horizon()) throw DomainError("cumulative hazard is defined on [0, T]");
    if (t == horizon()) return lh_end_;
    return from_table(table_->lh, fh_, t);
}

double TiltedMeasure::survival(double t) const {
    if (t >= horizon()) return 0.0;
    return std::exp(-cumulative(t));
}

double TiltedMeasure::H(double t) const {
    if (t >= horizon()) return 1.0;
    return -std::expm1(-cumulative(t));
}

double TiltedMeasure::kappa_H(double t) const {
    const double T = horizon();
    if (t < 0.0 || t >= T) throw DomainError("kappa^H is defined on [0, T)");
    return derivative5(local_integral(fh_, t, T), t, stencil_step(t, T));
}

double TiltedMeasure::compensator(double t) const {
    if (t < 0.0 || t >= horizon()) throw DomainError("compensator is defined on [0, T)");
    return from_table(table_->comp, fc_, t);
}

double TiltedMeasure::inverse(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("uniform variate must lie in (0, 1)");
    const double T = horizon();
    const double L = -std::log1p(-u);
    if (L >= lh_end_) return T;
    const auto& g = table_->t;
    const auto& lh = table_->lh;
    double lo, hi, base;
    auto it = std::upper_bound(lh.begin(), lh.end(), L);
    if (it != lh.end()) {
        size_t i = size_t(it - lh.begin()) - 1;
        lo = g[i];
        hi = g[i + 1];
        base = lh[i];
    } else {
        base = lh.back();
        double a = g.back();
        for (int k = 1;; ++k) {
            double b = T - std::ldexp(T - g.back(), -k);
            double inc = integrate_toward(fh_, a, b, T);
            if (base + inc >= L) {
                lo = a;
                hi = b;
                break;
            }
            if (k >= 60) return b;
            base += inc;
            a = b;
        }
    }
    auto f = [&](double t) { return base + integrate_toward(fh_, lo, t, T) - L; };
    double flo = base - L, fhi = f(hi);
    if (fhi <= 0.0) return hi;
    if (flo >= 0.0) return lo;
    boost::uintmax_t iters = 100;
    auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(48), iters);
    return 0.5 * (r.first + r.second);
}

RelationResiduals TiltedMeasure::residuals(double t) const {
    const double T = horizon();
    RelationResiduals r;
    const double y = tilt_.y(t);
    const double k = model_.kappa(t);
    r.survival = std::fabs(std::expm1(-cumulative(t) - log_zeta(t) + model_.hazard().cumulative(t)));
    double kh = kappa_H(t);
    r.hazard = std::fabs(kh - k * (1.0 + y)) / kh;
    double dlz = derivative5(local_integral([this](double s) { return -fy_(s); }, t, T), t, stencil_step(t, T));
    // A^G zeta / zeta = 1 - (log zeta)'/kappa^G
    r.ag_zeta = std::fabs(1.0 - dlz / k - (1.0 + y)) / (1.0 + y);
    return r;
}

std::optional<TiltBounds> verify_tilt_bounds(const MarketModel& model, const TiltFunction& tilt, double C_max) {
    const double T = model.horizon();
    struct Probe {
        double v, k, d;
    };
    std::vector<Probe> probes;
    for (int n : {256, 512, 1024})
        for (double t : probe_points(T, n)) probes.push_back({1.0 + tilt.y(t), model.kappa(t), model.dphi(t)});
    double eps = kInf;
    for (const auto& p : probes) eps = std::min(eps, p.v);
    if (!(eps > 0.0)) return std::nullopt;
    for (double C = 1.0; C <= C_max; C *= 2.0) {
        bool ok = true;
        for (const auto& p : probes) {
            double bound = C + (p.k < C * p.d ? C / p.d : 0.0);
            if (p.v > bound * (1.0 + 1e-12)) {
                ok = false;
                break;
            }
        }
        if (ok) return TiltBounds{eps, C};
    }
    return std::nullopt;
}

Classification classify_under_Q(const MarketModel& model, const TiltFunction& tilt) {
    build_tilted_measure(model, tilt);
    Classification c;
    c.atom = model.hazard().atom();
    c.limsup_delta = limsup_delta(model);
    if (c.atom > 0.0) {
        c.verdict = Verdict::TrueMartingale;
        c.defect_finite = false;
        c.diagnostic = "atom at T";
        return c;
    }
    auto bounds = verify_tilt_bounds(model, tilt);
    auto d = integrability_defect(model);
    c.defect = d.value;
    c.defect_finite = d.status == TailStatus::Converged;
    if (!bounds) {
        c.verdict = Verdict::Indeterminate;
        c.diagnostic = "tilt bounds eps <= 1 + y <= C + C/phi' not certified";
        return c;
    }
    switch (d.status) {
        case TailStatus::Converged: c.verdict = Verdict::StrictLocalMartingale; break;
        case TailStatus::Diverged:
            c.verdict = Verdict::TrueMartingale;
            c.diagnostic = "int (kappa^G - phi') = inf";
            break;
        case TailStatus::Indeterminate:
            c.verdict = Verdict::Indeterminate;
            c.diagnostic = "could not certify int (kappa^G - phi') near T";
            break;
    }
    if (c.diagnostic.empty()) c.diagnostic = "eps=" + fmt(bounds->eps) + " C=" + fmt(bounds->C);
    return c;
}

}  // namespace bubble
