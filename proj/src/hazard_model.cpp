#include "bubble/hazard_model.hpp"

#include "bubble/errors.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bubble {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------- HazardModel

HazardModel HazardModel::lppl(double T, const LpplHazard& p) {
    if (!(T > 0.0)) throw DomainError("horizon must be positive");
    HazardModel h;
    h.family_ = HazardFamily::LPPL;
    h.T_ = T;
    h.lppl_ = p;
    return h;
}

HazardModel HazardModel::exponential_cutoff(double T, double rate) {
    if (!(T > 0.0)) throw DomainError("horizon must be positive");
    if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("exponential cutoff rate must be positive");
    HazardModel h;
    h.family_ = HazardFamily::ExponentialCutoff;
    h.T_ = T;
    h.rate_ = rate;
    return h;
}

HazardModel HazardModel::uniform(double T) {
    if (!(T > 0.0)) throw DomainError("horizon must be positive");
    HazardModel h;
    h.family_ = HazardFamily::UniformOnHorizon;
    h.T_ = T;
    return h;
}

HazardModel HazardModel::tabulated(std::vector<double> t, std::vector<double> G) {
    if (t.size() < 2 || t.size() != G.size()) throw DomainError("tabulated hazard needs >= 2 matching knots");
    if (t.front() != 0.0 || G.front() != 0.0) throw DomainError("tabulated hazard must start at (0, 0)");
    std::vector<double> L(t.size());
    for (size_t i = 0; i < t.size(); ++i) {
        if (i > 0 && !(t[i] > t[i - 1])) throw DomainError("tabulated knots must be strictly increasing");
        if (i > 0 && !(G[i] > G[i - 1])) throw DomainError("tabulated G must be strictly increasing");
        if (!(G[i] < 1.0)) throw DomainError("tabulated G must stay below 1 at every knot");
        L[i] = -std::log1p(-G[i]);
    }
    HazardModel h;
    h.family_ = HazardFamily::Tabulated;
    h.T_ = t.back();
    h.log_survival_ = Curve::monotone(std::move(t), std::move(L));
    return h;
}

std::string HazardModel::family_name() const {
    switch (family_) {
        case HazardFamily::LPPL: return "lppl";
        case HazardFamily::ExponentialCutoff: return "exponential_cutoff";
        case HazardFamily::UniformOnHorizon: return "uniform";
        case HazardFamily::Tabulated: return "tabulated";
    }
    return "unknown";
}

void HazardModel::check_open(double t) const {
    if (!(t >= 0.0) || !(t < T_)) throw DomainError("time " + fmt(t) + " outside [0, T)");
}

double HazardModel::rate(double t) const {
    check_open(t);
    switch (family_) {
        case HazardFamily::ExponentialCutoff: return rate_;
        case HazardFamily::UniformOnHorizon: return 1.0 / (T_ - t);
        case HazardFamily::LPPL: {
            double s = T_ - t;
            double th = lppl_.omega * std::log(s) - lppl_.psi;
            return std::pow(s, lppl_.m - 1.0) * (lppl_.B + lppl_.C * std::cos(th));
        }
        case HazardFamily::Tabulated: return log_survival_.derivative(t);
    }
    return 0.0;
}

double HazardModel::rate_derivative(double t) const {
    check_open(t);
    switch (family_) {
        case HazardFamily::ExponentialCutoff: return 0.0;
        case HazardFamily::UniformOnHorizon: {
            double s = T_ - t;
            return 1.0 / (s * s);
        }
        case HazardFamily::LPPL: {
            double s = T_ - t;
            double th = lppl_.omega * std::log(s) - lppl_.psi;
            double g = (lppl_.m - 1.0) * (lppl_.B + lppl_.C * std::cos(th)) - lppl_.C * lppl_.omega * std::sin(th);
            return -std::pow(s, lppl_.m - 2.0) * g;
        }
        case HazardFamily::Tabulated: return log_survival_.second_derivative(t);
    }
    return 0.0;
}

// Antiderivative in s = T - t of s^(m-1) (B + C cos(omega log s - psi)).
double HazardModel::lppl_primitive(double s) const {
    const auto& p = lppl_;
    double ls = std::log(s);
    double b = p.m == 0.0 ? p.B * ls : p.B * std::pow(s, p.m) / p.m;
    double c = 0.0;
    if (p.C != 0.0) {
        double den = p.m * p.m + p.omega * p.omega;
        double th = p.omega * ls - p.psi;
        if (den == 0.0)
            c = p.C * std::cos(p.psi) * ls;
        else
            c = p.C * std::pow(s, p.m) * (p.m * std::cos(th) + p.omega * std::sin(th)) / den;
    }
    return b + c;
}

bool HazardModel::integrable() const {
    switch (family_) {
        case HazardFamily::ExponentialCutoff: return true;
        case HazardFamily::UniformOnHorizon: return false;
        case HazardFamily::LPPL: return lppl_.m > 0.0;
        case HazardFamily::Tabulated: return true;
    }
    return true;
}

double HazardModel::cumulative(double t) const {
    if (!(t >= 0.0) || !(t <= T_)) throw DomainError("time " + fmt(t) + " outside [0, T]");
    if (t == T_ && !integrable()) return kInf;
    switch (family_) {
        case HazardFamily::ExponentialCutoff: return rate_ * t;
        case HazardFamily::UniformOnHorizon: return -std::log1p(-t / T_);
        case HazardFamily::LPPL: {
            double top = lppl_primitive(T_);
            if (t == T_) {
                // m > 0: s^m terms vanish at s = 0
                return top;
            }
            return top - lppl_primitive(T_ - t);
        }
        case HazardFamily::Tabulated: return log_survival_(t);
    }
    return 0.0;
}

double HazardModel::survival(double t) const {
    if (!(t >= 0.0) || !(t <= T_)) throw DomainError("time " + fmt(t) + " outside [0, T]");
    if (t == T_) return 0.0;
    if (family_ == HazardFamily::UniformOnHorizon) return 1.0 - t / T_;
    return std::exp(-cumulative(t));
}

double HazardModel::cdf(double t) const { return 1.0 - survival(t); }

double HazardModel::density(double t) const { return rate(t) * survival(t); }

double HazardModel::atom() const {
    if (!integrable()) return 0.0;
    return std::exp(-cumulative(T_));
}

double HazardModel::inverse_cumulative(double x) const {
    if (!(x >= 0.0)) throw DomainError("cumulative hazard level must be nonnegative");
    if (x == 0.0) return 0.0;
    switch (family_) {
        case HazardFamily::ExponentialCutoff: return x >= rate_ * T_ ? T_ : x / rate_;
        case HazardFamily::UniformOnHorizon: return -T_ * std::expm1(-x);
        default: break;
    }
    if (integrable() && x >= cumulative(T_)) return T_;
    // bracket by dyadic approach to T
    double lo = 0.0, hi = 0.5 * T_;
    for (int k = 1; cumulative(hi) < x; ++k) {
        lo = hi;
        if (k > 60) return T_;
        hi = T_ - std::ldexp(T_, -k - 1);
    }
    auto g = [&](double t) { return cumulative(t) - x; };
    boost::uintmax_t it = 200;
    auto r = boost::math::tools::toms748_solve(g, lo, hi, boost::math::tools::eps_tolerance<double>(52), it);
    return r.second;
}

double hazard_rate(const HazardModel& model, double t) { return model.rate(t); }

SurvivalAtom survival_and_atom(const HazardModel& model, double t) { return {model.survival(t), model.atom()}; }

// -------------------------------------------------------------- ExcessProfile

ExcessProfile ExcessProfile::zero() { return ExcessProfile{}; }

ExcessProfile ExcessProfile::constant(double alpha) {
    ExcessProfile e;
    e.family_ = ExcessFamily::Constant;
    e.param_ = alpha;
    e.label_ = "constant";
    return e;
}

ExcessProfile ExcessProfile::linear_ramp(double beta) {
    ExcessProfile e;
    e.family_ = ExcessFamily::LinearRamp;
    e.param_ = beta;
    e.label_ = "linear_ramp";
    return e;
}

ExcessProfile ExcessProfile::constant_jump_size(double delta0) {
    ExcessProfile e;
    e.family_ = ExcessFamily::ConstantJumpSize;
    e.param_ = delta0;
    e.label_ = "constant_jump_size";
    return e;
}

ExcessProfile ExcessProfile::jls_relaxed(ScalarFn delta, ScalarFn ddelta, std::string label) {
    ExcessProfile e;
    e.family_ = ExcessFamily::JLSRelaxed;
    e.f0_ = std::move(delta);
    e.f1_ = std::move(ddelta);
    e.label_ = std::move(label);
    return e;
}

ExcessProfile ExcessProfile::jls_polynomial(std::vector<double> coeffs) {
    auto c = coeffs;
    ScalarFn d = [c](double t) {
        double s = 0.0;
        for (size_t k = c.size(); k-- > 0;) s = s * t + c[k];
        return s;
    };
    ScalarFn dd = [c](double t) {
        double s = 0.0;
        for (size_t k = c.size(); k-- > 1;) s = s * t + double(k) * c[k];
        return s;
    };
    ExcessProfile e = jls_relaxed(d, dd, "jls_polynomial");
    e.coeffs_ = std::move(coeffs);
    return e;
}

ExcessProfile ExcessProfile::custom(ScalarFn phi, ScalarFn dphi, ScalarFn d2phi, std::string label) {
    ExcessProfile e;
    e.family_ = ExcessFamily::Custom;
    e.f0_ = std::move(phi);
    e.f1_ = std::move(dphi);
    e.f2_ = std::move(d2phi);
    e.label_ = std::move(label);
    return e;
}

std::string ExcessProfile::family_name() const {
    switch (family_) {
        case ExcessFamily::Zero: return "zero";
        case ExcessFamily::Constant: return "constant";
        case ExcessFamily::LinearRamp: return "linear_ramp";
        case ExcessFamily::ConstantJumpSize: return "constant_jump_size";
        case ExcessFamily::JLSRelaxed: return "jls_relaxed";
        case ExcessFamily::Custom: return "custom";
    }
    return "unknown";
}

// ---------------------------------------------------------------- MarketModel

double integrate_toward(const ScalarFn& f, double a, double b, double T, double rel_tol) {
    if (b <= a) return 0.0;
    NeumaierSum s;
    double lo = a;
    double d = T - a;
    while (true) {
        d *= 0.5;
        double cut = T - d;
        if (cut >= b || d < 1e-300) break;
        if (cut > lo) {
            s.add(integrate(f, lo, cut, rel_tol));
            lo = cut;
        }
    }
    s.add(integrate(f, lo, b, rel_tol));
    return s.value();
}

MarketModel::MarketModel(double mu, double sigma, HazardModel hazard, ExcessProfile excess)
    : mu_(mu), sigma_(sigma), hazard_(std::move(hazard)), excess_(std::move(excess)) {
    if (!std::isfinite(mu_)) throw DomainError("mu must be finite");
    if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) throw DomainError("sigma must be positive");
    if (excess_.family_ == ExcessFamily::JLSRelaxed) {
        auto tab = std::make_shared<PhiTable>();
        const double T = horizon();
        auto grid = chebyshev_grid(T, 257);
        grid.pop_back();
        tab->t = grid;
        tab->cum.assign(grid.size(), 0.0);
        auto integrand = [this](double u) { return dphi(u); };
        for (size_t i = 1; i < grid.size(); ++i)
            tab->cum[i] = tab->cum[i - 1] + integrate_toward(integrand, grid[i - 1], grid[i], T);
        phi_table_ = tab;
    }
}

MarketModel MarketModel::with_mu(double mu) const { return MarketModel(mu, sigma_, hazard_, excess_); }

MarketModel MarketModel::with_sigma(double sigma) const { return MarketModel(mu_, sigma, hazard_, excess_); }

double MarketModel::phi(double t) const {
    switch (excess_.family_) {
        case ExcessFamily::Zero: return 0.0;
        case ExcessFamily::Constant: return excess_.param_ * t;
        case ExcessFamily::LinearRamp: return 0.5 * excess_.param_ * t * t;
        case ExcessFamily::ConstantJumpSize: return excess_.param_ == 0.0 ? 0.0 : excess_.param_ * hazard_.cumulative(t);
        case ExcessFamily::JLSRelaxed: {
            if (t <= 0.0) return 0.0;
            const auto& tab = *phi_table_;
            auto it = std::upper_bound(tab.t.begin(), tab.t.end(), t);
            size_t i = size_t(it - tab.t.begin()) - 1;
            auto integrand = [this](double u) { return dphi(u); };
            return tab.cum[i] + integrate_toward(integrand, tab.t[i], t, horizon());
        }
        case ExcessFamily::Custom: return excess_.f0_(t);
    }
    return 0.0;
}

double MarketModel::dphi(double t) const {
    switch (excess_.family_) {
        case ExcessFamily::Zero: return 0.0;
        case ExcessFamily::Constant: return excess_.param_;
        case ExcessFamily::LinearRamp: return excess_.param_ * t;
        case ExcessFamily::ConstantJumpSize: return excess_.param_ * hazard_.rate(t);
        case ExcessFamily::JLSRelaxed: return excess_.f0_(t) * hazard_.rate(t);
        case ExcessFamily::Custom: return excess_.f1_(t);
    }
    return 0.0;
}

double MarketModel::d2phi(double t) const {
    switch (excess_.family_) {
        case ExcessFamily::Zero: return 0.0;
        case ExcessFamily::Constant: return 0.0;
        case ExcessFamily::LinearRamp: return excess_.param_;
        case ExcessFamily::ConstantJumpSize: return excess_.param_ * hazard_.rate_derivative(t);
        case ExcessFamily::JLSRelaxed:
            return excess_.f1_(t) * hazard_.rate(t) + excess_.f0_(t) * hazard_.rate_derivative(t);
        case ExcessFamily::Custom: return excess_.f2_(t);
    }
    return 0.0;
}

double MarketModel::delta(double t) const {
    switch (excess_.family_) {
        case ExcessFamily::Zero: return 0.0;
        case ExcessFamily::ConstantJumpSize: return excess_.param_;
        case ExcessFamily::JLSRelaxed: return excess_.f0_(t);
        default: {
            double d1 = dphi(t);
            if (d1 == 0.0) return 0.0;
            return d1 / hazard_.rate(t);
        }
    }
}

double MarketModel::ddelta(double t) const {
    switch (excess_.family_) {
        case ExcessFamily::Zero: return 0.0;
        case ExcessFamily::ConstantJumpSize: return 0.0;
        case ExcessFamily::JLSRelaxed: return excess_.f1_(t);
        default: {
            double k = hazard_.rate(t);
            return (d2phi(t) * k - dphi(t) * hazard_.rate_derivative(t)) / (k * k);
        }
    }
}

double MarketModel::one_minus_delta_kappa(double t) const {
    switch (excess_.family_) {
        case ExcessFamily::ConstantJumpSize:
        case ExcessFamily::JLSRelaxed: return hazard_.rate(t) * (1.0 - delta(t));
        default: return hazard_.rate(t) - dphi(t);
    }
}

double MarketModel::phi_terminal() const {
    const double T = horizon();
    switch (excess_.family_) {
        case ExcessFamily::Zero: return 0.0;
        case ExcessFamily::Constant: return excess_.param_ * T;
        case ExcessFamily::LinearRamp: return 0.5 * excess_.param_ * T * T;
        case ExcessFamily::ConstantJumpSize: return excess_.param_ == 0.0 ? 0.0 : excess_.param_ * hazard_.cumulative(T);
        case ExcessFamily::JLSRelaxed: {
            const auto& tab = *phi_table_;
            auto integrand = [this](double u) { return dphi(u); };
            auto tail = tail_integrate(integrand, tab.t.back(), T);
            if (tail.status == TailStatus::Diverged) return kInf;
            return tab.cum.back() + tail.value;
        }
        case ExcessFamily::Custom: {
            double v = excess_.f0_(T);
            if (std::isfinite(v)) return v;
            return excess_.f0_(T - std::ldexp(T, -50));
        }
    }
    return 0.0;
}

// ----------------------------------------------------------------- operations

double jump_size(const MarketModel& model, double t) {
    double d = model.delta(t);
    if (!(d >= -1e-12 && d <= 1.0 + 1e-12))
        throw ModelError("jump size " + fmt(d) + " outside [0,1] at t=" + fmt(t));
    return std::clamp(d, 0.0, 1.0);
}

ValidationReport validate(const MarketModel& model, int n_check) {
    ValidationReport rep;
    const double T = model.horizon();
    auto fail = [&](double t, std::string what) {
        rep.ok = false;
        rep.violations.push_back({t, std::move(what)});
        if (!rep.first_violation_t || t < *rep.first_violation_t) rep.first_violation_t = t;
    };
    const auto& hz = model.hazard();
    if (hz.family() == HazardFamily::LPPL) {
        const auto& p = hz.lppl_params();
        if (!(std::fabs(p.C) < p.B)) fail(0.0, "LPPL positivity |C'| < B' violated");
    }
    try {
        double p0 = model.phi(0.0);
        if (!(std::fabs(p0) <= 1e-12)) fail(0.0, "phi(0) = " + fmt(p0) + " != 0");
    } catch (const std::exception& e) {
        fail(0.0, std::string("phi(0) not evaluable: ") + e.what());
    }
    for (int i = 0; i < n_check; ++i) {
        double t = T * std::sin(M_PI * i / (2.0 * n_check));
        try {
            double k = model.kappa(t);
            double d1 = model.dphi(t);
            if (!(k > 0.0) || !std::isfinite(k)) fail(t, "kappa^G = " + fmt(k) + " not positive");
            if (!(d1 >= -1e-14) || !std::isfinite(d1)) fail(t, "phi' = " + fmt(d1) + " negative");
            if (k > 0.0 && d1 > k * (1.0 + 1e-12) + 1e-300) fail(t, "phi' = " + fmt(d1) + " exceeds kappa^G = " + fmt(k));
        } catch (const std::exception& e) {
            fail(t, std::string("evaluation failed: ") + e.what());
        }
    }
    return rep;
}

double lppl_log_price(const LpplPrice& p, double t) {
    if (!(p.m > 0.0 && p.m < 1.0))
        throw DomainError("LPPL log-price requires m in (0,1); use the hazard-level LPPL representation instead");
    if (!(t < p.T)) throw DomainError("LPPL log-price requires t < T");
    double s = p.T - t;
    double sm = std::pow(s, p.m);
    return p.A + p.B * sm + p.C * sm * std::cos(p.omega * std::log(s) - p.psi);
}

double ag_transform(const HazardModel& model, const Fn& F, double v, std::optional<double> left_limit) {
    const double T = model.horizon();
    if (!(v >= 0.0) || !(v <= T)) throw DomainError("A^G F evaluated outside [0, T]");
    if (v == T) {
        if (!left_limit) return 0.0;
        return model.atom() > 0.0 ? *left_limit : 0.0;
    }
    return F.f(v) - F.df(v) / model.rate(v);
}

std::string to_string(JumpClass c) {
    switch (c) {
        case JumpClass::IntegrableLocalMartingale: return "IntegrableLocalMartingale";
        case JumpClass::TrueMartingale: return "TrueMartingale";
        case JumpClass::SquareIntegrableMartingale: return "SquareIntegrableMartingale";
        case JumpClass::Indeterminate: return "Indeterminate";
    }
    return "?";
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::TrueMartingale: return "TrueMartingale";
        case Verdict::StrictLocalMartingale: return "StrictLocalMartingale";
        case Verdict::NotLocalMartingaleUnderP: return "NotLocalMartingaleUnderP";
        case Verdict::Indeterminate: return "Indeterminate";
    }
    return "?";
}

JumpClassReport single_jump_class(const HazardModel& model, const Fn& F) {
    JumpClassReport rep;
    const double T = model.horizon();
    auto a_int = integrate_to_horizon(
        [&](double t) { return std::fabs(F.f(t) * model.rate(t) - F.df(t)) * model.survival(t); }, T);
    auto c_int = integrate_to_horizon(
        [&](double t) {
            double d = F.df(t);
            if (d == 0.0) return 0.0;
            return d * d * model.survival(t) / model.rate(t);
        },
        T);
    rep.integrable = a_int.status == TailStatus::Converged;
    rep.square_integrable = c_int.status == TailStatus::Converged;

    // (b): atom, or lim F (1-G) = 0
    enum { Yes, No, Unknown } b = Unknown;
    if (model.atom() > 0.0) {
        b = Yes;
    } else {
        std::vector<double> v;
        for (int k = 5; k <= 45; ++k) {
            double t = T - std::ldexp(T, -k);
            v.push_back(F.f(t) * model.survival(t));
        }
        double scale = 0.0;
        for (double x : v) scale = std::max(scale, std::fabs(x));
        size_t n = v.size();
        double last = std::fabs(v[n - 1]);
        bool settled = std::fabs(v[n - 1] - v[n - 2]) <= 1e-6 * last && std::fabs(v[n - 2] - v[n - 3]) <= 1e-6 * last;
        if (last <= 1e-9 * std::max(1.0, scale))
            b = Yes;
        else if (settled)
            b = No;
        else {
            double r1 = std::fabs(v[n - 1] / v[n - 2]), r2 = std::fabs(v[n - 2] / v[n - 3]);
            if (r1 < 0.95 && r2 < 0.95) b = Yes;
        }
        if (b == No) rep.diagnostic = "lim F(t)(1-G(t)) = " + fmt(v[n - 1]) + " != 0";
    }
    if (a_int.status == TailStatus::Diverged) {
        rep.cls = JumpClass::Indeterminate;
        rep.diagnostic = "int |A^G F| G' diverges: not an integrable local martingale";
        return rep;
    }
    if (!rep.integrable) {
        rep.cls = JumpClass::Indeterminate;
        rep.diagnostic = "could not certify int |A^G F| G' near T";
        return rep;
    }
    rep.true_martingale = b == Yes || rep.square_integrable;
    if (rep.square_integrable)
        rep.cls = JumpClass::SquareIntegrableMartingale;
    else if (rep.true_martingale)
        rep.cls = JumpClass::TrueMartingale;
    else if (b == No)
        rep.cls = JumpClass::IntegrableLocalMartingale;
    else {
        rep.cls = JumpClass::Indeterminate;
        rep.diagnostic = "could not decide lim F(t)(1-G(t)) as t -> T";
    }
    return rep;
}

TailIntegral integrability_defect(const MarketModel& model) {
    const auto& hz = model.hazard();
    const double T = model.horizon();
    auto integrand = [&](double t) { return model.one_minus_delta_kappa(t); };
    if (!hz.integrable()) {
        const auto& ex = model.excess();
        switch (ex.family()) {
            case ExcessFamily::Zero:
            case ExcessFamily::Constant:
            case ExcessFamily::LinearRamp: {
                TailIntegral d;
                d.value = kInf;
                d.status = TailStatus::Diverged;
                return d;
            }
            case ExcessFamily::ConstantJumpSize: {
                TailIntegral d;
                if (ex.parameter() < 1.0) {
                    d.value = kInf;
                    d.status = TailStatus::Diverged;
                } else {
                    d.value = 0.0;
                    d.status = TailStatus::Converged;
                }
                return d;
            }
            default: break;
        }
    }
    return integrate_to_horizon(integrand, T);
}

double limsup_delta(const MarketModel& model) {
    const double T = model.horizon();
    double best = 0.0;
    for (int k = 10; k <= 45; ++k) best = std::max(best, model.delta(T - std::ldexp(T, -k)));
    return best;
}

Classification classify_under_P(const MarketModel& model) {
    Classification c;
    c.atom = model.hazard().atom();
    c.limsup_delta = limsup_delta(model);
    auto d = integrability_defect(model);
    c.defect = d.value;
    c.defect_finite = d.status == TailStatus::Converged;
    if (model.mu() != 0.0) {
        c.verdict = Verdict::NotLocalMartingaleUnderP;
        c.diagnostic = "mu != 0: S has drift under P";
        return c;
    }
    if (c.atom > 0.0) {
        c.verdict = Verdict::TrueMartingale;
        c.diagnostic = "atom at T";
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
    return c;
}

}  // namespace bubble
