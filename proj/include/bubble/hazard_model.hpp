#pragma once

#include "bubble/curve.hpp"
#include "bubble/quadrature.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bubble {

enum class HazardFamily { LPPL, ExponentialCutoff, UniformOnHorizon, Tabulated };

// kappa(t) = B|T-t|^(m-1) + C|T-t|^(m-1) cos(omega log(T-t) - psi)
struct LpplHazard {
    double B = 1.0;
    double C = 0.0;
    double m = 0.5;
    double omega = 0.0;
    double psi = 0.0;
};

// Law of the crash time gamma on (0, T], possibly with an atom at T.
class HazardModel {
public:
    static HazardModel lppl(double T, const LpplHazard& p);
    static HazardModel exponential_cutoff(double T, double rate);
    static HazardModel uniform(double T);
    // Knots t_0 = 0 < ... < t_K = T with G(t_0) = 0 and G(t_K) < 1.
    static HazardModel tabulated(std::vector<double> t, std::vector<double> G);

    HazardFamily family() const { return family_; }
    std::string family_name() const;
    double horizon() const { return T_; }
    const LpplHazard& lppl_params() const { return lppl_; }
    double cutoff_rate() const { return rate_; }

    double rate(double t) const;             // kappa^G on [0,T)
    double rate_derivative(double t) const;  // d kappa^G / dt
    double cumulative(double t) const;       // int_0^t kappa^G, +inf at T when nonintegrable
    double survival(double t) const;         // 1 - G(t) on [0,T); 0 at T
    double cdf(double t) const;
    double density(double t) const;  // G'(t)
    double atom() const;             // Delta G(T)
    bool integrable() const;         // int_0^T kappa^G < inf
    // Smallest t with cumulative(t) >= x; T when x >= cumulative(T-).
    double inverse_cumulative(double x) const;

private:
    void check_open(double t) const;
    double lppl_primitive(double s) const;

    HazardFamily family_ = HazardFamily::ExponentialCutoff;
    double T_ = 1.0;
    double rate_ = 1.0;
    LpplHazard lppl_{};
    Curve log_survival_;  // -log(1-G) for Tabulated
};

double hazard_rate(const HazardModel& model, double t);

struct SurvivalAtom {
    double survival;
    double atom;
};
SurvivalAtom survival_and_atom(const HazardModel& model, double t);

enum class ExcessFamily { Zero, Constant, LinearRamp, ConstantJumpSize, JLSRelaxed, Custom };

// Pre-crash excess return phi. Profiles tied to kappa^G are resolved inside
// MarketModel.
class ExcessProfile {
public:
    static ExcessProfile zero();
    static ExcessProfile constant(double alpha);
    static ExcessProfile linear_ramp(double beta);
    static ExcessProfile constant_jump_size(double delta0);
    // phi' = delta(t) kappa^G(t)
    static ExcessProfile jls_relaxed(ScalarFn delta, ScalarFn ddelta, std::string label = "jls_relaxed");
    // delta(t) = sum_k c_k t^k
    static ExcessProfile jls_polynomial(std::vector<double> coeffs);
    static ExcessProfile custom(ScalarFn phi, ScalarFn dphi, ScalarFn d2phi, std::string label = "custom");

    ExcessFamily family() const { return family_; }
    std::string family_name() const;
    const std::string& label() const { return label_; }
    double parameter() const { return param_; }
    const std::vector<double>& coefficients() const { return coeffs_; }

private:
    friend class MarketModel;
    ExcessFamily family_ = ExcessFamily::Zero;
    double param_ = 0.0;
    std::vector<double> coeffs_;
    ScalarFn f0_, f1_, f2_;
    std::string label_ = "zero";
};

class MarketModel {
public:
    MarketModel(double mu, double sigma, HazardModel hazard, ExcessProfile excess);

    double mu() const { return mu_; }
    double sigma() const { return sigma_; }
    double horizon() const { return hazard_.horizon(); }
    const HazardModel& hazard() const { return hazard_; }
    const ExcessProfile& excess() const { return excess_; }

    MarketModel with_mu(double mu) const;
    MarketModel with_sigma(double sigma) const;

    double kappa(double t) const { return hazard_.rate(t); }
    double dkappa(double t) const { return hazard_.rate_derivative(t); }
    double phi(double t) const;
    double dphi(double t) const;
    double d2phi(double t) const;
    double delta(double t) const;   // phi'/kappa with 0/0 = 0
    double ddelta(double t) const;  // d delta / dt
    double phi_terminal() const;    // phi(T-), possibly +inf
    double one_minus_delta_kappa(double t) const;  // kappa - phi', evaluated stably

private:
    double mu_, sigma_;
    HazardModel hazard_;
    ExcessProfile excess_;
    struct PhiTable {
        std::vector<double> t, cum;
    };
    std::shared_ptr<const PhiTable> phi_table_;
};

// Integral of f over [a,b] with b <= T, split at dyadic distances from T.
double integrate_toward(const ScalarFn& f, double a, double b, double T, double rel_tol = 1e-13);

struct Violation {
    double t;
    std::string condition;
};

struct ValidationReport {
    bool ok = true;
    std::vector<Violation> violations;
    std::optional<double> first_violation_t;
};

// Samples n_check points clustered toward T.
ValidationReport validate(const MarketModel& model, int n_check = 1024);

double jump_size(const MarketModel& model, double t);

struct LpplPrice {
    double A = 0.0, B = 1.0, C = 0.0, m = 0.5, omega = 0.0, psi = 0.0, T = 1.0;
};
double lppl_log_price(const LpplPrice& p, double t);

// C^1 function with its derivative.
struct Fn {
    ScalarFn f;
    ScalarFn df;
};

// A^G F(v); at v = T the caller passes F(T-) (nullopt: limit does not exist).
double ag_transform(const HazardModel& model, const Fn& F, double v, std::optional<double> left_limit = std::nullopt);

enum class JumpClass { IntegrableLocalMartingale, TrueMartingale, SquareIntegrableMartingale, Indeterminate };
std::string to_string(JumpClass c);

struct JumpClassReport {
    JumpClass cls = JumpClass::Indeterminate;
    bool integrable = false;         // int |A^G F| G' < inf
    bool true_martingale = false;
    bool square_integrable = false;  // int (F'/kappa)^2 G' < inf
    std::string diagnostic;
};
JumpClassReport single_jump_class(const HazardModel& model, const Fn& F);

enum class Verdict { TrueMartingale, StrictLocalMartingale, NotLocalMartingaleUnderP, Indeterminate };
std::string to_string(Verdict v);

struct Classification {
    Verdict verdict = Verdict::Indeterminate;
    double atom = 0.0;
    double defect = 0.0;  // int_0^T (kappa^G - phi')
    bool defect_finite = false;
    double limsup_delta = 0.0;
    std::string diagnostic;
};

// D = int_0^T (kappa^G - phi'); analytic for closed-form families.
TailIntegral integrability_defect(const MarketModel& model);
// max of delta(T - 2^-k T), k = 10..45
double limsup_delta(const MarketModel& model);

Classification classify_under_P(const MarketModel& model);

}  // namespace bubble
