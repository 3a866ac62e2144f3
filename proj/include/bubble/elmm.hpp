#pragma once

#include "bubble/hazard_model.hpp"
#include "bubble/solver.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bubble {

// Tilt y with inf (1 + y) > 0 defining the ELMM.
struct TiltFunction {
    ScalarFn y;
    ScalarFn dy;
    std::string label = "custom";
    // Certified lower bound on inf (1 + y); NaN when unknown.
    double lower_bound = std::numeric_limits<double>::quiet_NaN();

    static TiltFunction constant(double c);
    // y = y_hat, continued beyond t_N with phi' y_hat held fixed.
    static TiltFunction from_solution(const Solution& sol);
    static TiltFunction custom(ScalarFn y, ScalarFn dy, std::string label = "custom");
};

struct RelationResiduals {
    double survival = 0.0;  // |(1 - H) - zeta (1 - G)| / (1 - H)
    double hazard = 0.0;    // |kappa^H - kappa^G (1 + y)| / kappa^H
    double ag_zeta = 0.0;   // |A^G zeta - zeta (1 + y)| / (zeta (1 + y))
    double max() const { return std::max({survival, hazard, ag_zeta}); }
};

// Law of gamma under Q together with the density factor zeta.
class TiltedMeasure {
public:
    const MarketModel& model() const { return model_; }
    const TiltFunction& tilt() const { return tilt_; }
    double horizon() const { return model_.horizon(); }

    double log_zeta(double t) const;        // -int_0^t kappa^G y
    double zeta(double t) const;
    double cumulative(double t) const;      // int_0^t kappa^H
    double survival(double t) const;        // 1 - H(t) on [0,T); 0 at T
    double H(double t) const;
    double atom() const { return atom_; }   // Delta H(T)
    // kappa^H as the derivative of the tabulated cumulative.
    double kappa_H(double t) const;
    // int_0^t phi'(1 + y), the pre-crash drift of log S under Q.
    double compensator(double t) const;
    // Generalized inverse of H; T on the atom.
    double inverse(double u) const;

    RelationResiduals residuals(double t) const;
    const std::vector<double>& grid() const { return table_->t; }
    std::string diagnostic;

private:
    friend TiltedMeasure build_tilted_measure(const MarketModel&, const TiltFunction&, std::vector<double>);
    TiltedMeasure(MarketModel m, TiltFunction y) : model_(std::move(m)), tilt_(std::move(y)) {}

    struct Table {
        std::vector<double> t, ly, lh, comp;
    };
    double from_table(const std::vector<double>& col, const ScalarFn& f, double t) const;

    MarketModel model_;
    TiltFunction tilt_;
    std::shared_ptr<const Table> table_;
    ScalarFn fy_, fh_, fc_;
    double lh_end_ = 0.0;  // int_0^{T-} kappa^H, inf when nonintegrable
    double atom_ = 0.0;
};

// Default grid: 256 Chebyshev nodes on [0, T).
std::vector<double> tilt_grid(double T);

// Throws ModelError naming the violated condition when the tilt is rejected.
TiltedMeasure build_tilted_measure(const MarketModel& model, const TiltFunction& tilt,
                                   std::vector<double> grid = {});

struct TiltBounds {
    double eps;
    double C;
};

// eps <= 1 + y <= C + C/phi' 1{kappa^G < C phi'} on refining grids, C = 1, 2, 4, ...
std::optional<TiltBounds> verify_tilt_bounds(const MarketModel& model, const TiltFunction& tilt,
                                             double C_max = 65536.0);

Classification classify_under_Q(const MarketModel& model, const TiltFunction& tilt);

// Five-point derivative of f at v, one-sided with step h/4 when v < 2h. h is
// rounded down to a power of two so the stencil nodes are exact.
double derivative5(const ScalarFn& f, double v, double h);

}  // namespace bubble
