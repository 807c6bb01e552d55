#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "perclab/models.hpp"

namespace perclab {

// Closed-form classification of a connection model: whether the effective
// decay exponent exceeds 2, its value where a formula exists, the tail
// exponent mu_bar and the mixing index zeta. Exact case-boundary equalities
// are refused rather than guessed.
struct Classification {
    enum class Status { ok, no_closed_form };
    Status status = Status::ok;
    std::string reason;
    std::optional<bool> deff_gt2;
    std::optional<double> deff_value;  // may be +infinity
    std::optional<double> mu_bar;      // may be +infinity; nullopt = not applicable
    std::optional<double> zeta;        // may be +infinity; nullopt = no guarantee
};

Classification analytic_classify(const ModelSpec& model);

// Mark integral I(n, a) = int_a^1 int_a^1 phi(s, t, n) ds dt. The inner
// integral is closed-form for the wdrcm family; the outer one is adaptive
// in log space with explicit splits at the clip curve, so the value stays
// accurate down to magnitudes around 1e-40. Relative error target 1e-6.
double I_integral(const ModelSpec& model, double n, double a);

enum class PsiSign { minus, plus };

struct NGrid {
    double n_min = 1e4;
    double n_max = 1e8;
    int points = 9;
};

struct SlopeFit {
    double slope = 0.0;
    double se = 0.0;
};

// Log-log slope of I(n, n^{-1-mu}) (sign=minus, estimating psi^-) or
// I(n, n^{-1+mu}) (sign=plus, estimating psi^+) over a geometric n grid.
SlopeFit psi_estimate(const ModelSpec& model, double mu, PsiSign sign, const NGrid& grid);

struct PsiPoint {
    double mu = 0.0;
    double slope = 0.0;
    double se = 0.0;
};

struct DeffReport {
    std::vector<PsiPoint> psi_minus, psi_plus;
    double deff_minus_hat = 0.0;  // mu -> 0 extrapolation of psi^-
    double deff_plus_hat = 0.0;   // mu -> 0 extrapolation of psi^+
    double minus_se = 0.0;
    double plus_se = 0.0;
    std::optional<Classification> analytic;
};

// Numeric delta_eff: psi slopes along a decreasing mu sequence, linearly
// extrapolated to mu = 0 for both signs.
DeffReport deff_estimate(const ModelSpec& model, const std::vector<double>& mu_sequence,
                         const NGrid& grid);

struct PhaseAxis {
    std::string name;  // parameter varied: gamma, gamma_prime, delta, xi
    double min = 0.0;
    double max = 1.0;
    int steps = 10;
};

struct PhaseCell {
    double p1 = 0.0, p2 = 0.0;
    Classification cls;
};

struct PhaseGrid {
    PhaseAxis axis1, axis2;
    std::vector<PhaseCell> cells;  // row-major, axis1 outer
    // Sampled delta_eff = 2 boundary curve (interference family).
    std::vector<std::pair<double, double>> boundary;
};

// Classification verdicts over a 2-parameter grid. `fixed` holds the
// remaining numeric parameters; wdrcm grids additionally take the profile
// via fixed["p"], fixed["beta"] and fixed["delta"] (absent delta = the
// indicator profile).
PhaseGrid phase_grid(ModelSpec::Family family, const PhaseAxis& axis1,
                     const PhaseAxis& axis2, const std::map<std::string, double>& fixed,
                     int dim);

}  // namespace perclab
