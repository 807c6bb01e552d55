#include "perclab/deff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "perclab/errors.hpp"

namespace perclab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// (v^c - u^c) / c, stable for small |c|; the c = 0 limit is log(v/u).
double power_diff(double u, double v, double c) {
    if (c == 0.0) return std::log(v / u);
    return std::pow(u, c) * std::expm1(c * (std::log(v) - std::log(u))) / c;
}

// ---------------------------------------------------------------- quadrature

template <typename F>
double simpson(const F& f, double a, double b) {
    return (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
}

template <typename F>
double adapt_rec(const F& f, double a, double b, double whole, double eps, int depth,
                 double& err_out) {
    const double m = 0.5 * (a + b);
    const double left = simpson(f, a, m);
    const double right = simpson(f, m, b);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * eps) {
        err_out += std::abs(delta) / 15.0;
        return left + right + delta / 15.0;
    }
    return adapt_rec(f, a, m, left, 0.5 * eps, depth - 1, err_out) +
           adapt_rec(f, m, b, right, 0.5 * eps, depth - 1, err_out);
}

// Adaptive Simpson with a relative error target over a list of pieces.
template <typename F>
double integrate_pieces(const F& f, const std::vector<double>& knots, double rel_tol,
                        double& rel_err_out) {
    double coarse = 0.0;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k)
        coarse += std::abs(simpson(f, knots[k], knots[k + 1]));
    const double scale = std::max(coarse, std::numeric_limits<double>::min());

    double total = 0.0, err = 0.0;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const double eps = rel_tol * scale;
        total += adapt_rec(f, knots[k], knots[k + 1], simpson(f, knots[k], knots[k + 1]),
                           eps, 40, err);
    }
    rel_err_out = total != 0.0 ? err / std::abs(total) : 0.0;
    return total;
}

// ------------------------------------------------------- wdrcm mark integral

// Inner integral h(s) = int_s^1 min(1, A(s) t^-b) dt for the long-range
// profile, with A(s) = (beta / n)^delta * s^{-gamma delta} and b = gamma'
// delta. Everything runs off log A to survive n ~ 1e8.
struct WdrcmInner {
    double p, delta, gd, gpd, ln_beta_n_delta;  // delta*(ln beta - ln n)
    bool indicator;                              // short-range profile

    double operator()(double s) const {
        const double ln_s = std::log(s);
        if (!indicator) {
            const double lnA = ln_beta_n_delta - gd * ln_s;
            const double b = gpd;
            if (b == 0.0) {
                const double v = lnA >= 0.0 ? 1.0 : std::exp(lnA);
                return p * (1.0 - s) * v;
            }
            const double ln_tstar = lnA / b;
            if (ln_tstar >= 0.0) return p * (1.0 - s);            // clipped throughout
            if (ln_tstar <= ln_s)                                  // never clipped
                return p * std::exp(lnA) * power_diff(s, 1.0, 1.0 - b);
            const double tstar = std::exp(ln_tstar);
            return p * ((tstar - s) + std::exp(lnA) * power_diff(tstar, 1.0, 1.0 - b));
        }
        // Indicator: phi = p 1{ s^gamma t^gamma' n <= beta }, s <= t.
        const double lnC = ln_beta_n_delta / delta - (gd / delta) * ln_s;  // ln(C s^-gamma)
        if (gpd == 0.0) return lnC >= 0.0 ? p * (1.0 - s) : 0.0;
        const double ln_tmax = lnC / (gpd / delta);
        if (ln_tmax >= 0.0) return p * (1.0 - s);
        const double tmax = std::exp(ln_tmax);
        return tmax > s ? p * (tmax - s) : 0.0;
    }
};

double wdrcm_integral(const ModelSpec& m, double n, double a, double& rel_err) {
    const double delta = m.profile.kind == ProfileSpec::Kind::long_range
                             ? m.profile.delta
                             : 1.0;  // only enters via ratios below for the indicator
    WdrcmInner inner;
    inner.p = m.profile.p;
    inner.indicator = m.profile.kind == ProfileSpec::Kind::short_range;
    inner.delta = inner.indicator ? 1.0 : delta;
    inner.gd = m.kernel.gamma * inner.delta;
    inner.gpd = m.kernel.gamma_prime * inner.delta;
    inner.ln_beta_n_delta = inner.delta * (std::log(m.beta) - std::log(n));

    // Outer kinks: t*(s) = s and t*(s) = 1.
    std::vector<double> knots{std::log(a), 0.0};
    const double gsum = m.kernel.gamma + m.kernel.gamma_prime;
    const double ln_beta_n = std::log(m.beta) - std::log(n);
    if (gsum > 0.0) knots.push_back(ln_beta_n / gsum);
    if (m.kernel.gamma > 0.0) knots.push_back(ln_beta_n / m.kernel.gamma);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::remove_if(knots.begin(), knots.end(),
                               [&](double y) { return y < std::log(a) || y > 0.0; }),
                knots.end());
    knots.insert(knots.begin(), std::log(a));
    knots.push_back(0.0);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

    const auto f = [&](double y) {
        const double s = std::exp(y);
        return inner(s) * s;  // log substitution
    };
    return 2.0 * integrate_pieces(f, knots, 1e-10, rel_err);
}

// ------------------------------------------------ interference mark integral

double interference_integral(const ModelSpec& m, double n, double a, double& rel_err) {
    const double gd = m.gamma * m.delta;
    const double coef = m.lambda_env * unit_ball_volume(m.dim);
    const auto f = [&](double y) {
        const double u = std::exp(y);
        const double lnnum = -gd * std::log(u) - m.delta * std::log(n);
        const double numer = lnnum >= 0.0 ? 1.0 : std::exp(lnnum);
        const double mean = coef * std::pow(u, -m.xi);
        return numer * poisson_reciprocal_mean(mean) * (1.0 - u) * u;
    };
    std::vector<double> knots{std::log(a), 0.0};
    if (m.gamma > 0.0) {
        const double ln_ustar = -std::log(n) / m.gamma;  // clip boundary
        if (ln_ustar > std::log(a) && ln_ustar < 0.0) knots.push_back(ln_ustar);
    }
    if (m.xi > 0.0) {
        const double ln_um = std::log(coef) / m.xi;  // mean ~ 1 crossover
        if (ln_um > std::log(a) && ln_um < 0.0) knots.push_back(ln_um);
    }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    return 2.0 * integrate_pieces(f, knots, 1e-10, rel_err);
}

}  // namespace

double I_integral(const ModelSpec& model, double n, double a) {
    if (!(n > 1.0)) throw std::invalid_argument("I_integral requires n > 1");
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("I_integral requires a in (0,1)");
    double rel_err = 0.0;
    const double value = model.family == ModelSpec::Family::wdrcm
                             ? wdrcm_integral(model, n, a, rel_err)
                             : interference_integral(model, n, a, rel_err);
    if (!(rel_err <= 1e-6))
        throw EstimationError("quadrature did not reach the 1e-6 target, achieved " +
                              std::to_string(rel_err));
    return value;
}

namespace {

struct LineFit {
    double intercept = 0.0, slope = 0.0, se_intercept = 0.0, se_slope = 0.0;
};

LineFit ols(const std::vector<double>& x, const std::vector<double>& y) {
    const int n = static_cast<int>(x.size());
    double sx = 0.0, sy = 0.0;
    for (int i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        ssr += r * r;
    }
    const double sigma2 = n > 2 ? ssr / (n - 2) : 0.0;
    f.se_slope = std::sqrt(sigma2 / sxx);
    f.se_intercept = std::sqrt(sigma2 * (1.0 / n + mx * mx / sxx));
    return f;
}

}  // namespace

SlopeFit psi_estimate(const ModelSpec& model, double mu, PsiSign sign, const NGrid& grid) {
    if (!(mu > 0.0)) throw std::invalid_argument("mu must be > 0");
    if (sign == PsiSign::plus && !(mu < 1.0))
        throw std::invalid_argument("psi^+ needs mu < 1");
    if (grid.points < 6 || !(grid.n_max >= 1e6) || !(grid.n_min > 1.0))
        throw std::invalid_argument("n grid must be geometric with >= 6 points up to >= 1e6");

    const double cutoff_exp = sign == PsiSign::minus ? -1.0 - mu : -1.0 + mu;
    const double ratio = std::pow(grid.n_max / grid.n_min, 1.0 / (grid.points - 1));
    std::vector<double> xs, ys;
    for (int i = 0; i < grid.points; ++i) {
        const double n = grid.n_min * std::pow(ratio, i);
        const double a = std::pow(n, cutoff_exp);
        const double value = I_integral(model, n, a);
        if (!(value > 0.0))
            throw EstimationError("mark integral vanished; log-log fit undefined");
        xs.push_back(std::log(n));
        ys.push_back(-std::log(value));
    }
    const LineFit f = ols(xs, ys);
    return SlopeFit{f.slope, f.se_slope};
}

DeffReport deff_estimate(const ModelSpec& model, const std::vector<double>& mu_sequence,
                         const NGrid& grid) {
    if (mu_sequence.size() < 3)
        throw std::invalid_argument("mu sequence needs at least 3 values");
    for (std::size_t i = 0; i + 1 < mu_sequence.size(); ++i)
        if (!(mu_sequence[i] > mu_sequence[i + 1]) || !(mu_sequence.back() > 0.0))
            throw std::invalid_argument("mu sequence must decrease strictly toward 0");

    DeffReport report;
    std::vector<double> mus, minus_slopes, plus_slopes;
    for (double mu : mu_sequence) {
        const SlopeFit m = psi_estimate(model, mu, PsiSign::minus, grid);
        const SlopeFit p = psi_estimate(model, mu, PsiSign::plus, grid);
        report.psi_minus.push_back({mu, m.slope, m.se});
        report.psi_plus.push_back({mu, p.slope, p.se});
        mus.push_back(mu);
        minus_slopes.push_back(m.slope);
        plus_slopes.push_back(p.slope);
    }
    const LineFit fm = ols(mus, minus_slopes);
    const LineFit fp = ols(mus, plus_slopes);
    report.deff_minus_hat = fm.intercept;
    report.deff_plus_hat = fp.intercept;
    report.minus_se = fm.se_intercept;
    report.plus_se = fp.se_intercept;
    const Classification cls = analytic_classify(model);
    if (cls.status == Classification::Status::ok) report.analytic = cls;
    return report;
}

namespace {

Classification refuse(const std::string& why) {
    Classification c;
    c.status = Classification::Status::no_closed_form;
    c.reason = why;
    return c;
}

std::optional<double> positive_or_none(double v) {
    if (v > 0.0) return v;
    return std::nullopt;
}

Classification classify_wdrcm_long(const KernelSpec& k, double delta) {
    const double g = k.gamma, gp = k.gamma_prime;
    if (delta == 2.0) return refuse("delta == 2 sits on the delta_eff = 2 boundary");
    if (g == 1.0 / delta || gp == 1.0 / delta)
        return refuse("gamma or gamma' equals 1/delta (case boundary)");
    if (gp > 1.0 / delta && g == 2.0 / delta - gp)
        return refuse("gamma equals 2/delta - gamma' (case boundary)");
    if (g == 1.0 - 1.0 / delta)
        return refuse("gamma equals 1 - 1/delta (delta_eff = 2 boundary)");

    Classification c;
    c.zeta = kInf;
    c.deff_gt2 = delta > 2.0 && g < 1.0 - 1.0 / delta && gp < 1.0 - g;

    const bool case_a = (gp < 1.0 / delta && g < 1.0 / delta) ||
                        (gp > 1.0 / delta && g < 2.0 / delta - gp);
    if (case_a) {
        c.deff_value = delta;
        c.mu_bar = positive_or_none(delta - 2.0);
        return c;
    }
    if (gp < 1.0 / delta) {  // case B: gamma > 1/delta
        c.deff_value = 1.0 + delta - g * delta;
        c.mu_bar = positive_or_none((delta - 1.0) / (g * delta) - 1.0);
        return c;
    }
    // case C: gamma' > 1/delta, gamma > 2/delta - gamma'. The closed form
    // needs gamma + gamma' <= 1; beyond that lambda_c = 0 and no formula
    // is claimed.
    if (g + gp < 1.0) {
        c.deff_value = 2.0 + delta - delta * (g + gp);
        c.mu_bar = positive_or_none(delta * (1.0 - g - gp) / (delta * (g + gp) - 1.0));
    } else if (g + gp == 1.0) {
        c.deff_value = 2.0;
        c.mu_bar = std::nullopt;
    }
    return c;
}

Classification classify_wdrcm_short(const KernelSpec& k) {
    const double g = k.gamma, gp = k.gamma_prime;
    Classification c;
    c.zeta = kInf;
    if (g == 0.0 && gp == 0.0) {
        c.deff_gt2 = true;
        c.deff_value = kInf;
        c.mu_bar = kInf;
        return c;
    }
    if (g == 0.0) {
        if (gp == 1.0) return refuse("gamma' == 1 (delta_eff = 2 boundary)");
        c.deff_gt2 = gp < 1.0;
        if (gp < 1.0) {
            c.deff_value = kInf;
            c.mu_bar = kInf;
        }
        return c;
    }
    if (g + gp == 1.0) return refuse("gamma + gamma' == 1 (delta_eff = 2 boundary)");
    c.deff_gt2 = g + gp < 1.0;
    if (g + gp < 1.0) {
        c.deff_value = kInf;
        c.mu_bar = positive_or_none((1.0 - g - gp) / (g + gp));
    }
    return c;
}

Classification classify_interference(const ModelSpec& m) {
    const double g = m.gamma, delta = m.delta, xi = m.xi;
    if (g == (1.0 + xi) / delta)
        return refuse("gamma equals (1+xi)/delta (case boundary)");
    if (g == (delta + xi - 1.0) / delta)
        return refuse("gamma equals (delta+xi-1)/delta (delta_eff = 2 boundary)");

    Classification c;
    c.deff_gt2 = g < (delta + xi - 1.0) / delta;
    if (g < (1.0 + xi) / delta) {
        c.deff_value = delta;
        c.mu_bar = positive_or_none(delta - 2.0);
    } else {
        c.deff_value = delta + 1.0 - g * delta + xi;
        c.mu_bar = positive_or_none((delta * (1.0 - g) + xi - 1.0) / (g * delta - xi));
    }
    if (xi == 0.0)
        c.zeta = kInf;
    else if (xi < 1.0)
        c.zeta = 1.0 / xi - 1.0;
    return c;
}

}  // namespace

Classification analytic_classify(const ModelSpec& model) {
    if (model.family == ModelSpec::Family::interference)
        return classify_interference(model);
    if (model.profile.kind == ProfileSpec::Kind::short_range)
        return classify_wdrcm_short(model.kernel);
    return classify_wdrcm_long(model.kernel, model.profile.delta);
}

PhaseGrid phase_grid(ModelSpec::Family family, const PhaseAxis& axis1,
                     const PhaseAxis& axis2, const std::map<std::string, double>& fixed,
                     int dim) {
    if (axis1.steps < 1 || axis2.steps < 1)
        throw std::invalid_argument("phase axes need at least one step");

    const auto value_at = [](const PhaseAxis& ax, int i) {
        if (ax.steps == 1) return ax.min;
        return ax.min + (ax.max - ax.min) * i / (ax.steps - 1);
    };
    const auto get = [&fixed](const std::string& name,
                              const std::map<std::string, double>& axes_vals) {
        auto it = axes_vals.find(name);
        if (it != axes_vals.end()) return std::optional<double>(it->second);
        auto jt = fixed.find(name);
        if (jt != fixed.end()) return std::optional<double>(jt->second);
        return std::optional<double>();
    };

    PhaseGrid out;
    out.axis1 = axis1;
    out.axis2 = axis2;
    for (int i = 0; i < axis1.steps; ++i) {
        for (int j = 0; j < axis2.steps; ++j) {
            std::map<std::string, double> vals;
            vals[axis1.name] = value_at(axis1, i);
            vals[axis2.name] = value_at(axis2, j);
            PhaseCell cell;
            cell.p1 = vals[axis1.name];
            cell.p2 = vals[axis2.name];
            try {
                ModelSpec m;
                if (family == ModelSpec::Family::wdrcm) {
                    const auto gamma = get("gamma", vals), gp = get("gamma_prime", vals);
                    const auto delta = get("delta", vals);
                    const auto p = get("p", vals), beta = get("beta", vals);
                    const KernelSpec kernel =
                        KernelSpec::make(gamma.value_or(0.0), gp.value_or(0.0));
                    const ProfileSpec profile =
                        delta ? ProfileSpec::long_range(p.value_or(1.0), *delta)
                              : ProfileSpec::short_range(p.value_or(1.0));
                    m = ModelSpec::wdrcm(dim, profile, kernel, beta.value_or(1.0));
                } else {
                    m = ModelSpec::interference(
                        dim, get("gamma", vals).value_or(0.0),
                        get("delta", vals).value_or(2.5), get("xi", vals).value_or(0.0),
                        get("lambda_env", vals).value_or(1.0));
                }
                cell.cls = analytic_classify(m);
            } catch (const std::invalid_argument& e) {
                cell.cls.status = Classification::Status::no_closed_form;
                cell.cls.reason = e.what();
            }
            out.cells.push_back(std::move(cell));
        }
    }

    if (family == ModelSpec::Family::interference) {
        // delta_eff = 2 curve gamma = (delta + xi - 1) / delta along axis1.
        const auto curve_gamma = [&](double v1) {
            const double delta = axis1.name == "delta"  ? v1
                                 : fixed.count("delta") ? fixed.at("delta")
                                                        : 0.0;
            const double xi = axis1.name == "xi"  ? v1
                              : fixed.count("xi") ? fixed.at("xi")
                                                  : 0.0;
            return delta > 0.0 ? (delta + xi - 1.0) / delta : 0.0;
        };
        if (axis1.name != "gamma" && (axis2.name == "gamma")) {
            for (int i = 0; i < axis1.steps; ++i) {
                const double v1 = value_at(axis1, i);
                out.boundary.emplace_back(v1, curve_gamma(v1));
            }
        } else if (axis2.name != "gamma" && axis1.name == "gamma") {
            for (int j = 0; j < axis2.steps; ++j) {
                const double v2 = value_at(axis2, j);
                const double delta = axis2.name == "delta"  ? v2
                                     : fixed.count("delta") ? fixed.at("delta")
                                                            : 0.0;
                const double xi = axis2.name == "xi"  ? v2
                                  : fixed.count("xi") ? fixed.at("xi")
                                                      : 0.0;
                if (delta > 0.0) out.boundary.emplace_back((delta + xi - 1.0) / delta, v2);
            }
        }
    }
    return out;
}

}  // namespace perclab
