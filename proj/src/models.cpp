#include "perclab/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace perclab {

ProfileSpec ProfileSpec::long_range(double p, double delta) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("profile p must be in (0,1]");
    if (!(delta > 1.0)) throw std::invalid_argument("long_range requires delta > 1");
    return ProfileSpec{Kind::long_range, p, delta};
}

ProfileSpec ProfileSpec::short_range(double p) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("profile p must be in (0,1]");
    return ProfileSpec{Kind::short_range, p, 0.0};
}

KernelSpec KernelSpec::make(double gamma, double gamma_prime) {
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw std::invalid_argument("kernel gamma must be in [0,1)");
    if (!(gamma_prime >= 0.0 && gamma_prime < 2.0 - gamma))
        throw std::invalid_argument("kernel gamma' must be in [0, 2-gamma)");
    return KernelSpec{gamma, gamma_prime};
}

ModelSpec ModelSpec::wdrcm(int dim, ProfileSpec profile, KernelSpec kernel, double beta) {
    if (dim < 1) throw std::invalid_argument("dimension must be >= 1");
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
    ModelSpec m;
    m.family = Family::wdrcm;
    m.dim = dim;
    m.profile = profile;
    m.kernel = kernel;
    m.beta = beta;
    return m;
}

ModelSpec ModelSpec::interference(int dim, double gamma, double delta, double xi,
                                  double lambda_env) {
    if (dim < 1) throw std::invalid_argument("dimension must be >= 1");
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw std::invalid_argument("interference gamma must be in [0,1)");
    if (!(delta > 2.0)) throw std::invalid_argument("interference requires delta > 2");
    if (!(xi >= 0.0)) throw std::invalid_argument("interference xi must be >= 0");
    if (!(lambda_env > 0.0)) throw std::invalid_argument("lambda_env must be > 0");
    ModelSpec m;
    m.family = Family::interference;
    m.dim = dim;
    m.gamma = gamma;
    m.delta = delta;
    m.xi = xi;
    m.lambda_env = lambda_env;
    return m;
}

bool ModelSpec::mark_dependent() const {
    if (family == Family::interference) return true;
    return kernel.gamma > 0.0 || kernel.gamma_prime > 0.0;
}

std::string ModelSpec::family_name() const {
    return family == Family::wdrcm ? "wdrcm" : "interference";
}

double profile_eval(const ProfileSpec& profile, double x) {
    if (profile.kind == ProfileSpec::Kind::short_range)
        return (x >= 0.0 && x <= 1.0) ? profile.p : 0.0;
    if (x <= 0.0) return profile.p;
    return profile.p * std::min(1.0, std::pow(x, -profile.delta));
}

double kernel_eval(const KernelSpec& kernel, double s, double t) {
    const double mn = std::min(s, t);
    const double mx = std::max(s, t);
    return std::pow(mn, kernel.gamma) * std::pow(mx, kernel.gamma_prime);
}

double poisson_reciprocal_mean(double m) {
    if (!(m >= 0.0)) throw std::invalid_argument("poisson mean must be >= 0");
    if (m < 1e-12) return 1.0 - 0.5 * m;
    return -std::expm1(-m) / m;
}

double phi(const ModelSpec& model, double s, double t, double r) {
    if (!(s > 0.0 && s < 1.0 && t > 0.0 && t < 1.0))
        throw std::invalid_argument("marks must lie in (0,1)");
    if (!(r >= 0.0)) throw std::invalid_argument("distance power must be >= 0");
    if (model.family == ModelSpec::Family::wdrcm)
        return profile_eval(model.profile, kernel_eval(model.kernel, s, t) * r / model.beta);

    const double u = std::min(s, t);
    const double numer =
        r <= 0.0 ? 1.0
                 : std::min(1.0, std::pow(u, -model.gamma * model.delta) *
                                     std::pow(r, -model.delta));
    const double mean =
        model.lambda_env * unit_ball_volume(model.dim) * std::pow(u, -model.xi);
    return numer * poisson_reciprocal_mean(mean);
}

std::int64_t interference_count(const PointCloud& env, std::span<const double> loc,
                                double mark, double xi) {
    // Ball |z - loc|^d <= mark^-xi, i.e. radius mark^(-xi/d).
    const double radius = std::pow(mark, -xi / env.dim());
    std::int64_t n = 0;
    for (int i : env.closed_ball_indices(loc, radius)) {
        if (dist_sq(env.location(i), loc) == 0.0 && env.mark(i) == mark) continue;
        ++n;
    }
    return n;
}

double conn_prob(const ModelSpec& model, const MarkedPoint& x, const MarkedPoint& y,
                 const PointCloud& env) {
    const int d = static_cast<int>(x.location.size());
    if (static_cast<int>(y.location.size()) != d)
        throw std::invalid_argument("dimension mismatch between pair members");
    const double r = dist_pow_d(x.location, y.location);
    if (model.family == ModelSpec::Family::wdrcm)
        return phi(model, x.mark, y.mark, r);

    // Smaller mark selects the numerator and whose interference ball counts;
    // ties resolve to the branch using x.
    const MarkedPoint& w = (y.mark < x.mark) ? y : x;
    const double numer =
        r <= 0.0 ? 1.0
                 : std::min(1.0, std::pow(w.mark, -model.gamma * model.delta) *
                                     std::pow(r, -model.delta));
    std::int64_t n = interference_count(env, w.location, w.mark, model.xi);
    // Exclude the partner if it were ever present in env.
    const MarkedPoint& other = (&w == &x) ? y : x;
    const double rad = std::pow(w.mark, -model.xi / d);
    if (dist_sq(other.location, w.location) <= rad * rad) {
        for (int i : env.closed_ball_indices(w.location, rad)) {
            if (dist_sq(env.location(i), other.location) == 0.0 &&
                env.mark(i) == other.mark) {
                --n;
                break;
            }
        }
    }
    return numer / (1.0 + static_cast<double>(n));
}

}  // namespace perclab
