#pragma once

#include <string>

#include "perclab/point_cloud.hpp"

namespace perclab {

// Distance profile: long_range is rho(x) = p * (1 ^ x^-delta), short_range
// is rho(x) = p * 1{0 <= x <= 1}.
struct ProfileSpec {
    enum class Kind { long_range, short_range };
    Kind kind = Kind::long_range;
    double p = 1.0;
    double delta = 2.0;  // long_range only, > 1

    static ProfileSpec long_range(double p, double delta);
    static ProfileSpec short_range(double p);
};

// Interpolation kernel g(s,t) = (s^t)^gamma * (svt)^gamma'.
struct KernelSpec {
    double gamma = 0.0;        // [0,1)
    double gamma_prime = 0.0;  // [0, 2-gamma)

    static KernelSpec make(double gamma, double gamma_prime);
};

// One of the two connection mechanisms. `dim` is the ambient dimension; the
// interference family needs it because the mean interferer count involves
// the unit-ball volume.
struct ModelSpec {
    enum class Family { wdrcm, interference };
    Family family = Family::wdrcm;
    int dim = 2;

    // wdrcm
    ProfileSpec profile;
    KernelSpec kernel;
    double beta = 1.0;

    // interference
    double gamma = 0.0;       // [0,1)
    double delta = 2.5;       // > 2
    double xi = 0.0;          // >= 0
    double lambda_env = 1.0;  // > 0

    static ModelSpec wdrcm(int dim, ProfileSpec profile, KernelSpec kernel, double beta);
    static ModelSpec interference(int dim, double gamma, double delta, double xi,
                                  double lambda_env);

    bool mark_dependent() const;
    std::string family_name() const;
};

double profile_eval(const ProfileSpec& profile, double x);
double kernel_eval(const KernelSpec& kernel, double s, double t);

// E[1 / (1 + Poisson(m))] = (1 - e^-m) / m.
double poisson_reciprocal_mean(double m);

// Annealed connection function phi(s, t, r). The third argument is the d-th
// power of the distance, not the distance itself.
double phi(const ModelSpec& model, double s, double t, double r);

// Number of env points z with |z - y|^d <= mark^-xi, z distinct from y.
std::int64_t interference_count(const PointCloud& env, std::span<const double> loc,
                                double mark, double xi);

// Quenched connection probability of the pair (x, y) given the surrounding
// cloud. env must not contain x or y; a point of env that exactly matches
// one of them is excluded from the interferer count.
double conn_prob(const ModelSpec& model, const MarkedPoint& x, const MarkedPoint& y,
                 const PointCloud& env);

}  // namespace perclab
