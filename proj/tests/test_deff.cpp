#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "perclab/deff.hpp"
#include "perclab/errors.hpp"

using namespace perclab;

namespace {

ModelSpec wdrcm_lr(double gamma, double gamma_prime, double delta, double p = 1.0,
                   double beta = 1.0) {
    return ModelSpec::wdrcm(2, ProfileSpec::long_range(p, delta),
                            KernelSpec::make(gamma, gamma_prime), beta);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent piecewise closed form of I(n, a) for gamma' = 0:
// 2p int_a^1 min(1, K s^-gd) (1 - s) ds with K = (beta/n)^delta.
double closed_form_gamma_prime0(double gamma, double delta, double beta, double p, double n,
                                double a) {
    const double gd = gamma * delta;
    const double K = std::pow(beta / n, delta);
    auto seg_clip = [&](double lo, double hi) {  // integral of (1-s)
        return (hi - lo) - 0.5 * (hi * hi - lo * lo);
    };
    auto seg_pow = [&](double lo, double hi) {  // integral of K s^-gd (1-s)
        auto anti = [&](double c) {
            // int s^c ds between lo and hi
            if (c == -1.0) return std::log(hi / lo);
            return (std::pow(hi, c + 1.0) - std::pow(lo, c + 1.0)) / (c + 1.0);
        };
        return K * (anti(-gd) - anti(1.0 - gd));
    };
    const double s_clip = gd > 0.0 ? std::pow(K, 1.0 / gd) : (K >= 1.0 ? 1.0 : 0.0);
    double total = 0.0;
    if (s_clip <= a)
        total = seg_pow(a, 1.0);
    else if (s_clip >= 1.0)
        total = seg_clip(a, 1.0);
    else
        total = seg_clip(a, s_clip) + seg_pow(s_clip, 1.0);
    return 2.0 * p * total;
}

}  // namespace

TEST_CASE("I_integral: mark-free kernel gives (1-a)^2 n^-delta") {
    const ModelSpec m = wdrcm_lr(0.0, 0.0, 3.0);
    for (double a : {0.001, 0.2, 0.7}) {
        for (double n : {10.0, 1e4, 1e8}) {
            const double expect = (1.0 - a) * (1.0 - a) * std::pow(n, -3.0);
            CHECK(I_integral(m, n, a) == doctest::Approx(expect).epsilon(1e-8));
        }
    }
}

TEST_CASE("I_integral matches the piecewise closed form for gamma = 0.5") {
    const ModelSpec m = wdrcm_lr(0.5, 0.0, 3.0);
    for (double n : {1e4, 1e6, 1e8}) {
        const double a = 1.0 / n;
        const double expect = closed_form_gamma_prime0(0.5, 3.0, 1.0, 1.0, n, a);
        CHECK(I_integral(m, n, a) == doctest::Approx(expect).epsilon(1e-4));
    }
}

TEST_CASE("I_integral tends to zero as the cutoff approaches one") {
    const ModelSpec m = wdrcm_lr(0.4, 0.2, 3.0);
    CHECK(I_integral(m, 100.0, 0.999) < 1e-5);
    CHECK(I_integral(m, 100.0, 0.999999) < 1e-11);
}

TEST_CASE("I_integral is monotone decreasing in the cutoff") {
    const ModelSpec m = wdrcm_lr(0.6, 0.3, 2.8);
    double prev = kInf;
    for (double a : {1e-8, 1e-5, 1e-3, 0.1, 0.5}) {
        const double v = I_integral(m, 1e5, a);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("psi slopes: mark-free model has psi = delta for both signs") {
    const ModelSpec m = wdrcm_lr(0.0, 0.0, 3.0);
    const NGrid grid{1e4, 1e8, 9};
    const SlopeFit minus = psi_estimate(m, 0.1, PsiSign::minus, grid);
    const SlopeFit plus = psi_estimate(m, 0.1, PsiSign::plus, grid);
    CHECK(std::abs(minus.slope - 3.0) < 0.02);
    CHECK(std::abs(plus.slope - 3.0) < 0.02);
}

TEST_CASE("psi^- for the gamma = 0.5 soft Boolean point hits the exponent formula") {
    // psi^-(mu) = 1 + delta - gamma delta - mu (gamma delta - 1) = 2.45
    const ModelSpec m = wdrcm_lr(0.5, 0.0, 3.0);
    const SlopeFit fit = psi_estimate(m, 0.1, PsiSign::minus, NGrid{1e4, 1e8, 9});
    CHECK(std::abs(fit.slope - 2.45) < 0.05);
}

TEST_CASE("psi^- decreases in mu when gamma delta > 1") {
    const ModelSpec m = wdrcm_lr(0.5, 0.0, 3.0);
    const NGrid grid{1e4, 1e8, 7};
    double prev = kInf;
    for (double mu : {0.1, 0.3, 0.6, 0.9}) {
        const double s = psi_estimate(m, mu, PsiSign::minus, grid).slope;
        CHECK(s < prev);
        prev = s;
    }
}

TEST_CASE("psi ordering: minus slope never exceeds plus slope materially") {
    const std::vector<ModelSpec> matrix = {
        wdrcm_lr(0.0, 0.0, 3.0), wdrcm_lr(0.5, 0.0, 3.0), wdrcm_lr(0.4, 0.4, 3.0),
        ModelSpec::interference(2, 0.65, 2.7, 0.3, 1.0)};
    const NGrid grid{1e4, 1e8, 7};
    for (const auto& m : matrix)
        for (double mu : {0.05, 0.1, 0.2})
            CHECK(psi_estimate(m, mu, PsiSign::minus, grid).slope <=
                  psi_estimate(m, mu, PsiSign::plus, grid).slope + 0.02);
}

TEST_CASE("deff_estimate recovers closed-form values") {
    const NGrid grid{1e4, 1e8, 9};
    const std::vector<double> mus{0.08, 0.04, 0.02};

    const DeffReport b = deff_estimate(wdrcm_lr(0.5, 0.0, 3.0), mus, grid);
    CHECK(std::abs(b.deff_minus_hat - 2.5) < 0.1);
    CHECK(std::abs(b.deff_plus_hat - 2.5) < 0.1);
    REQUIRE(b.analytic.has_value());
    CHECK(*b.analytic->deff_value == doctest::Approx(2.5));

    const DeffReport a = deff_estimate(wdrcm_lr(0.0, 0.0, 5.0), mus, grid);
    CHECK(std::abs(a.deff_minus_hat - 5.0) < 0.1);
    CHECK(std::abs(a.deff_plus_hat - 5.0) < 0.1);
}

TEST_CASE("interference deff verdicts flip with xi as in the phase diagram") {
    const NGrid grid{1e4, 1e8, 9};
    const std::vector<double> mus{0.08, 0.04, 0.02};
    const DeffReport without =
        deff_estimate(ModelSpec::interference(2, 0.65, 2.7, 0.0, 1.0), mus, grid);
    CHECK(without.deff_minus_hat < 2.0);
    CHECK(without.deff_plus_hat < 2.0);
    const DeffReport with =
        deff_estimate(ModelSpec::interference(2, 0.65, 2.7, 0.3, 1.0), mus, grid);
    CHECK(with.deff_minus_hat > 2.0);
    CHECK(with.deff_plus_hat > 2.0);
}

TEST_CASE("numeric deff verdict flips across the interference boundary") {
    const double delta = 2.7, xi = 0.3;
    const double boundary = (delta + xi - 1.0) / delta;
    const NGrid grid{1e4, 1e8, 9};
    const std::vector<double> mus{0.08, 0.04, 0.02};
    const DeffReport below = deff_estimate(
        ModelSpec::interference(2, boundary - 0.02, delta, xi, 1.0), mus, grid);
    const DeffReport above = deff_estimate(
        ModelSpec::interference(2, boundary + 0.02, delta, xi, 1.0), mus, grid);
    CHECK(below.deff_minus_hat > 2.0);
    CHECK(above.deff_minus_hat < 2.0);
}

TEST_CASE("mu_bar self-consistency: mu < psi^-(mu) - 2 exactly below mu_bar") {
    const ModelSpec m = wdrcm_lr(0.5, 0.0, 3.0);  // mu_bar = 1/3
    const Classification cls = analytic_classify(m);
    REQUIRE(cls.mu_bar.has_value());
    const double mu_bar = *cls.mu_bar;
    CHECK(mu_bar == doctest::Approx(1.0 / 3.0));
    const NGrid grid{1e4, 1e8, 9};
    const double below = psi_estimate(m, mu_bar - 0.05, PsiSign::minus, grid).slope;
    CHECK(mu_bar - 0.05 < below - 2.0);
    const double above = psi_estimate(m, mu_bar + 0.05, PsiSign::minus, grid).slope;
    CHECK(mu_bar + 0.05 > above - 2.0);
}

TEST_CASE("analytic classification examples") {
    const Classification a = analytic_classify(wdrcm_lr(0.3, 0.0, 3.0));
    CHECK(a.deff_gt2 == true);
    CHECK(*a.deff_value == doctest::Approx(3.0));
    CHECK(*a.mu_bar == doctest::Approx(1.0));

    const Classification b = analytic_classify(wdrcm_lr(0.5, 0.0, 3.0));
    CHECK(*b.deff_value == doctest::Approx(2.5));
    CHECK(*b.mu_bar == doctest::Approx(1.0 / 3.0));
    CHECK(*b.zeta == kInf);

    // Age-dependent line gamma' = 1 - gamma never passes.
    for (double gamma : {0.2, 0.5, 0.7}) {
        for (double delta : {2.5, 4.0, 7.0}) {
            const Classification c = analytic_classify(wdrcm_lr(gamma, 1.0 - gamma, delta));
            CHECK(c.status == Classification::Status::ok);
            CHECK(c.deff_gt2 == false);
        }
    }

    // Case boundaries are refused.
    CHECK(analytic_classify(wdrcm_lr(1.0 / 3.0, 0.0, 3.0)).status ==
          Classification::Status::no_closed_form);
    CHECK(analytic_classify(wdrcm_lr(0.5, 1.0 / 3.0, 3.0)).status ==
          Classification::Status::no_closed_form);

    // Interference examples.
    const Classification i0 = analytic_classify(ModelSpec::interference(2, 0.65, 2.7, 0.0, 1.0));
    CHECK(i0.deff_gt2 == false);
    CHECK(*i0.deff_value == doctest::Approx(2.7 + 1.0 - 0.65 * 2.7));
    CHECK(*i0.zeta == kInf);
    const Classification i3 = analytic_classify(ModelSpec::interference(2, 0.65, 2.7, 0.3, 1.0));
    CHECK(i3.deff_gt2 == true);
    CHECK(*i3.deff_value == doctest::Approx(2.245));
    CHECK(*i3.zeta == doctest::Approx(1.0 / 0.3 - 1.0));
}

TEST_CASE("numeric deff agrees with every closed-form point in the matrix") {
    const NGrid grid{1e4, 1e8, 9};
    const std::vector<double> mus{0.08, 0.04, 0.02};
    const std::vector<ModelSpec> matrix = {
        wdrcm_lr(0.2, 0.2, 3.0), wdrcm_lr(0.1, 0.4, 3.0), wdrcm_lr(0.5, 0.0, 3.0),
        wdrcm_lr(0.6, 0.2, 4.0), wdrcm_lr(0.4, 0.4, 3.0),
        ModelSpec::interference(2, 0.3, 3.0, 0.5, 1.0)};
    for (const auto& m : matrix) {
        const Classification cls = analytic_classify(m);
        REQUIRE(cls.status == Classification::Status::ok);
        REQUIRE(cls.deff_value.has_value());
        const DeffReport r = deff_estimate(m, mus, grid);
        CHECK(std::abs(r.deff_minus_hat - *cls.deff_value) < 0.1);
        CHECK(std::abs(r.deff_plus_hat - *cls.deff_value) < 0.1);
    }
}

TEST_CASE("phase grid: wdrcm region at delta 3 and the xi = 0 reduction") {
    PhaseAxis g{"gamma", 0.02, 0.98, 25};
    PhaseAxis gp{"gamma_prime", 0.02, 0.98, 25};
    const PhaseGrid grid = phase_grid(ModelSpec::Family::wdrcm, g, gp,
                                      {{"delta", 3.0}, {"p", 1.0}, {"beta", 1.0}}, 2);
    REQUIRE(grid.cells.size() == 625);
    for (const auto& cell : grid.cells) {
        REQUIRE(cell.cls.status == Classification::Status::ok);
        const bool expect = cell.p1 < 2.0 / 3.0 && cell.p2 < 1.0 - cell.p1;
        CHECK(*cell.cls.deff_gt2 == expect);
    }

    // Interference at xi = 0 classifies exactly like the soft Boolean column.
    for (double gamma : {0.1, 0.35, 0.62, 0.8, 0.93}) {
        for (double delta : {2.3, 3.0, 4.5}) {
            const Classification inter =
                analytic_classify(ModelSpec::interference(2, gamma, delta, 0.0, 1.0));
            const Classification soft = analytic_classify(wdrcm_lr(gamma, 0.0, delta));
            REQUIRE(inter.status == Classification::Status::ok);
            REQUIRE(soft.status == Classification::Status::ok);
            CHECK(*inter.deff_gt2 == *soft.deff_gt2);
            if (inter.mu_bar && soft.mu_bar)
                CHECK(*inter.mu_bar == doctest::Approx(*soft.mu_bar));
            CHECK(inter.mu_bar.has_value() == soft.mu_bar.has_value());
        }
    }

    // Single-cell grid.
    const PhaseGrid one = phase_grid(ModelSpec::Family::wdrcm, {"gamma", 0.3, 0.3, 1},
                                     {"gamma_prime", 0.1, 0.1, 1},
                                     {{"delta", 3.0}}, 2);
    CHECK(one.cells.size() == 1);
}

TEST_CASE("interference phase grid emits the boundary curve") {
    const PhaseGrid grid =
        phase_grid(ModelSpec::Family::interference, {"delta", 2.2, 4.0, 10},
                   {"gamma", 0.05, 0.95, 10}, {{"xi", 0.3}, {"lambda_env", 1.0}}, 2);
    REQUIRE_FALSE(grid.boundary.empty());
    for (const auto& [delta, gamma] : grid.boundary)
        CHECK(gamma == doctest::Approx((delta + 0.3 - 1.0) / delta));
}

TEST_CASE("deff_estimate validates the mu sequence") {
    const ModelSpec m = wdrcm_lr(0.3, 0.0, 3.0);
    CHECK_THROWS_AS(deff_estimate(m, {0.1, 0.05}, NGrid{}), std::invalid_argument);
    CHECK_THROWS_AS(deff_estimate(m, {0.05, 0.1, 0.2}, NGrid{}), std::invalid_argument);
    CHECK_THROWS_AS(psi_estimate(m, 1.2, PsiSign::plus, NGrid{}), std::invalid_argument);
    CHECK_THROWS_AS(psi_estimate(m, 0.1, PsiSign::minus, NGrid{1e2, 1e4, 8}),
                    std::invalid_argument);
}
