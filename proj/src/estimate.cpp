#include "perclab/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "perclab/errors.hpp"

namespace perclab {

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile needs p in (0,1)");
    // Acklam's approximation, |relative error| < 1.15e-9.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1.0 - plow;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > phigh) return -normal_quantile(1.0 - p);
    const double q = p - 0.5, r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

Estimate wilson_estimate(std::int64_t successes, std::int64_t n, double level) {
    if (n < 1) throw std::invalid_argument("need at least one replication");
    if (successes < 0 || successes > n) throw std::invalid_argument("bad success count");
    const double z = normal_quantile(0.5 + 0.5 * level);
    const double nn = static_cast<double>(n);
    const double k = static_cast<double>(successes);
    const double z2 = z * z;
    const double center = (k + 0.5 * z2) / (nn + z2);
    const double half = z * std::sqrt(k * (nn - k) / nn + 0.25 * z2) / (nn + z2);
    Estimate e;
    e.p_hat = k / nn;
    e.ci_lo = std::max(0.0, center - half);
    e.ci_hi = std::min(1.0, center + half);
    e.n_reps = n;
    e.successes = successes;
    return e;
}

namespace {

// OpenMP regions must not leak exceptions; remember the first one and
// rethrow after the loop.
struct ErrorLatch {
    std::exception_ptr first = nullptr;
    void capture() {
#pragma omp critical(perclab_error_latch)
        {
            if (!first) first = std::current_exception();
        }
    }
    void rethrow() const {
        if (first) std::rethrow_exception(first);
    }
};

}  // namespace

Estimate estimate_bernoulli(std::int64_t n_reps,
                            const std::function<bool(std::int64_t, RngStream)>& trial,
                            RngStream rng, double level) {
    if (n_reps < 1) throw std::invalid_argument("need at least one replication");
    std::vector<char> outcome(n_reps, 0);
    ErrorLatch latch;
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t r = 0; r < n_reps; ++r) {
        try {
            outcome[r] = trial(r, rng.child(static_cast<std::uint64_t>(r))) ? 1 : 0;
        } catch (...) {
            latch.capture();
        }
    }
    latch.rethrow();
    std::int64_t successes = 0;
    for (char c : outcome) successes += c;
    return wilson_estimate(successes, n_reps, level);
}

namespace {

Region event_window(const ModelSpec& model, const EventSpec& event,
                    const WindowPolicy& policy, const EstimateOptions& opts) {
    const int d = model.dim;
    const double a = std::pow(event.alpha, 1.0 / d);
    double radius = event.required_radius(d);
    if (event.kind == EventSpec::Kind::H) radius = opts.h_truncation_factor * a;
    if (event.kind == EventSpec::Kind::E) radius = opts.e_truncation_factor * a;
    radius += interference_margin(model, policy);
    std::vector<double> center = event.center;
    if (center.empty()) center.assign(d, 0.0);
    return Region::ball(center, radius);
}

// Restrict the edge draw to the pairs the event can see. Valid because pair
// variates are keyed by (i, j): the same pairs get the same uniforms no
// matter which subset is visited.
PairFilter event_filter(const EventSpec& event, const PointCloud& cloud,
                        std::optional<int> palm) {
    const int d = cloud.dim();
    const int n = cloud.size();
    const double a = std::pow(event.alpha, 1.0 / d);
    std::vector<double> c = event.center;
    if (c.empty()) c.assign(d, 0.0);

    switch (event.kind) {
        case EventSpec::Kind::G: {
            // Paths may use anything inside B(3a).
            std::vector<char> in3(n, 0);
            const double r2 = 9.0 * a * a;
            for (int i = 0; i < n; ++i) in3[i] = dist_sq(cloud.location(i), c) < r2;
            PairFilter f = PairFilter::cross(in3, in3);
            return f;
        }
        case EventSpec::Kind::Gprime: {
            std::vector<char> inner(n, 0), annulus(n, 0);
            for (int i = 0; i < n; ++i) {
                const double d2 = dist_sq(cloud.location(i), c);
                inner[i] = d2 < a * a;
                annulus[i] = d2 >= 4.0 * a * a && d2 < 9.0 * a * a;
            }
            return PairFilter::cross(std::move(inner), std::move(annulus));
        }
        case EventSpec::Kind::H: {
            std::vector<char> outer(n, 0), inner(n, 0);
            for (int i = 0; i < n; ++i) {
                const double d2 = dist_sq(cloud.location(i), c);
                outer[i] = d2 >= 9.0 * a * a;
                inner[i] = d2 < 4.0 * a * a;
            }
            return PairFilter::cross(std::move(outer), std::move(inner));
        }
        case EventSpec::Kind::F:
            return PairFilter::min_sep(event.alpha, d);
        case EventSpec::Kind::E:
            return PairFilter::palm_only(palm.value_or(-1));
    }
    return {};
}

bool run_trial(const ModelSpec& model, const EventSpec& event, double lambda,
               const WindowPolicy& policy, const EstimateOptions& opts, RngStream rep_rng) {
    const Region window = event_window(model, event, policy, opts);
    const bool palm = event.kind == EventSpec::Kind::E;

    PointCloud cloud = [&] {
        SamplingOptions sopts{policy.cell_side, policy.max_expected_points};
        if (!palm) return sample_poisson(window, lambda, rep_rng.child("cloud"), sopts);
        PointCloud base = sample_poisson(window, lambda, rep_rng.child("cloud"), sopts);
        std::vector<double> coords = base.coords();
        std::vector<double> marks = base.marks();
        coords.insert(coords.end(), static_cast<std::size_t>(window.dim), 0.0);
        RngStream palm_stream = rep_rng.child("palm");
        marks.push_back(palm_stream.next_open01());
        return PointCloud(window, std::move(coords), std::move(marks), policy.cell_side,
                          lambda * window.volume() + 1.0);
    }();

    std::optional<int> palm_index;
    if (palm) palm_index = cloud.size() - 1;
    EdgeContext ctx = make_edge_context(cloud, model, lambda, policy, rep_rng);
    const PairFilter filter = event_filter(event, cloud, palm_index);
    auto edges = draw_edges_pruned(ctx, rep_rng.child("edges").key, filter);

    GraphSample g = GraphSample::from_parts(std::move(cloud), std::move(edges), palm_index);
    g.prov = Provenance{model, window, lambda, rep_rng.key};
    return eval_event(g, event);
}

}  // namespace

Estimate estimate_prob(const ModelSpec& model, const EventSpec& event, double lambda,
                       std::int64_t n_reps, RngStream rng, const WindowPolicy& policy,
                       const EstimateOptions& opts, std::vector<TrialRecord>* trials) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    std::vector<char> outcome(n_reps, 0);
    RngStream base = rng.child("trial");
    ErrorLatch latch;
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t r = 0; r < n_reps; ++r) {
        try {
            outcome[r] = run_trial(model, event, lambda, policy, opts,
                                   base.child(static_cast<std::uint64_t>(r)))
                             ? 1
                             : 0;
        } catch (...) {
            latch.capture();
        }
    }
    latch.rethrow();
    std::int64_t successes = 0;
    for (char c : outcome) successes += c;
    if (trials && opts.record_trials) {
        for (std::int64_t r = 0; r < n_reps; ++r)
            trials->push_back(TrialRecord{event.name(), event.alpha, lambda,
                                          static_cast<std::uint64_t>(r), outcome[r] != 0,
                                          false});
    }
    return wilson_estimate(successes, n_reps, opts.level);
}

EstimateSeries sweep(const ModelSpec& model, EventSpec::Kind kind,
                     const std::vector<double>& alpha_grid, double lambda,
                     std::int64_t n_reps, RngStream rng, const WindowPolicy& policy,
                     const EstimateOptions& opts, std::vector<TrialRecord>* trials) {
    for (std::size_t i = 0; i + 1 < alpha_grid.size(); ++i)
        if (!(alpha_grid[i] < alpha_grid[i + 1]))
            throw std::invalid_argument("alpha grid must be strictly increasing");

    EstimateSeries series;
    series.alphas = alpha_grid;
    series.meta.lambda = lambda;
    series.meta.seed = rng.key;
    series.meta.dim = model.dim;
    series.meta.model_family = model.family_name();
    series.meta.level = opts.level;
    for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
        EventSpec event;
        switch (kind) {
            case EventSpec::Kind::G: event = EventSpec::G(alpha_grid[i]); break;
            case EventSpec::Kind::Gprime: event = EventSpec::Gprime(alpha_grid[i]); break;
            case EventSpec::Kind::H: event = EventSpec::H(alpha_grid[i]); break;
            case EventSpec::Kind::F: event = EventSpec::F(alpha_grid[i]); break;
            case EventSpec::Kind::E: event = EventSpec::E(alpha_grid[i]); break;
        }
        series.meta.event = event.name();
        series.rows.push_back(estimate_prob(model, event, lambda, n_reps,
                                            rng.child("alpha").child(i), policy, opts,
                                            trials));
        if (kind == EventSpec::Kind::H)
            series.neglected_tail.push_back(long_edge_tail_mass(
                model, alpha_grid[i], opts.h_truncation_factor, lambda));
    }
    return series;
}

DecayFit fit_decay(const EstimateSeries& series) {
    std::vector<double> x, y, sigma;
    for (std::size_t i = 0; i < series.rows.size(); ++i) {
        const Estimate& e = series.rows[i];
        if (!(e.p_hat > 0.0)) continue;
        x.push_back(std::log(series.alphas[i]));
        y.push_back(std::log(e.p_hat));
        double s = 1.0;
        if (e.ci_lo > 0.0 && e.ci_hi > e.ci_lo)
            s = 0.5 * (std::log(e.ci_hi) - std::log(e.ci_lo));
        sigma.push_back(std::max(s, 1e-9));
    }
    if (x.size() < 4) throw EstimationError("insufficient positive estimates for decay fit");

    double sw = 0.0, swx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double w = 1.0 / (sigma[i] * sigma[i]);
        sw += w;
        swx += w * x[i];
    }
    const double mx = swx / sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double w = 1.0 / (sigma[i] * sigma[i]);
        sxx += w * (x[i] - mx) * (x[i] - mx);
        sxy += w * (x[i] - mx) * y[i];
    }
    DecayFit f;
    f.slope = sxy / sxx;
    f.se = std::sqrt(1.0 / sxx);
    f.rows_used = static_cast<int>(x.size());
    return f;
}

TailReport tail_exponent(const std::vector<std::pair<double, bool>>& samples, int k,
                         double censored_cap) {
    if (k < 10) throw std::invalid_argument("tail estimation needs k >= 10");
    if (samples.empty()) throw std::invalid_argument("no samples");
    std::vector<double> values;
    std::int64_t censored = 0;
    for (const auto& [v, flag] : samples) {
        if (flag)
            ++censored;
        else
            values.push_back(v);
    }
    TailReport report;
    report.censored_fraction = static_cast<double>(censored) / samples.size();
    if (report.censored_fraction > censored_cap)
        throw EstimationError("too censored: fraction " +
                              std::to_string(report.censored_fraction) + " exceeds cap");
    if (static_cast<int>(values.size()) < k + 1)
        throw EstimationError("need more than k uncensored samples");
    std::sort(values.begin(), values.end(), std::greater<>());
    const double pivot = values[k];
    if (!(pivot > 0.0)) throw EstimationError("k-th order statistic must be positive");
    double mean_log = 0.0;
    for (int i = 0; i < k; ++i) mean_log += std::log(values[i] / pivot);
    mean_log /= k;
    if (!(mean_log > 0.0)) throw EstimationError("no tail: top order statistics are equal");
    report.exponent_hat = 1.0 / mean_log;
    report.se = report.exponent_hat / std::sqrt(static_cast<double>(k));
    report.k_used = k;
    return report;
}

MixingResult mixing_cov(const ModelSpec& model, double alpha, double separation,
                        double lambda, std::int64_t n_reps, RngStream rng,
                        const WindowPolicy& policy) {
    const int d = model.dim;
    const double a = std::pow(alpha, 1.0 / d);
    if (!(separation > 6.0 * a))
        throw std::invalid_argument("mixing_cov needs separation > 6 alpha^(1/d)");
    if (n_reps < 2) throw std::invalid_argument("need at least two replications");

    std::vector<double> shift(d, 0.0);
    shift[0] = separation;
    const double pad = 3.0 * a + interference_margin(model, policy);
    std::vector<double> lo(d), hi(d);
    for (int k = 0; k < d; ++k) {
        lo[k] = (k == 0 ? std::min(0.0, shift[0]) : 0.0) - pad;
        hi[k] = (k == 0 ? std::max(0.0, shift[0]) : 0.0) + pad;
    }
    const Region window = Region::box(lo, hi);
    const std::vector<double> origin(d, 0.0);

    std::vector<char> x_out(n_reps, 0), y_out(n_reps, 0);
    RngStream base = rng.child("mixing");
    ErrorLatch latch;
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t r = 0; r < n_reps; ++r) {
        try {
        RngStream rep = base.child(static_cast<std::uint64_t>(r));
        SamplingOptions sopts{policy.cell_side, policy.max_expected_points};
        PointCloud cloud = sample_poisson(window, lambda, rep.child("cloud"), sopts);
        const int n = cloud.size();
        std::vector<char> b1(n, 0), b2(n, 0);
        const double r2 = 9.0 * a * a;
        for (int i = 0; i < n; ++i) {
            b1[i] = dist_sq(cloud.location(i), origin) < r2;
            b2[i] = dist_sq(cloud.location(i), shift) < r2;
        }
        PairFilter filter;
        filter.kind = PairFilter::Kind::cross;  // either ball spans its own pairs
        // Pairs inside ball 1 or inside ball 2; cross-ball pairs are never
        // needed because G restricts paths to one ball.
        filter.set_a = b1;
        filter.set_b = b1;
        EdgeContext ctx = make_edge_context(cloud, model, lambda, policy, rep);
        auto edges1 = draw_edges_pruned(ctx, rep.child("edges").key, filter);
        filter.set_a = b2;
        filter.set_b = b2;
        auto edges2 = draw_edges_pruned(ctx, rep.child("edges").key, filter);
        std::vector<std::pair<int, int>> edges;
        edges.reserve(edges1.size() + edges2.size());
        std::merge(edges1.begin(), edges1.end(), edges2.begin(), edges2.end(),
                   std::back_inserter(edges));
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

        GraphSample g = GraphSample::from_parts(std::move(cloud), std::move(edges));
        g.prov = Provenance{model, window, lambda, rep.key};
        x_out[r] = eval_event(g, EventSpec::G(alpha)) ? 1 : 0;
        y_out[r] = eval_event(g, EventSpec::G(alpha, shift)) ? 1 : 0;
        } catch (...) {
            latch.capture();
        }
    }
    latch.rethrow();

    const double n = static_cast<double>(n_reps);
    double sx = 0.0, sy = 0.0, sxy = 0.0;
    for (std::int64_t r = 0; r < n_reps; ++r) {
        sx += x_out[r];
        sy += y_out[r];
        sxy += static_cast<double>(x_out[r]) * y_out[r];
    }
    MixingResult res;
    res.p_origin = sx / n;
    res.p_shifted = sy / n;
    res.cov_hat = sxy / n - res.p_origin * res.p_shifted;
    res.n_reps = n_reps;

    // Jackknife over replications.
    double mean_theta = 0.0;
    std::vector<double> theta(n_reps);
    for (std::int64_t r = 0; r < n_reps; ++r) {
        const double m = n - 1.0;
        const double tx = (sx - x_out[r]) / m;
        const double ty = (sy - y_out[r]) / m;
        const double txy = (sxy - static_cast<double>(x_out[r]) * y_out[r]) / m;
        theta[r] = txy - tx * ty;
        mean_theta += theta[r];
    }
    mean_theta /= n;
    double ss = 0.0;
    for (double t : theta) ss += (t - mean_theta) * (t - mean_theta);
    res.se = std::sqrt((n - 1.0) / n * ss);
    return res;
}

CertificateVerdict multiscale_certificate(const EstimateSeries& series, double lambda,
                                          double decay_exp, double c2) {
    if (series.rows.empty()) throw EstimationError("insufficient scale coverage: empty series");
    if (!(c2 > 0.0)) throw std::invalid_argument("C2 must be positive");
    const int d = series.meta.dim > 0 ? series.meta.dim : 1;
    const double ratio = std::pow(10.0, d);

    CertificateVerdict verdict;
    verdict.c2 = c2;
    verdict.decay_exp = decay_exp;
    verdict.lambda = lambda;

    for (std::size_t i = 0; i < series.alphas.size(); ++i) {
        for (std::size_t j = i + 1; j < series.alphas.size(); ++j) {
            if (std::abs(series.alphas[j] / series.alphas[i] - ratio) > 1e-6 * ratio)
                continue;
            const Estimate& base = series.rows[i];
            const Estimate& upper = series.rows[j];
            ScalePairCheck chk;
            chk.alpha_base = series.alphas[i];
            chk.alpha_upper = series.alphas[j];
            chk.lhs = c2 * upper.ci_lo;
            chk.rhs = (c2 * base.ci_hi) * (c2 * base.ci_hi) +
                      c2 * lambda * std::pow(10.0, d * decay_exp) *
                          std::pow(series.alphas[i], -decay_exp);
            chk.pass = chk.lhs <= chk.rhs;
            verdict.pairs.push_back(chk);
        }
    }
    if (verdict.pairs.empty())
        throw EstimationError("insufficient scale coverage: no (alpha, 10^d alpha) pair");

    verdict.bootstrap_ok = true;
    const double base_hi = series.alphas.front() * ratio * (1.0 + 1e-9);
    for (std::size_t i = 0; i < series.alphas.size(); ++i) {
        if (series.alphas[i] > base_hi) continue;
        if (c2 * series.rows[i].p_hat > 0.5) verdict.bootstrap_ok = false;
    }
    verdict.all_pairs_pass = std::all_of(verdict.pairs.begin(), verdict.pairs.end(),
                                         [](const ScalePairCheck& c) { return c.pass; });
    verdict.overall = verdict.all_pairs_pass && verdict.bootstrap_ok;
    return verdict;
}

double long_edge_tail_mass(const ModelSpec& model, double alpha, double k_trunc,
                           double lambda) {
    const int d = model.dim;
    const double a = std::pow(alpha, 1.0 / d);
    const double omega = unit_ball_volume(d);
    const double vol_inner = omega * std::pow(2.0 * a, d);
    // lambda^2 vol(B(2a)) * d omega int_{(K-2)a}^inf (u+2a)^{d-1} Phi(u^d) du,
    // bounding |x - y| >= |x| - 2a for y in B(2a).
    const auto phi_marks = [&](double r_pow) { return I_integral(model, r_pow, 1e-12); };
    double total = 0.0;
    double lo = std::max((k_trunc - 2.0) * a, 1.5);
    for (int block = 0; block < 60; ++block) {
        const double hi = 2.0 * lo;
        const int nodes = 16;
        double acc = 0.0;
        const double h = (hi - lo) / nodes;
        for (int i = 0; i <= nodes; ++i) {
            const double u = lo + h * i;
            const double w = (i == 0 || i == nodes) ? 0.5 : 1.0;
            acc += w * std::pow(u + 2.0 * a, d - 1) * phi_marks(std::pow(u, d));
        }
        acc *= h;
        total += acc;
        if (acc < 1e-4 * total && block > 2) break;
        lo = hi;
    }
    return lambda * lambda * vol_inner * d * omega * total;
}

}  // namespace perclab
