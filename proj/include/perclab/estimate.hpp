#pragma once

#include <functional>
#include <string>
#include <vector>

#include "perclab/deff.hpp"
#include "perclab/events.hpp"

namespace perclab {

struct Estimate {
    double p_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::int64_t n_reps = 0;
    std::int64_t successes = 0;
};

// Wilson score interval; valid near p = 0 where the decaying crossing
// probabilities live.
Estimate wilson_estimate(std::int64_t successes, std::int64_t n, double level = 0.95);

// Quantile of the standard normal (Acklam's rational approximation).
double normal_quantile(double p);

struct TrialRecord {
    std::string event;
    double alpha = 0.0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    bool outcome = false;
    bool censored = false;
};

struct SeriesMeta {
    std::string event;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    int dim = 0;
    std::string model_family;
    double level = 0.95;
};

struct EstimateSeries {
    std::vector<double> alphas;  // strictly increasing
    std::vector<Estimate> rows;
    SeriesMeta meta;
    // Truncation diagnostic for H sweeps: estimated probability mass of
    // edges from beyond the sampled exterior.
    std::vector<double> neglected_tail;
};

struct EstimateOptions {
    double level = 0.95;
    double h_truncation_factor = 10.0;  // H samples out to K * alpha^(1/d)
    double e_truncation_factor = 10.0;  // E likewise
    bool record_trials = false;
};

// Replications of an arbitrary boolean experiment. Parallel over
// replications; the result does not depend on the thread count because
// outcomes land in a per-replication slot before aggregation.
Estimate estimate_bernoulli(std::int64_t n_reps,
                            const std::function<bool(std::int64_t, RngStream)>& trial,
                            RngStream rng, double level = 0.95);

// Monte Carlo probability of an event under the model at intensity lambda.
// Each replication samples a window sized from the event's preconditions
// (plus the interference margin) and evaluates the event exactly on the
// realized graph.
Estimate estimate_prob(const ModelSpec& model, const EventSpec& event, double lambda,
                       std::int64_t n_reps, RngStream rng, const WindowPolicy& policy = {},
                       const EstimateOptions& opts = {},
                       std::vector<TrialRecord>* trials = nullptr);

// One estimate_prob per grid value with disjoint stream labels.
EstimateSeries sweep(const ModelSpec& model, EventSpec::Kind kind,
                     const std::vector<double>& alpha_grid, double lambda,
                     std::int64_t n_reps, RngStream rng, const WindowPolicy& policy = {},
                     const EstimateOptions& opts = {},
                     std::vector<TrialRecord>* trials = nullptr);

struct DecayFit {
    double slope = 0.0;
    double se = 0.0;
    int rows_used = 0;
};

// Weighted least squares of log p_hat against log alpha, weights from the
// CI width in log space. Needs at least 4 positive rows.
DecayFit fit_decay(const EstimateSeries& series);

struct TailReport {
    double exponent_hat = 0.0;
    double se = 0.0;
    int k_used = 0;
    double censored_fraction = 0.0;
};

// Hill estimator of the Pareto tail index on the top-k order statistics.
// Censored values are excluded and their fraction reported.
TailReport tail_exponent(const std::vector<std::pair<double, bool>>& samples, int k,
                         double censored_cap = 0.2);

struct MixingResult {
    double cov_hat = 0.0;
    double se = 0.0;  // jackknife
    double p_origin = 0.0;
    double p_shifted = 0.0;
    std::int64_t n_reps = 0;
};

// Empirical covariance of the G(alpha) indicators in two balls at the given
// separation, evaluated on one shared sample per replication.
MixingResult mixing_cov(const ModelSpec& model, double alpha, double separation,
                        double lambda, std::int64_t n_reps, RngStream rng,
                        const WindowPolicy& policy = {});

struct ScalePairCheck {
    double alpha_base = 0.0;
    double alpha_upper = 0.0;
    double lhs = 0.0;  // C2 * p(upper), slack-adjusted
    double rhs = 0.0;
    bool pass = false;
};

struct CertificateVerdict {
    std::vector<ScalePairCheck> pairs;
    bool bootstrap_ok = false;  // C2 * p_hat <= 1/2 on the base decade
    bool all_pairs_pass = false;
    bool overall = false;
    double c2 = 0.0;
    double decay_exp = 0.0;
    double lambda = 0.0;
};

// Empirical multiscale recursion check: for each decade pair
// (alpha, 10^d alpha) in the series,
//   C2 p(10^d a) <= (C2 p(a))^2 + C2 lambda 10^{d m} a^{-m}
// within CI slack, plus the bootstrap condition on the base decade.
CertificateVerdict multiscale_certificate(const EstimateSeries& series, double lambda,
                                          double decay_exp, double c2);

// Estimated probability mass neglected by truncating the exterior of an H
// evaluation at radius k_trunc * alpha^(1/d).
double long_edge_tail_mass(const ModelSpec& model, double alpha, double k_trunc,
                           double lambda);

}  // namespace perclab
