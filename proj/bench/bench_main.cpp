// Compares the serial reference kernels against the pruned OpenMP kernels:
// edge sampling on one cloud, and the replication loop of an event
// estimator. The pruned/parallel results must match the reference exactly;
// the benchmark verifies that while timing both.

#include <chrono>
#include <cstdio>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "perclab/estimate.hpp"

using namespace perclab;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void bench_edges(double lambda, double radius) {
    const ModelSpec model = ModelSpec::wdrcm(
        2, ProfileSpec::long_range(1.0, 3.5), KernelSpec::make(0.5, 0.0), 1.0);
    const Region window = Region::ball({0.0, 0.0}, radius);
    const WindowPolicy policy;
    RngStream rng = RngStream::root(20240915);

    SamplingOptions opts{policy.cell_side, policy.max_expected_points};
    const PointCloud cloud = sample_poisson(window, lambda, rng.child("cloud"), opts);
    const EdgeContext ctx = make_edge_context(cloud, model, lambda, policy, rng);
    const std::uint64_t key = rng.child("edges").key;
    const double n = cloud.size();
    const double pairs = 0.5 * n * (n - 1.0);

    auto t0 = std::chrono::steady_clock::now();
    const auto ref = draw_edges_reference(ctx, key);
    const double t_ref = seconds_since(t0);

#ifdef _OPENMP
    omp_set_num_threads(1);
#endif
    t0 = std::chrono::steady_clock::now();
    const auto pruned1 = draw_edges_pruned(ctx, key);
    const double t_p1 = seconds_since(t0);

#ifdef _OPENMP
    omp_set_num_threads(omp_get_num_procs());
#endif
    t0 = std::chrono::steady_clock::now();
    const auto prunedN = draw_edges_pruned(ctx, key);
    const double t_pn = seconds_since(t0);

    const bool ok = ref == pruned1 && ref == prunedN;
    std::printf("edges  n=%6d pairs=%.2e edges=%zu | ref %7.1f ms | pruned(1t) %7.1f ms "
                "(%4.1fx) | pruned(%dt) %7.1f ms (%4.1fx) | identical: %s\n",
                cloud.size(), pairs, ref.size(), 1e3 * t_ref, 1e3 * t_p1, t_ref / t_p1,
#ifdef _OPENMP
                omp_get_num_procs(),
#else
                1,
#endif
                1e3 * t_pn, t_ref / t_pn, ok ? "yes" : "NO");
}

void bench_estimator(std::int64_t reps) {
    const ModelSpec model = ModelSpec::wdrcm(
        2, ProfileSpec::long_range(1.0, 3.5), KernelSpec::make(0.0, 0.0), 1.0);
    const EventSpec event = EventSpec::G(64.0);
    RngStream rng = RngStream::root(77);

#ifdef _OPENMP
    omp_set_num_threads(1);
#endif
    auto t0 = std::chrono::steady_clock::now();
    const Estimate serial = estimate_prob(model, event, 0.5, reps, rng);
    const double t_serial = seconds_since(t0);

#ifdef _OPENMP
    omp_set_num_threads(omp_get_num_procs());
#endif
    t0 = std::chrono::steady_clock::now();
    const Estimate parallel = estimate_prob(model, event, 0.5, reps, rng);
    const double t_par = seconds_since(t0);

    const bool ok = serial.successes == parallel.successes;
    std::printf("reps   n=%6lld p_hat=%.4f          | 1 thread %7.1f ms | %d threads "
                "%7.1f ms (%4.1fx) | identical: %s\n",
                static_cast<long long>(reps), serial.p_hat, 1e3 * t_serial,
#ifdef _OPENMP
                omp_get_num_procs(),
#else
                1,
#endif
                1e3 * t_par, t_serial / t_par, ok ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
    double scale = 1.0;
    if (argc > 1) scale = std::stod(argv[1]);
    std::printf("perc-bench: serial reference vs pruned OpenMP kernels\n");
    bench_edges(0.5, 40.0 * scale);
    bench_edges(1.0, 50.0 * scale);
    bench_estimator(static_cast<std::int64_t>(400 * scale));
    return 0;
}
