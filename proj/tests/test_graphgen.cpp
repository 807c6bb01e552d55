#include <doctest.h>

#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "perclab/errors.hpp"
#include "perclab/graph.hpp"

using namespace perclab;

namespace {

ModelSpec indicator_model() {
    return ModelSpec::wdrcm(2, ProfileSpec::short_range(1.0), KernelSpec::make(0.0, 0.0),
                            1.0);
}

PointCloud fixed_cloud_12(const Region& region) {
    RngStream rng = RngStream::root(2024).child("fixed12");
    std::vector<double> coords, marks;
    for (int i = 0; i < 12; ++i) {
        coords.push_back(rng.next_range(-4.0, 4.0));
        coords.push_back(rng.next_range(-4.0, 4.0));
        marks.push_back(rng.next_open01());
    }
    return PointCloud(region, coords, marks);
}

}  // namespace

TEST_CASE("lambda zero gives the empty graph / the lone palm vertex") {
    const Region w = Region::ball({0.0, 0.0}, 5.0);
    const GraphSample g = sample_graph(indicator_model(), w, 0.0, RngStream::root(1));
    CHECK(g.cloud.size() == 0);
    CHECK(g.edges.empty());

    const GraphSample p = sample_palm(indicator_model(), w, 0.0, RngStream::root(1));
    CHECK(p.cloud.size() == 1);
    CHECK(p.edges.empty());
    REQUIRE(p.palm_index.has_value());
    CHECK(*p.palm_index == 0);
    CHECK(dist_sq(p.cloud.location(0), std::vector<double>{0.0, 0.0}) == 0.0);
}

TEST_CASE("indicator profile gives the deterministic unit-distance graph") {
    const Region w = Region::ball({0.0, 0.0}, 6.0);
    const GraphSample g = sample_graph(indicator_model(), w, 0.8, RngStream::root(5));
    REQUIRE(g.cloud.size() > 20);
    std::vector<std::pair<int, int>> expected;
    for (int i = 0; i < g.cloud.size(); ++i)
        for (int j = i + 1; j < g.cloud.size(); ++j)
            if (dist_pow_d(g.cloud.location(i), g.cloud.location(j)) <= 1.0)
                expected.emplace_back(i, j);
    CHECK(g.edges == expected);
}

TEST_CASE("per-pair edge frequencies match conn_prob on a fixed cloud") {
    const Region region = Region::box({-5.0, -5.0}, {5.0, 5.0});
    const PointCloud cloud = fixed_cloud_12(region);
    const ModelSpec model = ModelSpec::wdrcm(2, ProfileSpec::long_range(0.9, 3.0),
                                             KernelSpec::make(0.5, 0.1), 1.0);
    const WindowPolicy policy;

    const int n = cloud.size();
    std::vector<std::vector<int>> hits(n, std::vector<int>(n, 0));
    const int reps = 10000;
    for (int r = 0; r < reps; ++r) {
        RngStream rng = RngStream::root(900 + r);
        EdgeContext ctx = make_edge_context(cloud, model, 0.0, policy, rng);
        for (auto [i, j] : draw_edges_reference(ctx, rng.child("edges").key))
            ++hits[i][j];
    }
    RngStream rng = RngStream::root(900);
    EdgeContext ctx = make_edge_context(cloud, model, 0.0, policy, rng);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double p = pair_prob(ctx, i, j);
            const double freq = static_cast<double>(hits[i][j]) / reps;
            const double se = std::sqrt(std::max(p * (1.0 - p), 1e-9) / reps);
            CHECK(std::abs(freq - p) < 3.5 * se + 1e-4);
        }
    }
}

TEST_CASE("pruned edge sampling is bit-identical to the reference loop") {
    const std::vector<ModelSpec> models = {
        ModelSpec::wdrcm(2, ProfileSpec::long_range(1.0, 3.5), KernelSpec::make(0.0, 0.0),
                         1.0),
        ModelSpec::wdrcm(2, ProfileSpec::long_range(0.7, 2.5), KernelSpec::make(0.6, 0.3),
                         1.2),
        ModelSpec::wdrcm(2, ProfileSpec::short_range(0.95), KernelSpec::make(0.4, 0.0), 1.0),
        ModelSpec::interference(2, 0.65, 2.7, 0.3, 0.4),
    };
    int config = 0;
    for (const auto& model : models) {
        for (int rep = 0; rep < 6; ++rep) {
            const Region w = Region::ball({0.0, 0.0}, 7.0 + rep);
            const double lambda = 0.3 + 0.1 * rep;
            const GraphSample a =
                sample_graph(model, w, lambda, RngStream::root(3000 + config));
            const GraphSample b =
                sample_graph_reference(model, w, lambda, RngStream::root(3000 + config));
            CHECK(a.edges == b.edges);
            CHECK(a.cloud.coords() == b.cloud.coords());
            ++config;
        }
    }
}

TEST_CASE("edge sampling does not depend on the thread count") {
#ifdef _OPENMP
    const ModelSpec model = ModelSpec::wdrcm(2, ProfileSpec::long_range(1.0, 3.0),
                                             KernelSpec::make(0.5, 0.2), 1.0);
    const Region w = Region::ball({0.0, 0.0}, 12.0);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const GraphSample g1 = sample_graph(model, w, 0.8, RngStream::root(42));
    omp_set_num_threads(4);
    const GraphSample g4 = sample_graph(model, w, 0.8, RngStream::root(42));
    omp_set_num_threads(saved);
    CHECK(g1.edges == g4.edges);
#endif
}

TEST_CASE("palm vertex: origin location, uniform marks, expected degree") {
    const ModelSpec model = ModelSpec::wdrcm(2, ProfileSpec::long_range(1.0, 3.0),
                                             KernelSpec::make(0.0, 0.0), 1.0);
    const Region w = Region::ball({0.0, 0.0}, 50.0);

    std::vector<double> palm_marks;
    double degree_sum = 0.0;
    const int reps = 2500;
    // The palm-incident filter needs the palm index, which is only known
    // after the cloud is drawn, so build the palm cloud by hand.
    RngStream rng = RngStream::root(7100);
    for (int r = 0; r < reps; ++r) {
        RngStream rep = rng.child(r);
        const WindowPolicy policy;
        SamplingOptions opts{policy.cell_side, policy.max_expected_points};
        PointCloud base = sample_poisson(w, 1.0, rep.child("cloud"), opts);
        std::vector<double> coords = base.coords();
        std::vector<double> marks = base.marks();
        coords.insert(coords.end(), {0.0, 0.0});
        RngStream palm_stream = rep.child("palm");
        marks.push_back(palm_stream.next_open01());
        PointCloud cloud(w, std::move(coords), std::move(marks));
        const int palm = cloud.size() - 1;
        palm_marks.push_back(cloud.mark(palm));
        EdgeContext ctx = make_edge_context(cloud, model, 1.0, policy, rep);
        degree_sum += static_cast<double>(
            draw_edges_pruned(ctx, rep.child("edges").key, PairFilter::palm_only(palm))
                .size());
    }

    // KS for the palm mark distribution.
    std::sort(palm_marks.begin(), palm_marks.end());
    const int n = static_cast<int>(palm_marks.size());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        ks = std::max(ks, std::abs(palm_marks[i] - (i + 1.0) / n));
        ks = std::max(ks, std::abs(palm_marks[i] - static_cast<double>(i) / n));
    }
    CHECK(ks < 1.6276 / std::sqrt(static_cast<double>(n)));

    // E[deg] = lambda * int (1 ^ |x|^-6) dx = pi + pi/2.
    const double target = 1.5 * std::acos(-1.0);
    const double se = std::sqrt(target / reps);
    CHECK(std::abs(degree_sum / reps - target) < 3.0 * se);
}

TEST_CASE("palm graph minus the palm vertex matches plain sampling statistics") {
    const ModelSpec model = ModelSpec::wdrcm(2, ProfileSpec::long_range(1.0, 3.0),
                                             KernelSpec::make(0.3, 0.0), 1.0);
    const Region w = Region::ball({0.0, 0.0}, 8.0);
    const int reps = 500;
    double palm_edges = 0.0, plain_edges = 0.0, palm_sq = 0.0, plain_sq = 0.0;
    for (int r = 0; r < reps; ++r) {
        const GraphSample gp =
            sample_palm(model, w, 0.5, RngStream::root(8100).child(r));
        const int palm = *gp.palm_index;
        double non_palm = 0.0;
        for (auto [i, j] : gp.edges)
            if (i != palm && j != palm) non_palm += 1.0;
        palm_edges += non_palm;
        palm_sq += non_palm * non_palm;
        const GraphSample g = sample_graph(model, w, 0.5, RngStream::root(8200).child(r));
        plain_edges += static_cast<double>(g.edges.size());
        plain_sq += static_cast<double>(g.edges.size()) * g.edges.size();
    }
    const double m1 = palm_edges / reps, m2 = plain_edges / reps;
    const double v1 = palm_sq / reps - m1 * m1, v2 = plain_sq / reps - m2 * m2;
    const double se = std::sqrt(v1 / reps + v2 / reps);
    CHECK(std::abs(m1 - m2) < 3.0 * se);
}

TEST_CASE("count_interferers examples") {
    const Region w = Region::box({-4.0, -4.0}, {4.0, 4.0});
    const WindowPolicy policy;

    // Empty cloud, ball inside the window.
    const PointCloud empty(w, {}, {});
    CHECK(count_interferers(empty, MarkedPoint{{0.0, 0.0}, 0.5}, 0.0, 1.0, policy,
                            RngStream::root(1)) == 0);

    // xi = 0: unit ball regardless of mark.
    const PointCloud cloud(w, {0.5, 0.0, 0.0, 0.9, 2.0, 2.0}, {0.5, 0.5, 0.5});
    CHECK(count_interferers(cloud, MarkedPoint{{0.0, 0.0}, 0.37}, 0.0, 1.0, policy,
                            RngStream::root(1)) == 2);

    // Ball fully inside: equals the brute-force count, no top-up.
    const MarkedPoint v{{0.0, 0.0}, 0.25};
    const double xi = 0.8;
    const double radius = std::pow(v.mark, -xi / 2.0);
    REQUIRE(w.contains_ball(v.location, radius));
    std::int64_t brute = 0;
    for (int i = 0; i < cloud.size(); ++i)
        if (std::pow(dist_sq(cloud.location(i), v.location), 1.0) <= radius * radius)
            ++brute;
    CHECK(count_interferers(cloud, v, xi, 1.0, policy, RngStream::root(2)) == brute);
}

TEST_CASE("exterior top-up adds a Poisson count with the right mean") {
    // Vertex at the corner of the window: a quarter of its unit ball is
    // inside, so the top-up covers the other three quarters.
    const Region w = Region::box({0.0, 0.0}, {10.0, 10.0});
    const PointCloud empty(w, {}, {});
    const MarkedPoint v{{0.0, 0.0}, 0.5};
    const double lambda = 3.0;
    const double expected = lambda * 0.75 * std::acos(-1.0);
    const int reps = 4000;
    double sum = 0.0;
    RngStream rng = RngStream::root(555).child("topup_check");
    for (int r = 0; r < reps; ++r)
        sum += static_cast<double>(
            count_interferers(empty, v, 0.0, lambda, WindowPolicy{}, rng.child(r)));
    const double se = std::sqrt(expected / reps);
    CHECK(std::abs(sum / reps - expected) < 4.0 * se + 0.02 * expected);
}

TEST_CASE("exact_window mode refuses exiting interference balls") {
    const Region w = Region::box({0.0, 0.0}, {4.0, 4.0});
    const PointCloud empty(w, {}, {});
    WindowPolicy policy;
    policy.exact_window = true;
    CHECK_THROWS_AS(count_interferers(empty, MarkedPoint{{0.1, 0.1}, 0.5}, 0.0, 1.0, policy,
                                      RngStream::root(1)),
                    WindowError);
}

TEST_CASE("coincident points are kept distinct and connect with probability p") {
    const Region w = Region::box({-1.0, -1.0}, {1.0, 1.0});
    const PointCloud cloud(w, {0.0, 0.0, 0.0, 0.0}, {0.3, 0.6});
    const ModelSpec model = ModelSpec::wdrcm(2, ProfileSpec::long_range(0.75, 3.0),
                                             KernelSpec::make(0.5, 0.5), 1.0);
    EdgeContext ctx = make_edge_context(cloud, model, 0.0, WindowPolicy{},
                                        RngStream::root(9));
    CHECK(pair_prob(ctx, 0, 1) == doctest::Approx(0.75));
}
