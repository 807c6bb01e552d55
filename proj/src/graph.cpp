#include "perclab/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "perclab/errors.hpp"

namespace perclab {

PairFilter PairFilter::cross(std::vector<char> a, std::vector<char> b) {
    PairFilter f;
    f.kind = Kind::cross;
    f.set_a = std::move(a);
    f.set_b = std::move(b);
    return f;
}

PairFilter PairFilter::palm_only(int palm_index) {
    PairFilter f;
    f.kind = Kind::palm_only;
    f.palm_index = palm_index;
    return f;
}

PairFilter PairFilter::min_sep(double min_r_pow, int dim) {
    PairFilter f;
    f.kind = Kind::min_sep;
    f.min_dist_sq = std::pow(min_r_pow, 2.0 / dim) * (1.0 - 1e-9);
    return f;
}

namespace {

inline bool pair_admissible(const PairFilter& f, const PointCloud& cloud, int i, int j) {
    switch (f.kind) {
        case PairFilter::Kind::all:
            return true;
        case PairFilter::Kind::cross:
            return (f.set_a[i] && f.set_b[j]) || (f.set_a[j] && f.set_b[i]);
        case PairFilter::Kind::palm_only:
            return i == f.palm_index || j == f.palm_index;
        case PairFilter::Kind::min_sep:
            return dist_sq(cloud.location(i), cloud.location(j)) >= f.min_dist_sq;
    }
    return true;
}

double halton(std::uint64_t i, int base) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % base);
        i /= base;
    }
    return r;
}

constexpr int kHaltonPoints = 4096;
constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19};

}  // namespace

double exterior_volume(const Region& window, std::span<const double> center, double radius) {
    const int d = static_cast<int>(center.size());
    if (d > 8) throw std::invalid_argument("exterior_volume supports dimension <= 8");
    if (window.contains_ball(center, radius)) return 0.0;
    const double r2 = radius * radius;
    std::vector<double> x(d);
    std::int64_t in_ball = 0, outside = 0;
    for (std::uint64_t i = 1; i <= kHaltonPoints; ++i) {
        for (int k = 0; k < d; ++k)
            x[k] = center[k] + radius * (2.0 * halton(i, kPrimes[k]) - 1.0);
        if (dist_sq(x, center) > r2) continue;
        ++in_ball;
        if (!window.contains(x)) ++outside;
    }
    if (in_ball == 0) return 0.0;
    const double ball_vol = unit_ball_volume(d) * std::pow(radius, d);
    return ball_vol * static_cast<double>(outside) / static_cast<double>(in_ball);
}

double interference_margin(const ModelSpec& model, const WindowPolicy& policy) {
    if (model.family != ModelSpec::Family::interference) return 0.0;
    const double floor_radius =
        model.xi > 0.0 ? std::pow(policy.mark_floor, -model.xi / model.dim) : 1.0;
    return policy.margin_factor * floor_radius;
}

std::int64_t count_interferers(const PointCloud& cloud, const MarkedPoint& v, double xi,
                               double lambda, const WindowPolicy& policy, RngStream rng) {
    if (!(xi >= 0.0)) throw std::invalid_argument("xi must be >= 0");
    const double radius = std::pow(v.mark, -xi / cloud.dim());
    std::int64_t n = 0;
    for (int i : cloud.closed_ball_indices(v.location, radius)) {
        if (dist_sq(cloud.location(i), v.location) == 0.0 && cloud.mark(i) == v.mark)
            continue;
        ++n;
    }
    if (!cloud.region().contains_ball(v.location, radius)) {
        if (policy.exact_window)
            throw WindowError("interference ball exits the sampled window in exact_window mode");
        const double vol_out = exterior_volume(cloud.region(), v.location, radius);
        n += rng.next_poisson(lambda * vol_out);
    }
    return n;
}

EdgeContext make_edge_context(const PointCloud& cloud, const ModelSpec& model,
                              double lambda, const WindowPolicy& policy, RngStream rng) {
    EdgeContext ctx;
    ctx.cloud = &cloud;
    ctx.model = &model;
    if (model.family != ModelSpec::Family::interference) return ctx;

    const int n = cloud.size();
    ctx.n_interferers.resize(n);
    ctx.ball_radius_sq.resize(n);
    RngStream topup = rng.child("topup");
    for (int i = 0; i < n; ++i) {
        const double radius = std::pow(cloud.mark(i), -model.xi / cloud.dim());
        ctx.ball_radius_sq[i] = radius * radius;
        std::int64_t c = static_cast<std::int64_t>(
                             cloud.closed_ball_indices(cloud.location(i), radius).size()) -
                         1;  // the ball always contains the vertex itself
        if (!cloud.region().contains_ball(cloud.location(i), radius)) {
            if (policy.exact_window)
                throw WindowError(
                    "interference ball exits the sampled window in exact_window mode");
            const double vol_out = exterior_volume(cloud.region(), cloud.location(i), radius);
            RngStream s = topup.child(static_cast<std::uint64_t>(i));
            c += s.next_poisson(lambda * vol_out);
        }
        ctx.n_interferers[i] = c;
    }
    return ctx;
}

double pair_prob(const EdgeContext& ctx, int i, int j) {
    const PointCloud& cloud = *ctx.cloud;
    const ModelSpec& model = *ctx.model;
    const double r = std::pow(dist_sq(cloud.location(i), cloud.location(j)),
                              0.5 * cloud.dim());
    if (model.family == ModelSpec::Family::wdrcm)
        return profile_eval(model.profile,
                            kernel_eval(model.kernel, cloud.mark(i), cloud.mark(j)) * r /
                                model.beta);

    // conn_prob with x = i, y = j: the smaller mark picks numerator and ball.
    const int w = (cloud.mark(j) < cloud.mark(i)) ? j : i;
    const int other = (w == i) ? j : i;
    const double numer =
        r <= 0.0 ? 1.0
                 : std::min(1.0, std::pow(cloud.mark(w), -model.gamma * model.delta) *
                                     std::pow(r, -model.delta));
    std::int64_t count = ctx.n_interferers[w];
    if (dist_sq(cloud.location(other), cloud.location(w)) <= ctx.ball_radius_sq[w])
        --count;  // env excludes the partner
    return numer / (1.0 + static_cast<double>(count));
}

namespace {

// Upper bound on pair_prob over all pairs drawn from two cells, from the
// per-cell minimum marks and the minimum cell distance. Slightly inflated so
// floating-point rounding can never push it below an actual pair value.
double cell_pair_bound(const EdgeContext& ctx, double min_mark_a, double min_mark_b,
                       double min_dist_sq) {
    const ModelSpec& model = *ctx.model;
    const double r_min =
        std::pow(min_dist_sq, 0.5 * ctx.cloud->dim()) * (1.0 - 1e-12);
    if (model.family == ModelSpec::Family::wdrcm) {
        const double g_min = kernel_eval(model.kernel, min_mark_a, min_mark_b);
        if (model.profile.kind == ProfileSpec::Kind::short_range)
            return (g_min * r_min <= model.beta * (1.0 + 1e-12)) ? model.profile.p : 0.0;
        const double p = profile_eval(model.profile, g_min * r_min / model.beta);
        return std::min(1.0, p * (1.0 + 1e-12));
    }
    const double u = std::min(min_mark_a, min_mark_b);
    const double numer =
        r_min <= 0.0 ? 1.0
                     : std::min(1.0, std::pow(u, -model.gamma * model.delta) *
                                         std::pow(r_min, -model.delta));
    return std::min(1.0, numer * (1.0 + 1e-12));
}

std::vector<std::pair<int, int>> finalize_edges(std::vector<std::pair<int, int>> edges) {
    std::sort(edges.begin(), edges.end());
    return edges;
}

}  // namespace

namespace {

// Palm-incident draws only touch n - 1 pairs; both loops special-case this
// instead of scanning the full pair set.
std::vector<std::pair<int, int>> draw_palm_edges(const EdgeContext& ctx,
                                                 std::uint64_t edge_key, int palm) {
    const int n = ctx.cloud->size();
    std::vector<std::pair<int, int>> edges;
    for (int v = 0; v < n; ++v) {
        if (v == palm) continue;
        const int i = std::min(v, palm), j = std::max(v, palm);
        const double u = pair_uniform(edge_key, i, j);
        if (u < pair_prob(ctx, i, j)) edges.emplace_back(i, j);
    }
    std::sort(edges.begin(), edges.end());
    return edges;
}

}  // namespace

std::vector<std::pair<int, int>> draw_edges_reference(const EdgeContext& ctx,
                                                      std::uint64_t edge_key,
                                                      const PairFilter& filter) {
    const PointCloud& cloud = *ctx.cloud;
    if (filter.kind == PairFilter::Kind::palm_only)
        return draw_palm_edges(ctx, edge_key, filter.palm_index);
    const int n = cloud.size();
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (!pair_admissible(filter, cloud, i, j)) continue;
            const double u = pair_uniform(edge_key, i, j);
            if (u < pair_prob(ctx, i, j)) edges.emplace_back(i, j);
        }
    }
    return edges;
}

std::vector<std::pair<int, int>> draw_edges_pruned(const EdgeContext& ctx,
                                                   std::uint64_t edge_key,
                                                   const PairFilter& filter) {
    const PointCloud& cloud = *ctx.cloud;
    if (filter.kind == PairFilter::Kind::palm_only)
        return draw_palm_edges(ctx, edge_key, filter.palm_index);
    const CellGrid& grid = cloud.grid();
    const int d = cloud.dim();

    std::vector<int> occupied;
    for (int c = 0; c < grid.n_cells(); ++c)
        if (grid.cell_start[c + 1] > grid.cell_start[c]) occupied.push_back(c);
    const int m = static_cast<int>(occupied.size());

    std::vector<int> coords(static_cast<std::size_t>(m) * d);
    for (int a = 0; a < m; ++a)
        grid.cell_coords(occupied[a], {coords.data() + static_cast<std::size_t>(a) * d,
                                       static_cast<std::size_t>(d)});

    // Which cells hold points from the cross-filter sets; cell pairs with no
    // admissible pair are skipped wholesale.
    std::vector<char> has_a, has_b;
    if (filter.kind == PairFilter::Kind::cross) {
        has_a.assign(m, 0);
        has_b.assign(m, 0);
        for (int a = 0; a < m; ++a) {
            for (int s = grid.cell_start[occupied[a]]; s < grid.cell_start[occupied[a] + 1];
                 ++s) {
                const int i = grid.point_ids[s];
                if (filter.set_a[i]) has_a[a] = 1;
                if (filter.set_b[i]) has_b[a] = 1;
            }
        }
    }

    std::vector<std::vector<std::pair<int, int>>> found;
#ifdef _OPENMP
    found.resize(omp_get_max_threads());
#else
    found.resize(1);
#endif

#pragma omp parallel for schedule(dynamic, 4)
    for (int a = 0; a < m; ++a) {
#ifdef _OPENMP
        auto& local = found[omp_get_thread_num()];
#else
        auto& local = found[0];
#endif
        const int* ca = coords.data() + static_cast<std::size_t>(a) * d;
        for (int b = a; b < m; ++b) {
            if (filter.kind == PairFilter::Kind::cross &&
                !((has_a[a] && has_b[b]) || (has_a[b] && has_b[a])))
                continue;
            const int* cb = coords.data() + static_cast<std::size_t>(b) * d;
            double min_d2 = 0.0, max_d2 = 0.0;
            for (int k = 0; k < d; ++k) {
                const int gap = std::abs(ca[k] - cb[k]) - 1;
                if (gap > 0) {
                    const double g = gap * grid.side;
                    min_d2 += g * g;
                }
                const double span = (std::abs(ca[k] - cb[k]) + 1) * grid.side;
                max_d2 += span * span;
            }
            if (filter.kind == PairFilter::Kind::min_sep && max_d2 < filter.min_dist_sq)
                continue;
            const double bound =
                cell_pair_bound(ctx, grid.cell_min_mark[occupied[a]],
                                grid.cell_min_mark[occupied[b]], min_d2);
            if (bound <= 0.0) continue;

            const int sa = grid.cell_start[occupied[a]], ea = grid.cell_start[occupied[a] + 1];
            const int sb = grid.cell_start[occupied[b]], eb = grid.cell_start[occupied[b] + 1];
            for (int pa = sa; pa < ea; ++pa) {
                const int i0 = grid.point_ids[pa];
                for (int pb = (a == b ? pa + 1 : sb); pb < eb; ++pb) {
                    const int j0 = grid.point_ids[pb];
                    const int i = std::min(i0, j0);
                    const int j = std::max(i0, j0);
                    const double u = pair_uniform(edge_key, i, j);
                    if (u >= bound) continue;
                    if (!pair_admissible(filter, cloud, i, j)) continue;
                    if (u < pair_prob(ctx, i, j)) local.emplace_back(i, j);
                }
            }
        }
    }

    std::vector<std::pair<int, int>> edges;
    for (auto& v : found) edges.insert(edges.end(), v.begin(), v.end());
    return finalize_edges(std::move(edges));
}

namespace {

std::vector<std::vector<int>> build_adjacency(int n,
                                              const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::vector<int>> adj(n);
    for (auto [i, j] : edges) {
        if (i == j || i < 0 || j >= n) throw std::invalid_argument("bad edge endpoint");
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());
    return adj;
}

GraphSample assemble(PointCloud cloud, const ModelSpec& model, const Region& window,
                     double lambda, RngStream rng, const WindowPolicy& policy,
                     const PairFilter& filter, std::optional<int> palm, bool pruned) {
    EdgeContext ctx = make_edge_context(cloud, model, lambda, policy, rng);
    const std::uint64_t edge_key = rng.child("edges").key;
    auto edges = pruned ? draw_edges_pruned(ctx, edge_key, filter)
                        : draw_edges_reference(ctx, edge_key, filter);
    GraphSample g;
    g.adj = build_adjacency(cloud.size(), edges);
    g.cloud = std::move(cloud);
    g.edges = std::move(edges);
    g.palm_index = palm;
    g.prov = Provenance{model, window, lambda, rng.key};
    return g;
}

PointCloud palm_cloud(const Region& window, double lambda,
                      RngStream rng, const WindowPolicy& policy) {
    std::vector<double> origin(window.dim, 0.0);
    if (!window.contains(origin))
        throw std::invalid_argument("palm sampling requires the window to contain the origin");
    SamplingOptions opts{policy.cell_side, policy.max_expected_points};
    PointCloud base = sample_poisson(window, lambda, rng.child("cloud"), opts);
    std::vector<double> coords = base.coords();
    std::vector<double> marks = base.marks();
    coords.insert(coords.end(), origin.begin(), origin.end());
    RngStream palm_stream = rng.child("palm");
    marks.push_back(palm_stream.next_open01());
    return PointCloud(window, std::move(coords), std::move(marks), policy.cell_side,
                      lambda * window.volume() + 1.0);
}

}  // namespace

GraphSample GraphSample::from_parts(PointCloud cloud, std::vector<std::pair<int, int>> edges,
                                    std::optional<int> palm_index) {
    GraphSample g;
    std::sort(edges.begin(), edges.end());
    g.adj = build_adjacency(cloud.size(), edges);
    g.cloud = std::move(cloud);
    g.edges = std::move(edges);
    g.palm_index = palm_index;
    g.prov.window = g.cloud.region();
    return g;
}

GraphSample sample_graph(const ModelSpec& model, const Region& window, double lambda,
                         RngStream rng, const WindowPolicy& policy, const PairFilter& filter) {
    if (model.dim != window.dim) throw std::invalid_argument("model/window dimension mismatch");
    SamplingOptions opts{policy.cell_side, policy.max_expected_points};
    PointCloud cloud = sample_poisson(window, lambda, rng.child("cloud"), opts);
    return assemble(std::move(cloud), model, window, lambda, rng, policy, filter,
                    std::nullopt, true);
}

GraphSample sample_graph_reference(const ModelSpec& model, const Region& window,
                                   double lambda, RngStream rng, const WindowPolicy& policy,
                                   const PairFilter& filter) {
    if (model.dim != window.dim) throw std::invalid_argument("model/window dimension mismatch");
    SamplingOptions opts{policy.cell_side, policy.max_expected_points};
    PointCloud cloud = sample_poisson(window, lambda, rng.child("cloud"), opts);
    return assemble(std::move(cloud), model, window, lambda, rng, policy, filter,
                    std::nullopt, false);
}

GraphSample sample_palm(const ModelSpec& model, const Region& window, double lambda,
                        RngStream rng, const WindowPolicy& policy, const PairFilter& filter) {
    if (model.dim != window.dim) throw std::invalid_argument("model/window dimension mismatch");
    PointCloud cloud = palm_cloud(window, lambda, rng, policy);
    const int palm = cloud.size() - 1;
    return assemble(std::move(cloud), model, window, lambda, rng, policy, filter, palm, true);
}

GraphSample sample_palm_reference(const ModelSpec& model, const Region& window, double lambda,
                                  RngStream rng, const WindowPolicy& policy,
                                  const PairFilter& filter) {
    if (model.dim != window.dim) throw std::invalid_argument("model/window dimension mismatch");
    PointCloud cloud = palm_cloud(window, lambda, rng, policy);
    const int palm = cloud.size() - 1;
    return assemble(std::move(cloud), model, window, lambda, rng, policy, filter, palm, false);
}

}  // namespace perclab
