#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "perclab/models.hpp"

namespace perclab {

// Finite-window truncation policy. The infinite process has to be cut
// somewhere; interference balls that leave the sampled window get an
// independent Poisson top-up unless exact_window demands failure instead.
struct WindowPolicy {
    double margin_factor = 1.0;      // window enlargement for interference balls
    double mark_floor = 0.01;        // marks below it rely on the exterior top-up
    bool exact_window = false;       // error if any interference ball exits
    double interaction_scale = 1.0;  // boundary censoring distance
    double cell_side = 0.0;          // 0 = auto
    double max_expected_points = 4e6;
};

struct Provenance {
    ModelSpec model;
    Region window;
    double lambda = 0.0;
    std::uint64_t seed = 0;
};

// Which unordered pairs are eligible for an edge draw. Restricting the draw
// to the pairs an event can see is distribution-preserving because pair
// variates are keyed by (i, j), not by visit order.
struct PairFilter {
    enum class Kind { all, cross, palm_only, min_sep };
    Kind kind = Kind::all;
    std::vector<char> set_a, set_b;  // cross: one endpoint in each set
    int palm_index = -1;             // palm_only
    double min_dist_sq = 0.0;        // min_sep, slightly deflated; callers
                                     // re-check the exact |x-y|^d predicate

    static PairFilter all() { return {}; }
    static PairFilter cross(std::vector<char> a, std::vector<char> b);
    static PairFilter palm_only(int palm_index);
    static PairFilter min_sep(double min_r_pow, int dim);
};

struct GraphSample {
    PointCloud cloud;
    std::vector<std::pair<int, int>> edges;  // sorted, i < j
    std::vector<std::vector<int>> adj;       // ascending neighbour lists
    std::optional<int> palm_index;
    Provenance prov;

    static GraphSample from_parts(PointCloud cloud, std::vector<std::pair<int, int>> edges,
                                  std::optional<int> palm_index = std::nullopt);
};

// Per-vertex interference bookkeeping shared by both edge loops.
struct EdgeContext {
    const PointCloud* cloud = nullptr;
    const ModelSpec* model = nullptr;
    std::vector<std::int64_t> n_interferers;  // count excl. self, incl. top-up
    std::vector<double> ball_radius_sq;
};

EdgeContext make_edge_context(const PointCloud& cloud, const ModelSpec& model,
                              double lambda, const WindowPolicy& policy, RngStream rng);

// Quenched probability for the pair (i, j) under the context.
double pair_prob(const EdgeContext& ctx, int i, int j);

// Serial O(n^2) reference edge loop.
std::vector<std::pair<int, int>> draw_edges_reference(const EdgeContext& ctx,
                                                      std::uint64_t edge_key,
                                                      const PairFilter& filter = {});

// Cell-pruned, OpenMP-parallel edge loop. Bit-identical to the reference:
// a pair is skipped only when its pre-drawn uniform provably exceeds the
// cell-pair probability bound.
std::vector<std::pair<int, int>> draw_edges_pruned(const EdgeContext& ctx,
                                                   std::uint64_t edge_key,
                                                   const PairFilter& filter = {});

GraphSample sample_graph(const ModelSpec& model, const Region& window, double lambda,
                         RngStream rng, const WindowPolicy& policy = {},
                         const PairFilter& filter = {});
GraphSample sample_graph_reference(const ModelSpec& model, const Region& window,
                                   double lambda, RngStream rng,
                                   const WindowPolicy& policy = {},
                                   const PairFilter& filter = {});

// As sample_graph plus a distinguished vertex at the origin with an
// independent uniform mark; palm_index points at it.
GraphSample sample_palm(const ModelSpec& model, const Region& window, double lambda,
                        RngStream rng, const WindowPolicy& policy = {},
                        const PairFilter& filter = {});
GraphSample sample_palm_reference(const ModelSpec& model, const Region& window,
                                  double lambda, RngStream rng,
                                  const WindowPolicy& policy = {},
                                  const PairFilter& filter = {});

// Interferer count for a vertex, with the Poisson top-up for the part of
// the ball outside the cloud's window.
std::int64_t count_interferers(const PointCloud& cloud, const MarkedPoint& v, double xi,
                               double lambda, const WindowPolicy& policy, RngStream rng);

// Deterministic estimate of vol(B(center, radius) \ window) via a fixed
// Halton point set.
double exterior_volume(const Region& window, std::span<const double> center, double radius);

// Window margin needed so that typical interference balls stay inside.
double interference_margin(const ModelSpec& model, const WindowPolicy& policy);

}  // namespace perclab
