#include "perclab/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "perclab/errors.hpp"

namespace perclab {

int CellGrid::cell_of(std::span<const double> x) const {
    int idx = 0;
    for (int k = 0; k < dim; ++k) {
        int c = static_cast<int>(std::floor((x[k] - origin[k]) / side));
        c = std::clamp(c, 0, dims[k] - 1);
        idx = idx * dims[k] + c;
    }
    return idx;
}

void CellGrid::cell_coords(int cell, std::span<int> out) const {
    for (int k = dim - 1; k >= 0; --k) {
        out[k] = cell % dims[k];
        cell /= dims[k];
    }
}

namespace {

CellGrid build_grid(const Region& region, const std::vector<double>& coords,
                    const std::vector<double>& marks, double side,
                    double expected_count) {
    const int d = region.dim;
    const int n = static_cast<int>(marks.size());
    CellGrid g;
    g.dim = d;
    std::vector<double> hi;
    region.bounding_box(g.origin, hi);

    if (side <= 0.0) {
        double nexp = expected_count > 0.0 ? expected_count : static_cast<double>(n);
        nexp = std::max(nexp, 1.0);
        const double per_axis = std::ceil(std::pow(nexp, 1.0 / d));
        side = std::max(1.0, region.diameter() / per_axis);
    }

    // Clamp total cell count so the dense CSR stays small.
    constexpr double kMaxCells = 4e6;
    for (;;) {
        double total = 1.0;
        for (int k = 0; k < d; ++k)
            total *= std::max(1.0, std::ceil((hi[k] - g.origin[k]) / side));
        if (total <= kMaxCells) break;
        side *= 2.0;
    }
    g.side = side;
    g.dims.resize(d);
    int n_cells = 1;
    for (int k = 0; k < d; ++k) {
        g.dims[k] = std::max(1, static_cast<int>(std::ceil((hi[k] - g.origin[k]) / side)));
        n_cells *= g.dims[k];
    }

    std::vector<int> counts(n_cells, 0);
    std::vector<int> home(n);
    for (int i = 0; i < n; ++i) {
        const std::span<const double> x{coords.data() + static_cast<std::size_t>(i) * d,
                                        static_cast<std::size_t>(d)};
        home[i] = g.cell_of(x);
        ++counts[home[i]];
    }
    g.cell_start.assign(n_cells + 1, 0);
    std::partial_sum(counts.begin(), counts.end(), g.cell_start.begin() + 1);
    g.point_ids.resize(n);
    std::vector<int> cursor(g.cell_start.begin(), g.cell_start.end() - 1);
    for (int i = 0; i < n; ++i) g.point_ids[cursor[home[i]]++] = i;

    g.cell_min_mark.assign(n_cells, 1.0);
    for (int i = 0; i < n; ++i)
        g.cell_min_mark[home[i]] = std::min(g.cell_min_mark[home[i]], marks[i]);
    return g;
}

}  // namespace

PointCloud::PointCloud(Region region, std::vector<double> coords,
                       std::vector<double> marks, double cell_side,
                       double expected_count)
    : region_(std::move(region)), coords_(std::move(coords)), marks_(std::move(marks)) {
    if (coords_.size() != marks_.size() * static_cast<std::size_t>(region_.dim))
        throw std::invalid_argument("coordinate/mark size mismatch");
    for (double m : marks_)
        if (!(m > 0.0 && m < 1.0))
            throw std::invalid_argument("marks must lie in the open interval (0,1)");
    grid_ = build_grid(region_, coords_, marks_, cell_side, expected_count);
}

MarkedPoint PointCloud::point(int i) const {
    const auto loc = location(i);
    return MarkedPoint{{loc.begin(), loc.end()}, marks_[i]};
}

template <bool Closed>
std::vector<int> PointCloud::query(std::span<const double> center, double radius) const {
    std::vector<int> out;
    if (radius < 0.0 || (!Closed && radius == 0.0)) return out;
    const int d = dim();
    const double r2 = radius * radius;

    // Cell coordinate window overlapping the ball.
    std::vector<int> lo(d), hi(d);
    for (int k = 0; k < d; ++k) {
        lo[k] = std::clamp(
            static_cast<int>(std::floor((center[k] - radius - grid_.origin[k]) / grid_.side)),
            0, grid_.dims[k] - 1);
        hi[k] = std::clamp(
            static_cast<int>(std::floor((center[k] + radius - grid_.origin[k]) / grid_.side)),
            0, grid_.dims[k] - 1);
    }

    std::vector<int> cur(lo);
    for (;;) {
        int cell = 0;
        for (int k = 0; k < d; ++k) cell = cell * grid_.dims[k] + cur[k];
        for (int s = grid_.cell_start[cell]; s < grid_.cell_start[cell + 1]; ++s) {
            const int i = grid_.point_ids[s];
            const double d2 = dist_sq(location(i), center);
            if (Closed ? d2 <= r2 : d2 < r2) out.push_back(i);
        }
        int k = d - 1;
        while (k >= 0 && cur[k] == hi[k]) {
            cur[k] = lo[k];
            --k;
        }
        if (k < 0) break;
        ++cur[k];
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> PointCloud::range_query_indices(std::span<const double> center,
                                                 double radius) const {
    return query<false>(center, radius);
}

std::vector<int> PointCloud::closed_ball_indices(std::span<const double> center,
                                                 double radius) const {
    return query<true>(center, radius);
}

std::vector<MarkedPoint> range_query(const PointCloud& cloud,
                                     std::span<const double> center, double radius) {
    std::vector<MarkedPoint> out;
    for (int i : cloud.range_query_indices(center, radius)) out.push_back(cloud.point(i));
    return out;
}

PointCloud sample_poisson(const Region& region, double lambda, RngStream rng,
                          const SamplingOptions& opts) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    const double expected = lambda * region.volume();
    if (expected > opts.max_expected_points)
        throw ResourceError("instance too large: expected " + std::to_string(expected) +
                            " points exceeds cap " + std::to_string(opts.max_expected_points));

    const int d = region.dim;
    RngStream count_stream = rng.child("count");
    RngStream point_stream = rng.child("points");
    const std::int64_t n = count_stream.next_poisson(expected);

    std::vector<double> lo, hi;
    region.bounding_box(lo, hi);
    std::vector<double> coords;
    coords.reserve(static_cast<std::size_t>(n) * d);
    std::vector<double> marks;
    marks.reserve(n);
    std::vector<double> x(d);
    for (std::int64_t i = 0; i < n; ++i) {
        for (;;) {
            for (int k = 0; k < d; ++k) x[k] = point_stream.next_range(lo[k], hi[k]);
            if (region.contains(x)) break;
        }
        coords.insert(coords.end(), x.begin(), x.end());
        marks.push_back(point_stream.next_open01());
    }
    return PointCloud(region, std::move(coords), std::move(marks), opts.cell_side, expected);
}

}  // namespace perclab
