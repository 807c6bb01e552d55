#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "perclab/geometry.hpp"
#include "perclab/rng.hpp"

namespace perclab {

struct MarkedPoint {
    std::vector<double> location;
    double mark = 0.5;
};

// Uniform cell grid over the bounding box of a region. Built once, immutable.
// Keeps a CSR layout of point ids plus the minimum mark per cell, which the
// pruned edge sampler uses for probability upper bounds.
struct CellGrid {
    int dim = 0;
    double side = 1.0;
    std::vector<double> origin;
    std::vector<int> dims;            // cells per axis
    std::vector<int> cell_start;      // CSR offsets, size n_cells + 1
    std::vector<int> point_ids;       // ascending within each cell
    std::vector<double> cell_min_mark;

    int n_cells() const { return static_cast<int>(cell_start.size()) - 1; }
    int cell_of(std::span<const double> x) const;
    void cell_coords(int cell, std::span<int> out) const;
};

// Immutable marked point set. Safe to share across threads.
class PointCloud {
public:
    PointCloud() = default;
    // cell_side <= 0 selects the default max(1, diameter / ceil(N^{1/d}))
    // with N the expected count (falls back to the actual count when the
    // expectation is unknown).
    PointCloud(Region region, std::vector<double> coords, std::vector<double> marks,
               double cell_side = 0.0, double expected_count = -1.0);

    int dim() const { return region_.dim; }
    int size() const { return static_cast<int>(marks_.size()); }
    const Region& region() const { return region_; }
    std::span<const double> location(int i) const {
        return {coords_.data() + static_cast<std::size_t>(i) * dim(),
                static_cast<std::size_t>(dim())};
    }
    double mark(int i) const { return marks_[i]; }
    MarkedPoint point(int i) const;
    const CellGrid& grid() const { return grid_; }
    const std::vector<double>& coords() const { return coords_; }
    const std::vector<double>& marks() const { return marks_; }

    // Points with |location - center| < radius (open ball), ascending ids.
    std::vector<int> range_query_indices(std::span<const double> center, double radius) const;
    // Points with |location - center| <= radius (closed ball), ascending ids.
    std::vector<int> closed_ball_indices(std::span<const double> center, double radius) const;

private:
    Region region_;
    std::vector<double> coords_;
    std::vector<double> marks_;
    CellGrid grid_;

    template <bool Closed>
    std::vector<int> query(std::span<const double> center, double radius) const;
};

std::vector<MarkedPoint> range_query(const PointCloud& cloud,
                                     std::span<const double> center, double radius);

struct SamplingOptions {
    double cell_side = 0.0;          // 0 = auto
    double max_expected_points = 4e6;  // resource guard
};

// Marked Poisson sample on a region: count ~ Poisson(lambda * volume),
// locations i.i.d. uniform (rejection from the bounding box for balls and
// annuli), marks i.i.d. uniform on (0,1). Pure function of
// (region, lambda, stream).
PointCloud sample_poisson(const Region& region, double lambda, RngStream rng,
                          const SamplingOptions& opts = {});

}  // namespace perclab
