#include "perclab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace perclab {

double unit_ball_volume(int dim) {
    if (dim <= 0) throw std::invalid_argument("dimension must be >= 1");
    const double pi = std::acos(-1.0);
    return std::pow(pi, 0.5 * dim) / std::tgamma(0.5 * dim + 1.0);
}

double dist_sq(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

double dist_pow_d(std::span<const double> a, std::span<const double> b) {
    return std::pow(dist_sq(a, b), 0.5 * static_cast<double>(a.size()));
}

Region Region::box(std::vector<double> corner_lo, std::vector<double> corner_hi) {
    if (corner_lo.empty() || corner_lo.size() != corner_hi.size())
        throw std::invalid_argument("box corners must have equal positive dimension");
    for (std::size_t k = 0; k < corner_lo.size(); ++k)
        if (!(corner_lo[k] < corner_hi[k]))
            throw std::invalid_argument("box requires corner_lo < corner_hi componentwise");
    Region r;
    r.kind = RegionKind::box;
    r.dim = static_cast<int>(corner_lo.size());
    r.lo = std::move(corner_lo);
    r.hi = std::move(corner_hi);
    return r;
}

Region Region::ball(std::vector<double> center, double radius) {
    if (center.empty()) throw std::invalid_argument("ball center must have dimension >= 1");
    if (!(radius > 0.0)) throw std::invalid_argument("ball radius must be > 0");
    Region r;
    r.kind = RegionKind::ball;
    r.dim = static_cast<int>(center.size());
    r.center = std::move(center);
    r.r_outer = radius;
    return r;
}

Region Region::annulus(std::vector<double> center, double r_inner, double r_outer) {
    if (center.empty()) throw std::invalid_argument("annulus center must have dimension >= 1");
    if (!(r_inner >= 0.0) || !(r_inner < r_outer))
        throw std::invalid_argument("annulus requires 0 <= r_inner < r_outer");
    Region r;
    r.kind = RegionKind::annulus;
    r.dim = static_cast<int>(center.size());
    r.center = std::move(center);
    r.r_inner = r_inner;
    r.r_outer = r_outer;
    return r;
}

double Region::volume() const {
    switch (kind) {
        case RegionKind::box: {
            double v = 1.0;
            for (int k = 0; k < dim; ++k) v *= hi[k] - lo[k];
            return v;
        }
        case RegionKind::ball:
            return unit_ball_volume(dim) * std::pow(r_outer, dim);
        case RegionKind::annulus:
            return unit_ball_volume(dim) *
                   (std::pow(r_outer, dim) - std::pow(r_inner, dim));
    }
    return 0.0;
}

bool Region::contains(std::span<const double> x) const {
    switch (kind) {
        case RegionKind::box:
            for (int k = 0; k < dim; ++k)
                if (x[k] < lo[k] || x[k] >= hi[k]) return false;
            return true;
        case RegionKind::ball:
            return dist_sq(x, center) < r_outer * r_outer;
        case RegionKind::annulus: {
            const double d2 = dist_sq(x, center);
            return d2 > r_inner * r_inner && d2 < r_outer * r_outer;
        }
    }
    return false;
}

void Region::bounding_box(std::vector<double>& lo_out, std::vector<double>& hi_out) const {
    lo_out.assign(dim, 0.0);
    hi_out.assign(dim, 0.0);
    if (kind == RegionKind::box) {
        lo_out = lo;
        hi_out = hi;
        return;
    }
    for (int k = 0; k < dim; ++k) {
        lo_out[k] = center[k] - r_outer;
        hi_out[k] = center[k] + r_outer;
    }
}

bool Region::contains_ball(std::span<const double> c, double r) const {
    switch (kind) {
        case RegionKind::box:
            for (int k = 0; k < dim; ++k)
                if (c[k] - r < lo[k] || c[k] + r > hi[k]) return false;
            return true;
        case RegionKind::ball:
            return std::sqrt(dist_sq(c, center)) + r <= r_outer;
        case RegionKind::annulus: {
            const double d = std::sqrt(dist_sq(c, center));
            return d - r >= r_inner && d + r <= r_outer;
        }
    }
    return false;
}

double Region::distance_to_boundary(std::span<const double> x) const {
    switch (kind) {
        case RegionKind::box: {
            double m = std::numeric_limits<double>::infinity();
            for (int k = 0; k < dim; ++k)
                m = std::min({m, x[k] - lo[k], hi[k] - x[k]});
            return m;
        }
        case RegionKind::ball:
            return r_outer - std::sqrt(dist_sq(x, center));
        case RegionKind::annulus: {
            const double d = std::sqrt(dist_sq(x, center));
            return std::min(d - r_inner, r_outer - d);
        }
    }
    return 0.0;
}

double Region::diameter() const {
    if (kind == RegionKind::box) {
        double s = 0.0;
        for (int k = 0; k < dim; ++k) {
            const double e = hi[k] - lo[k];
            s += e * e;
        }
        return std::sqrt(s);
    }
    return 2.0 * r_outer;
}

}  // namespace perclab
