#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace perclab {

// Volume of the d-dimensional unit ball.
double unit_ball_volume(int dim);

enum class RegionKind { box, ball, annulus };

// Axis box, open ball or open annulus in R^d. Balls are open throughout
// (strict inequality); the convention is fixed so that the grid index and
// the brute-force scan agree point for point.
struct Region {
    RegionKind kind = RegionKind::box;
    int dim = 0;
    std::vector<double> lo, hi;      // box corners
    std::vector<double> center;      // ball / annulus
    double r_inner = 0.0;
    double r_outer = 0.0;

    static Region box(std::vector<double> corner_lo, std::vector<double> corner_hi);
    static Region ball(std::vector<double> center, double radius);
    static Region annulus(std::vector<double> center, double r_inner, double r_outer);

    double volume() const;
    bool contains(std::span<const double> x) const;
    // Smallest axis box covering the region, written into lo_out/hi_out.
    void bounding_box(std::vector<double>& lo_out, std::vector<double>& hi_out) const;
    // True when the closed ball B(c, r) lies inside the region.
    bool contains_ball(std::span<const double> c, double r) const;
    double distance_to_boundary(std::span<const double> x) const;
    double diameter() const;
};

double dist_sq(std::span<const double> a, std::span<const double> b);

// |a - b|^d, the distance power used as the third argument of the
// connection function.
double dist_pow_d(std::span<const double> a, std::span<const double> b);

}  // namespace perclab
