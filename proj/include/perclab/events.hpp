#pragma once

#include <string>
#include <vector>

#include "perclab/graph.hpp"

namespace perclab {

// Annulus-crossing and long-edge events, all at scale alpha > 1.
//   G     : a vertex in B(a) reaches, inside B(3a), a vertex outside B(2a)
//   Gprime: an edge between B(a) and the annulus B(3a) \ B(2a)
//   H     : an edge from outside B(3a) into B(2a)
//   F     : an edge inside B(20a) of length^d >= alpha
//   E     : the palm vertex has a neighbour with |x|^d >= alpha
// where a = alpha^(1/d). G may be centered away from the origin.
struct EventSpec {
    enum class Kind { G, Gprime, H, F, E };
    Kind kind = Kind::G;
    double alpha = 2.0;
    std::vector<double> center;  // empty = origin

    static EventSpec G(double alpha, std::vector<double> center = {});
    static EventSpec Gprime(double alpha);
    static EventSpec H(double alpha);
    static EventSpec F(double alpha);
    static EventSpec E(double alpha);

    std::string name() const;
    // Radius of the ball around the center the window must cover.
    double required_radius(int dim) const;
};

// Breadth-first closure of `start` using only vertices located in `domain`,
// visiting neighbours in ascending index order.
std::vector<int> explore_cluster(const GraphSample& g, int start, const Region& domain);

bool eval_event(const GraphSample& g, const EventSpec& spec);

struct ClusterStats {
    double diameter_pow = 0.0;  // sup |x|^d over the palm cluster
    std::int64_t size = 1;
    bool censored = false;  // cluster touches the window boundary
};

ClusterStats palm_statistics(const GraphSample& g, double interaction_scale = 1.0);

}  // namespace perclab
