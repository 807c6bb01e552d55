#include "perclab/events.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "perclab/errors.hpp"

namespace perclab {

EventSpec EventSpec::G(double alpha, std::vector<double> center) {
    if (!(alpha > 1.0)) throw std::invalid_argument("event scale alpha must be > 1");
    return EventSpec{Kind::G, alpha, std::move(center)};
}
EventSpec EventSpec::Gprime(double alpha) {
    if (!(alpha > 1.0)) throw std::invalid_argument("event scale alpha must be > 1");
    return EventSpec{Kind::Gprime, alpha, {}};
}
EventSpec EventSpec::H(double alpha) {
    if (!(alpha > 1.0)) throw std::invalid_argument("event scale alpha must be > 1");
    return EventSpec{Kind::H, alpha, {}};
}
EventSpec EventSpec::F(double alpha) {
    if (!(alpha > 1.0)) throw std::invalid_argument("event scale alpha must be > 1");
    return EventSpec{Kind::F, alpha, {}};
}
EventSpec EventSpec::E(double alpha) {
    if (!(alpha > 1.0)) throw std::invalid_argument("event scale alpha must be > 1");
    return EventSpec{Kind::E, alpha, {}};
}

std::string EventSpec::name() const {
    switch (kind) {
        case Kind::G: return "G";
        case Kind::Gprime: return "Gprime";
        case Kind::H: return "H";
        case Kind::F: return "F";
        case Kind::E: return "E";
    }
    return "?";
}

double EventSpec::required_radius(int dim) const {
    const double a = std::pow(alpha, 1.0 / dim);
    switch (kind) {
        case Kind::G:
        case Kind::Gprime:
        case Kind::H: return 3.0 * a;
        case Kind::F: return 20.0 * a;
        case Kind::E: return a;
    }
    return a;
}

std::vector<int> explore_cluster(const GraphSample& g, int start, const Region& domain) {
    if (start < 0 || start >= g.cloud.size())
        throw std::invalid_argument("start vertex out of range");
    if (!domain.contains(g.cloud.location(start)))
        throw std::invalid_argument("start vertex lies outside the exploration domain");

    std::vector<char> seen(g.cloud.size(), 0);
    std::deque<int> queue{start};
    seen[start] = 1;
    std::vector<int> out;
    while (!queue.empty()) {
        const int v = queue.front();
        queue.pop_front();
        out.push_back(v);
        for (int w : g.adj[v]) {
            if (seen[w]) continue;
            if (!domain.contains(g.cloud.location(w))) continue;
            seen[w] = 1;
            queue.push_back(w);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

std::vector<double> event_center(const EventSpec& spec, int dim) {
    if (spec.center.empty()) return std::vector<double>(dim, 0.0);
    if (static_cast<int>(spec.center.size()) != dim)
        throw std::invalid_argument("event center dimension mismatch");
    return spec.center;
}

void require_coverage(const GraphSample& g, const EventSpec& spec,
                      const std::vector<double>& center) {
    const double need = spec.required_radius(g.cloud.dim());
    if (!g.prov.window.contains_ball(center, need))
        throw WindowError("window too small: event " + spec.name() + " needs radius " +
                          std::to_string(need) + " around its center");
}

}  // namespace

bool eval_event(const GraphSample& g, const EventSpec& spec) {
    const int d = g.cloud.dim();
    const double a = std::pow(spec.alpha, 1.0 / d);
    const std::vector<double> c = event_center(spec, d);
    const int n = g.cloud.size();

    switch (spec.kind) {
        case EventSpec::Kind::G: {
            require_coverage(g, spec, c);
            // Multi-source BFS from all vertices in B(a, c), restricted to
            // B(3a, c); true as soon as a vertex at distance >= 2a is reached.
            const double a2 = a * a, two_a2 = 4.0 * a * a, three_a2 = 9.0 * a * a;
            std::vector<char> seen(n, 0);
            std::deque<int> queue;
            for (int i = 0; i < n; ++i) {
                if (dist_sq(g.cloud.location(i), c) < a2) {
                    seen[i] = 1;
                    queue.push_back(i);
                }
            }
            while (!queue.empty()) {
                const int v = queue.front();
                queue.pop_front();
                if (dist_sq(g.cloud.location(v), c) >= two_a2) return true;
                for (int w : g.adj[v]) {
                    if (seen[w]) continue;
                    if (dist_sq(g.cloud.location(w), c) >= three_a2) continue;
                    seen[w] = 1;
                    queue.push_back(w);
                }
            }
            return false;
        }
        case EventSpec::Kind::Gprime: {
            require_coverage(g, spec, c);
            const double a2 = a * a, two_a2 = 4.0 * a * a, three_a2 = 9.0 * a * a;
            for (auto [i, j] : g.edges) {
                const double di = dist_sq(g.cloud.location(i), c);
                const double dj = dist_sq(g.cloud.location(j), c);
                const bool ij = di < a2 && dj >= two_a2 && dj < three_a2;
                const bool ji = dj < a2 && di >= two_a2 && di < three_a2;
                if (ij || ji) return true;
            }
            return false;
        }
        case EventSpec::Kind::H: {
            require_coverage(g, spec, c);
            // Needs some exterior beyond B(3a); the sampler decides how much.
            if (g.prov.window.kind == RegionKind::ball &&
                g.prov.window.r_outer <= 3.0 * a)
                throw WindowError("window too small: H needs vertices outside B(3 alpha^{1/d})");
            const double two_a2 = 4.0 * a * a, three_a2 = 9.0 * a * a;
            for (auto [i, j] : g.edges) {
                const double di = dist_sq(g.cloud.location(i), c);
                const double dj = dist_sq(g.cloud.location(j), c);
                if ((di >= three_a2 && dj < two_a2) || (dj >= three_a2 && di < two_a2))
                    return true;
            }
            return false;
        }
        case EventSpec::Kind::F: {
            require_coverage(g, spec, c);
            const double twenty_a2 = 400.0 * a * a;
            for (auto [i, j] : g.edges) {
                if (dist_sq(g.cloud.location(i), c) >= twenty_a2) continue;
                if (dist_sq(g.cloud.location(j), c) >= twenty_a2) continue;
                if (dist_pow_d(g.cloud.location(i), g.cloud.location(j)) >= spec.alpha)
                    return true;
            }
            return false;
        }
        case EventSpec::Kind::E: {
            if (!g.palm_index)
                throw std::invalid_argument("event E needs a palm vertex");
            const int p = *g.palm_index;
            for (int w : g.adj[p]) {
                const double r = std::pow(dist_sq(g.cloud.location(w), c),
                                          0.5 * static_cast<double>(d));
                if (r >= spec.alpha) return true;
            }
            return false;
        }
    }
    return false;
}

ClusterStats palm_statistics(const GraphSample& g, double interaction_scale) {
    if (!g.palm_index) throw std::invalid_argument("palm_statistics needs a palm vertex");
    const std::vector<int> cluster = explore_cluster(g, *g.palm_index, g.prov.window);
    ClusterStats stats;
    stats.size = static_cast<std::int64_t>(cluster.size());
    stats.diameter_pow = 0.0;
    stats.censored = false;
    const std::vector<double> origin(g.cloud.dim(), 0.0);
    for (int v : cluster) {
        const double r = std::pow(dist_sq(g.cloud.location(v), origin),
                                  0.5 * static_cast<double>(g.cloud.dim()));
        stats.diameter_pow = std::max(stats.diameter_pow, r);
        if (g.prov.window.distance_to_boundary(g.cloud.location(v)) < interaction_scale)
            stats.censored = true;
    }
    return stats;
}

}  // namespace perclab
