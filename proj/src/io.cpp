#include "perclab/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace perclab {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void atomic_write_text(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
        out << content;
        if (!out.good()) {
            std::filesystem::remove(tmp);
            throw std::runtime_error("write failed for " + tmp);
        }
    }
    std::filesystem::rename(tmp, path);
}

void check_keys(const json& j, const std::vector<std::string>& required,
                const std::vector<std::string>& optional, const std::string& ctx) {
    if (!j.is_object()) throw std::invalid_argument(ctx + " must be a JSON object");
    for (const auto& k : required)
        if (!j.contains(k)) throw std::invalid_argument(ctx + " is missing key '" + k + "'");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const bool known =
            std::find(required.begin(), required.end(), k) != required.end() ||
            std::find(optional.begin(), optional.end(), k) != optional.end();
        if (!known) throw std::invalid_argument(ctx + " has unknown key '" + k + "'");
    }
}

namespace {

json maybe_infinite(double v) {
    if (std::isinf(v)) return json("infinity");
    return json(v);
}

json optional_number(const std::optional<double>& v) {
    if (!v) return json(nullptr);
    return maybe_infinite(*v);
}

}  // namespace

json region_to_json(const Region& r) {
    json j;
    switch (r.kind) {
        case RegionKind::box:
            j["type"] = "box";
            j["lo"] = r.lo;
            j["hi"] = r.hi;
            break;
        case RegionKind::ball:
            j["type"] = "ball";
            j["center"] = r.center;
            j["radius"] = r.r_outer;
            break;
        case RegionKind::annulus:
            j["type"] = "annulus";
            j["center"] = r.center;
            j["r_inner"] = r.r_inner;
            j["r_outer"] = r.r_outer;
            break;
    }
    return j;
}

Region region_from_json(const json& j) {
    if (!j.contains("type")) throw std::invalid_argument("region needs a 'type'");
    const std::string type = j.at("type").get<std::string>();
    if (type == "box") {
        check_keys(j, {"type", "lo", "hi"}, {}, "region(box)");
        return Region::box(j.at("lo").get<std::vector<double>>(),
                           j.at("hi").get<std::vector<double>>());
    }
    if (type == "ball") {
        check_keys(j, {"type", "center", "radius"}, {}, "region(ball)");
        return Region::ball(j.at("center").get<std::vector<double>>(),
                            j.at("radius").get<double>());
    }
    if (type == "annulus") {
        check_keys(j, {"type", "center", "r_inner", "r_outer"}, {}, "region(annulus)");
        return Region::annulus(j.at("center").get<std::vector<double>>(),
                               j.at("r_inner").get<double>(),
                               j.at("r_outer").get<double>());
    }
    throw std::invalid_argument("unknown region type '" + type + "'");
}

json model_to_json(const ModelSpec& m) {
    json j;
    if (m.family == ModelSpec::Family::wdrcm) {
        j["family"] = "wdrcm";
        json profile;
        if (m.profile.kind == ProfileSpec::Kind::long_range) {
            profile["type"] = "long_range";
            profile["p"] = m.profile.p;
            profile["delta"] = m.profile.delta;
        } else {
            profile["type"] = "short_range";
            profile["p"] = m.profile.p;
        }
        j["profile"] = profile;
        j["kernel"] = json{{"gamma", m.kernel.gamma}, {"gamma_prime", m.kernel.gamma_prime}};
        j["beta"] = m.beta;
    } else {
        j["family"] = "interference";
        j["gamma"] = m.gamma;
        j["delta"] = m.delta;
        j["xi"] = m.xi;
        j["lambda_env"] = m.lambda_env;
    }
    return j;
}

ModelSpec model_from_json(const json& j, int dim) {
    if (!j.contains("family")) throw std::invalid_argument("model needs a 'family'");
    const std::string family = j.at("family").get<std::string>();
    if (family == "wdrcm") {
        check_keys(j, {"family", "profile", "kernel"}, {"beta"}, "model(wdrcm)");
        const json& pj = j.at("profile");
        if (!pj.contains("type")) throw std::invalid_argument("profile needs a 'type'");
        ProfileSpec profile;
        const std::string ptype = pj.at("type").get<std::string>();
        if (ptype == "long_range") {
            check_keys(pj, {"type", "p", "delta"}, {}, "profile(long_range)");
            profile = ProfileSpec::long_range(pj.at("p").get<double>(),
                                              pj.at("delta").get<double>());
        } else if (ptype == "short_range") {
            check_keys(pj, {"type", "p"}, {}, "profile(short_range)");
            profile = ProfileSpec::short_range(pj.at("p").get<double>());
        } else {
            throw std::invalid_argument("unknown profile type '" + ptype + "'");
        }
        const json& kj = j.at("kernel");
        check_keys(kj, {"gamma", "gamma_prime"}, {}, "kernel");
        const KernelSpec kernel = KernelSpec::make(kj.at("gamma").get<double>(),
                                                   kj.at("gamma_prime").get<double>());
        return ModelSpec::wdrcm(dim, profile, kernel,
                                j.value("beta", 1.0));
    }
    if (family == "interference") {
        check_keys(j, {"family", "gamma", "delta", "xi"}, {"lambda_env"},
                   "model(interference)");
        return ModelSpec::interference(dim, j.at("gamma").get<double>(),
                                       j.at("delta").get<double>(), j.at("xi").get<double>(),
                                       j.value("lambda_env", 1.0));
    }
    throw std::invalid_argument("unknown model family '" + family + "'");
}

json policy_to_json(const WindowPolicy& p) {
    return json{{"margin_factor", p.margin_factor},
                {"mark_floor", p.mark_floor},
                {"exact_window", p.exact_window},
                {"interaction_scale", p.interaction_scale},
                {"cell_side", p.cell_side},
                {"max_expected_points", p.max_expected_points}};
}

WindowPolicy policy_from_json(const json& j) {
    check_keys(j, {},
               {"margin_factor", "mark_floor", "exact_window", "interaction_scale",
                "cell_side", "max_expected_points"},
               "policy");
    WindowPolicy p;
    p.margin_factor = j.value("margin_factor", p.margin_factor);
    p.mark_floor = j.value("mark_floor", p.mark_floor);
    p.exact_window = j.value("exact_window", p.exact_window);
    p.interaction_scale = j.value("interaction_scale", p.interaction_scale);
    p.cell_side = j.value("cell_side", p.cell_side);
    p.max_expected_points = j.value("max_expected_points", p.max_expected_points);
    if (!(p.margin_factor >= 1.0))
        throw std::invalid_argument("policy margin_factor must be >= 1");
    if (!(p.mark_floor >= 0.0 && p.mark_floor < 1.0))
        throw std::invalid_argument("policy mark_floor must be in [0,1)");
    return p;
}

json classification_to_json(const Classification& c) {
    json j;
    if (c.status == Classification::Status::no_closed_form) {
        j["status"] = "no_closed_form";
        j["reason"] = c.reason;
        return j;
    }
    j["status"] = "ok";
    j["deff_gt2"] = c.deff_gt2 ? json(*c.deff_gt2) : json(nullptr);
    j["deff_value"] = optional_number(c.deff_value);
    j["mu_bar"] = optional_number(c.mu_bar);
    j["zeta"] = optional_number(c.zeta);
    return j;
}

json deff_report_to_json(const DeffReport& r) {
    json j;
    auto points = [](const std::vector<PsiPoint>& ps) {
        json arr = json::array();
        for (const auto& p : ps)
            arr.push_back(json{{"mu", p.mu}, {"slope", p.slope}, {"stderr", p.se}});
        return arr;
    };
    j["psi_minus"] = points(r.psi_minus);
    j["psi_plus"] = points(r.psi_plus);
    j["deff_minus_hat"] = r.deff_minus_hat;
    j["deff_plus_hat"] = r.deff_plus_hat;
    j["deff_minus_stderr"] = r.minus_se;
    j["deff_plus_stderr"] = r.plus_se;
    j["analytic"] = r.analytic ? classification_to_json(*r.analytic) : json(nullptr);
    return j;
}

json tail_report_to_json(const TailReport& r) {
    return json{{"exponent_hat", r.exponent_hat},
                {"stderr", r.se},
                {"k_used", r.k_used},
                {"censored_fraction", r.censored_fraction}};
}

json certificate_to_json(const CertificateVerdict& v) {
    json pairs = json::array();
    for (const auto& p : v.pairs)
        pairs.push_back(json{{"alpha_base", p.alpha_base},
                             {"alpha_upper", p.alpha_upper},
                             {"lhs", p.lhs},
                             {"rhs", p.rhs},
                             {"pass", p.pass}});
    return json{{"pairs", pairs},
                {"bootstrap_ok", v.bootstrap_ok},
                {"all_pairs_pass", v.all_pairs_pass},
                {"overall", v.overall},
                {"C2", v.c2},
                {"decay_exp", v.decay_exp},
                {"lambda", v.lambda}};
}

json mixing_to_json(const MixingResult& m) {
    return json{{"cov_hat", m.cov_hat},
                {"stderr", m.se},
                {"p_origin", m.p_origin},
                {"p_shifted", m.p_shifted},
                {"n_reps", m.n_reps}};
}

std::string cloud_to_csv(const PointCloud& cloud) {
    std::ostringstream out;
    for (int k = 1; k <= cloud.dim(); ++k) out << "x_" << k << ",";
    out << "mark\n";
    for (int i = 0; i < cloud.size(); ++i) {
        const auto loc = cloud.location(i);
        for (int k = 0; k < cloud.dim(); ++k) out << format_double(loc[k]) << ",";
        out << format_double(cloud.mark(i)) << "\n";
    }
    return out.str();
}

std::string vertices_to_csv(const GraphSample& g) {
    std::ostringstream out;
    out << "id,";
    for (int k = 1; k <= g.cloud.dim(); ++k) out << "x_" << k << ",";
    out << "mark,is_palm\n";
    for (int i = 0; i < g.cloud.size(); ++i) {
        out << i << ",";
        const auto loc = g.cloud.location(i);
        for (int k = 0; k < g.cloud.dim(); ++k) out << format_double(loc[k]) << ",";
        out << format_double(g.cloud.mark(i)) << ","
            << (g.palm_index && *g.palm_index == i ? 1 : 0) << "\n";
    }
    return out.str();
}

std::string edges_to_csv(const GraphSample& g) {
    std::ostringstream out;
    out << "id_a,id_b\n";
    for (auto [i, j] : g.edges) out << i << "," << j << "\n";
    return out.str();
}

json graph_envelope(const GraphSample& g, std::uint64_t master_seed) {
    json j;
    j["dimension"] = g.cloud.dim();
    j["model"] = model_to_json(g.prov.model);
    j["window"] = region_to_json(g.prov.window);
    j["lambda"] = g.prov.lambda;
    j["seed"] = master_seed;
    j["n_vertices"] = g.cloud.size();
    j["n_edges"] = g.edges.size();
    j["palm_index"] = g.palm_index ? json(*g.palm_index) : json(nullptr);
    return j;
}

std::string series_to_csv(const EstimateSeries& s) {
    std::ostringstream out;
    out << "alpha,p_hat,ci_lo,ci_hi,n_reps\n";
    for (std::size_t i = 0; i < s.alphas.size(); ++i) {
        const Estimate& e = s.rows[i];
        out << format_double(s.alphas[i]) << "," << format_double(e.p_hat) << ","
            << format_double(e.ci_lo) << "," << format_double(e.ci_hi) << "," << e.n_reps
            << "\n";
    }
    return out.str();
}

EstimateSeries series_from_csv(const std::string& text) {
    EstimateSeries s;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty series CSV");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields.size() != 5) throw std::invalid_argument("bad series CSV row: " + line);
        s.alphas.push_back(std::stod(fields[0]));
        Estimate e;
        e.p_hat = std::stod(fields[1]);
        e.ci_lo = std::stod(fields[2]);
        e.ci_hi = std::stod(fields[3]);
        e.n_reps = std::stoll(fields[4]);
        e.successes = static_cast<std::int64_t>(std::llround(e.p_hat * e.n_reps));
        s.rows.push_back(e);
    }
    return s;
}

std::string trials_to_csv(const std::vector<TrialRecord>& trials) {
    std::ostringstream out;
    out << "event,alpha,lambda,seed,outcome,censored\n";
    for (const auto& t : trials)
        out << t.event << "," << format_double(t.alpha) << "," << format_double(t.lambda)
            << "," << t.seed << "," << (t.outcome ? 1 : 0) << "," << (t.censored ? 1 : 0)
            << "\n";
    return out.str();
}

std::string phase_to_csv(const PhaseGrid& grid) {
    std::ostringstream out;
    out << grid.axis1.name << "," << grid.axis2.name << ",deff_gt2,deff_value,mu_bar,zeta\n";
    auto cell_field = [](const std::optional<double>& v) {
        if (!v) return std::string();
        if (std::isinf(*v)) return std::string("inf");
        return format_double(*v);
    };
    for (const auto& c : grid.cells) {
        out << format_double(c.p1) << "," << format_double(c.p2) << ",";
        if (c.cls.status == Classification::Status::no_closed_form) {
            out << ",,,\n";
            continue;
        }
        out << (c.cls.deff_gt2 ? (*c.cls.deff_gt2 ? "1" : "0") : "") << ","
            << cell_field(c.cls.deff_value) << "," << cell_field(c.cls.mu_bar) << ","
            << cell_field(c.cls.zeta) << "\n";
    }
    return out.str();
}

std::string phase_to_svg(const PhaseGrid& grid) {
    const int w = 640, h = 480, margin = 50;
    const double x0 = grid.axis1.min, x1 = grid.axis1.max;
    const double y0 = grid.axis2.min, y1 = grid.axis2.max;
    auto sx = [&](double v) {
        return margin + (v - x0) / std::max(1e-12, x1 - x0) * (w - 2 * margin);
    };
    auto sy = [&](double v) {
        return h - margin - (v - y0) / std::max(1e-12, y1 - y0) * (h - 2 * margin);
    };
    const double cw = (w - 2.0 * margin) / std::max(1, grid.axis1.steps);
    const double ch = (h - 2.0 * margin) / std::max(1, grid.axis2.steps);

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\">\n";
    for (const auto& c : grid.cells) {
        std::string fill = "#bdbdbd";
        if (c.cls.status == Classification::Status::ok && c.cls.deff_gt2)
            fill = *c.cls.deff_gt2 ? "#4caf50" : "#ef5350";
        out << "<rect x=\"" << sx(c.p1) - cw / 2 << "\" y=\"" << sy(c.p2) - ch / 2
            << "\" width=\"" << cw << "\" height=\"" << ch << "\" fill=\"" << fill
            << "\"/>\n";
    }
    if (!grid.boundary.empty()) {
        out << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"2\" points=\"";
        for (const auto& [bx, by] : grid.boundary) out << sx(bx) << "," << sy(by) << " ";
        out << "\"/>\n";
    }
    out << "<text x=\"" << w / 2 << "\" y=\"" << h - 10 << "\">" << grid.axis1.name
        << "</text>\n";
    out << "<text x=\"12\" y=\"" << h / 2 << "\" transform=\"rotate(-90 12," << h / 2
        << ")\">" << grid.axis2.name << "</text>\n";
    out << "</svg>\n";
    return out.str();
}

std::string tail_samples_to_csv(const std::vector<std::pair<double, bool>>& samples) {
    std::ostringstream out;
    out << "value,censored\n";
    for (const auto& [v, c] : samples)
        out << format_double(v) << "," << (c ? 1 : 0) << "\n";
    return out.str();
}

}  // namespace perclab
