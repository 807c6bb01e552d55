#include "perclab/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "perclab/errors.hpp"
#include "perclab/io.hpp"

namespace perclab {

namespace {

constexpr const char* kVersion = "0.1.0";

struct CliArgs {
    std::string subcommand;
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_override;
    int threads = 0;  // 0 = library default
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

CliArgs parse_args(const std::vector<std::string>& args) {
    static const std::vector<std::string> subs = {"sample", "sweep",  "deff",   "phase",
                                                  "tail",   "mixing", "certify"};
    if (args.empty()) throw ConfigError("usage: perc-lab <subcommand> --config <path>");
    CliArgs out;
    out.subcommand = args[0];
    if (std::find(subs.begin(), subs.end(), out.subcommand) == subs.end())
        throw ConfigError("unknown subcommand '" + out.subcommand + "'");
    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string& a = args[i];
        auto next = [&]() -> const std::string& {
            if (i + 1 >= args.size()) throw ConfigError("flag " + a + " needs a value");
            return args[++i];
        };
        if (a == "--config")
            out.config_path = next();
        else if (a == "--out")
            out.out_dir = next();
        else if (a == "--seed")
            out.seed_override = std::stoull(next());
        else if (a == "--threads")
            out.threads = std::stoi(next());
        else
            throw ConfigError("unknown flag '" + a + "'");
    }
    if (out.config_path.empty()) throw ConfigError("--config <path> is required");
    return out;
}

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON config: ") + e.what());
    }
    // A manifest written by an earlier run re-runs its embedded config.
    if (j.is_object() && j.contains("config") && j.contains("meta"))
        return j.at("config");
    return j;
}

std::vector<double> parse_alpha_grid(const json& j) {
    if (j.is_array()) {
        auto grid = j.get<std::vector<double>>();
        if (grid.size() < 1) throw ConfigError("alpha_grid must not be empty");
        return grid;
    }
    check_keys(j, {"min", "max", "factor"}, {}, "alpha_grid");
    const double lo = j.at("min").get<double>();
    const double hi = j.at("max").get<double>();
    const double factor = j.at("factor").get<double>();
    if (!(lo > 1.0 && hi >= lo && factor > 1.0))
        throw ConfigError("alpha_grid needs 1 < min <= max and factor > 1");
    std::vector<double> grid;
    for (double a = lo; a <= hi * (1.0 + 1e-12); a *= factor) grid.push_back(a);
    return grid;
}

EventSpec::Kind parse_event_kind(const std::string& name) {
    if (name == "G") return EventSpec::Kind::G;
    if (name == "Gprime") return EventSpec::Kind::Gprime;
    if (name == "H") return EventSpec::Kind::H;
    if (name == "F") return EventSpec::Kind::F;
    if (name == "E") return EventSpec::Kind::E;
    throw ConfigError("unknown event type '" + name + "'");
}

struct RunContext {
    json config;
    std::string out_dir;
    std::uint64_t seed = 0;
    int dim = 0;
    std::vector<std::pair<std::string, std::string>> outputs;  // name -> path

    void emit(const std::string& name, const std::string& content) {
        const std::string path =
            (std::filesystem::path(out_dir) / name).string();
        atomic_write_text(path, content);
        outputs.emplace_back(name, path);
    }
};

// For interference models the annealed phi depends on the environment
// intensity; runs that also sample a process tie the two together unless the
// config pins lambda_env explicitly.
ModelSpec model_for_run(const json& config, int dim, std::optional<double> lambda) {
    const json& mj = config.at("model");
    ModelSpec m = model_from_json(mj, dim);
    if (m.family == ModelSpec::Family::interference && lambda && !mj.contains("lambda_env"))
        m.lambda_env = *lambda;
    return m;
}

WindowPolicy policy_for_run(const json& config) {
    if (!config.contains("policy")) return {};
    return policy_from_json(config.at("policy"));
}

void run_sample(RunContext& ctx) {
    check_keys(ctx.config, {"model", "dimension", "seed", "window", "lambda"},
               {"palm", "policy", "cloud_only", "threads"}, "sample config");
    const double lambda = ctx.config.at("lambda").get<double>();
    const ModelSpec model = model_for_run(ctx.config, ctx.dim, lambda);
    const Region window = region_from_json(ctx.config.at("window"));
    const WindowPolicy policy = policy_for_run(ctx.config);
    RngStream rng = RngStream::root(ctx.seed);

    if (ctx.config.value("cloud_only", false)) {
        SamplingOptions opts{policy.cell_side, policy.max_expected_points};
        const PointCloud cloud = sample_poisson(window, lambda, rng.child("cloud"), opts);
        ctx.emit("cloud.csv", cloud_to_csv(cloud));
        json env;
        env["dimension"] = cloud.dim();
        env["region"] = region_to_json(window);
        env["lambda"] = lambda;
        env["seed"] = ctx.seed;
        env["n_points"] = cloud.size();
        ctx.emit("cloud.json", env.dump(2) + "\n");
        return;
    }

    const bool palm = ctx.config.value("palm", false);
    const GraphSample g = palm ? sample_palm(model, window, lambda, rng, policy)
                               : sample_graph(model, window, lambda, rng, policy);
    ctx.emit("vertices.csv", vertices_to_csv(g));
    ctx.emit("edges.csv", edges_to_csv(g));
    ctx.emit("graph.json", graph_envelope(g, ctx.seed).dump(2) + "\n");
}

void run_sweep(RunContext& ctx) {
    check_keys(ctx.config, {"model", "dimension", "seed", "event", "alpha_grid", "lambda",
                            "n_reps"},
               {"policy", "write_trials", "level", "threads", "truncation_factor"},
               "sweep config");
    check_keys(ctx.config.at("event"), {"type"}, {}, "event");
    const double lambda = ctx.config.at("lambda").get<double>();
    const ModelSpec model = model_for_run(ctx.config, ctx.dim, lambda);
    const auto grid = parse_alpha_grid(ctx.config.at("alpha_grid"));
    const auto kind = parse_event_kind(ctx.config.at("event").at("type").get<std::string>());
    const std::int64_t n_reps = ctx.config.at("n_reps").get<std::int64_t>();
    const WindowPolicy policy = policy_for_run(ctx.config);
    EstimateOptions opts;
    opts.level = ctx.config.value("level", 0.95);
    opts.record_trials = ctx.config.value("write_trials", false);
    opts.h_truncation_factor =
        ctx.config.value("truncation_factor", opts.h_truncation_factor);
    opts.e_truncation_factor = opts.h_truncation_factor;

    std::vector<TrialRecord> trials;
    RngStream rng = RngStream::root(ctx.seed);
    const EstimateSeries series = sweep(model, kind, grid, lambda, n_reps,
                                        rng.child("sweep"), policy, opts,
                                        opts.record_trials ? &trials : nullptr);
    ctx.emit("series.csv", series_to_csv(series));
    if (opts.record_trials) ctx.emit("trials.csv", trials_to_csv(trials));
    if (!series.neglected_tail.empty()) {
        json diag;
        diag["alpha"] = series.alphas;
        diag["neglected_tail"] = series.neglected_tail;
        ctx.emit("h_truncation.json", diag.dump(2) + "\n");
    }
}

void run_deff(RunContext& ctx) {
    check_keys(ctx.config, {"model", "dimension", "seed"},
               {"mu_sequence", "n_grid", "threads"}, "deff config");
    const ModelSpec model = model_for_run(ctx.config, ctx.dim, std::nullopt);
    std::vector<double> mu_seq{0.08, 0.04, 0.02};
    if (ctx.config.contains("mu_sequence"))
        mu_seq = ctx.config.at("mu_sequence").get<std::vector<double>>();
    NGrid grid;
    if (ctx.config.contains("n_grid")) {
        const json& gj = ctx.config.at("n_grid");
        check_keys(gj, {}, {"min", "max", "points"}, "n_grid");
        grid.n_min = gj.value("min", grid.n_min);
        grid.n_max = gj.value("max", grid.n_max);
        grid.points = gj.value("points", grid.points);
    }
    const DeffReport report = deff_estimate(model, mu_seq, grid);
    ctx.emit("deff.json", deff_report_to_json(report).dump(2) + "\n");
}

void run_phase(RunContext& ctx) {
    check_keys(ctx.config, {"model_family", "dimension", "seed", "axis1", "axis2"},
               {"fixed", "svg", "threads"}, "phase config");
    const std::string family_name = ctx.config.at("model_family").get<std::string>();
    ModelSpec::Family family;
    if (family_name == "wdrcm")
        family = ModelSpec::Family::wdrcm;
    else if (family_name == "interference")
        family = ModelSpec::Family::interference;
    else
        throw ConfigError("unknown model_family '" + family_name + "'");

    auto parse_axis = [](const json& j, const std::string& ctx_name) {
        check_keys(j, {"name", "min", "max", "steps"}, {}, ctx_name);
        PhaseAxis ax;
        ax.name = j.at("name").get<std::string>();
        ax.min = j.at("min").get<double>();
        ax.max = j.at("max").get<double>();
        ax.steps = j.at("steps").get<int>();
        return ax;
    };
    const PhaseAxis axis1 = parse_axis(ctx.config.at("axis1"), "axis1");
    const PhaseAxis axis2 = parse_axis(ctx.config.at("axis2"), "axis2");
    std::map<std::string, double> fixed;
    if (ctx.config.contains("fixed"))
        for (auto it = ctx.config.at("fixed").begin(); it != ctx.config.at("fixed").end();
             ++it)
            fixed[it.key()] = it.value().get<double>();

    const PhaseGrid grid = phase_grid(family, axis1, axis2, fixed, ctx.dim);
    ctx.emit("phase.csv", phase_to_csv(grid));
    if (ctx.config.value("svg", false)) ctx.emit("phase.svg", phase_to_svg(grid));
}

void run_tail(RunContext& ctx) {
    check_keys(ctx.config, {"model", "dimension", "seed", "lambda", "n_reps", "k",
                            "window_radius"},
               {"policy", "statistic", "censored_cap", "threads"}, "tail config");
    const double lambda = ctx.config.at("lambda").get<double>();
    const ModelSpec model = model_for_run(ctx.config, ctx.dim, lambda);
    const std::int64_t n_reps = ctx.config.at("n_reps").get<std::int64_t>();
    const int k = ctx.config.at("k").get<int>();
    const double radius = ctx.config.at("window_radius").get<double>();
    const std::string stat = ctx.config.value("statistic", std::string("M"));
    if (stat != "M" && stat != "N") throw ConfigError("statistic must be 'M' or 'N'");
    const WindowPolicy policy = policy_for_run(ctx.config);
    const Region window = Region::ball(std::vector<double>(ctx.dim, 0.0), radius);

    std::vector<std::pair<double, bool>> samples(n_reps);
    RngStream rng = RngStream::root(ctx.seed).child("tail");
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t r = 0; r < n_reps; ++r) {
        const GraphSample g = sample_palm(model, window, lambda,
                                          rng.child(static_cast<std::uint64_t>(r)), policy);
        const ClusterStats stats = palm_statistics(g, policy.interaction_scale);
        samples[r] = {stat == "M" ? stats.diameter_pow : static_cast<double>(stats.size),
                      stats.censored};
    }
    ctx.emit("samples.csv", tail_samples_to_csv(samples));
    const TailReport report =
        tail_exponent(samples, k, ctx.config.value("censored_cap", 0.2));
    ctx.emit("tail.json", tail_report_to_json(report).dump(2) + "\n");
}

void run_mixing(RunContext& ctx) {
    check_keys(ctx.config, {"model", "dimension", "seed", "alpha", "separation_factor",
                            "lambda", "n_reps"},
               {"policy", "threads"}, "mixing config");
    const double lambda = ctx.config.at("lambda").get<double>();
    const ModelSpec model = model_for_run(ctx.config, ctx.dim, lambda);
    const double alpha = ctx.config.at("alpha").get<double>();
    const double sep_factor = ctx.config.at("separation_factor").get<double>();
    const double separation = sep_factor * std::pow(alpha, 1.0 / ctx.dim);
    const MixingResult res =
        mixing_cov(model, alpha, separation, lambda,
                   ctx.config.at("n_reps").get<std::int64_t>(),
                   RngStream::root(ctx.seed), policy_for_run(ctx.config));
    ctx.emit("mixing.json", mixing_to_json(res).dump(2) + "\n");
}

void run_certify(RunContext& ctx) {
    check_keys(ctx.config, {"model", "dimension", "seed", "alpha_base", "decades", "lambda",
                            "n_reps", "C2"},
               {"policy", "decay_exp", "threads"}, "certify config");
    const double lambda = ctx.config.at("lambda").get<double>();
    const ModelSpec model = model_for_run(ctx.config, ctx.dim, lambda);
    const double alpha_base = ctx.config.at("alpha_base").get<double>();
    const int decades = ctx.config.at("decades").get<int>();
    if (decades < 1) throw ConfigError("certify needs at least one decade");
    const double c2 = ctx.config.at("C2").get<double>();

    double decay_exp;
    if (ctx.config.contains("decay_exp")) {
        decay_exp = ctx.config.at("decay_exp").get<double>();
    } else {
        const Classification cls = analytic_classify(model);
        if (cls.status != Classification::Status::ok || !cls.mu_bar || !cls.zeta)
            throw ConfigError(
                "no analytic decay exponent for this model; set decay_exp explicitly");
        decay_exp = std::min(*cls.mu_bar, *cls.zeta);
        if (std::isinf(decay_exp))
            throw ConfigError("analytic decay exponent is infinite; set decay_exp");
    }

    std::vector<double> grid;
    const double ratio = std::pow(10.0, ctx.dim);
    for (int i = 0; i <= decades; ++i) grid.push_back(alpha_base * std::pow(ratio, i));
    RngStream rng = RngStream::root(ctx.seed);
    const EstimateSeries series =
        sweep(model, EventSpec::Kind::G, grid, lambda,
              ctx.config.at("n_reps").get<std::int64_t>(), rng.child("sweep"),
              policy_for_run(ctx.config));
    ctx.emit("series.csv", series_to_csv(series));
    const CertificateVerdict verdict = multiscale_certificate(series, lambda, decay_exp, c2);
    ctx.emit("certificate.json", certificate_to_json(verdict).dump(2) + "\n");
}

}  // namespace

int cli_run(const std::vector<std::string>& args) {
    CliArgs cli;
    RunContext ctx;
    const auto start = std::chrono::steady_clock::now();
    try {
        cli = parse_args(args);
        ctx.config = load_config(cli.config_path);
        if (!ctx.config.is_object()) throw ConfigError("config must be a JSON object");
        if (cli.threads > 0) {
#ifdef _OPENMP
            omp_set_num_threads(cli.threads);
#endif
        } else if (ctx.config.contains("threads")) {
#ifdef _OPENMP
            omp_set_num_threads(ctx.config.at("threads").get<int>());
#endif
        }
        ctx.out_dir = cli.out_dir;
        std::filesystem::create_directories(ctx.out_dir);
        if (!ctx.config.contains("dimension") || !ctx.config.contains("seed"))
            throw ConfigError("config needs 'dimension' and 'seed'");
        ctx.dim = ctx.config.at("dimension").get<int>();
        if (ctx.dim < 1 || ctx.dim > 8) throw ConfigError("dimension must be in [1, 8]");
        ctx.seed = cli.seed_override ? *cli.seed_override
                                     : ctx.config.at("seed").get<std::uint64_t>();
        ctx.config["seed"] = ctx.seed;

        if (cli.subcommand == "sample")
            run_sample(ctx);
        else if (cli.subcommand == "sweep")
            run_sweep(ctx);
        else if (cli.subcommand == "deff")
            run_deff(ctx);
        else if (cli.subcommand == "phase")
            run_phase(ctx);
        else if (cli.subcommand == "tail")
            run_tail(ctx);
        else if (cli.subcommand == "mixing")
            run_mixing(ctx);
        else if (cli.subcommand == "certify")
            run_certify(ctx);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json manifest;
    manifest["config"] = ctx.config;
    json meta;
    meta["tool"] = "perc-lab";
    meta["version"] = kVersion;
    meta["command"] = cli.subcommand;
    meta["seed"] = ctx.seed;
#ifdef _OPENMP
    meta["threads"] = omp_get_max_threads();
#else
    meta["threads"] = 1;
#endif
    meta["wall_seconds"] = wall;
    json outs = json::object();
    for (const auto& [name, path] : ctx.outputs) outs[name] = path;
    meta["outputs"] = outs;
    manifest["meta"] = meta;
    try {
        atomic_write_text((std::filesystem::path(ctx.out_dir) / "manifest.json").string(),
                          manifest.dump(2) + "\n");
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace perclab
