#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "critical_finder.hpp"
#include "domain.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "kirchhoff_routh.hpp"
#include "point_vortex.hpp"
#include "steady.hpp"

namespace krv::cli {

inline constexpr const char *version = "0.1.0";

enum ExitCode : int { ok = 0, input_error = 2, solver_error = 3 };

/// Flags shared by every subcommand.
struct Flags {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::optional<double> tol;
};

/// Files produced by a subcommand, kept in memory until the run is over.
struct Outputs {
    std::vector<std::pair<std::string, std::string>> files; // name, bytes
    void add(std::string name, std::string bytes) { files.emplace_back(std::move(name), std::move(bytes)); }
};

/// Raised by a subcommand that has partial results worth keeping (written with
/// an incomplete marker) before reporting the underlying solver error.
class PartialFailure : public SolverError {
  public:
    PartialFailure(const std::string &what, Outputs partial) : SolverError(what), partial_(std::move(partial)) {}
    const Outputs &partial() const { return partial_; }

  private:
    Outputs partial_;
};

namespace detail {

using io::json;

struct Context {
    json config;
    std::filesystem::path config_dir;
    Flags flags;
    std::uint64_t seed = 0;
};

inline const json &section(const json &j, const std::string &key) {
    static const json null_json;
    return j.contains(key) ? j.at(key) : null_json;
}

inline DomainModel domain_of(const Context &c) { return io::parse_domain(io::require(c.config, "domain")); }

inline std::vector<double> circulations_of(const json &j) { return io::as_reals(io::require(j, "circulations"), "circulations"); }

inline SearchConfig search_of(const Context &c) {
    SearchConfig sc = io::parse_search(section(c.config, "search"));
    sc.seed = c.seed;
    sc.threads = c.flags.threads;
    if (c.flags.tol) sc.newton_tol = *c.flags.tol;
    return sc;
}

inline std::string dump(const json &j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

inline Outputs green_eval(const Context &c) {
    const auto d = domain_of(c);
    const auto &pairs = io::require(c.config, "pairs");
    if (!pairs.is_array()) throw io::ConfigError("'pairs' must be an array of {x, y}");
    io::CsvWriter csv({"x1", "x2", "y1", "y2", "green", "regular_part", "green_grad_x1", "green_grad_x2", "robin_x"});
    for (const auto &p : pairs) {
        const Point2 x = io::as_point(io::require(p, "x"), "x"), y = io::as_point(io::require(p, "y"), "y");
        const Vec2 g = green_grad_x(d, x, y);
        csv.row(x.x1, x.x2, y.x1, y.x2, green(d, x, y), regular_part(d, x, y), g.v1, g.v2, robin(d, x));
    }
    Outputs out;
    out.add("green.csv", csv.finish(true));
    return out;
}

inline Outputs kr_eval(const Context &c) {
    const auto d = domain_of(c);
    const auto psi0 = io::parse_psi0(d, section(c.config, "psi0"));
    const auto cfg = io::parse_configuration(io::require(c.config, "configuration"));
    const double w = kr_value(d, cfg, psi0);
    io::CsvWriter csv({"value"});
    csv.row(w);
    Outputs out;
    out.add("kr_eval.csv", csv.finish(true));
    out.add("kr_eval.json", dump({{"value", w}, {"configuration", io::to_json(cfg)}}));
    return out;
}

inline Outputs kr_grad_cmd(const Context &c) {
    const auto d = domain_of(c);
    const auto psi0 = io::parse_psi0(d, section(c.config, "psi0"));
    const auto cfg = io::parse_configuration(io::require(c.config, "configuration"));
    const auto g = kr_grad(d, cfg, psi0);
    io::CsvWriter csv({"index", "x1", "x2", "kappa", "grad_x1", "grad_x2"});
    json arr = json::array();
    for (std::size_t i = 0; i < g.size(); ++i) {
        csv.row(i, cfg.points[i].x1, cfg.points[i].x2, cfg.circulations[i], g[i].v1, g[i].v2);
        arr.push_back({g[i].v1, g[i].v2});
    }
    Outputs out;
    out.add("kr_grad.csv", csv.finish(true));
    out.add("kr_grad.json", dump({{"gradient", arr}, {"gradient_norm", grad_norm(g)}}));
    return out;
}

inline Outputs crit_find(const Context &c) {
    const auto d = domain_of(c);
    const auto psi0 = io::parse_psi0(d, section(c.config, "psi0"));
    const auto kappa = circulations_of(c.config);
    const auto res = search_critical_points(d, kappa, psi0, search_of(c));
    io::CsvWriter csv({"point_index", "vortex_index", "x1", "x2", "kappa", "gradient_norm", "value", "classification"});
    json pts = json::array();
    for (std::size_t p = 0; p < res.points.size(); ++p) {
        const auto &cp = res.points[p];
        pts.push_back(io::to_json(cp));
        for (std::size_t i = 0; i < cp.configuration.size(); ++i)
            csv.row(p, i, cp.configuration.points[i].x1, cp.configuration.points[i].x2, cp.configuration.circulations[i],
                    cp.gradient_norm, cp.value, std::string(to_string(cp.classification)));
    }
    Outputs out;
    out.add("critical_points.json", dump({{"points", pts},
                                          {"starts", res.starts.size()},
                                          {"converged_starts", res.converged_starts()},
                                          {"seed", c.seed}}));
    out.add("critical_points.csv", csv.finish(true));
    return out;
}

inline Outputs nonexist_sweep(const Context &c) {
    const auto d = domain_of(c);
    const auto kappa = circulations_of(c.config);
    const auto &s = section(c.config, "sweep");
    const double delta0 = io::real_or(s, "delta0", 0.2);
    const int res = static_cast<int>(io::int_or(s, "resolution", 40));
    const auto rep = nonexistence_sweep(d, kappa, delta0, res, c.flags.threads);
    const double h1 = rep.grid_box.width() / res, h2 = rep.grid_box.height() / res;
    io::CsvWriter csv({"x1", "x2", "min_grad_norm"});
    for (int j = 0; j < res; ++j)
        for (int i = 0; i < res; ++i)
            csv.row(rep.grid_box.lo.x1 + (i + 0.5) * h1, rep.grid_box.lo.x2 + (j + 0.5) * h2,
                    rep.first_vortex_min[static_cast<std::size_t>(j) * res + i]);
    Outputs out;
    out.add("sweep.json", dump({{"resolution", rep.resolution},
                                {"delta0", rep.delta0},
                                {"grid_min_grad_norm", rep.grid_min_grad_norm},
                                {"min_grad_norm", rep.min_grad_norm},
                                {"argmin", io::to_json(rep.argmin)},
                                {"admissible_points", rep.admissible_points},
                                {"configurations", rep.configurations}}));
    out.add("sweep_grid.csv", csv.finish(true));
    return out;
}

inline std::string trajectory_csv(const Trajectory &tr, bool complete) {
    std::vector<std::string> header{"t", "W"};
    const std::size_t k = tr.states.empty() ? 0 : tr.states.front().size();
    for (std::size_t i = 0; i < k; ++i) {
        header.push_back("x1_" + std::to_string(i));
        header.push_back("x2_" + std::to_string(i));
    }
    io::CsvWriter csv(header);
    for (std::size_t s = 0; s < tr.size(); ++s) {
        std::vector<std::string> row{io::fmt(tr.times[s]), io::fmt(tr.hamiltonian_values[s])};
        for (const auto &p : tr.states[s].points) {
            row.push_back(io::fmt(p.x1));
            row.push_back(io::fmt(p.x2));
        }
        csv.row(row);
    }
    return csv.finish(complete);
}

inline Outputs pv_sim(const Context &c) {
    const auto d = domain_of(c);
    const auto psi0 = io::parse_psi0(d, section(c.config, "psi0"));
    const auto cfg = io::parse_configuration(io::require(c.config, "configuration"));
    const auto &p = section(c.config, "pv");
    const double T = io::as_real(io::require(p, "T"), "T");
    const double tol = c.flags.tol ? *c.flags.tol : io::real_or(p, "tol", 1e-10);
    IntegrationOptions opt;
    opt.backward = p.contains("backward") && p.at("backward").is_boolean() && p.at("backward").get<bool>();
    try {
        const auto tr = pv_integrate(d, cfg, psi0, T, tol, opt);
        Outputs out;
        out.add("trajectory.csv", trajectory_csv(tr, true));
        out.add("trajectory.json", dump({{"steps", tr.size() - 1}, {"max_hamiltonian_drift", tr.max_hamiltonian_drift()}}));
        return out;
    } catch (const CollisionStop &e) {
        Outputs partial;
        partial.add("trajectory.csv", trajectory_csv(e.partial(), false));
        throw PartialFailure(e.what(), std::move(partial));
    }
}

inline TurkingtonOptions turkington_of(const Context &c, const json &s) {
    TurkingtonOptions o;
    o.cells_per_eps = io::real_or(s, "cells_per_eps", o.cells_per_eps);
    o.max_iter = static_cast<int>(io::int_or(s, "max_iter", o.max_iter));
    o.threads = c.flags.threads;
    return o;
}

inline SteadySolution build_steady(const Context &c, const DomainModel &d, const HarmonicField &psi0) {
    const auto &s = io::require(c.config, "steady");
    const auto centers = io::as_points(io::require(s, "centers"), "centers");
    const auto kappa = circulations_of(s);
    const double eps = io::as_real(io::require(s, "epsilon"), "epsilon");
    const double delta = s.contains("delta") ? io::as_real(s.at("delta"), "delta")
                                             : default_ball_radius(d, centers, io::real_or(s, "delta0", 0.1));
    return turkington_iterate(d, centers, kappa, eps, delta, psi0, turkington_of(c, s));
}

inline json solution_json(const SteadySolution &sol) {
    json blobs = json::array();
    for (std::size_t i = 0; i < sol.blobs.size(); ++i) {
        blobs.push_back({{"center", {sol.ball_centers[i].x1, sol.ball_centers[i].x2}},
                         {"circulation", sol.circulations[i]},
                         {"lambda", sol.lambda[i]},
                         {"mu", sol.mu[i]},
                         {"achieved", sol.achieved[i]},
                         {"support_diameter", sol.support_diameter[i]},
                         {"centroid", {sol.centroids[i].x1, sol.centroids[i].x2}},
                         {"touches_ball", static_cast<bool>(sol.touches_ball[i])}});
    }
    return {{"epsilon", sol.epsilon},         {"delta", sol.delta},
            {"iterations", sol.iterations},   {"final_change", sol.final_change},
            {"fixed_point", sol.fixed_point}, {"converged", sol.converged()},
            {"blobs", blobs}};
}

inline Outputs steady_build(const Context &c) {
    const auto d = domain_of(c);
    const auto psi0 = io::parse_psi0(d, section(c.config, "psi0"));
    const auto sol = build_steady(c, d, psi0);
    Outputs out;
    for (std::size_t i = 0; i < sol.blobs.size(); ++i) {
        const auto &f = sol.blobs[i];
        const std::string stem = "blob_" + std::to_string(i);
        out.add(stem + ".bin", io::field_bytes(f));
        out.add(stem + ".json", dump({{"box", {f.box().lo.x1, f.box().lo.x2, f.box().hi.x1, f.box().hi.x2}},
                                      {"n1", f.n1()},
                                      {"n2", f.n2()},
                                      {"layout", "4 float64 box, 2 int64 n1 n2, n1*n2 float64 values (x1 fastest), "
                                                 "n1*n2 uint8 mask; native byte order"},
                                      {"blob_index", i},
                                      {"solution", solution_json(sol)}}));
    }
    out.add("steady.json", dump(solution_json(sol)));
    return out;
}

inline Outputs residual_cmd(const Context &c) {
    const auto d = domain_of(c);
    const auto psi0 = io::parse_psi0(d, section(c.config, "psi0"));
    const auto &r = section(c.config, "residual");
    std::vector<GridField> fields;
    std::vector<TestFunction> phis;
    if (r.contains("fields")) {
        for (const auto &p : r.at("fields")) {
            if (!p.is_string()) throw io::ConfigError("'fields' must list field file paths");
            std::filesystem::path path = p.get<std::string>();
            if (path.is_relative()) path = c.config_dir / path;
            fields.push_back(io::read_field(path));
        }
    } else {
        const auto sol = build_steady(c, d, psi0);
        fields = sol.blobs;
        for (const auto &ctr : sol.centroids) {
            TestFunction phi{ctr, 3.0 * sol.epsilon, 1.0};
            phi.radius = std::min(phi.radius, 0.9 * d.boundary_distance(ctr));
            phis.push_back(phi);
        }
    }
    if (r.contains("test_functions")) {
        phis.clear();
        for (const auto &t : r.at("test_functions"))
            phis.push_back({io::as_point(io::require(t, "center"), "center"), io::as_real(io::require(t, "radius"), "radius"),
                            io::real_or(t, "amplitude", 1.0)});
    }
    if (phis.empty()) throw io::ConfigError("no test functions: give 'residual.test_functions'");
    for (const auto &phi : phis) {
        if (!(phi.radius > 0.0)) throw InvalidArgument("test function radius must be positive");
        if (d.boundary_distance(phi.center) <= phi.radius || !d.contains(phi.center))
            throw InvalidArgument("test function support must lie inside the domain");
    }
    io::CsvWriter csv({"phi_index", "center_x1", "center_x2", "radius", "amplitude", "residual"});
    for (std::size_t i = 0; i < phis.size(); ++i)
        csv.row(i, phis[i].center.x1, phis[i].center.x2, phis[i].radius, phis[i].amplitude,
                weak_residual(fields, d, psi0, phis[i], c.flags.threads));
    Outputs out;
    out.add("residual.csv", csv.finish(true));
    return out;
}

inline Outputs concentrate(const Context &c) {
    const auto d = domain_of(c);
    const auto psi0 = io::parse_psi0(d, section(c.config, "psi0"));
    const auto &s = io::require(c.config, "concentrate");
    const auto kappa = circulations_of(s);
    const auto schedule = io::as_reals(io::require(s, "schedule"), "schedule");
    ConcentrationOptions opt;
    opt.turkington = turkington_of(c, s);
    opt.delta = io::real_or(s, "delta", 0.0);
    opt.test_radius_factor = io::real_or(s, "test_radius_factor", opt.test_radius_factor);
    if (s.contains("centers")) opt.centers = io::as_points(s.at("centers"), "centers");
    const auto tab = concentration_experiment(d, kappa, psi0, schedule, search_of(c), opt);

    io::CsvWriter csv({"epsilon", "lambda", "blob_index", "centroid_x1", "centroid_x2", "dist_to_critical", "residual",
                       "iterations", "converged"});
    json rows = json::array();
    for (const auto &r : tab.rows) {
        csv.row(r.epsilon, r.lambda, r.blob_index, r.centroid.x1, r.centroid.x2, r.dist_to_critical, r.residual,
                r.iterations, r.converged);
        rows.push_back({{"epsilon", r.epsilon},
                        {"blob_index", r.blob_index},
                        {"support_diameter", r.support_diameter},
                        {"mu", r.mu},
                        {"residual_scale", r.residual_scale},
                        {"centroid_grad_norm", r.centroid_grad_norm},
                        {"status", r.status}});
    }
    json info = {{"centers", io::to_json(tab.centers)}, {"delta", tab.delta}, {"seed", c.seed}, {"rows", rows}};
    info["critical_point"] = tab.critical_point ? io::to_json(*tab.critical_point) : json(nullptr);
    Outputs out;
    out.add("concentration.csv", csv.finish(true));
    out.add("concentration.json", dump(info));
    return out;
}

using Command = std::function<Outputs(const Context &)>;

inline const std::map<std::string, std::pair<Command, std::string>> &commands() {
    static const std::map<std::string, std::pair<Command, std::string>> table{
        {"green-eval", {green_eval, "G, h, grad_x G and H at point pairs"}},
        {"kr-eval", {kr_eval, "Kirchhoff-Routh value of a configuration"}},
        {"kr-grad", {kr_grad_cmd, "Kirchhoff-Routh gradient of a configuration"}},
        {"crit-find", {crit_find, "multi-start search for critical points"}},
        {"nonexist-sweep", {nonexist_sweep, "grid sweep of |grad W| in a convex domain"}},
        {"pv-sim", {pv_sim, "integrate the point-vortex system"}},
        {"steady-build", {steady_build, "build a steady vortex-patch solution"}},
        {"residual", {residual_cmd, "weak-form residual of patch fields"}},
        {"concentrate", {concentrate, "patch solutions along a shrinking epsilon schedule"}},
    };
    return table;
}

inline void write_outputs(const std::filesystem::path &dir, const Outputs &out, io::RunManifest &manifest) {
    std::filesystem::create_directories(dir);
    for (const auto &[name, bytes] : out.files) {
        io::write_atomic(dir / name, bytes);
        manifest.outputs.push_back(name);
    }
}

} // namespace detail

/// Runs one subcommand. Data goes to files under --out, diagnostics to `err`.
inline int run(int argc, const char *const *argv, std::ostream &err = std::cerr) {
    CLI::App app{"Point vortices, Kirchhoff-Routh critical points and steady vortex patches"};
    app.set_version_flag("--version", version);
    app.require_subcommand(1);
    Flags flags;
    std::uint64_t seed = 0;
    double tol = 0.0;
    for (const auto &[name, entry] : detail::commands()) {
        auto *sub = app.add_subcommand(name, entry.second);
        sub->add_option("--config", flags.config, "JSON configuration file")->required();
        sub->add_option("--out", flags.out, "output directory");
        sub->add_option("--seed", seed, "seed for multi-start searches");
        sub->add_option("--threads", flags.threads, "worker threads (0: all cores)");
        sub->add_option("--tol", tol, "tolerance override (Newton or integrator)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success &e) {
        return app.exit(e, err, err);
    } catch (const CLI::ParseError &e) {
        app.exit(e, err, err);
        return input_error;
    }

    const auto *sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (sub->count("--seed")) flags.seed = seed;
    if (sub->count("--tol")) {
        if (!(tol > 0.0)) {
            err << "krvortex " << sub->get_name() << ": invalid input: --tol must be positive\n";
            return input_error;
        }
        flags.tol = tol;
    }
    const auto start = std::chrono::steady_clock::now();

    io::RunManifest manifest;
    manifest.subcommand = name;
    manifest.config_path = flags.config;
    manifest.out_dir = flags.out;
    manifest.version = version;

    detail::Context ctx;
    ctx.flags = flags;
    auto finish = [&](const Outputs &out, int code, const std::string &status) {
        manifest.seed = ctx.seed;
        manifest.exit_code = code;
        manifest.status = status;
        detail::write_outputs(flags.out, out, manifest);
        manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        io::write_atomic(std::filesystem::path(flags.out) / "manifest.json", manifest.to_json().dump(2) + "\n");
    };

    try {
        ctx.config = io::read_json_file(flags.config);
        if (!ctx.config.is_object()) throw io::ConfigError("configuration must be a JSON object");
        ctx.config_dir = std::filesystem::path(flags.config).parent_path();
        ctx.seed = flags.seed ? *flags.seed
                              : static_cast<std::uint64_t>(io::int_or(ctx.config, "seed", 0));
        const Outputs out = detail::commands().at(name).first(ctx);
        finish(out, ok, "ok");
        return ok;
    } catch (const PartialFailure &e) {
        err << "krvortex " << name << ": " << e.what() << " (partial output written)\n";
        try {
            finish(e.partial(), solver_error, e.what());
        } catch (const std::exception &w) {
            err << "krvortex " << name << ": " << w.what() << "\n";
        }
        return solver_error;
    } catch (const InputError &e) {
        err << "krvortex " << name << ": invalid input: " << e.what() << "\n";
        return input_error;
    } catch (const SolverError &e) {
        err << "krvortex " << name << ": solver failure: " << e.what() << "\n";
        return solver_error;
    } catch (const io::json::exception &e) {
        err << "krvortex " << name << ": invalid input: " << e.what() << "\n";
        return input_error;
    } catch (const std::filesystem::filesystem_error &e) {
        err << "krvortex " << name << ": cannot write output: " << e.what() << "\n";
        return input_error;
    }
}

} // namespace krv::cli
