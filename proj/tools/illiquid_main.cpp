// Command-line driver: solve the reduced ODE system, compute Merton
// benchmarks and the cost of liquidity, and cross-check with the
// event-driven Monte Carlo simulator.  One JSON config file per run.
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "illiquid/io.hpp"
#include "illiquid/merton.hpp"
#include "illiquid/model.hpp"
#include "illiquid/policy.hpp"
#include "illiquid/simulator.hpp"
#include "illiquid/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace illiquid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;
constexpr int kExitValidation = 3;

struct CliOptions {
    std::string config_path;
    std::string out_dir;
    std::string sweep_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> grid_points;
};

RunConfig load_and_override(const CliOptions& opt) {
    RunConfig cfg = load_run_config(opt.config_path);
    if (!opt.out_dir.empty()) cfg.output.directory = opt.out_dir;
    if (opt.seed) cfg.sim.seed = *opt.seed;
    if (opt.grid_points) cfg.grid.n_points = *opt.grid_points;
    return cfg;
}

void write_resolved_config(const RunConfig& cfg, const fs::path& dir) {
    std::ofstream out(dir / "resolved_config.json");
    out << run_config_to_json(cfg).dump(2) << "\n";
}

int cmd_validate(const CliOptions& opt) {
    RunConfig cfg = load_and_override(opt);
    ValidatedModel vm = validate_model(cfg.model, cfg.prefs);
    std::cout << "model ok: d=" << vm.d() << " k(p)=" << vm.growth_k()
              << " rho=" << vm.rho() << "\n";
    return kExitOk;
}

int cmd_merton(const CliOptions& opt) {
    RunConfig cfg = load_and_override(opt);
    ValidatedModel vm = validate_model(cfg.model, cfg.prefs);
    MertonSolution ms = merton_multi(vm, cfg.prefs);
    fs::create_directories(cfg.output.directory);
    json j = {{"phi_m", ms.phi_m}, {"pi_m", ms.pi_m}, {"c_m", ms.c_m},
              {"residual", ms.residual}};
    std::ofstream out(fs::path(cfg.output.directory) / "merton.json");
    out << j.dump(2) << "\n";
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_solve(const CliOptions& opt) {
    RunConfig cfg = load_and_override(opt);
    ValidatedModel vm = validate_model(cfg.model, cfg.prefs);
    fs::path dir(cfg.output.directory);
    fs::create_directories(dir);

    GridSolution sol;
    try {
        sol = solve_phi(vm, cfg.grid);
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    }
    PolicyTable pol = extract_policy(sol, cfg.prefs);
    write_phi_csv(sol, (dir / "phi.csv").string());
    write_policy_csv(pol, cfg.prefs, (dir / "policy.csv").string(),
                     (dir / "policy.json").string());
    write_convergence_json(sol, (dir / "convergence.json").string());
    write_resolved_config(cfg, dir);
    std::cout << "converged in " << sol.n_iter << " iterations, contraction ~ "
              << sol.contraction << "\n";
    return kExitOk;
}

json cost_row(const RunConfig& cfg) {
    ValidatedModel vm = validate_model(cfg.model, cfg.prefs);
    GridSolution sol = solve_phi(vm, cfg.grid);
    MertonSolution ms = merton_multi(vm, cfg.prefs);
    LiquidityCostReport rep = liquidity_cost(sol, ms, cfg.prefs);
    std::vector<double> max_phi(vm.d());
    for (int i = 0; i < vm.d(); ++i) {
        double s = sol.phi[i][0];
        for (double v : sol.phi[i]) s = std::max(s, v);
        max_phi[i] = s;
    }
    return {{"lambda", cfg.model.lambda},
            {"cost", rep.cost},
            {"phi_merton", ms.phi_m},
            {"max_phi", max_phi},
            {"n_iter", sol.n_iter}};
}

int cmd_cost(const CliOptions& opt) {
    RunConfig cfg = load_and_override(opt);
    fs::path dir(cfg.output.directory);
    fs::create_directories(dir);

    json rows = json::array();
    try {
        if (!opt.sweep_path.empty()) {
            std::ifstream in(opt.sweep_path);
            if (!in) throw ConfigError("cannot open sweep file: " + opt.sweep_path);
            json sweep;
            in >> sweep;
            for (const auto& lam : sweep.at("lambda")) {
                RunConfig c = cfg;
                c.model.lambda = lam.get<std::vector<double>>();
                rows.push_back(cost_row(c));
            }
        } else {
            rows.push_back(cost_row(cfg));
        }
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    }
    json j = {{"rows", rows}};
    std::ofstream out(dir / "cost.json");
    out << j.dump(2) << "\n";
    std::cout << j.dump(2) << "\n";
    write_resolved_config(cfg, dir);
    return kExitOk;
}

int cmd_simulate(const CliOptions& opt) {
    RunConfig cfg = load_and_override(opt);
    ValidatedModel vm = validate_model(cfg.model, cfg.prefs);
    fs::path dir(cfg.output.directory);
    fs::create_directories(dir);

    GridConfig grid_cfg = cfg.grid;
    const int trunc = cfg.sim.truncate_after_events;
    if (trunc > 0) grid_cfg.store_iterates = std::max(grid_cfg.store_iterates, trunc);

    GridSolution sol;
    try {
        sol = solve_phi(vm, grid_cfg);
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    }
    PolicyTable pol = extract_policy(sol, cfg.prefs);
    InitState init{0, 1.0, pol.pi_star[0]};

    bool hard_failure = false;
    json j;

    SimConfig val_cfg = cfg.sim;
    val_cfg.truncate_after_events = -1;
    SimResult res = simulate_value(vm, pol, init, val_cfg);
    const double vhat = best_value(sol, cfg.prefs, init.regime, init.r);
    j["value"] = sim_result_to_json(res);
    j["value"]["grid_vhat"] = vhat;
    if (std::abs(res.estimate - vhat) > 4.0 * res.std_err + res.tail_bound) hard_failure = true;
    if (res.diagnostics.short_sale > 0 || res.diagnostics.zero_wealth > 0) hard_failure = true;

    if (trunc > 0) {
        std::vector<PolicyTable> stages;
        for (int m = 0; m < trunc && m < static_cast<int>(sol.iterates.size()); ++m) {
            GridSolution snap;
            snap.z = sol.z;
            snap.phi = sol.iterates[m];
            snap.phi_u = sol.iterates_u[m];
            snap.converged = true;
            stages.push_back(extract_policy(snap, cfg.prefs));
        }
        SimResult tres = simulate_truncated(vm, stages, init, cfg.sim);
        const int n_avail = static_cast<int>(stages.size());
        const double target =
            crra_utility(init.r, vm.p()) * lerp_grid(sol.iterates[n_avail - 1][init.regime],
                                                     init.z);
        j["truncated"] = sim_result_to_json(tres);
        j["truncated"]["n_events"] = n_avail;
        j["truncated"]["grid_iterate_value"] = target;
        if (std::abs(tres.estimate - target) > 4.0 * tres.std_err) hard_failure = true;
    }

    SimConfig bcfg = cfg.sim;
    BoundaryReport brep = check_boundary_identity(vm, sol, init.regime, 1.0, bcfg);
    j["boundary_identity"] = {{"mc_mean", brep.mc_mean},
                              {"mc_std_err", brep.mc_std_err},
                              {"grid_value", brep.grid_value}};
    if (std::abs(brep.mc_mean - brep.grid_value) > 4.0 * brep.mc_std_err) hard_failure = true;

    SimConfig scfg = cfg.sim;
    scfg.n_paths = std::min<long>(cfg.sim.n_paths, 20000);
    SupermartingaleReport srep =
        check_supermartingale(vm, pol, init, {0.0, 1.0, 2.0, 5.0, 10.0}, scfg);
    j["supermartingale"] = {{"times", srep.times},
                            {"m", srep.m},
                            {"std_err", srep.std_err},
                            {"nonincreasing", srep.nonincreasing}};
    if (!srep.nonincreasing) hard_failure = true;

    if (cfg.output.trace_paths > 0) {
        std::ofstream tr(dir / "trace.csv");
        tr << "path,t,i,r,z,disc_util\n";
        tr << std::setprecision(10);
        simulate_trace(vm, pol, init, val_cfg, cfg.output.trace_paths,
                       [&](long path, double t, int i, double r, double z, double u) {
                           tr << path << "," << t << "," << i << "," << r << "," << z << ","
                              << u << "\n";
                       });
    }

    j["hard_failure"] = hard_failure;
    std::ofstream out(dir / "sim.json");
    out << j.dump(2) << "\n";
    write_resolved_config(cfg, dir);
    std::cout << j.dump(2) << "\n";
    return hard_failure ? kExitValidation : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Illiquid regime-switching investment/consumption solver"};
    app.require_subcommand(1);

    CliOptions opt;
    auto add_common = [&](CLI::App* sub, bool needs_config = true) {
        auto* c = sub->add_option("--config", opt.config_path, "JSON config file");
        if (needs_config) c->required();
        sub->add_option("--out", opt.out_dir, "output directory (overrides config)");
        sub->add_option("--seed", opt.seed, "RNG seed (overrides config)");
        sub->add_option("--grid-points", opt.grid_points, "grid size (overrides config)");
    };

    auto* v = app.add_subcommand("validate", "validate a model config");
    add_common(v);
    auto* m = app.add_subcommand("merton", "liquid benchmark values");
    add_common(m);
    auto* s = app.add_subcommand("solve", "solve the reduced ODE system");
    add_common(s);
    auto* c = app.add_subcommand("cost", "cost of liquidity (optionally a lambda sweep)");
    add_common(c);
    c->add_option("--sweep", opt.sweep_path, "JSON file with a list of lambda vectors");
    auto* sim = app.add_subcommand("simulate", "Monte Carlo cross-validation");
    add_common(sim);

    CLI11_PARSE(app, argc, argv);

    try {
        if (v->parsed()) return cmd_validate(opt);
        if (m->parsed()) return cmd_merton(opt);
        if (s->parsed()) return cmd_solve(opt);
        if (c->parsed()) return cmd_cost(opt);
        if (sim->parsed()) return cmd_simulate(opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ModelError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
