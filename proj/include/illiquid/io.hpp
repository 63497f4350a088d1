#ifndef ILLIQUID_IO_HPP
#define ILLIQUID_IO_HPP

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "illiquid/merton.hpp"
#include "illiquid/model.hpp"
#include "illiquid/policy.hpp"
#include "illiquid/simulator.hpp"
#include "illiquid/solver.hpp"

/// Run-configuration ingestion and file emission.  One JSON config file
/// per experiment, four sections: model, prefs, grid, sim (plus output).
namespace illiquid {

using nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OutputConfig {
    std::string directory = "out";
    int trace_paths = 0;  // per-path trace CSV, capped at 100 paths
};

struct RunConfig {
    MarketModel model;
    CrraParams prefs;
    GridConfig grid;
    SimConfig sim;
    OutputConfig output;
};

namespace detail {

template <class T>
T require(const json& j, const std::string& section, const std::string& field) {
    if (!j.contains(field))
        throw ConfigError(section + "." + field + ": required field missing");
    try {
        return j.at(field).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(section + "." + field + ": " + e.what());
    }
}

template <class T>
T optional(const json& j, const std::string& section, const std::string& field, T fallback) {
    if (!j.contains(field)) return fallback;
    try {
        return j.at(field).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(section + "." + field + ": " + e.what());
    }
}

}  // namespace detail

inline RunConfig parse_run_config(const json& j) {
    RunConfig cfg;
    if (!j.contains("model")) throw ConfigError("model: required section missing");
    if (!j.contains("prefs")) throw ConfigError("prefs: required section missing");
    const json& jm = j.at("model");
    cfg.model.d = detail::require<int>(jm, "model", "d");
    cfg.model.b = detail::require<std::vector<double>>(jm, "model", "b");
    cfg.model.sigma = detail::require<std::vector<double>>(jm, "model", "sigma");
    cfg.model.lambda = detail::require<std::vector<double>>(jm, "model", "lambda");
    if (cfg.model.d == 1) {
        cfg.model.q = detail::optional<std::vector<std::vector<double>>>(jm, "model", "q",
                                                                         {{0.0}});
        cfg.model.gamma = detail::optional<std::vector<std::vector<double>>>(jm, "model", "gamma",
                                                                             {{0.0}});
    } else {
        cfg.model.q = detail::require<std::vector<std::vector<double>>>(jm, "model", "q");
        cfg.model.gamma = detail::require<std::vector<std::vector<double>>>(jm, "model", "gamma");
    }

    const json& jp = j.at("prefs");
    cfg.prefs.p = detail::require<double>(jp, "prefs", "p");
    cfg.prefs.rho = detail::require<double>(jp, "prefs", "rho");

    const json jg = j.value("grid", json::object());
    cfg.grid.n_points = detail::optional<int>(jg, "grid", "n_points", cfg.grid.n_points);
    cfg.grid.tol_outer = detail::optional<double>(jg, "grid", "tol_outer", cfg.grid.tol_outer);
    cfg.grid.tol_inner = detail::optional<double>(jg, "grid", "tol_inner", cfg.grid.tol_inner);
    cfg.grid.max_outer = detail::optional<int>(jg, "grid", "max_outer", cfg.grid.max_outer);
    cfg.grid.max_inner = detail::optional<int>(jg, "grid", "max_inner", cfg.grid.max_inner);
    cfg.grid.floor_eps = detail::optional<double>(jg, "grid", "floor_eps", cfg.grid.floor_eps);
    cfg.grid.store_iterates =
        detail::optional<int>(jg, "grid", "store_iterates", cfg.grid.store_iterates);

    const json js = j.value("sim", json::object());
    cfg.sim.n_paths = detail::optional<long>(js, "sim", "n_paths", cfg.sim.n_paths);
    cfg.sim.horizon = detail::optional<double>(js, "sim", "horizon", cfg.sim.horizon);
    cfg.sim.dt = detail::optional<double>(js, "sim", "dt", cfg.sim.dt);
    cfg.sim.seed = detail::optional<std::uint64_t>(js, "sim", "seed", cfg.sim.seed);
    cfg.sim.truncate_after_events = detail::optional<int>(js, "sim", "truncate_after_events",
                                                          cfg.sim.truncate_after_events);

    const json jo = j.value("output", json::object());
    cfg.output.directory =
        detail::optional<std::string>(jo, "output", "directory", cfg.output.directory);
    cfg.output.trace_paths =
        detail::optional<int>(jo, "output", "trace_paths", cfg.output.trace_paths);
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_run_config(j);
}

inline json run_config_to_json(const RunConfig& cfg) {
    json j;
    j["model"] = {{"d", cfg.model.d},     {"b", cfg.model.b},
                  {"sigma", cfg.model.sigma}, {"lambda", cfg.model.lambda},
                  {"q", cfg.model.q},     {"gamma", cfg.model.gamma}};
    j["prefs"] = {{"p", cfg.prefs.p}, {"rho", cfg.prefs.rho}};
    j["grid"] = {{"n_points", cfg.grid.n_points},   {"tol_outer", cfg.grid.tol_outer},
                 {"tol_inner", cfg.grid.tol_inner}, {"max_outer", cfg.grid.max_outer},
                 {"max_inner", cfg.grid.max_inner}, {"floor_eps", cfg.grid.floor_eps},
                 {"store_iterates", cfg.grid.store_iterates}};
    j["sim"] = {{"n_paths", cfg.sim.n_paths},
                {"horizon", cfg.sim.horizon},
                {"dt", cfg.sim.dt},
                {"seed", cfg.sim.seed},
                {"truncate_after_events", cfg.sim.truncate_after_events}};
    j["output"] = {{"directory", cfg.output.directory}, {"trace_paths", cfg.output.trace_paths}};
    return j;
}

namespace detail {

inline std::string fmt17(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

}  // namespace detail

/// CSV: header z,phi_1,...,phi_d, one row per node, 17 significant digits.
inline void write_phi_csv(const GridSolution& sol, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "z";
    for (std::size_t i = 0; i < sol.phi.size(); ++i) out << ",phi_" << (i + 1);
    out << "\n";
    for (std::size_t k = 0; k < sol.z.size(); ++k) {
        out << detail::fmt17(sol.z[k]);
        for (const auto& phi : sol.phi) out << "," << detail::fmt17(phi[k]);
        out << "\n";
    }
}

/// CSV: header z,c_1,...,c_d plus a JSON sidecar with pi* and prefs.
inline void write_policy_csv(const PolicyTable& tab, const CrraParams& prefs,
                             const std::string& csv_path, const std::string& sidecar_path) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write " + csv_path);
    out << "z";
    for (std::size_t i = 0; i < tab.c_star.size(); ++i) out << ",c_" << (i + 1);
    out << "\n";
    for (std::size_t k = 0; k < tab.z.size(); ++k) {
        out << detail::fmt17(tab.z[k]);
        for (const auto& c : tab.c_star) out << "," << detail::fmt17(c[k]);
        out << "\n";
    }
    json side = {{"pi_star", tab.pi_star}, {"p", prefs.p}, {"rho", prefs.rho}};
    std::ofstream sc(sidecar_path);
    sc << side.dump(2) << "\n";
}

inline void write_convergence_json(const GridSolution& sol, const std::string& path) {
    json j = {{"iter", sol.n_iter},
              {"increment", sol.history.empty() ? 0.0 : sol.history.back()},
              {"history", sol.history},
              {"contraction_estimate", sol.contraction},
              {"converged", sol.converged}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

inline json sim_result_to_json(const SimResult& res) {
    return {{"estimate", res.estimate},
            {"std_err", res.std_err},
            {"n_paths", res.n_paths},
            {"tail_bound", res.tail_bound},
            {"diagnostics",
             {{"negative_wealth", res.diagnostics.negative_wealth},
              {"clamped_z", res.diagnostics.clamped_z},
              {"zero_wealth", res.diagnostics.zero_wealth},
              {"short_sale", res.diagnostics.short_sale}}}};
}

}  // namespace illiquid

#endif  // ILLIQUID_IO_HPP
