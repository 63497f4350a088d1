#ifndef ILLIQUID_SIMULATOR_HPP
#define ILLIQUID_SIMULATOR_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "illiquid/model.hpp"
#include "illiquid/policy.hpp"
#include "illiquid/solver.hpp"

/// Event-driven Monte Carlo of the controlled regime-switching
/// jump-diffusion.  Regime switches and trading times are simulated
/// exactly by competing exponential clocks (all rates are constant
/// between events); only the continuous (R,Z) dynamics between events use
/// Euler-Maruyama steps.
namespace illiquid {

struct SimConfig {
    long n_paths = 10000;
    double horizon = 60.0;
    double dt = 1e-3;
    std::uint64_t seed = 0;
    int truncate_after_events = -1;  // <0: no truncation
};

struct SimDiagnostics {
    long negative_wealth = 0;  // Euler step drove R < 0; path rejected
    long clamped_z = 0;        // Z pushed outside [0,1] by Euler noise
    long zero_wealth = 0;      // paths that hit R == 0 exactly
    long short_sale = 0;       // X or Y below -1e-12 * R at some step
};

struct SimResult {
    double estimate = 0.0;
    double std_err = 0.0;
    long n_paths = 0;
    double tail_bound = 0.0;  // analytic bound on the horizon-truncation error
    SimDiagnostics diagnostics;
};

struct InitState {
    int regime = 0;
    double r = 1.0;
    double z = 0.0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Per-path RNG stream derived from (seed, path index) so parallel and
/// serial runs agree bitwise.
inline std::mt19937_64 path_rng(std::uint64_t seed, long path) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(path) + 1)));
}

/// Fixed-order pairwise sum: deterministic regardless of scheduling.
inline double pairwise_sum(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
    if (hi - lo <= 8) {
        double s = 0.0;
        for (std::size_t k = lo; k < hi; ++k) s += v[k];
        return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

inline double pairwise_mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : pairwise_sum(v, 0, v.size()) / static_cast<double>(v.size());
}

/// Growth-condition constant: C = ((1-p)/(rho-k))^{1-p} / p, the minimal
/// scale making C (x+y)^p a supersolution of the CRRA problem.
inline double growth_constant(const ValidatedModel& vm) {
    const double p = vm.p();
    return std::pow((1.0 - p) / (vm.rho() - vm.growth_k()), 1.0 - p) / p;
}

struct PathAccumulator {
    double util = 0.0;
    bool rejected = false;
};

/// Simulates one path up to the horizon.  `policy_for_stage` maps the
/// number of events seen so far to the consumption policy in force, and
/// `target_for_stage` to the table whose pi* is used at a trading event;
/// `stop_after` ends utility accrual (and the path) at that event count.
struct NoTrace {
    void operator()(double, int, double, double, double) const {}
};

template <class StagePolicy, class StageTarget, class Tracer = NoTrace>
inline PathAccumulator run_path(const ValidatedModel& vm, StagePolicy&& policy_for_stage,
                                StageTarget&& target_for_stage, const InitState& init,
                                const SimConfig& cfg, int stop_after, SimDiagnostics& diag,
                                std::mt19937_64& rng, Tracer&& trace = Tracer{}) {
    const MarketModel& mdl = vm.market();
    const double p = vm.p();
    const double rho = vm.rho();
    const double edt = std::exp(-rho * cfg.dt);

    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);

    PathAccumulator acc;
    double t = 0.0, disc = 1.0;
    int i = init.regime;
    double r = init.r, z = init.z;
    int events = 0;
    bool accrue = stop_after != 0;

    while (t < cfg.horizon) {
        double q_total = 0.0;
        for (int j = 0; j < mdl.d; ++j)
            if (j != i) q_total += mdl.q[i][j];
        const double rate = mdl.lambda[i] + q_total;
        const double tau = expo(rng) / rate;
        const double t_event = std::min(t + tau, cfg.horizon);

        const PolicyTable* pol = policy_for_stage(events);
        const auto& c_tab = pol->c_star[i];
        const double b_i = mdl.b[i], s_i = mdl.sigma[i];

        while (t < t_event) {
            const double h = std::min(cfg.dt, t_event - t);
            const bool full = h == cfg.dt;
            const double c_rate = accrue ? lerp_grid(c_tab, z) : 0.0;
            if (accrue && c_rate > 0.0 && r > 0.0)
                acc.util += disc * crra_utility(r * c_rate, p) * h;

            const double dw = std::sqrt(h) * normal(rng);
            const double r_new = r + r * z * (b_i * h + s_i * dw) - r * c_rate * h;
            double z_new =
                z + z * (1.0 - z) * ((b_i - z * s_i * s_i) * h + s_i * dw) + z * c_rate * h;
            if (r_new < 0.0) {
                ++diag.negative_wealth;
                acc.rejected = true;
                return acc;
            }
            if (z_new < 0.0 || z_new > 1.0) {
                ++diag.clamped_z;
                z_new = z_new < 0.0 ? 0.0 : 1.0;
            }
            r = r_new;
            z = z_new;
            if (r == 0.0 && init.r > 0.0) ++diag.zero_wealth;
            // no-short-sale check in original variables
            if (r * (1.0 - z) < -1e-12 * r || r * z < -1e-12 * r) ++diag.short_sale;
            t += h;
            disc *= full ? edt : std::exp(-rho * h);
            trace(t, i, r, z, acc.util);
        }

        if (t_event >= cfg.horizon) break;
        // an event fired: trading time with prob lambda_i/rate, else switch
        const double u = unif(rng) * rate;
        if (u < mdl.lambda[i]) {
            z = target_for_stage(events)->pi_star[i];
        } else {
            double acc_rate = mdl.lambda[i];
            int j_to = -1;
            for (int j = 0; j < mdl.d; ++j) {
                if (j == i || mdl.q[i][j] <= 0.0) continue;
                j_to = j;  // fallback under roundoff: last reachable regime
                acc_rate += mdl.q[i][j];
                if (u < acc_rate) break;
            }
            const double g = mdl.gamma[i][j_to];
            const double z_minus = z;
            r *= 1.0 - g * z_minus;
            z = z_minus * (1.0 - g) / (1.0 - g * z_minus);
            i = j_to;
        }
        ++events;
        if (stop_after >= 0 && events >= stop_after) {
            accrue = false;
            break;  // utility can no longer accrue
        }
    }
    return acc;
}

inline SimResult summarize(const std::vector<double>& utils, const ValidatedModel& vm,
                           const InitState& init, const SimConfig& cfg, SimDiagnostics diag) {
    SimResult res;
    res.n_paths = static_cast<long>(utils.size());
    res.diagnostics = diag;
    res.estimate = pairwise_mean(utils);
    double ss = 0.0;
    for (double u : utils) ss += (u - res.estimate) * (u - res.estimate);
    if (utils.size() > 1)
        res.std_err = std::sqrt(ss / (static_cast<double>(utils.size()) - 1.0) /
                                static_cast<double>(utils.size()));
    res.tail_bound = growth_constant(vm) *
                     std::exp(-(vm.rho() - vm.growth_k()) * cfg.horizon) *
                     std::pow(init.r, vm.p());
    return res;
}

}  // namespace detail

/// Mean discounted utility under a fixed feedback policy.
inline SimResult simulate_value(const ValidatedModel& vm, const PolicyTable& policy,
                                const InitState& init, const SimConfig& cfg) {
    SimDiagnostics diag;
    std::vector<double> utils;
    utils.reserve(cfg.n_paths);
    for (long path = 0; path < cfg.n_paths; ++path) {
        auto rng = detail::path_rng(cfg.seed, path);
        auto same = [&](int) { return &policy; };
        auto acc = detail::run_path(vm, same, same, init, cfg, cfg.truncate_after_events, diag,
                                    rng);
        if (!acc.rejected) utils.push_back(acc.util);
    }
    return detail::summarize(utils, vm, init, cfg, diag);
}

/// Re-runs the first few paths (same streams as simulate_value) invoking
/// `trace(t, i, r, z, disc_util)` after every Euler step.  Debug aid,
/// capped at 100 paths.
template <class Tracer>
inline void simulate_trace(const ValidatedModel& vm, const PolicyTable& policy,
                           const InitState& init, const SimConfig& cfg, long n_trace_paths,
                           Tracer&& trace) {
    SimDiagnostics diag;
    const long n = std::min<long>(std::min<long>(n_trace_paths, cfg.n_paths), 100);
    for (long path = 0; path < n; ++path) {
        auto rng = detail::path_rng(cfg.seed, path);
        auto same = [&](int) { return &policy; };
        detail::run_path(vm, same, same, init, cfg, cfg.truncate_after_events, diag, rng,
                         [&](double t, int i, double r, double z, double u) {
                             trace(path, t, i, r, z, u);
                         });
    }
}

/// Value with consumption stopped at the n-th event, matching the n-th
/// outer iterate of the solver.  stage_policies[m-1] must be the policy
/// extracted from iterate phi^m; with s events already seen and n-s
/// events remaining, consumption follows iterate n-s and the rebalancing
/// target at the next trading time follows iterate n-s-1.
inline SimResult simulate_truncated(const ValidatedModel& vm,
                                    const std::vector<PolicyTable>& stage_policies,
                                    const InitState& init, const SimConfig& cfg) {
    const int n = static_cast<int>(stage_policies.size());
    SimDiagnostics diag;
    std::vector<double> utils;
    utils.reserve(cfg.n_paths);
    for (long path = 0; path < cfg.n_paths; ++path) {
        auto rng = detail::path_rng(cfg.seed, path);
        auto consumption = [&](int events) {
            return &stage_policies[std::max(n - events - 1, 0)];  // iterate n-events
        };
        auto target = [&](int events) {
            // the sup is frozen one iterate earlier, i.e. iterate n-events-1;
            // when that is iterate 0 the path ends at this event anyway
            return &stage_policies[std::max(n - events - 2, 0)];
        };
        auto acc = detail::run_path(vm, consumption, target, init, cfg, n, diag, rng);
        if (!acc.rejected) utils.push_back(acc.util);
    }
    return detail::summarize(utils, vm, init, cfg, diag);
}

struct BoundaryReport {
    double mc_mean = 0.0;
    double mc_std_err = 0.0;
    double grid_value = 0.0;  // v_i(0,y) from the grid solution
};

/// Probabilistic boundary identity at x = 0: with no cash the only
/// admissible consumption is zero until the first trading time tau_1, so
///   v_i(0,y) = E[ e^{-rho tau_1} vhat_{I_tau1}(y S_tau1 / S_0) ].
/// The regime chain and the lognormal stock growth between events are
/// simulated exactly (no Euler error).
inline BoundaryReport check_boundary_identity(const ValidatedModel& vm, const GridSolution& sol,
                                              int init_regime, double y, const SimConfig& cfg) {
    const MarketModel& mdl = vm.market();
    const CrraParams prefs{vm.p(), vm.rho()};

    std::vector<double> vals;
    vals.reserve(cfg.n_paths);
    for (long path = 0; path < cfg.n_paths; ++path) {
        auto rng = detail::path_rng(cfg.seed, path);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::exponential_distribution<double> expo(1.0);

        double t = 0.0, stock = y;
        int i = init_regime;
        for (;;) {
            double q_total = 0.0;
            for (int j = 0; j < mdl.d; ++j)
                if (j != i) q_total += mdl.q[i][j];
            const double rate = mdl.lambda[i] + q_total;
            const double tau = expo(rng) / rate;
            // exact lognormal growth over the inter-event interval
            stock *= std::exp((mdl.b[i] - 0.5 * mdl.sigma[i] * mdl.sigma[i]) * tau +
                              mdl.sigma[i] * std::sqrt(tau) * normal(rng));
            t += tau;
            const double u = unif(rng) * rate;
            if (u < mdl.lambda[i]) {
                vals.push_back(std::exp(-vm.rho() * t) * best_value(sol, prefs, i, stock));
                break;
            }
            double acc_rate = mdl.lambda[i];
            int j_to = i;
            for (int j = 0; j < mdl.d; ++j) {
                if (j == i) continue;
                acc_rate += mdl.q[i][j];
                if (u < acc_rate) {
                    j_to = j;
                    break;
                }
            }
            stock *= 1.0 - mdl.gamma[i][j_to];
            i = j_to;
        }
    }
    BoundaryReport rep;
    rep.mc_mean = detail::pairwise_mean(vals);
    double ss = 0.0;
    for (double v : vals) ss += (v - rep.mc_mean) * (v - rep.mc_mean);
    rep.mc_std_err = std::sqrt(ss / (static_cast<double>(vals.size()) - 1.0) /
                               static_cast<double>(vals.size()));
    rep.grid_value = value_at(sol, prefs, init_regime, 0.0, y);
    return rep;
}

struct SupermartingaleReport {
    std::vector<double> times;
    std::vector<double> m;       // E[e^{-k(p) t} R_t^p]
    std::vector<double> std_err;
    bool nonincreasing = true;   // within 2 std-err slack between samples
};

/// Estimates m(t) = E[e^{-k(p)t} R_t^p] along paths driven by the given
/// policy and checks monotone decrease up to Monte Carlo slack.
inline SupermartingaleReport check_supermartingale(const ValidatedModel& vm,
                                                   const PolicyTable& policy,
                                                   const InitState& init,
                                                   const std::vector<double>& times,
                                                   const SimConfig& cfg) {
    const MarketModel& mdl = vm.market();
    const double p = vm.p();
    const double k = vm.growth_k();
    const std::size_t nt = times.size();
    std::vector<std::vector<double>> samples(nt);
    for (auto& s : samples) s.reserve(cfg.n_paths);

    SimDiagnostics diag;
    for (long path = 0; path < cfg.n_paths; ++path) {
        auto rng = detail::path_rng(cfg.seed, path);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::exponential_distribution<double> expo(1.0);

        double t = 0.0;
        int i = init.regime;
        double r = init.r, z = init.z;
        std::size_t next_time = 0;
        const double t_end = times.back();
        while (next_time < nt) {
            double q_total = 0.0;
            for (int j = 0; j < mdl.d; ++j)
                if (j != i) q_total += mdl.q[i][j];
            const double rate = mdl.lambda[i] + q_total;
            const double t_event = std::min(t + expo(rng) / rate, t_end + cfg.dt);
            const auto& c_tab = policy.c_star[i];
            const double b_i = mdl.b[i], s_i = mdl.sigma[i];
            while (t < t_event && next_time < nt) {
                while (next_time < nt && t >= times[next_time]) {
                    samples[next_time].push_back(std::exp(-k * t) * std::pow(r, p));
                    ++next_time;
                }
                if (next_time >= nt) break;
                const double h = std::min(cfg.dt, t_event - t);
                const double c_rate = lerp_grid(c_tab, z);
                const double dw = std::sqrt(h) * normal(rng);
                const double r_new = r + r * z * (b_i * h + s_i * dw) - r * c_rate * h;
                double z_new =
                    z + z * (1.0 - z) * ((b_i - z * s_i * s_i) * h + s_i * dw) + z * c_rate * h;
                if (z_new < 0.0) z_new = 0.0;
                if (z_new > 1.0) z_new = 1.0;
                r = std::max(r_new, 0.0);
                z = z_new;
                t += h;
            }
            if (next_time >= nt) break;
            if (t_event > t_end) continue;
            const double u = unif(rng) * rate;
            if (u < mdl.lambda[i]) {
                z = policy.pi_star[i];
            } else {
                double acc_rate = mdl.lambda[i];
                int j_to = i;
                for (int j = 0; j < mdl.d; ++j) {
                    if (j == i) continue;
                    acc_rate += mdl.q[i][j];
                    if (u < acc_rate) {
                        j_to = j;
                        break;
                    }
                }
                const double z_minus = z;
                r *= 1.0 - mdl.gamma[i][j_to] * z_minus;
                z = z_minus * (1.0 - mdl.gamma[i][j_to]) / (1.0 - mdl.gamma[i][j_to] * z_minus);
                i = j_to;
            }
        }
    }

    SupermartingaleReport rep;
    rep.times = times;
    rep.m.resize(nt);
    rep.std_err.resize(nt);
    for (std::size_t k2 = 0; k2 < nt; ++k2) {
        rep.m[k2] = detail::pairwise_mean(samples[k2]);
        double ss = 0.0;
        for (double v : samples[k2]) ss += (v - rep.m[k2]) * (v - rep.m[k2]);
        rep.std_err[k2] = samples[k2].size() > 1
                              ? std::sqrt(ss / (static_cast<double>(samples[k2].size()) - 1.0) /
                                          static_cast<double>(samples[k2].size()))
                              : 0.0;
    }
    for (std::size_t k2 = 1; k2 < nt; ++k2)
        if (rep.m[k2] > rep.m[k2 - 1] + 2.0 * (rep.std_err[k2] + rep.std_err[k2 - 1]))
            rep.nonincreasing = false;
    return rep;
}

}  // namespace illiquid

#endif  // ILLIQUID_SIMULATOR_HPP
