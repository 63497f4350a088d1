#ifndef ILLIQUID_POLICY_HPP
#define ILLIQUID_POLICY_HPP

#include <cmath>
#include <vector>

#include "illiquid/merton.hpp"
#include "illiquid/model.hpp"
#include "illiquid/solver.hpp"

/// Feedback policies and derived quantities from a converged grid
/// solution: consumption fraction c*(i,z), rebalancing target pi*(i),
/// values in original (x,y) variables, and the cost of liquidity.
namespace illiquid {

struct NonconvergedInput : SolverError {
    using SolverError::SolverError;
};

struct PolicyTable {
    std::vector<double> z;
    Fields c_star;                 // d x N consumption fractions, 1/time
    std::vector<double> pi_star;   // rebalancing target per regime (a grid node)
    std::vector<int> pi_index;     // its node index
};

/// c*(i,z) = (phi_i - (z/p) phi_i')^{-1/(1-p)} at interior nodes, with
/// the explicit endpoint values phi_i(0)^{-1/(1-p)} at z=0 and 0 at z=1
/// (the derivative blows down to -inf there).  pi*(i) is the smallest
/// grid node attaining the discrete max of phi_i.  When the solution
/// carries its stretched-coordinate representation, the derivative is
/// taken there (where phi is smooth through the z=1 cusp) and the
/// resulting consumption curve is resampled onto the z-grid.
inline PolicyTable extract_policy(const GridSolution& sol, const CrraParams& prefs) {
    if (!sol.converged) throw NonconvergedInput("extract_policy: solution not converged");
    const double p = prefs.p;
    const double e = -1.0 / (1.0 - p);
    const int d = static_cast<int>(sol.phi.size());
    const int n = static_cast<int>(sol.z.size());
    const double h = 1.0 / (n - 1);

    PolicyTable tab;
    tab.z = sol.z;
    tab.c_star.assign(d, std::vector<double>(n));
    tab.pi_star.resize(d);
    tab.pi_index.resize(d);
    for (int i = 0; i < d; ++i) {
        const auto& phi = sol.phi[i];
        if (!sol.phi_u.empty()) {
            const auto& psi = sol.phi_u[i];
            std::vector<double> c_u(n);
            c_u[0] = std::pow(psi[0], e);
            c_u[n - 1] = 0.0;
            for (int k = 1; k < n - 1; ++k) {
                const double u = k * h;
                const double d1 = (psi[k + 1] - psi[k - 1]) / (2.0 * h);
                const double a = psi[k] - z_of_u(u) / (2.0 * p * (1.0 - u)) * d1;
                c_u[k] = a > 0.0 ? std::pow(a, e) : 0.0;
            }
            tab.c_star[i][0] = c_u[0];
            tab.c_star[i][n - 1] = 0.0;
            for (int k = 1; k < n - 1; ++k)
                tab.c_star[i][k] = lerp_grid(c_u, u_of_z(sol.z[k]));
        } else {
            tab.c_star[i][0] = std::pow(phi[0], e);
            tab.c_star[i][n - 1] = 0.0;
            for (int k = 1; k < n - 1; ++k) {
                const double d1 = (phi[k + 1] - phi[k - 1]) / (2.0 * h);
                const double a = phi[k] - sol.z[k] / p * d1;
                tab.c_star[i][k] = a > 0.0 ? std::pow(a, e) : 0.0;
            }
        }
        int best = 0;
        for (int k = 1; k < n; ++k)
            if (phi[k] > phi[best]) best = k;
        tab.pi_index[i] = best;
        tab.pi_star[i] = sol.z[best];
    }
    return tab;
}

/// v_i(x,y) = U(x+y) phi_i(y/(x+y)), with v_i(0,0) = 0.
inline double value_at(const GridSolution& sol, const CrraParams& prefs, int i, double x,
                       double y) {
    const double r = x + y;
    if (r <= 0.0) return 0.0;
    return crra_utility(r, prefs.p) * lerp_grid(sol.phi[i], y / r);
}

/// Best-allocation value of wealth r: vhat_i(r) = U(r) max_z phi_i(z).
inline double best_value(const GridSolution& sol, const CrraParams& prefs, int i, double r) {
    double s = sol.phi[i][0];
    for (double v : sol.phi[i]) s = std::max(s, v);
    return crra_utility(r, prefs.p) * s;
}

struct LiquidityCostReport {
    std::vector<double> cost;  // P_i(1) per regime
};

/// Extra wealth fraction solving vhat(1 + P) = vhat_M(1):
///   P_i(1) = (phi_{i,M} / max_z phi_i)^{1/p} - 1.
inline LiquidityCostReport liquidity_cost(const GridSolution& sol, const MertonSolution& bench,
                                          const CrraParams& prefs) {
    LiquidityCostReport rep;
    const int d = static_cast<int>(sol.phi.size());
    rep.cost.resize(d);
    for (int i = 0; i < d; ++i) {
        double max_phi = sol.phi[i][0];
        for (double v : sol.phi[i]) max_phi = std::max(max_phi, v);
        rep.cost[i] = std::pow(bench.phi_m[i] / max_phi, 1.0 / prefs.p) - 1.0;
    }
    return rep;
}

}  // namespace illiquid

#endif  // ILLIQUID_POLICY_HPP
