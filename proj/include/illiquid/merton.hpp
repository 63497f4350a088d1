#ifndef ILLIQUID_MERTON_HPP
#define ILLIQUID_MERTON_HPP

#include <cmath>
#include <string>
#include <vector>

#include "illiquid/model.hpp"

/// Perfectly liquid (continuous-trading, gamma = 0) benchmarks.  Single
/// regime in closed form, multiple regimes by damped Newton on the
/// coupled nonlinear system.
namespace illiquid {

struct IllPosed : ModelError {
    using ModelError::ModelError;
};
struct NoConvergence : ModelError {
    double last_residual;
    NoConvergence(const std::string& msg, double res) : ModelError(msg), last_residual(res) {}
};
struct NonpositiveIterate : ModelError {
    using ModelError::ModelError;
};

struct MertonSolution {
    std::vector<double> phi_m;  // reduced values, positive
    std::vector<double> pi_m;   // optimal proportions (unclamped)
    std::vector<double> c_m;    // consumption fractions, 1/time
    double residual = 0.0;      // max abs system residual
};

/// Single-regime Merton problem: phi_M = ((1-p)/rho_eff)^(1-p) with
/// rho_eff = rho - p b^2 / (2 sigma^2 (1-p)).
inline MertonSolution merton_single(double b, double sigma, const CrraParams& prefs) {
    const double p = prefs.p;
    if (!(sigma > 0.0)) throw IllPosed("merton_single: sigma must be > 0");
    const double rho_eff = prefs.rho - p * b * b / (2.0 * sigma * sigma * (1.0 - p));
    if (!(rho_eff > 0.0))
        throw IllPosed("merton_single: effective discount rho - p b^2/(2 sigma^2 (1-p)) = " +
                       std::to_string(rho_eff) + " must be > 0");
    MertonSolution sol;
    const double phi = std::pow((1.0 - p) / rho_eff, 1.0 - p);
    sol.phi_m = {phi};
    sol.pi_m = {b / ((1.0 - p) * sigma * sigma)};
    sol.c_m = {std::pow(phi, -1.0 / p)};
    sol.residual = std::abs(rho_eff * phi - (1.0 - p) * std::pow(phi, -p / (1.0 - p)));
    return sol;
}

namespace detail {

// Dense LU solve with partial pivoting, for the small d x d Newton step.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> a,
                                       std::vector<double> rhs) {
    const int n = static_cast<int>(rhs.size());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        std::swap(rhs[col], rhs[piv]);
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double s = rhs[r];
        for (int c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return x;
}

}  // namespace detail

/// Coupled multi-regime Merton system
///   (rho - q_ii - b_i^2 p/(2 sigma_i^2 (1-p))) phi_i
///       - (1-p) phi_i^{-p/(1-p)} = sum_{j != i} q_ij phi_j,
/// solved by damped Newton from the decoupled single-regime values.
inline MertonSolution merton_multi(const ValidatedModel& vm, const CrraParams& prefs) {
    const MarketModel& m = vm.market();
    const int d = m.d;
    const double p = prefs.p;
    const double q_exp = -p / (1.0 - p);

    std::vector<double> a(d);  // linear coefficient per regime
    std::vector<double> phi(d);
    for (int i = 0; i < d; ++i) {
        if (!(m.sigma[i] > 0.0)) throw IllPosed("merton_multi: sigma must be > 0 in every regime");
        a[i] = prefs.rho - m.q[i][i] -
               m.b[i] * m.b[i] * p / (2.0 * m.sigma[i] * m.sigma[i] * (1.0 - p));
        phi[i] = merton_single(m.b[i], m.sigma[i], prefs).phi_m[0];
    }

    auto residual_vec = [&](const std::vector<double>& f) {
        std::vector<double> r(d);
        for (int i = 0; i < d; ++i) {
            double s = a[i] * f[i] - (1.0 - p) * std::pow(f[i], q_exp);
            for (int j = 0; j < d; ++j)
                if (j != i) s -= m.q[i][j] * f[j];
            r[i] = s;
        }
        return r;
    };
    auto max_abs = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s = std::max(s, std::abs(x));
        return s;
    };

    std::vector<double> res = residual_vec(phi);
    double res_norm = max_abs(res);
    for (int iter = 0; iter < 200 && res_norm >= 1e-11; ++iter) {
        std::vector<std::vector<double>> jac(d, std::vector<double>(d, 0.0));
        for (int i = 0; i < d; ++i) {
            jac[i][i] = a[i] + p * std::pow(phi[i], -1.0 / (1.0 - p));
            for (int j = 0; j < d; ++j)
                if (j != i) jac[i][j] = -m.q[i][j];
        }
        std::vector<double> neg(res);
        for (double& x : neg) x = -x;
        std::vector<double> step = detail::solve_dense(jac, neg);

        double s = 1.0;
        bool accepted = false;
        for (int h = 0; h < 30; ++h, s *= 0.5) {
            std::vector<double> cand(d);
            bool positive = true;
            for (int i = 0; i < d; ++i) {
                cand[i] = phi[i] + s * step[i];
                positive = positive && cand[i] > 0.0;
            }
            if (!positive) continue;
            std::vector<double> cres = residual_vec(cand);
            double cnorm = max_abs(cres);
            if (cnorm < res_norm || cnorm < 1e-11) {
                phi = std::move(cand);
                res = std::move(cres);
                res_norm = cnorm;
                accepted = true;
                break;
            }
        }
        if (!accepted)
            throw NonpositiveIterate("merton_multi: damping could not keep iterates positive");
    }
    if (res_norm >= 1e-10)
        throw NoConvergence("merton_multi: Newton did not reach residual 1e-10", res_norm);

    MertonSolution sol;
    sol.phi_m = phi;
    sol.pi_m.resize(d);
    sol.c_m.resize(d);
    for (int i = 0; i < d; ++i) {
        sol.pi_m[i] = m.b[i] / ((1.0 - p) * m.sigma[i] * m.sigma[i]);
        sol.c_m[i] = std::pow(phi[i], -1.0 / p);
    }
    sol.residual = res_norm;
    return sol;
}

}  // namespace illiquid

#endif  // ILLIQUID_MERTON_HPP
