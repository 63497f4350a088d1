#include <cmath>

#include <doctest.h>

#include "illiquid/policy.hpp"
#include "illiquid/solver.hpp"

using namespace illiquid;

namespace {

const CrraParams kPrefs{0.5, 0.2};

ValidatedModel single(double lambda) {
    return validate_model(MarketModel::single_regime(0.4, 1.0, lambda), kPrefs);
}

GridConfig coarse(int n = 201) {
    GridConfig cfg;
    cfg.n_points = n;
    cfg.max_outer = 4000;
    return cfg;
}

double max_phi(const GridSolution& sol, int i) {
    double s = sol.phi[i][0];
    for (double v : sol.phi[i]) s = std::max(s, v);
    return s;
}

}  // namespace

TEST_CASE("scalar_root solves the boundary equation") {
    // p = 1/2: a x - 0.5/x = r.  x = 2, a = 1 gives r = 1.75.
    CHECK(detail::scalar_root(1.0, 1.75, 0.5) == doctest::Approx(2.0).epsilon(1e-12));
    // r = 0: x = sqrt(0.5 / a)
    CHECK(detail::scalar_root(1.2, 0.0, 0.5) ==
          doctest::Approx(std::sqrt(0.5 / 1.2)).epsilon(1e-12));
    // p = 0.3: verify by back-substitution
    const double x = detail::scalar_root(0.7, 3.1, 0.3);
    CHECK(0.7 * x - 0.7 * std::pow(x, -0.3 / 0.7) == doctest::Approx(3.1).epsilon(1e-12));
}

TEST_CASE("tridiag_solve matches a hand solve") {
    // [[2,1,0],[1,2,1],[0,1,2]] x = [4,8,8]  =>  x = [1,2,3]
    std::vector<double> sub{1.0, 1.0}, diag{2.0, 2.0, 2.0}, sup{1.0, 1.0}, rhs{4.0, 8.0, 8.0};
    detail::tridiag_solve(sub, diag, sup, rhs);
    CHECK(rhs[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(rhs[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(rhs[2] == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("lerp_grid is exact on linear data") {
    std::vector<double> f{1.0, 1.5, 2.0, 2.5, 3.0};
    for (double z : {0.0, 0.1, 0.33, 0.5, 0.77, 1.0})
        CHECK(lerp_grid(f, z) == doctest::Approx(1.0 + 2.0 * z).epsilon(1e-14));
    CHECK(lerp_grid(f, -0.5) == 1.0);
    CHECK(lerp_grid(f, 1.5) == 3.0);
}

TEST_CASE("z=1 boundary solve") {
    auto vm = single(1.0);
    // coef = rho + lambda - p b + p(1-p) sigma^2 / 2 = 0.2 + 1 - 0.2 + 0.125
    CHECK(boundary_solve_z1(2.25, vm, 0) == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("first outer iterate matches the zero-coupling closed form at z=0") {
    auto vm = single(1.0);
    GridConfig cfg = coarse();
    cfg.store_iterates = 1;
    auto sol = solve_phi(vm, cfg);
    // phi^1 solves the local ODE with zero right-hand side; at z=0 that is
    // (rho + lambda) phi = (1-p) phi^{-p/(1-p)}.
    CHECK(sol.iterates[0][0][0] == doctest::Approx(std::sqrt(0.5 / 1.2)).epsilon(1e-10));
}

TEST_CASE("first outer iterate is the closed form K (1-z)^p on the whole grid") {
    // With zero right-hand side the local ODE is solved exactly by
    // phi(z) = K (1-z)^p, K = ((1-p)/(rho+lambda))^{1-p}: the consumption
    // term gives (1-p) K^{-p/(1-p)} (1-z)^p and the differential part
    // collapses to (rho+lambda) K (1-z)^p.  In the stretched coordinate
    // this solution is linear (K*s at p = 1/2), so the discrete first
    // iterate must reproduce it to rounding.
    auto vm = single(1.0);
    GridConfig cfg = coarse();
    cfg.store_iterates = 1;
    auto sol = solve_phi(vm, cfg);
    const double K = std::sqrt(0.5 / 1.2);
    for (std::size_t k = 0; k < sol.z.size(); ++k)
        CHECK(sol.iterates[0][0][k] ==
              doctest::Approx(K * std::sqrt(1.0 - sol.z[k])).epsilon(1e-12));
}

TEST_CASE("outer iteration converges monotonically with geometric rate") {
    auto sol = solve_phi(single(1.0), coarse());
    CHECK(sol.converged);
    CHECK(sol.contraction > 0.0);
    CHECK(sol.contraction < 1.0);
    CHECK(sol.history.back() < 1e-9);
    // increments eventually decay
    const std::size_t nh = sol.history.size();
    CHECK(sol.history[nh - 1] < sol.history[nh / 2]);
    CHECK(sol.history[nh / 2] < sol.history[0]);
}

TEST_CASE("solution is bounded by the Merton value and increases with lambda") {
    auto bench = merton_single(0.4, 1.0, kPrefs);
    double prev = 0.0;
    for (double lam : {0.5, 1.0, 3.0}) {
        auto sol = solve_phi(single(lam), coarse());
        const double mp = max_phi(sol, 0);
        CHECK(mp < bench.phi_m[0]);
        CHECK(mp > prev);
        for (double v : sol.phi[0]) CHECK(v <= bench.phi_m[0] + 1e-10);
        prev = mp;
    }
}

TEST_CASE("solution is grid-stable") {
    auto a = solve_phi(single(1.0), coarse(101));
    auto b = solve_phi(single(1.0), coarse(201));
    CHECK(lerp_grid(a.phi[0], 0.5) == doctest::Approx(lerp_grid(b.phi[0], 0.5)).epsilon(1e-3));
    CHECK(a.phi[0][0] == doctest::Approx(b.phi[0][0]).epsilon(1e-3));
}

TEST_CASE("phi is concave on the grid") {
    auto sol = solve_phi(single(1.0), coarse());
    const int n = static_cast<int>(sol.z.size());
    const double tol = 1e-8 * max_phi(sol, 0);
    for (int k = 1; k < n - 1; ++k)
        CHECK(sol.phi[0][k + 1] - 2.0 * sol.phi[0][k] + sol.phi[0][k - 1] <= tol);
}

TEST_CASE("two-regime solve with price jumps runs and stays ordered") {
    MarketModel m;
    m.d = 2;
    m.q = {{-1.0, 1.0}, {2.0, -2.0}};
    m.lambda = {1.0, 2.0};
    m.b = {0.4, 0.2};
    m.sigma = {1.0, 2.0};
    m.gamma = {{0.0, 0.3}, {0.0, 0.0}};
    auto vm = validate_model(m, kPrefs);
    auto sol = solve_phi(vm, coarse());
    CHECK(sol.converged);
    auto bench = merton_multi(vm, kPrefs);
    for (int i = 0; i < 2; ++i) {
        CHECK(max_phi(sol, i) > 0.0);
        CHECK(max_phi(sol, i) < bench.phi_m[i]);
    }
}

TEST_CASE("hjb residual is small on a converged solution") {
    GridConfig cfg = coarse(501);
    auto vm = single(1.0);
    auto sol = solve_phi(vm, cfg);
    auto stats = hjb_residual(sol, vm, 200);
    CHECK(stats.max_normalized < 1e-3);
    CHECK(stats.mean_normalized < 1e-4);
}

TEST_CASE("solver error paths") {
    GridConfig cfg = coarse();
    cfg.max_outer = 1;
    CHECK_THROWS_AS(solve_phi(single(1.0), cfg), OuterNoConvergence);

    GridConfig tiny;
    tiny.n_points = 2;
    CHECK_THROWS_AS(solve_phi(single(1.0), tiny), SolverError);
}
