#include <cmath>

#include <doctest.h>

#include "illiquid/merton.hpp"

using namespace illiquid;

namespace {

MarketModel two_regime(double l1, double l2) {
    MarketModel m;
    m.d = 2;
    m.q = {{-1.0, 1.0}, {1.0, -1.0}};
    m.lambda = {l1, l2};
    m.b = {0.4, 0.4};
    m.sigma = {1.0, 2.0};
    m.gamma = {{0.0, 0.0}, {0.0, 0.0}};
    return m;
}

// Direct back-substitution into the coupled system; the residual is the
// independent oracle for merton_multi.
double system_residual(const MertonSolution& sol, const MarketModel& m, const CrraParams& prefs) {
    const double p = prefs.p;
    double worst = 0.0;
    for (int i = 0; i < m.d; ++i) {
        double lhs = (prefs.rho - m.q[i][i] -
                      m.b[i] * m.b[i] * p / (2.0 * m.sigma[i] * m.sigma[i] * (1.0 - p))) *
                         sol.phi_m[i] -
                     (1.0 - p) * std::pow(sol.phi_m[i], -p / (1.0 - p));
        for (int j = 0; j < m.d; ++j)
            if (j != i) lhs -= m.q[i][j] * sol.phi_m[j];
        worst = std::max(worst, std::abs(lhs));
    }
    return worst;
}

}  // namespace

TEST_CASE("merton_single closed forms") {
    const CrraParams prefs{0.5, 0.2};
    auto s1 = merton_single(0.4, 1.0, prefs);
    CHECK(s1.phi_m[0] == doctest::Approx(std::sqrt(0.5 / 0.12)).epsilon(1e-12));
    CHECK(s1.phi_m[0] == doctest::Approx(2.041241).epsilon(1e-6));
    CHECK(s1.pi_m[0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(s1.c_m[0] == doctest::Approx(0.24).epsilon(1e-12));

    auto s2 = merton_single(0.4, 2.0, prefs);
    CHECK(s2.phi_m[0] == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
    CHECK(s2.pi_m[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(s2.c_m[0] == doctest::Approx(0.36).epsilon(1e-12));

    auto s0 = merton_single(0.0, 1.0, prefs);
    CHECK(s0.phi_m[0] == doctest::Approx(std::sqrt(0.5 / 0.2)).epsilon(1e-12));
    CHECK(s0.pi_m[0] == 0.0);
}

TEST_CASE("merton_single rejects ill-posed parameters") {
    // rho_eff = 0.2 - 0.5*4/(2*0.5) = -1.8
    CHECK_THROWS_AS(merton_single(2.0, 1.0, {0.5, 0.2}), IllPosed);
    CHECK_THROWS_AS(merton_single(0.4, 0.0, {0.5, 0.2}), IllPosed);
}

TEST_CASE("merton_multi solves the two-regime system") {
    const CrraParams prefs{0.5, 0.2};
    auto vm = validate_model(two_regime(1.0, 1.0), prefs);
    auto sol = merton_multi(vm, prefs);
    CHECK(sol.residual < 1e-10);
    CHECK(system_residual(sol, vm.market(), prefs) < 1e-10);
    CHECK(sol.phi_m[0] == doctest::Approx(1.8523).epsilon(5e-4));
    CHECK(sol.phi_m[1] == doctest::Approx(1.8046).epsilon(5e-4));
    for (int i = 0; i < 2; ++i) {
        CHECK(sol.phi_m[i] > 0.0);
        CHECK(sol.c_m[i] ==
              doctest::Approx(std::pow(sol.phi_m[i], -1.0 / prefs.p)).epsilon(1e-12));
    }
}

TEST_CASE("merton_multi degenerates to merton_single for d = 1") {
    const CrraParams prefs{0.5, 0.2};
    auto vm = validate_model(MarketModel::single_regime(0.4, 1.0, 1.0), prefs);
    auto multi = merton_multi(vm, prefs);
    auto single = merton_single(0.4, 1.0, prefs);
    CHECK(multi.phi_m[0] == doctest::Approx(single.phi_m[0]).epsilon(1e-12));
}

TEST_CASE("identical regimes give the single-regime value") {
    const CrraParams prefs{0.5, 0.2};
    MarketModel m = two_regime(1.0, 1.0);
    m.sigma = {1.0, 1.0};
    auto vm = validate_model(m, prefs);
    auto multi = merton_multi(vm, prefs);
    auto single = merton_single(0.4, 1.0, prefs);
    CHECK(multi.phi_m[0] == doctest::Approx(single.phi_m[0]).epsilon(1e-10));
    CHECK(multi.phi_m[1] == doctest::Approx(single.phi_m[0]).epsilon(1e-10));
}

TEST_CASE("permuting regime labels permutes the solution") {
    const CrraParams prefs{0.5, 0.2};
    auto a = merton_multi(validate_model(two_regime(1.0, 1.0), prefs), prefs);

    MarketModel swapped = two_regime(1.0, 1.0);
    std::swap(swapped.b[0], swapped.b[1]);
    std::swap(swapped.sigma[0], swapped.sigma[1]);
    auto b = merton_multi(validate_model(swapped, prefs), prefs);
    CHECK(a.phi_m[0] == doctest::Approx(b.phi_m[1]).epsilon(1e-11));
    CHECK(a.phi_m[1] == doctest::Approx(b.phi_m[0]).epsilon(1e-11));
}

TEST_CASE("phi_M does not increase with volatility") {
    const CrraParams prefs{0.5, 0.2};
    double prev = std::numeric_limits<double>::infinity();
    for (double s : {1.0, 1.5, 2.0, 3.0, 5.0}) {
        MarketModel m = two_regime(1.0, 1.0);
        m.sigma[0] = s;
        auto sol = merton_multi(validate_model(m, prefs), prefs);
        CHECK(sol.phi_m[0] <= prev + 1e-12);
        prev = sol.phi_m[0];
    }
}
