#ifndef ILLIQUID_MODEL_HPP
#define ILLIQUID_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

/// Regime-switching market with Cox-process trading dates and CRRA
/// preferences.  The model is a d-state Markov-modulated Black-Scholes
/// asset: generator q, per-regime drift b, volatility sigma, trading
/// intensity lambda, and relative price drops gamma at regime switches.
namespace illiquid {

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidGenerator : ModelError {
    using ModelError::ModelError;
};
struct InvalidGamma : ModelError {
    using ModelError::ModelError;
};
struct InvalidIntensity : ModelError {
    using ModelError::ModelError;
};
struct DiscountTooSmall : ModelError {
    double k_p;
    DiscountTooSmall(const std::string& msg, double k) : ModelError(msg), k_p(k) {}
};
struct NonpositiveArgument : ModelError {
    using ModelError::ModelError;
};

struct MarketModel {
    int d = 1;
    std::vector<std::vector<double>> q;      // d x d generator, 1/time
    std::vector<double> lambda;              // trading intensities, 1/time
    std::vector<double> b;                   // drifts, 1/time
    std::vector<double> sigma;               // volatilities, 1/sqrt(time)
    std::vector<std::vector<double>> gamma;  // relative jump losses, < 1

    static MarketModel single_regime(double b_, double sigma_, double lambda_) {
        MarketModel m;
        m.d = 1;
        m.q = {{0.0}};
        m.lambda = {lambda_};
        m.b = {b_};
        m.sigma = {sigma_};
        m.gamma = {{0.0}};
        return m;
    }
};

struct CrraParams {
    double p = 0.5;    // risk aversion exponent, in (0,1)
    double rho = 0.2;  // discount rate, 1/time
};

/// U(x) = x^p / p, extended by U(0) = 0.
inline double crra_utility(double x, double p) {
    return x > 0.0 ? std::pow(x, p) / p : 0.0;
}

/// Convex conjugate of the CRRA utility: sup_{x>=0} [x^p/p - x*ell].
inline double dual_utility(double ell, double p) {
    if (ell <= 0.0)
        throw NonpositiveArgument("dual_utility: argument must be positive, got " +
                                  std::to_string(ell));
    return (1.0 - p) / p * std::pow(ell, -p / (1.0 - p));
}

namespace detail {

inline double growth_objective(const MarketModel& m, int i, double p, double z) {
    double val = p * m.b[i] * z - 0.5 * m.sigma[i] * m.sigma[i] * p * (1.0 - p) * z * z;
    for (int j = 0; j < m.d; ++j) {
        if (j == i) continue;
        val += m.q[i][j] * (std::pow(1.0 - z * m.gamma[i][j], p) - 1.0);
    }
    return val;
}

// Golden-section refinement of a bracketed maximum on [lo, hi].
template <class F>
double golden_max(F f, double lo, double hi, double tol) {
    constexpr double invphi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        }
    }
    double zm = 0.5 * (a + b);
    return std::max(f(zm), std::max(f1, f2));
}

}  // namespace detail

/// Growth constant k(p): the maximum over regimes and z in [0,1] of the
/// p-th moment drift of wealth.  The per-regime objective can be
/// multimodal when jump terms are present, so a dense scan brackets the
/// maximizer before golden-section refinement.
inline double growth_rate_k(const MarketModel& m, double p) {
    double best = -std::numeric_limits<double>::infinity();
    const int n_scan = 1000;
    for (int i = 0; i < m.d; ++i) {
        auto f = [&](double z) { return detail::growth_objective(m, i, p, z); };
        int k_best = 0;
        double f_best = f(0.0);
        for (int k = 1; k <= n_scan; ++k) {
            double fk = f(static_cast<double>(k) / n_scan);
            if (fk > f_best) {
                f_best = fk;
                k_best = k;
            }
        }
        double lo = std::max(0.0, (k_best - 1.0) / n_scan);
        double hi = std::min(1.0, (k_best + 1.0) / n_scan);
        best = std::max(best, detail::golden_max(f, lo, hi, 1e-12));
    }
    return best;
}

/// Model + preferences that have passed validation.  Downstream modules
/// only accept this type, so they never see inconsistent parameters.
class ValidatedModel {
  public:
    const MarketModel& market() const { return model_; }
    const CrraParams& prefs() const { return prefs_; }
    double growth_k() const { return k_; }

    int d() const { return model_.d; }
    double p() const { return prefs_.p; }
    double rho() const { return prefs_.rho; }

    friend ValidatedModel validate_model(MarketModel model, CrraParams prefs);

  private:
    ValidatedModel(MarketModel m, CrraParams c, double k)
        : model_(std::move(m)), prefs_(c), k_(k) {}
    MarketModel model_;
    CrraParams prefs_;
    double k_;
};

/// Checks all structural invariants, re-normalizes the generator diagonal
/// from the off-diagonal rates, computes k(p) and enforces rho > k(p).
inline ValidatedModel validate_model(MarketModel model, CrraParams prefs) {
    const int d = model.d;
    if (d < 1) throw ModelError("validate_model: regime count must be >= 1");
    auto check_dim = [&](std::size_t n, const char* name) {
        if (n != static_cast<std::size_t>(d))
            throw ModelError(std::string("validate_model: field '") + name +
                             "' has wrong length for d=" + std::to_string(d));
    };
    check_dim(model.q.size(), "q");
    check_dim(model.lambda.size(), "lambda");
    check_dim(model.b.size(), "b");
    check_dim(model.sigma.size(), "sigma");
    check_dim(model.gamma.size(), "gamma");
    for (int i = 0; i < d; ++i) {
        check_dim(model.q[i].size(), "q row");
        check_dim(model.gamma[i].size(), "gamma row");
    }

    for (int i = 0; i < d; ++i) {
        double off_sum = 0.0;
        for (int j = 0; j < d; ++j) {
            if (j == i) continue;
            if (model.q[i][j] < 0.0)
                throw InvalidGenerator("q[" + std::to_string(i) + "][" + std::to_string(j) +
                                       "] is negative");
            off_sum += model.q[i][j];
        }
        // Only off-diagonal rates are physical; set the diagonal exactly.
        model.q[i][i] = -off_sum;
    }
    for (int i = 0; i < d; ++i) {
        if (!(model.lambda[i] > 0.0))
            throw InvalidIntensity("lambda[" + std::to_string(i) + "] must be > 0");
        if (model.sigma[i] < 0.0)
            throw ModelError("sigma[" + std::to_string(i) + "] must be >= 0");
        for (int j = 0; j < d; ++j) {
            if (i == j) {
                model.gamma[i][i] = 0.0;
                continue;
            }
            if (!(model.gamma[i][j] < 1.0))
                throw InvalidGamma("gamma[" + std::to_string(i) + "][" + std::to_string(j) +
                                   "] must be < 1");
        }
    }
    if (!(prefs.p > 0.0 && prefs.p < 1.0))
        throw ModelError("p must lie in (0,1), got " + std::to_string(prefs.p));

    const double k = growth_rate_k(model, prefs.p);
    if (!(prefs.rho > k))
        throw DiscountTooSmall("rho = " + std::to_string(prefs.rho) +
                                   " must exceed the growth constant k(p) = " + std::to_string(k),
                               k);
    return ValidatedModel(std::move(model), prefs, k);
}

}  // namespace illiquid

#endif  // ILLIQUID_MODEL_HPP
