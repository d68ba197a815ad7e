#include "driftless/utility.hpp"
#include "driftless/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace driftless {

Utility::Utility(Family family, double lambda) : family_(family), lambda_(lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw Error(ErrorKind::Validation, "risk aversion lambda must be positive");
    }
    if (std::abs(value(0.0)) > 1e-12 || std::abs(deriv(0.0) - 1.0) > 1e-12) {
        throw Error(ErrorKind::Validation, "utility is not normalised at 0");
    }
}

std::string Utility::name() const {
    return family_ == Family::Exponential ? "exponential" : "adjusted_mean_vol";
}

Utility::Family utility_family_from_string(const std::string& s) {
    if (s == "exponential") return Utility::Family::Exponential;
    if (s == "adjusted_mean_vol") return Utility::Family::AdjustedMeanVol;
    throw Error(ErrorKind::Validation, "unknown utility family '" + s + "'");
}

double Utility::value(double x) const {
    if (family_ == Family::Exponential) return -std::expm1(-lambda_ * x) / lambda_;
    const double z = lambda_ * x;
    const double r = std::hypot(1.0, z);
    if (z > 0.0) return (1.0 - 1.0 / (z + r)) / lambda_;
    return (1.0 + z - r) / lambda_;
}

double Utility::deriv(double x) const {
    if (family_ == Family::Exponential) return std::exp(-lambda_ * x);
    const double z = lambda_ * x;
    const double r = std::hypot(1.0, z);
    if (z > 0.0) return 1.0 / (r * (r + z));
    return 1.0 - z / r;
}

double Utility::second(double x) const {
    if (family_ == Family::Exponential) return -lambda_ * std::exp(-lambda_ * x);
    const double r = std::hypot(1.0, lambda_ * x);
    return -lambda_ / (r * r * r);
}

bool Utility::in_legendre_domain(double y) const noexcept {
    if (family_ == Family::Exponential) return y > 0.0 && std::isfinite(y);
    return y > 0.0 && y < 2.0;
}

double Utility::deriv_inverse(double y) const {
    if (!in_legendre_domain(y)) {
        throw Error(ErrorKind::Domain, "u'^{-1}(" + std::to_string(y) + ") outside the range of u' for " + name());
    }
    if (family_ == Family::Exponential) return -std::log(y) / lambda_;
    return (1.0 - y) / (lambda_ * std::sqrt(y * (2.0 - y)));
}

double Utility::legendre(double y) const {
    if (family_ == Family::Exponential) {
        if (!in_legendre_domain(y)) throw Error(ErrorKind::Domain, "legendre transform needs y > 0");
        return (1.0 - y + y * std::log(y)) / lambda_;
    }
    const double x = deriv_inverse(y);
    return value(x) - y * x;
}

namespace {

double weight_sum(std::span<const double> weights, std::size_t n) {
    if (weights.empty()) return static_cast<double>(n);
    if (weights.size() != n) throw Error(ErrorKind::Shape, "one weight per sample required");
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

inline double weight_at(std::span<const double> weights, std::size_t k) { return weights.empty() ? 1.0 : weights[k]; }

}  // namespace

double log_mean_exp(std::span<const double> v, std::span<const double> weights) {
    const double total = weight_sum(weights, v.size());
    double shift = -std::numeric_limits<double>::infinity();
    for (double e : v) shift = std::max(shift, e);
    if (!std::isfinite(shift)) return shift;
    double acc = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) acc += weight_at(weights, k) * std::exp(v[k] - shift);
    return shift + std::log(acc / total);
}

double sample_objective(const Utility& u, std::span<const double> x, std::span<const double> weights, double y) {
    if (u.family() == Utility::Family::Exponential) {
        const double lam = u.lambda();
        std::vector<double> e(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) e[k] = -lam * (y + x[k]);
        // E[u(y + X)] = (1 - E[exp(-lambda (y + X))]) / lambda
        return -std::expm1(log_mean_exp(e, weights)) / lam - y;
    }
    const double total = weight_sum(weights, x.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) acc += weight_at(weights, k) * u.value(y + x[k]);
    return acc / total - y;
}

double closed_form_y(const Utility& u, std::span<const double> x, std::span<const double> weights) {
    if (u.family() != Utility::Family::Exponential) {
        throw Error(ErrorKind::Validation, "closed-form cash offset exists only for exponential utility");
    }
    std::vector<double> e(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) e[k] = -u.lambda() * x[k];
    return log_mean_exp(e, weights) / u.lambda();
}

OceResult oce(const Utility& u, std::span<const double> x, std::span<const double> weights) {
    if (x.empty()) throw Error(ErrorKind::Shape, "empty sample");
    for (double v : x) {
        if (!std::isfinite(v)) return {std::numeric_limits<double>::quiet_NaN(), -std::numeric_limits<double>::infinity()};
    }
    if (u.family() == Utility::Family::Exponential) {
        const double y = closed_form_y(u, x, weights);
        return {y, sample_objective(u, x, weights, y)};
    }
    const double total = weight_sum(weights, x.size());
    auto slope = [&](double y, double* curvature) {
        double d1 = 0.0, d2 = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double w = weight_at(weights, k);
            d1 += w * u.deriv(y + x[k]);
            d2 += w * u.second(y + x[k]);
        }
        if (curvature) *curvature = d2 / total;
        return d1 / total - 1.0;
    };
    // At y = -max X every argument is <= 0 so u' >= 1; at y = -min X, u' <= 1.
    double lo = -*std::max_element(x.begin(), x.end());
    double hi = -*std::min_element(x.begin(), x.end());
    double y = 0.5 * (lo + hi);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(y)); ++it) {
        double curv = 0.0;
        const double g = slope(y, &curv);
        if (g == 0.0) break;
        if (g > 0.0) lo = y; else hi = y;
        double next = curv < 0.0 ? y - g / curv : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == y) break;
        y = next;
    }
    return {y, sample_objective(u, x, weights, y)};
}

double oce_objective(const Utility& u, std::span<const double> weights, const InstrumentReturn& returns,
                     std::span<const double> actions, double y, const CostSpec& spec) {
    auto g = gains(returns, actions);
    const auto c = path_costs(spec, returns, actions);
    for (std::size_t p = 0; p < g.size(); ++p) {
        if (!std::isfinite(c[p])) return -std::numeric_limits<double>::infinity();
        g[p] -= c[p];
    }
    return sample_objective(u, g, weights, y);
}

}  // namespace driftless
