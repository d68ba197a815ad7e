#pragma once

#include "driftless/frictions.hpp"
#include "driftless/market.hpp"

#include <span>
#include <string>
#include <vector>

namespace driftless {

/// Normalised utility: u(0) = 0, u'(0) = 1, strictly concave and increasing.
///   exponential:        u(x) = (1 - exp(-lambda x)) / lambda
///   adjusted mean-vol:  u(x) = (1 + lambda x - sqrt(1 + lambda^2 x^2)) / lambda
class Utility {
public:
    enum class Family { Exponential, AdjustedMeanVol };

    Utility(Family family, double lambda);

    static Utility exponential(double lambda) { return {Family::Exponential, lambda}; }
    static Utility adjusted_mean_vol(double lambda) { return {Family::AdjustedMeanVol, lambda}; }

    Family family() const noexcept { return family_; }
    double lambda() const noexcept { return lambda_; }
    std::string name() const;

    double value(double x) const;
    double deriv(double x) const;
    double second(double x) const;

    /// x with u'(x) = y; throws Domain outside the range of u'.
    double deriv_inverse(double y) const;

    /// u~(y) = sup_x u(x) - y x = u(x*) - y x*, x* = u'^{-1}(y).
    double legendre(double y) const;

    /// Open interval of admissible densities for legendre().
    bool in_legendre_domain(double y) const noexcept;

private:
    Family family_;
    double lambda_;
};

Utility::Family utility_family_from_string(const std::string& s);

/// Weighted sample mean of u(y + X) - y; weights may be empty (uniform).
/// Exponential expectations are evaluated with a log-sum-exp shift.
double sample_objective(const Utility& u, std::span<const double> x, std::span<const double> weights, double y);

struct OceResult {
    double y_star = 0.0;
    double value = 0.0;
};

/// sup_y E_w[u(y + X)] - y by solving E_w[u'(y + X)] = 1.
OceResult oce(const Utility& u, std::span<const double> x, std::span<const double> weights = {});

/// Exponential only: y* = (1/lambda) log E_w[exp(-lambda X)].
double closed_form_y(const Utility& u, std::span<const double> x, std::span<const double> weights = {});

/// F(y, a) = E_w[u(y + G_T(a) - cost_T(a))] - y with the cost term chosen by
/// spec.mode. Returns -inf if any path has infinite full cost.
double oce_objective(const Utility& u, std::span<const double> weights, const InstrumentReturn& returns,
                     std::span<const double> actions, double y, const CostSpec& spec);

/// log E_w[exp(v)] with a max shift.
double log_mean_exp(std::span<const double> v, std::span<const double> weights = {});

}  // namespace driftless
