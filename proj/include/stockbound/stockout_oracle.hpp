#pragma once

// Exact stockout probabilities for Gaussian demand: the standard normal upper
// tail H, bivariate joint tails by two independent quadrature routes, Monte
// Carlo for any dimension and pattern, and inversion to the rigorous safety stock.

#include "stockbound/demand_models.hpp"
#include "stockbound/rate_function.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>

namespace stockbound {

class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double achieved)
        : std::runtime_error(what), achieved_(achieved) {}
    double achieved_tolerance() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// H(k) = P[Z >= k] for standard normal Z.
double normal_tail(double k);

/// k with H(k) = delta, delta in (0, 1).
double normal_tail_inverse(double delta);

/// Standardized thresholds a = L eps_X / sqrt(L sigma_X^2), b likewise, and rho.
struct TailQuery {
    double a = 0.0;
    double b = 0.0;
    double rho = 0.0;

    /// From lead-time safety stocks (Lε_X, Lε_Y) of a two-commodity model.
    static TailQuery from_safety_stock(const GaussianModel& model, double stock_x,
                                       double stock_y, LeadTime lead_time);
};

enum class OracleMethod {
    conditional_quadrature,  ///< integral of phi(u) H((b - rho u)/sqrt(1 - rho^2)) over u >= a
    double_quadrature,       ///< double integral in the rescaled (s, t) plane
    monte_carlo,
    closed_form,             ///< |rho| = 1
};

const char* method_name(OracleMethod method);

struct OracleResult {
    double probability = 0.0;
    OracleMethod method = OracleMethod::closed_form;
    double error_estimate = 0.0;  ///< quadrature error, or 3 sqrt(p(1-p)/trials) for MC
    std::size_t trials = 0;
    std::size_t hits = 0;
};

/// P[X >= a, Y >= b] for standard bivariate normal with correlation rho.
/// |rho| = 1 collapses to one-dimensional tails analytically.
OracleResult bivariate_joint_tail(const TailQuery& query,
                                  OracleMethod method = OracleMethod::conditional_quadrature);

/// Frequency of `pattern` among `trials` lead-time totals X = sum_t (D_t - mu)
/// at margins `safety_stock` (= L eps, items over the lead time). Totals are
/// drawn directly from N(0, L Sigma), which is exactly their distribution.
/// Trials run in seeded chunks; counts are summed in chunk order.
OracleResult joint_tail_monte_carlo(const GaussianModel& model,
                                    const Eigen::VectorXd& safety_stock, LeadTime lead_time,
                                    std::size_t trials, std::uint64_t seed,
                                    const StockoutPattern& pattern = AllExceed{});

struct JointTailInversion {
    double safety_stock = 0.0;  ///< common margin SS on every commodity
    double probability = 0.0;   ///< P(SS)
    bool no_stock_needed = false;  ///< delta >= P(0); SS reported as 0
};

/// Equal-margin rigorous safety stock: SS with P[X_i >= SS for all i] = delta.
/// One commodity uses H^{-1}; two use bisection on the conditional quadrature to
/// |P - delta| < 1e-9. Larger dimensions need joint_tail_quantile_mc.
JointTailInversion invert_joint_tail(const GaussianModel& model, double delta,
                                     LeadTime lead_time);

/// Monte Carlo counterpart for any dimension: the (1 - delta) quantile of
/// min_i X_i over simulated lead-time totals.
JointTailInversion joint_tail_quantile_mc(const GaussianModel& model, double delta,
                                          LeadTime lead_time, std::size_t trials,
                                          std::uint64_t seed);

}  // namespace stockbound
