#pragma once

// Rate functions R(eps) = max_{u >= 0} { u . eps - phi(u) } (Legendre transform
// of the per-period CGF), Chernoff stockout bounds built from them, and the
// inverse map from an allowable stockout rate to a safety stock.

#include "stockbound/cgf.hpp"
#include "stockbound/demand_models.hpp"

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

namespace stockbound {

/// Projected gradient ascent settings.
struct SolverConfig {
    double step = 1e-3;             ///< kappa
    double stop_threshold = 1e-6;   ///< stop when sum_i |u_{s+1,i} - u_{s,i}| < this
    long max_iterations = 1'000'000;
    std::optional<Eigen::VectorXd> initial;  ///< defaults to (1, ..., 1)

    void validate() const;
};

/// Result of maximizing u . eps - phi(u) over u >= 0.
///
/// `total` is the exponent per lead-time period: the bound on the all-exceed
/// event is exp(-L * total). `per_degree` divides by the number of commodities,
/// so exp(-L * N * per_degree) is the same bound. For one commodity they agree.
struct RateResult {
    Eigen::VectorXd margin;     ///< eps, per period
    double total = 0.0;
    double per_degree = 0.0;
    Eigen::VectorXd maximizer;  ///< u*, componentwise >= 0
    long iterations = 0;
    bool converged = false;
    double final_step = 0.0;    ///< kappa in effect at termination
};

class UnreachableRateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Projected gradient ascent u <- max(u + kappa (eps - grad phi(u)), 0).
/// kappa is halved when a step leaves the CGF's domain or lowers the objective.
/// Closed domain windows are clamped to instead. Non-convergence is reported via
/// `converged`, not thrown.
RateResult rate_numeric(const CgfEvaluator& cgf, const Eigen::VectorXd& eps,
                        const SolverConfig& cfg = {});

/// Exact Gaussian rate: the quadratic program max_{u >= 0} u.eps - u^T Sigma u / 2
/// solved by enumerating active sets (KKT). Returns +infinity when the program
/// is unbounded (singular Sigma, eps outside the reachable cone). Dimensions
/// above 12 fall back to rate_numeric.
RateResult rate_gaussian_closed(const GaussianModel& model, const Eigen::VectorXd& eps);

/// One-dimensional Legendre transform by bracketing the root of phi'(u) = eps.
/// Accurate to rounding; used where the fixed-step ascent is too coarse.
RateResult rate_scalar(const CgfEvaluator& cgf, double eps);

/// Safety stock L * eps whose Chernoff bound equals delta: solves
/// L * N * R_per_degree(eps * 1) = -log(delta) for eps >= 0 by bisection.
/// For several commodities the margins are equal. Throws UnreachableRateError
/// when the target exceeds what the CGF can certify.
double invert_rate(const CgfEvaluator& cgf, double delta, LeadTime lead_time,
                   const SolverConfig& cfg = {});

// Stockout events for lead-time totals X_i = sum_t (D_it - mu_i).
struct AllExceed {};            ///< X_i >= L eps_i for every i
struct SignedOrthant {          ///< s_i X_i >= s_i L eps_i for every i
    std::vector<int> signs;
};
struct UnionOfTwo {};           ///< X_1 >= L eps_1 or X_2 >= L eps_2
struct FungibleSum {};          ///< sum_i X_i >= L eps (single pooled margin)

using StockoutPattern = std::variant<AllExceed, SignedOrthant, UnionOfTwo, FungibleSum>;

const char* pattern_name(const StockoutPattern& pattern);

/// Chernoff upper bound on the probability of `pattern`, clamped to <= 1.
/// eps is the per-period margin (safety stock / L). Union-of-two sums the bound
/// on {X_1 >= L eps_1} and the bound on {X_1 < L eps_1, X_2 >= L eps_2}, each
/// optimized separately.
double chernoff_bound(const CgfEvaluator& cgf, const Eigen::VectorXd& eps, LeadTime lead_time,
                      const StockoutPattern& pattern, const SolverConfig& cfg = {});

}  // namespace stockbound
