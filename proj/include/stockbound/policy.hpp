#pragma once

// Safety-stock policies: the classical independence-based rule (previous), the
// Chernoff-certified rule (proposed), exact tail inversion (rigorous), and the
// pooled rule for fungible commodities.
//
// All safety stocks are items over the lead time (L * eps) above L * mu.

#include "stockbound/cgf.hpp"
#include "stockbound/demand_models.hpp"
#include "stockbound/rate_function.hpp"
#include "stockbound/stockout_oracle.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace stockbound {

/// delta = x * y, the joint stockout budget split across two commodities.
struct DeltaSplit {
    double x = 0.0;
    double y = 0.0;
};

enum class Allocation {
    symmetric,       ///< equal margins; sqrt(L sigma^2 (1 + rho) log(1/delta)) for two commodities
    sequential,      ///< split delta^((1+rho)/2), delta^((1-rho)/2), then the conditional-offset margins
    explicit_split,  ///< caller-supplied (delta_x, delta_y) with the conditional-offset margins
};

struct ProposedStock {
    Eigen::VectorXd safety_stock;
    std::optional<DeltaSplit> split;
    double delta = 0.0;
    /// exp(-L R(safety_stock / L)) for the all-exceed event, R solved exactly.
    /// Equals delta except where the split's implied multiplier leaves u >= 0.
    double certified_delta = 0.0;
};

/// Classical rule sqrt(L sigma_i^2) H^{-1}(delta^(1/N)): treats commodities as
/// independent and ignores correlation. Can be negative for large delta.
Eigen::VectorXd ss_previous(const GaussianModel& model, LeadTime lead_time, double delta);

ProposedStock ss_proposed(const GaussianModel& model, LeadTime lead_time, double delta,
                          Allocation allocation = Allocation::symmetric,
                          std::optional<DeltaSplit> split = std::nullopt);

/// Equal-margin Chernoff safety stock for any CGF (via invert_rate).
double ss_proposed(const CgfEvaluator& cgf, LeadTime lead_time, double delta,
                   const SolverConfig& cfg = {});

/// Pooled safety stock sqrt(-2 L 1^T Sigma 1 log delta) certifying
/// P[sum_i X_i >= SS] <= delta for substitutable commodities.
double ss_fungible(const GaussianModel& model, LeadTime lead_time, double delta);

/// Equal-margin exact safety stock. Up to two commodities by quadrature; more
/// by Monte Carlo with the given trials and seed.
JointTailInversion ss_rigorous(const GaussianModel& model, LeadTime lead_time, double delta,
                               std::size_t mc_trials = 1'000'000, std::uint64_t seed = 1);

struct PolicyOutput {
    Eigen::VectorXd mean;
    int lead_time = 1;
    double delta = 0.0;
    Eigen::VectorXd ss_pre;
    Eigen::VectorXd ss_pro;
    Eigen::VectorXd ss_rig;
    std::optional<DeltaSplit> split;
    double certified_pro = 0.0;
    bool rig_no_stock_needed = false;

    /// L * mu + SS, the reorder level for each commodity.
    Eigen::VectorXd order_point(const Eigen::VectorXd& safety_stock) const {
        return static_cast<double>(lead_time) * mean + safety_stock;
    }
};

PolicyOutput compute_policies(const GaussianModel& model, LeadTime lead_time, double delta,
                              std::size_t mc_trials = 1'000'000, std::uint64_t seed = 1);

/// One delta of the previous / proposed / rigorous comparison. Probabilities
/// are exact all-exceed stockout rates at the respective equal margins.
struct ComparisonRow {
    double delta = 0.0;
    double ss_pre = 0.0;
    double ss_pro = 0.0;
    double ss_rig = 0.0;
    double p_pre = 0.0;
    double p_pro = 0.0;
    double p_rig = 0.0;

    double ratio_pro() const;  ///< ss_pro / ss_rig, NaN when ss_rig == 0
    double ratio_pre() const;
};

/// Requires one commodity, or two with equal variances (the symmetric setting).
std::vector<ComparisonRow> compare_policies(const GaussianModel& model, LeadTime lead_time,
                                            std::span<const double> deltas);

/// Exact all-exceed probability at a common margin for one or two commodities.
double equal_margin_stockout(const GaussianModel& model, LeadTime lead_time, double safety_stock);

/// n log-spaced points from lo to hi inclusive.
std::vector<double> log_spaced(double lo, double hi, std::size_t n);

}  // namespace stockbound
