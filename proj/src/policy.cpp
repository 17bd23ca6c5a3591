#include "stockbound/policy.hpp"

#include <cmath>
#include <limits>

namespace stockbound {

namespace {

void require_delta(double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw ModelError("delta must lie in (0, 1)");
}

double log_inverse(double p) { return std::max(0.0, -std::log(p)); }

// Margins from a (delta_x, delta_y) split: the first commodity at its marginal
// Chernoff level, the second offset by the conditional mean rho (sigma_y/sigma_x) x.
Eigen::VectorXd conditional_offset_margins(const GaussianModel& model, LeadTime lead_time,
                                           DeltaSplit split) {
    const double l = lead_time.value();
    const double rho = model.rho();
    const double sx = std::sqrt(model.variance_x());
    const double sy = std::sqrt(model.variance_y());
    const double stock_x = std::sqrt(2.0 * l * sx * sx * log_inverse(split.x));
    const double stock_y = (sy / sx) * rho * stock_x +
                           std::sqrt(2.0 * l * sy * sy * (1.0 - rho * rho) * log_inverse(split.y));
    return Eigen::Vector2d(stock_x, stock_y);
}

double certified(const GaussianModel& model, LeadTime lead_time, const Eigen::VectorXd& stock) {
    const RateResult r = rate_gaussian_closed(model, stock / lead_time.value());
    return std::min(1.0, std::exp(-lead_time.value() * r.total));
}

bool equal_variances(const GaussianModel& model) {
    return model.dimension() == 2 && model.variance_x() == model.variance_y();
}

}  // namespace

Eigen::VectorXd ss_previous(const GaussianModel& model, LeadTime lead_time, double delta) {
    require_delta(delta);
    const auto n = model.dimension();
    const double k = normal_tail_inverse(std::pow(delta, 1.0 / static_cast<double>(n)));
    return (lead_time.value() * model.covariance().diagonal()).cwiseSqrt() * k;
}

ProposedStock ss_proposed(const GaussianModel& model, LeadTime lead_time, double delta,
                          Allocation allocation, std::optional<DeltaSplit> split) {
    require_delta(delta);
    const auto n = model.dimension();
    const double l = lead_time.value();
    ProposedStock out;
    out.delta = delta;

    if (n == 1) {
        out.safety_stock = Eigen::VectorXd::Constant(1, std::sqrt(2.0 * l * model.covariance()(0, 0) * log_inverse(delta)));
    } else if (allocation == Allocation::symmetric) {
        // The Gaussian rate is homogeneous of degree two, so the equal margin
        // solving L R(eps 1) = log(1/delta) is sqrt(log(1/delta) / (L R(1))).
        const double unit_rate = rate_gaussian_closed(model, Eigen::VectorXd::Ones(n)).total;
        const double eps = std::isinf(unit_rate) ? 0.0 : std::sqrt(log_inverse(delta) / (l * unit_rate));
        out.safety_stock = Eigen::VectorXd::Constant(n, l * eps);
        if (equal_variances(model)) {
            const double rho = model.rho();
            out.split = DeltaSplit{std::pow(delta, 0.5 * (1.0 + rho)), std::pow(delta, 0.5 * (1.0 - rho))};
        }
    } else {
        if (n != 2) throw ModelError("split allocations need exactly two commodities");
        DeltaSplit s;
        if (allocation == Allocation::sequential) {
            const double rho = model.rho();
            s = {std::pow(delta, 0.5 * (1.0 + rho)), std::pow(delta, 0.5 * (1.0 - rho))};
        } else {
            if (!split) throw ModelError("explicit allocation needs (delta_x, delta_y)");
            s = *split;
            if (!(s.x > 0.0 && s.x <= 1.0 && s.y > 0.0 && s.y <= 1.0))
                throw ModelError("split probabilities must lie in (0, 1]");
            if (std::abs(s.x * s.y - delta) > 1e-12)
                throw ModelError("delta_x * delta_y must equal delta");
        }
        out.split = s;
        out.safety_stock = conditional_offset_margins(model, lead_time, s);
    }
    out.certified_delta = certified(model, lead_time, out.safety_stock);
    return out;
}

double ss_proposed(const CgfEvaluator& cgf, LeadTime lead_time, double delta,
                   const SolverConfig& cfg) {
    require_delta(delta);
    return invert_rate(cgf, delta, lead_time, cfg);
}

double ss_fungible(const GaussianModel& model, LeadTime lead_time, double delta) {
    require_delta(delta);
    const double pooled_variance = model.covariance().sum();
    return std::sqrt(std::max(0.0, -2.0 * lead_time.value() * pooled_variance * std::log(delta)));
}

JointTailInversion ss_rigorous(const GaussianModel& model, LeadTime lead_time, double delta,
                               std::size_t mc_trials, std::uint64_t seed) {
    require_delta(delta);
    if (model.dimension() <= 2) return invert_joint_tail(model, delta, lead_time);
    return joint_tail_quantile_mc(model, delta, lead_time, mc_trials, seed);
}

PolicyOutput compute_policies(const GaussianModel& model, LeadTime lead_time, double delta,
                              std::size_t mc_trials, std::uint64_t seed) {
    PolicyOutput out;
    out.mean = model.mean();
    out.lead_time = lead_time.periods();
    out.delta = delta;
    out.ss_pre = ss_previous(model, lead_time, delta);
    const ProposedStock pro = ss_proposed(model, lead_time, delta);
    out.ss_pro = pro.safety_stock;
    out.split = pro.split;
    out.certified_pro = pro.certified_delta;
    const JointTailInversion rig = ss_rigorous(model, lead_time, delta, mc_trials, seed);
    out.ss_rig = Eigen::VectorXd::Constant(model.dimension(), rig.safety_stock);
    out.rig_no_stock_needed = rig.no_stock_needed;
    return out;
}

double ComparisonRow::ratio_pro() const {
    return ss_rig > 0.0 ? ss_pro / ss_rig : std::numeric_limits<double>::quiet_NaN();
}

double ComparisonRow::ratio_pre() const {
    return ss_rig > 0.0 ? ss_pre / ss_rig : std::numeric_limits<double>::quiet_NaN();
}

double equal_margin_stockout(const GaussianModel& model, LeadTime lead_time, double safety_stock) {
    if (model.dimension() == 1)
        return normal_tail(safety_stock / std::sqrt(lead_time.value() * model.covariance()(0, 0)));
    if (model.dimension() == 2)
        return bivariate_joint_tail(
                   TailQuery::from_safety_stock(model, safety_stock, safety_stock, lead_time))
            .probability;
    throw ModelError("exact equal-margin stockout covers one or two commodities");
}

std::vector<ComparisonRow> compare_policies(const GaussianModel& model, LeadTime lead_time,
                                            std::span<const double> deltas) {
    if (model.dimension() > 2 || (model.dimension() == 2 && !equal_variances(model)))
        throw ModelError("policy comparison needs one commodity or two with equal variances");
    std::vector<ComparisonRow> rows;
    rows.reserve(deltas.size());
    for (double delta : deltas) {
        require_delta(delta);
        ComparisonRow row;
        row.delta = delta;
        row.ss_pre = ss_previous(model, lead_time, delta)[0];
        row.ss_pro = ss_proposed(model, lead_time, delta).safety_stock[0];
        const JointTailInversion rig = invert_joint_tail(model, delta, lead_time);
        row.ss_rig = rig.safety_stock;
        row.p_pre = equal_margin_stockout(model, lead_time, row.ss_pre);
        row.p_pro = equal_margin_stockout(model, lead_time, row.ss_pro);
        row.p_rig = rig.probability;
        rows.push_back(row);
    }
    return rows;
}

std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0 && hi >= lo) || n < 1) throw ModelError("invalid log-spaced grid");
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

}  // namespace stockbound
