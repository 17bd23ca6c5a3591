#pragma once

// Per-period cumulant generating functions phi(u) = (1/L) log E[exp(u . sum_t D_t)]
// and their gradients, for analytic demand models and for sampled demand.
//
// Values are per time period but NOT divided by the number of commodities; the
// per-commodity normalization lives in RateResult.

#include "stockbound/demand_models.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

namespace stockbound {

/// Argument outside the set where a CGF is known to be finite.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Series failed to reach its truncation tolerance.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One coordinate of an effective domain. Open intervals exclude their endpoints
/// (phi blows up there); closed intervals are user windows that optimizers may
/// clamp to.
struct Interval {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool closed = false;

    bool contains(double u) const noexcept {
        return closed ? (u >= lower && u <= upper) : (u > lower && u < upper);
    }
    bool unbounded() const noexcept {
        return lower == -std::numeric_limits<double>::infinity() &&
               upper == std::numeric_limits<double>::infinity();
    }
};

enum class Centering { raw, centered };

/// Immutable, shareable CGF evaluator. Cheap to copy.
class CgfEvaluator {
public:
    class Source {
    public:
        virtual ~Source() = default;
        virtual std::size_t dimension() const = 0;
        virtual double value(const Eigen::VectorXd& u) const = 0;
        virtual Eigen::VectorXd gradient(const Eigen::VectorXd& u) const = 0;
        virtual std::vector<Interval> domain() const = 0;
    };

    explicit CgfEvaluator(std::shared_ptr<const Source> source);

    /// (1/2) u^T Sigma u; finite everywhere.
    static CgfEvaluator gaussian(const GaussianModel& model);

    /// Log of the Weibull moment series (closed form -log(1 - u beta) for shape 1).
    static CgfEvaluator weibull(const WeibullModel& model, Centering centering = Centering::centered,
                                double tolerance = 1e-15);

    /// Sample estimate over the replicate totals, restricted to |u| <= window.
    static CgfEvaluator empirical(const EmpiricalDemand& data, double window = 5.0,
                                  Centering centering = Centering::centered);

    std::size_t dimension() const { return source_->dimension(); }
    const std::vector<Interval>& domain() const noexcept { return domain_; }
    bool in_domain(const Eigen::VectorXd& u) const;

    double operator()(const Eigen::VectorXd& u) const;
    double operator()(double u) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& u) const;
    double derivative(double u) const;

    /// psi(v) = phi(s o v) for a sign vector s in {-1, +1}^N. Turns a bound over
    /// the orthant {s_i u_i >= 0} into one over u >= 0.
    CgfEvaluator reflected(const std::vector<int>& signs) const;

    /// One-dimensional psi(t) = phi(t * direction).
    CgfEvaluator along(const Eigen::VectorXd& direction) const;

    /// Marginal CGF of commodity i.
    CgfEvaluator marginal(std::size_t i) const;

private:
    std::shared_ptr<const Source> source_;
    std::vector<Interval> domain_;
};

double cgf_gaussian(const GaussianModel& model, const Eigen::VectorXd& u);
Eigen::VectorXd cgf_gaussian_gradient(const GaussianModel& model, const Eigen::VectorXd& u);

struct SeriesValue {
    double value;      ///< phi(u)
    double derivative; ///< phi'(u)
    int terms;         ///< series terms summed (0 for closed forms)
};

/// Weibull CGF from the moment series sum_k (u beta)^k Gamma(k/alpha + 1) / k!.
/// Truncated once a term falls below tolerance * partial sum (cap 500 terms).
/// The series is the raw MGF; Centering::centered subtracts u * E[X].
/// Shape exactly 1 uses -log(1 - u beta), finite for u < 1/beta.
SeriesValue cgf_weibull_series(const WeibullModel& model, double u, double tolerance = 1e-15,
                               Centering centering = Centering::raw);

/// (1/L) log((1/M) sum_a exp(u * S_a)) with S_a the total of row a.
/// Requires M >= 2 and |u| <= window.
double cgf_empirical(const EmpiricalDemand& data, double u, double window = 5.0);

/// Chebyshev certificate for the sample MGF at u: with probability at least
/// 1 - 1/(M C^2) the sample mean lies within C * sd of the true MGF.
struct EstimationCertificate {
    std::size_t samples = 0;
    double multiplier = 0.0;
    std::optional<double> failure_probability;  ///< 1/(M C^2), only when M C^2 > 1
    double mgf_estimate = 0.0;                  ///< (1/M) sum exp(u S_a)
    double mgf_std = 0.0;                       ///< sample sd of exp(u S_a)
    double half_width = 0.0;                    ///< C * mgf_std
};

EstimationCertificate estimation_certificate(const EmpiricalDemand& data, double u, double C);

}  // namespace stockbound
