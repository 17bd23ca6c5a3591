#pragma once

// Demand distributions, correlated sample generation and demand-data ingestion.
//
// Every formula downstream works with mean-centered demand X_t = D_t - mu.
// Raw demand only appears here (means, CSV rows, generated samples).

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace stockbound {

/// Invalid model parameters (non-PSD covariance, bad shapes, ...).
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed demand data. Row and column are 1-based; column 0 means the whole row.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t row, std::size_t column, const std::string& what);

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

/// Number of periods between placing and receiving an order.
class LeadTime {
public:
    explicit LeadTime(int periods);

    int periods() const noexcept { return periods_; }
    double value() const noexcept { return static_cast<double>(periods_); }

private:
    int periods_;
};

/// Multivariate normal per-period demand N(mu, Sigma), i.i.d. across periods.
class GaussianModel {
public:
    /// Validates symmetry, nonnegative diagonal and positive semidefiniteness
    /// (eigenvalues >= -1e-10 * trace). Singular covariances are accepted.
    GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

    static GaussianModel univariate(double variance, double mean = 0.0);
    static GaussianModel bivariate(double variance_x, double variance_y, double rho,
                                   double mean_x = 0.0, double mean_y = 0.0);

    Eigen::Index dimension() const noexcept { return mean_.size(); }
    const Eigen::VectorXd& mean() const noexcept { return mean_; }
    const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }

    /// A with A * A^T == covariance. Cholesky when Sigma is positive definite,
    /// otherwise the symmetric eigen square root with negative eigenvalues clipped.
    const Eigen::MatrixXd& factor() const noexcept { return factor_; }

    // Two-commodity accessors; throw ModelError unless dimension() == 2.
    double variance_x() const;
    double variance_y() const;
    double rho() const;

private:
    void require_bivariate() const;

    Eigen::VectorXd mean_;
    Eigen::MatrixXd covariance_;
    Eigen::MatrixXd factor_;
};

/// Weibull(shape alpha, scale beta) per-period demand.
struct WeibullModel {
    WeibullModel(double shape, double scale);

    double shape;
    double scale;

    double mean() const;
    double variance() const;
};

/// M replicate demand sequences of length L, stored row-major.
class EmpiricalDemand {
public:
    EmpiricalDemand(std::vector<double> values, std::size_t replicates, std::size_t periods);

    std::size_t replicates() const noexcept { return replicates_; }
    std::size_t periods() const noexcept { return periods_; }

    double operator()(std::size_t replicate, std::size_t period) const {
        return values_[replicate * periods_ + period];
    }
    std::span<const double> row(std::size_t replicate) const {
        return {values_.data() + replicate * periods_, periods_};
    }

    /// Total demand over the sequence for each replicate.
    std::vector<double> row_sums() const;

private:
    std::vector<double> values_;
    std::size_t replicates_;
    std::size_t periods_;
};

/// count x L x N block of simulated raw demand.
class DemandTensor {
public:
    DemandTensor(std::size_t count, std::size_t periods, std::size_t dimension);

    std::size_t count() const noexcept { return count_; }
    std::size_t periods() const noexcept { return periods_; }
    std::size_t dimension() const noexcept { return dimension_; }

    double& operator()(std::size_t r, std::size_t t, std::size_t i) {
        return values_[(r * periods_ + t) * dimension_ + i];
    }
    double operator()(std::size_t r, std::size_t t, std::size_t i) const {
        return values_[(r * periods_ + t) * dimension_ + i];
    }

    /// Sum over the lead time of commodity i in replicate r.
    double total(std::size_t r, std::size_t i) const;

private:
    std::size_t count_;
    std::size_t periods_;
    std::size_t dimension_;
    std::vector<double> values_;
};

/// Draws count replicates of L i.i.d. N(mu, Sigma) periods. Chunk c of replicates uses
/// the stream derive_seed(seed, c), so the result is bit-identical for a fixed seed.
DemandTensor sample_correlated(const GaussianModel& model, LeadTime lead_time,
                               std::size_t count, std::uint64_t seed);

/// Per-replicate lead-time totals sum_t D_t (count x N) from the same draws as
/// sample_correlated with the same seed, without storing individual periods.
Eigen::MatrixXd simulate_lead_time_totals(const GaussianModel& model, LeadTime lead_time,
                                          std::size_t count, std::uint64_t seed);

/// Draws count i.i.d. Weibull variates by inversion, one stream per chunk.
std::vector<double> sample_weibull(const WeibullModel& model, std::size_t count,
                                   std::uint64_t seed);

/// One replicate sequence per row, periods as columns.
EmpiricalDemand parse_demand_csv(std::istream& in, bool skip_header = false);
EmpiricalDemand load_demand_csv(const std::filesystem::path& path, bool skip_header = false);

using DemandModel = std::variant<GaussianModel, WeibullModel, EmpiricalDemand>;

/// {"type":"gaussian","mu":[...],"sigma":[[...],...]}
/// {"type":"weibull","shape":a,"scale":b}
/// {"type":"empirical","path":"file.csv","header":false}
/// Relative empirical paths resolve against base_dir.
DemandModel model_from_json(const nlohmann::json& node,
                            const std::filesystem::path& base_dir = {});

}  // namespace stockbound
