#include "stockbound/demand_models.hpp"

#include "stockbound/random.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <string_view>

namespace stockbound {

namespace {

constexpr double kPsdTolerance = 1e-10;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

Eigen::MatrixXd square_root_factor(const Eigen::MatrixXd& covariance, double trace) {
    Eigen::LLT<Eigen::MatrixXd> llt(covariance);
    if (llt.info() == Eigen::Success) {
        const Eigen::MatrixXd lower = llt.matrixL();
        const double min_pivot = lower.diagonal().minCoeff();
        if (min_pivot > 1e-7 * std::sqrt(trace)) return lower;
    }
    // Singular (or numerically singular) covariance: V * sqrt(Lambda).
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance);
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

}  // namespace

ParseError::ParseError(std::size_t row, std::size_t column, const std::string& what)
    : std::runtime_error("row " + std::to_string(row) +
                         (column > 0 ? ", column " + std::to_string(column) : std::string{}) +
                         ": " + what),
      row_(row),
      column_(column) {}

LeadTime::LeadTime(int periods) : periods_(periods) {
    if (periods < 1) throw ModelError("lead time must be at least one period");
}

GaussianModel::GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
    const auto n = mean_.size();
    if (n < 1) throw ModelError("gaussian model needs at least one commodity");
    if (covariance_.rows() != n || covariance_.cols() != n)
        throw ModelError("covariance must be " + std::to_string(n) + "x" + std::to_string(n));
    if (!mean_.allFinite() || !covariance_.allFinite())
        throw ModelError("gaussian parameters must be finite");
    if ((covariance_.diagonal().array() < 0.0).any())
        throw ModelError("covariance diagonal must be nonnegative");

    const double trace = covariance_.trace();
    const double scale = std::max(trace, 1e-300);
    if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ModelError("covariance must be symmetric");
    covariance_ = 0.5 * (covariance_ + covariance_.transpose());

    if (trace == 0.0) {
        factor_ = Eigen::MatrixXd::Zero(n, n);
        return;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance_, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -kPsdTolerance * trace)
        throw ModelError("covariance is not positive semidefinite");
    factor_ = square_root_factor(covariance_, trace);
}

GaussianModel GaussianModel::univariate(double variance, double mean) {
    return GaussianModel(Eigen::VectorXd::Constant(1, mean),
                         Eigen::MatrixXd::Constant(1, 1, variance));
}

GaussianModel GaussianModel::bivariate(double variance_x, double variance_y, double rho,
                                       double mean_x, double mean_y) {
    if (!(std::abs(rho) <= 1.0)) throw ModelError("correlation must lie in [-1, 1]");
    if (!(variance_x > 0.0) || !(variance_y > 0.0))
        throw ModelError("variances must be positive");
    Eigen::Matrix2d cov;
    const double off = rho * std::sqrt(variance_x) * std::sqrt(variance_y);
    cov << variance_x, off, off, variance_y;
    return GaussianModel(Eigen::Vector2d(mean_x, mean_y), cov);
}

void GaussianModel::require_bivariate() const {
    if (dimension() != 2) throw ModelError("accessor defined only for two commodities");
}

double GaussianModel::variance_x() const {
    require_bivariate();
    return covariance_(0, 0);
}

double GaussianModel::variance_y() const {
    require_bivariate();
    return covariance_(1, 1);
}

double GaussianModel::rho() const {
    require_bivariate();
    const double denom = std::sqrt(covariance_(0, 0)) * std::sqrt(covariance_(1, 1));
    if (denom == 0.0) return 0.0;
    return std::clamp(covariance_(0, 1) / denom, -1.0, 1.0);
}

WeibullModel::WeibullModel(double shape_, double scale_) : shape(shape_), scale(scale_) {
    if (!(shape > 0.0) || !std::isfinite(shape)) throw ModelError("weibull shape must be > 0");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ModelError("weibull scale must be > 0");
}

double WeibullModel::mean() const { return scale * std::tgamma(1.0 + 1.0 / shape); }

double WeibullModel::variance() const {
    const double g1 = std::tgamma(1.0 + 1.0 / shape);
    return scale * scale * (std::tgamma(1.0 + 2.0 / shape) - g1 * g1);
}

EmpiricalDemand::EmpiricalDemand(std::vector<double> values, std::size_t replicates,
                                 std::size_t periods)
    : values_(std::move(values)), replicates_(replicates), periods_(periods) {
    if (replicates_ < 1 || periods_ < 1)
        throw ModelError("empirical demand needs at least one row and one column");
    if (values_.size() != replicates_ * periods_)
        throw ModelError("empirical demand values do not match M x L");
    for (double v : values_)
        if (!std::isfinite(v)) throw ModelError("empirical demand must be finite");
}

std::vector<double> EmpiricalDemand::row_sums() const {
    std::vector<double> sums(replicates_);
    for (std::size_t a = 0; a < replicates_; ++a) {
        double s = 0.0;
        for (double v : row(a)) s += v;
        sums[a] = s;
    }
    return sums;
}

DemandTensor::DemandTensor(std::size_t count, std::size_t periods, std::size_t dimension)
    : count_(count), periods_(periods), dimension_(dimension),
      values_(count * periods * dimension, 0.0) {}

double DemandTensor::total(std::size_t r, std::size_t i) const {
    double s = 0.0;
    for (std::size_t t = 0; t < periods_; ++t) s += (*this)(r, t, i);
    return s;
}

namespace {

// Calls sink(r, t, i, value) for every simulated raw demand in replicate order.
template <class Sink>
void simulate_periods(const GaussianModel& model, LeadTime lead_time, std::size_t count,
                      std::uint64_t seed, Sink&& sink) {
    if (count < 1) throw ModelError("sample count must be at least 1");
    const auto n = static_cast<std::size_t>(model.dimension());
    const auto periods = static_cast<std::size_t>(lead_time.periods());
    const Eigen::MatrixXd& factor = model.factor();
    const Eigen::VectorXd& mean = model.mean();

    run_chunked<int>(count, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        NormalStream rng(seed, chunk);
        Eigen::VectorXd z(n);
        for (std::size_t r = begin; r < end; ++r) {
            for (std::size_t t = 0; t < periods; ++t) {
                for (std::size_t i = 0; i < n; ++i) z[i] = rng.normal();
                for (std::size_t i = 0; i < n; ++i) sink(r, t, i, mean[i] + factor.row(i).dot(z));
            }
        }
        return 0;
    });
}

}  // namespace

DemandTensor sample_correlated(const GaussianModel& model, LeadTime lead_time,
                               std::size_t count, std::uint64_t seed) {
    if (count < 1) throw ModelError("sample count must be at least 1");
    DemandTensor out(count, static_cast<std::size_t>(lead_time.periods()),
                     static_cast<std::size_t>(model.dimension()));
    simulate_periods(model, lead_time, count, seed,
                     [&](std::size_t r, std::size_t t, std::size_t i, double v) { out(r, t, i) = v; });
    return out;
}

Eigen::MatrixXd simulate_lead_time_totals(const GaussianModel& model, LeadTime lead_time,
                                          std::size_t count, std::uint64_t seed) {
    if (count < 1) throw ModelError("sample count must be at least 1");
    Eigen::MatrixXd totals = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(count), model.dimension());
    simulate_periods(model, lead_time, count, seed,
                     [&](std::size_t r, std::size_t, std::size_t i, double v) {
                         totals(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) += v;
                     });
    return totals;
}

std::vector<double> sample_weibull(const WeibullModel& model, std::size_t count,
                                   std::uint64_t seed) {
    std::vector<double> out(count);
    run_chunked<int>(count, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        NormalStream rng(seed, chunk);
        for (std::size_t r = begin; r < end; ++r)
            out[r] = model.scale * std::pow(-std::log(rng.uniform()), 1.0 / model.shape);
        return 0;
    });
    return out;
}

EmpiricalDemand parse_demand_csv(std::istream& in, bool skip_header) {
    std::vector<double> values;
    std::size_t columns = 0;
    std::size_t rows = 0;
    std::size_t line_no = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
        if (line_no == 1 && skip_header) continue;
        if (trim(line).empty()) continue;

        std::size_t col = 0;
        std::string_view rest(line);
        while (true) {
            ++col;
            const auto comma = rest.find(',');
            const std::string_view cell = trim(rest.substr(0, comma));
            double v = 0.0;
            const auto* first = cell.data();
            const auto* last = cell.data() + cell.size();
            if (cell.starts_with('+')) ++first;
            const auto [ptr, ec] = std::from_chars(first, last, v);
            if (cell.empty() || ec != std::errc{} || ptr != last || !std::isfinite(v))
                throw ParseError(line_no, col, "non-numeric cell '" + std::string(cell) + "'");
            values.push_back(v);
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (rows == 0) {
            columns = col;
        } else if (col != columns) {
            throw ParseError(line_no, 0,
                             "expected " + std::to_string(columns) + " columns, found " +
                                 std::to_string(col));
        }
        ++rows;
    }
    if (rows == 0) throw ParseError(line_no, 0, "no demand rows");
    return EmpiricalDemand(std::move(values), rows, columns);
}

EmpiricalDemand load_demand_csv(const std::filesystem::path& path, bool skip_header) {
    std::ifstream in(path);
    if (!in) throw ParseError(0, 0, "cannot open " + path.string());
    return parse_demand_csv(in, skip_header);
}

namespace {

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const char* name) {
    if (!j.is_array()) throw ModelError(std::string(name) + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ModelError(std::string(name) + " must be numeric");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

}  // namespace

DemandModel model_from_json(const nlohmann::json& node, const std::filesystem::path& base_dir) {
    if (!node.is_object() || !node.contains("type"))
        throw ModelError("model description needs a \"type\" field");
    const auto type = node.at("type").get<std::string>();
    if (type == "gaussian") {
        const Eigen::VectorXd mu = vector_from_json(node.at("mu"), "mu");
        const auto& rows = node.at("sigma");
        if (!rows.is_array() || rows.size() != static_cast<std::size_t>(mu.size()))
            throw ModelError("sigma must have one row per commodity");
        Eigen::MatrixXd sigma(mu.size(), mu.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const Eigen::VectorXd row = vector_from_json(rows[i], "sigma row");
            if (row.size() != mu.size()) throw ModelError("sigma must be square");
            sigma.row(static_cast<Eigen::Index>(i)) = row.transpose();
        }
        return GaussianModel(mu, sigma);
    }
    if (type == "weibull")
        return WeibullModel(node.at("shape").get<double>(), node.at("scale").get<double>());
    if (type == "empirical") {
        std::filesystem::path path = node.at("path").get<std::string>();
        if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
        return load_demand_csv(path, node.value("header", false));
    }
    throw ModelError("unknown model type '" + type + "'");
}

}  // namespace stockbound
