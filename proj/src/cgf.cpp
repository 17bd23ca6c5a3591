#include "stockbound/cgf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stockbound {

namespace {

void require_dimension(const Eigen::VectorXd& u, std::size_t n) {
    if (static_cast<std::size_t>(u.size()) != n)
        throw ModelError("dimension mismatch: expected " + std::to_string(n) + ", got " +
                         std::to_string(u.size()));
}

class GaussianSource final : public CgfEvaluator::Source {
public:
    explicit GaussianSource(const GaussianModel& model) : covariance_(model.covariance()) {}

    std::size_t dimension() const override { return static_cast<std::size_t>(covariance_.rows()); }
    double value(const Eigen::VectorXd& u) const override {
        require_dimension(u, dimension());
        return 0.5 * u.dot(covariance_ * u);
    }
    Eigen::VectorXd gradient(const Eigen::VectorXd& u) const override {
        require_dimension(u, dimension());
        return covariance_ * u;
    }
    std::vector<Interval> domain() const override { return std::vector<Interval>(dimension()); }

private:
    Eigen::MatrixXd covariance_;
};

class WeibullSource final : public CgfEvaluator::Source {
public:
    WeibullSource(const WeibullModel& model, Centering centering, double tolerance)
        : model_(model), centering_(centering), tolerance_(tolerance) {
        if (model.shape < 1.0)
            throw DomainError("MGF series not certified convergent for weibull shape < 1");
    }

    std::size_t dimension() const override { return 1; }
    double value(const Eigen::VectorXd& u) const override {
        require_dimension(u, 1);
        return cgf_weibull_series(model_, u[0], tolerance_, centering_).value;
    }
    Eigen::VectorXd gradient(const Eigen::VectorXd& u) const override {
        require_dimension(u, 1);
        return Eigen::VectorXd::Constant(
            1, cgf_weibull_series(model_, u[0], tolerance_, centering_).derivative);
    }
    std::vector<Interval> domain() const override {
        Interval d;
        if (model_.shape == 1.0) d.upper = 1.0 / model_.scale;
        return {d};
    }

private:
    WeibullModel model_;
    Centering centering_;
    double tolerance_;
};

// Softmax-weighted sums over replicate totals, shifted by the max exponent.
struct LogSumExp {
    double log_mean;       // log((1/M) sum exp(u S_a))
    double weighted_total; // sum_a w_a S_a with w = softmax(u S)
};

LogSumExp log_mean_exp(const std::vector<double>& totals, double u) {
    double shift = -std::numeric_limits<double>::infinity();
    for (double s : totals) shift = std::max(shift, u * s);
    double sum = 0.0;
    double weighted = 0.0;
    for (double s : totals) {
        const double w = std::exp(u * s - shift);
        sum += w;
        weighted += w * s;
    }
    return {shift + std::log(sum) - std::log(static_cast<double>(totals.size())),
            weighted / sum};
}

class EmpiricalSource final : public CgfEvaluator::Source {
public:
    EmpiricalSource(const EmpiricalDemand& data, double window, Centering centering)
        : totals_(data.row_sums()),
          periods_(static_cast<double>(data.periods())),
          window_(window),
          centering_(centering) {
        if (data.replicates() < 2) throw ModelError("empirical CGF needs at least 2 replicates");
        if (!(window > 0.0)) throw ModelError("u window must be positive");
        mean_total_ = std::accumulate(totals_.begin(), totals_.end(), 0.0) /
                      static_cast<double>(totals_.size());
    }

    std::size_t dimension() const override { return 1; }
    double value(const Eigen::VectorXd& u) const override {
        check(u);
        double v = log_mean_exp(totals_, u[0]).log_mean / periods_;
        if (centering_ == Centering::centered) v -= u[0] * mean_total_ / periods_;
        return v;
    }
    Eigen::VectorXd gradient(const Eigen::VectorXd& u) const override {
        check(u);
        double g = log_mean_exp(totals_, u[0]).weighted_total / periods_;
        if (centering_ == Centering::centered) g -= mean_total_ / periods_;
        return Eigen::VectorXd::Constant(1, g);
    }
    std::vector<Interval> domain() const override { return {Interval{-window_, window_, true}}; }

private:
    void check(const Eigen::VectorXd& u) const {
        require_dimension(u, 1);
        if (!(std::abs(u[0]) <= window_))
            throw DomainError("u outside the empirical evaluation window");
    }

    std::vector<double> totals_;
    double periods_;
    double window_;
    Centering centering_;
    double mean_total_ = 0.0;
};

class ReflectedSource final : public CgfEvaluator::Source {
public:
    ReflectedSource(CgfEvaluator parent, Eigen::VectorXd signs)
        : parent_(std::move(parent)), signs_(std::move(signs)) {}

    std::size_t dimension() const override { return parent_.dimension(); }
    double value(const Eigen::VectorXd& v) const override {
        return parent_(signs_.cwiseProduct(v));
    }
    Eigen::VectorXd gradient(const Eigen::VectorXd& v) const override {
        return signs_.cwiseProduct(parent_.gradient(signs_.cwiseProduct(v)));
    }
    std::vector<Interval> domain() const override {
        std::vector<Interval> d = parent_.domain();
        for (std::size_t i = 0; i < d.size(); ++i)
            if (signs_[static_cast<Eigen::Index>(i)] < 0) d[i] = {-d[i].upper, -d[i].lower, d[i].closed};
        return d;
    }

private:
    CgfEvaluator parent_;
    Eigen::VectorXd signs_;
};

class DirectionalSource final : public CgfEvaluator::Source {
public:
    DirectionalSource(CgfEvaluator parent, Eigen::VectorXd direction)
        : parent_(std::move(parent)), direction_(std::move(direction)) {
        require_dimension(direction_, parent_.dimension());
    }

    std::size_t dimension() const override { return 1; }
    double value(const Eigen::VectorXd& t) const override {
        require_dimension(t, 1);
        return parent_(t[0] * direction_);
    }
    Eigen::VectorXd gradient(const Eigen::VectorXd& t) const override {
        require_dimension(t, 1);
        return Eigen::VectorXd::Constant(1, direction_.dot(parent_.gradient(t[0] * direction_)));
    }
    std::vector<Interval> domain() const override {
        Interval out;
        bool all_closed = true;
        bool bounded = false;
        const auto& parent_domain = parent_.domain();
        for (std::size_t i = 0; i < parent_domain.size(); ++i) {
            const double d = direction_[static_cast<Eigen::Index>(i)];
            const Interval& in = parent_domain[i];
            if (d == 0.0 || in.unbounded()) continue;
            bounded = true;
            all_closed = all_closed && in.closed;
            double lo = in.lower / d;
            double hi = in.upper / d;
            if (d < 0.0) std::swap(lo, hi);
            out.lower = std::max(out.lower, lo);
            out.upper = std::min(out.upper, hi);
        }
        out.closed = bounded && all_closed;
        return {out};
    }

private:
    CgfEvaluator parent_;
    Eigen::VectorXd direction_;
};

}  // namespace

CgfEvaluator::CgfEvaluator(std::shared_ptr<const Source> source)
    : source_(std::move(source)), domain_(source_->domain()) {}

CgfEvaluator CgfEvaluator::gaussian(const GaussianModel& model) {
    return CgfEvaluator(std::make_shared<GaussianSource>(model));
}

CgfEvaluator CgfEvaluator::weibull(const WeibullModel& model, Centering centering,
                                   double tolerance) {
    return CgfEvaluator(std::make_shared<WeibullSource>(model, centering, tolerance));
}

CgfEvaluator CgfEvaluator::empirical(const EmpiricalDemand& data, double window,
                                     Centering centering) {
    return CgfEvaluator(std::make_shared<EmpiricalSource>(data, window, centering));
}

bool CgfEvaluator::in_domain(const Eigen::VectorXd& u) const {
    if (static_cast<std::size_t>(u.size()) != domain_.size()) return false;
    for (std::size_t i = 0; i < domain_.size(); ++i)
        if (!domain_[i].contains(u[static_cast<Eigen::Index>(i)])) return false;
    return true;
}

double CgfEvaluator::operator()(const Eigen::VectorXd& u) const { return source_->value(u); }

double CgfEvaluator::operator()(double u) const {
    return source_->value(Eigen::VectorXd::Constant(1, u));
}

Eigen::VectorXd CgfEvaluator::gradient(const Eigen::VectorXd& u) const {
    return source_->gradient(u);
}

double CgfEvaluator::derivative(double u) const {
    return source_->gradient(Eigen::VectorXd::Constant(1, u))[0];
}

CgfEvaluator CgfEvaluator::reflected(const std::vector<int>& signs) const {
    if (signs.size() != dimension()) throw ModelError("sign vector length must match dimension");
    Eigen::VectorXd s(static_cast<Eigen::Index>(signs.size()));
    for (std::size_t i = 0; i < signs.size(); ++i) {
        if (signs[i] != 1 && signs[i] != -1) throw ModelError("signs must be +1 or -1");
        s[static_cast<Eigen::Index>(i)] = signs[i];
    }
    return CgfEvaluator(std::make_shared<ReflectedSource>(*this, std::move(s)));
}

CgfEvaluator CgfEvaluator::along(const Eigen::VectorXd& direction) const {
    return CgfEvaluator(std::make_shared<DirectionalSource>(*this, direction));
}

CgfEvaluator CgfEvaluator::marginal(std::size_t i) const {
    if (i >= dimension()) throw ModelError("commodity index out of range");
    return along(Eigen::VectorXd::Unit(static_cast<Eigen::Index>(dimension()),
                                       static_cast<Eigen::Index>(i)));
}

double cgf_gaussian(const GaussianModel& model, const Eigen::VectorXd& u) {
    require_dimension(u, static_cast<std::size_t>(model.dimension()));
    return 0.5 * u.dot(model.covariance() * u);
}

Eigen::VectorXd cgf_gaussian_gradient(const GaussianModel& model, const Eigen::VectorXd& u) {
    require_dimension(u, static_cast<std::size_t>(model.dimension()));
    return model.covariance() * u;
}

SeriesValue cgf_weibull_series(const WeibullModel& model, double u, double tolerance,
                               Centering centering) {
    if (!std::isfinite(u)) throw DomainError("u must be finite");
    if (!(tolerance > 0.0)) throw ModelError("series tolerance must be positive");
    const double alpha = model.shape;
    const double beta = model.scale;
    const double mean = model.mean();
    const double shift = centering == Centering::centered ? mean : 0.0;

    if (u == 0.0) return {0.0, mean - shift, 1};

    if (alpha == 1.0) {
        if (u * beta >= 1.0) throw DomainError("exponential MGF is infinite for u >= 1/scale");
        return {-std::log1p(-u * beta) - u * shift, beta / (1.0 - u * beta) - shift, 0};
    }
    if (alpha < 1.0) {
        if (u > 0.0) throw DomainError("MGF series not certified convergent for weibull shape < 1");
        throw DivergenceError("weibull moment series diverges for shape < 1");
    }

    // Terms t_k = (u beta)^k Gamma(k/alpha + 1) / k!, accumulated relative to a
    // running log-scale so large intermediate terms cannot overflow.
    constexpr int kMaxTerms = 500;
    const double log_ub = std::log(std::abs(u * beta));
    const bool alternating = u < 0.0;
    double scale = 0.0;       // log of the current common factor
    double sum = 1.0;         // sum t_k * exp(-scale)
    double dsum = 0.0;        // sum k t_k * exp(-scale)
    double peak = 0.0;        // max log|t_k|, for cancellation detection
    double previous = 0.0;    // log|t_{k-1}|
    for (int k = 1; k <= kMaxTerms; ++k) {
        const double log_term = k * log_ub + std::lgamma(k / alpha + 1.0) - std::lgamma(k + 1.0);
        const double sign = (alternating && (k % 2 == 1)) ? -1.0 : 1.0;
        if (log_term > scale) {
            const double r = std::exp(scale - log_term);
            sum *= r;
            dsum *= r;
            scale = log_term;
        }
        const double t = sign * std::exp(log_term - scale);
        sum += t;
        dsum += k * t;
        peak = std::max(peak, log_term);

        const bool decreasing = log_term < previous;
        previous = log_term;
        if (k > 1 && decreasing && std::abs(t) < tolerance * std::abs(sum) &&
            k * std::abs(t) < tolerance * std::abs(dsum)) {
            if (!(sum > 0.0) || peak - (scale + std::log(std::abs(sum))) > std::log(1e8))
                throw DivergenceError("weibull moment series lost precision to cancellation");
            const double log_mgf = scale + std::log(sum);
            const double derivative = dsum / (u * sum);
            return {log_mgf - u * shift, derivative - shift, k + 1};
        }
    }
    throw DivergenceError("weibull moment series did not converge within 500 terms");
}

double cgf_empirical(const EmpiricalDemand& data, double u, double window) {
    if (data.replicates() < 2) throw ModelError("empirical CGF needs at least 2 replicates");
    if (!(std::abs(u) <= window)) throw DomainError("u outside the empirical evaluation window");
    if (u == 0.0) return 0.0;
    return log_mean_exp(data.row_sums(), u).log_mean / static_cast<double>(data.periods());
}

EstimationCertificate estimation_certificate(const EmpiricalDemand& data, double u, double C) {
    if (!(C > 0.0)) throw ModelError("confidence multiplier C must be positive");
    const std::size_t m = data.replicates();
    if (m < 2) throw ModelError("certificate needs at least 2 replicates");

    EstimationCertificate cert;
    cert.samples = m;
    cert.multiplier = C;
    const double mc2 = static_cast<double>(m) * C * C;
    if (mc2 > 1.0) cert.failure_probability = 1.0 / mc2;

    // Welford over exp(u S_a).
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t n = 0;
    for (double s : data.row_sums()) {
        const double x = std::exp(u * s);
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    cert.mgf_estimate = mean;
    cert.mgf_std = std::sqrt(m2 / static_cast<double>(m - 1));
    cert.half_width = C * cert.mgf_std;
    return cert;
}

}  // namespace stockbound
