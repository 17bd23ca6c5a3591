#include "stockbound/stockout_oracle.hpp"

#include "stockbound/random.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace stockbound {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr double kTruncation = 10.0;    // standard units beyond the threshold
constexpr double kQuadratureTol = 1e-8; // required on the returned probability
constexpr unsigned kMaxDepth = 20;

double normal_density(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

OracleResult degenerate_tail(const TailQuery& q) {
    OracleResult r;
    r.method = OracleMethod::closed_form;
    if (q.rho > 0.0) r.probability = normal_tail(std::max(q.a, q.b));  // Y == X
    else r.probability = std::max(0.0, normal_tail(q.a) - normal_tail(-q.b));  // Y == -X
    return r;
}

OracleResult conditional_quadrature(const TailQuery& q) {
    const double c = std::sqrt((1.0 - q.rho) * (1.0 + q.rho));
    const double lower = std::max(q.a, -12.0);
    const double upper = std::max(q.a, 0.0) + kTruncation;
    auto integrand = [&](double u) { return normal_density(u) * normal_tail((q.b - q.rho * u) / c); };
    double err = 0.0;
    double value = 0.0;
    if (upper > lower)
        value = gauss_kronrod<double, 31>::integrate(integrand, lower, upper, kMaxDepth, 1e-13, &err);
    OracleResult r;
    r.method = OracleMethod::conditional_quadrature;
    r.probability = std::clamp(value, 0.0, 1.0);
    r.error_estimate = err + normal_tail(upper) + (q.a < lower ? normal_tail(12.0) : 0.0);
    return r;
}

OracleResult double_quadrature(const TailQuery& q) {
    // With X = s sqrt(1 - rho^2), Y = t sqrt(1 - rho^2) the joint density becomes
    // sqrt(1 - rho^2)/(2 pi) exp(-(s^2 + t^2)/2 + rho s t).
    const double c = std::sqrt((1.0 - q.rho) * (1.0 + q.rho));
    const double s_lo_cut = q.a / c;
    const double t_lo_cut = q.b / c;
    const double s_width = 1.0 / c;  // standard deviation of s
    const double s_lower = std::max(s_lo_cut, -12.0 * s_width);
    const double s_upper = std::max(s_lo_cut, 0.0) + 12.0 * s_width;
    const double norm = c / (2.0 * std::numbers::pi);

    double worst_inner = 0.0;
    auto inner = [&](double s) {
        // In t the integrand is a unit-width Gaussian centered at rho * s.
        const double center = q.rho * s;
        const double t_lower = std::max(t_lo_cut, center - 12.0);
        const double t_upper = std::max(t_lo_cut, center) + 12.0;
        if (t_upper <= t_lower) return 0.0;
        auto f = [&](double t) { return std::exp(-0.5 * (s * s - 2.0 * q.rho * s * t + t * t)); };
        double err = 0.0;
        const double v = gauss_kronrod<double, 31>::integrate(f, t_lower, t_upper, kMaxDepth, 1e-13, &err);
        worst_inner = std::max(worst_inner, err);
        return v;
    };
    double outer_err = 0.0;
    double value = 0.0;
    if (s_upper > s_lower)
        value = gauss_kronrod<double, 31>::integrate(inner, s_lower, s_upper, kMaxDepth, 1e-12, &outer_err);
    OracleResult r;
    r.method = OracleMethod::double_quadrature;
    r.probability = std::clamp(norm * value, 0.0, 1.0);
    r.error_estimate = norm * (outer_err + worst_inner * (s_upper - s_lower)) + 2.0 * normal_tail(12.0);
    return r;
}

struct Totals {
    // Row-major factor of L * Sigma.
    std::vector<double> factor;
    std::size_t n;
};

Totals lead_time_factor(const GaussianModel& model, LeadTime lead_time) {
    const auto n = static_cast<std::size_t>(model.dimension());
    Totals t{std::vector<double>(n * n), n};
    const double root_l = std::sqrt(lead_time.value());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            t.factor[i * n + j] = root_l * model.factor()(static_cast<Eigen::Index>(i),
                                                          static_cast<Eigen::Index>(j));
    return t;
}

// Fills x with one simulated centered lead-time total.
void draw_total(const Totals& t, NormalStream& rng, std::vector<double>& z, std::vector<double>& x) {
    for (std::size_t j = 0; j < t.n; ++j) z[j] = rng.normal();
    for (std::size_t i = 0; i < t.n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < t.n; ++j) acc += t.factor[i * t.n + j] * z[j];
        x[i] = acc;
    }
}

}  // namespace

double normal_tail(double k) { return 0.5 * std::erfc(k / std::numbers::sqrt2); }

double normal_tail_inverse(double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw ModelError("tail probability must lie in (0, 1)");
    double lo = -40.0;  // H(lo) > delta
    double hi = 40.0;   // H(hi) < delta
    for (int k = 0; k < 2000; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (normal_tail(mid) > delta) lo = mid;
        else hi = mid;
    }
    return std::abs(normal_tail(lo) - delta) <= std::abs(normal_tail(hi) - delta) ? lo : hi;
}

TailQuery TailQuery::from_safety_stock(const GaussianModel& model, double stock_x, double stock_y,
                                       LeadTime lead_time) {
    const double l = lead_time.value();
    return TailQuery{stock_x / std::sqrt(l * model.variance_x()),
                     stock_y / std::sqrt(l * model.variance_y()), model.rho()};
}

const char* method_name(OracleMethod method) {
    switch (method) {
        case OracleMethod::conditional_quadrature: return "quadrature-conditional";
        case OracleMethod::double_quadrature: return "quadrature-double";
        case OracleMethod::monte_carlo: return "monte-carlo";
        case OracleMethod::closed_form: return "closed-form";
    }
    return "unknown";
}

OracleResult bivariate_joint_tail(const TailQuery& query, OracleMethod method) {
    if (!std::isfinite(query.a) || !std::isfinite(query.b))
        throw ModelError("tail thresholds must be finite");
    if (!(std::abs(query.rho) <= 1.0)) throw ModelError("correlation must lie in [-1, 1]");
    if (std::abs(query.rho) == 1.0) return degenerate_tail(query);

    OracleResult r;
    switch (method) {
        case OracleMethod::conditional_quadrature: r = conditional_quadrature(query); break;
        case OracleMethod::double_quadrature: r = double_quadrature(query); break;
        default: throw ModelError("bivariate_joint_tail supports the two quadrature methods");
    }
    if (!(r.error_estimate < kQuadratureTol))
        throw QuadratureError("joint tail quadrature did not converge", r.error_estimate);
    return r;
}

OracleResult joint_tail_monte_carlo(const GaussianModel& model, const Eigen::VectorXd& safety_stock,
                                    LeadTime lead_time, std::size_t trials, std::uint64_t seed,
                                    const StockoutPattern& pattern) {
    const auto n = static_cast<std::size_t>(model.dimension());
    if (trials < 10'000) throw ModelError("monte carlo oracle needs at least 1e4 trials");
    if (!safety_stock.allFinite()) throw ModelError("safety stock must be finite");

    std::vector<int> signs(n, 1);
    enum class Kind { orthant, union_two, fungible } kind = Kind::orthant;
    if (const auto* p = std::get_if<SignedOrthant>(&pattern)) {
        if (p->signs.size() != n) throw ModelError("sign vector does not match dimension");
        signs = p->signs;
    } else if (std::holds_alternative<UnionOfTwo>(pattern)) {
        if (n != 2) throw ModelError("union pattern needs two commodities");
        kind = Kind::union_two;
    } else if (std::holds_alternative<FungibleSum>(pattern)) {
        kind = Kind::fungible;
    }
    const std::size_t expected = kind == Kind::fungible ? 1 : n;
    if (static_cast<std::size_t>(safety_stock.size()) != expected)
        throw ModelError("safety stock does not match the stockout pattern");

    const Totals totals = lead_time_factor(model, lead_time);
    const std::vector<double> margin(safety_stock.data(), safety_stock.data() + safety_stock.size());

    const auto counts = run_chunked<std::size_t>(
        trials, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
            NormalStream rng(seed, chunk);
            std::vector<double> z(n);
            std::vector<double> x(n);
            std::size_t hits = 0;
            for (std::size_t r = begin; r < end; ++r) {
                draw_total(totals, rng, z, x);
                bool event = false;
                switch (kind) {
                    case Kind::orthant:
                        event = true;
                        for (std::size_t i = 0; i < n && event; ++i)
                            event = signs[i] > 0 ? x[i] >= margin[i] : x[i] <= margin[i];
                        break;
                    case Kind::union_two:
                        event = x[0] >= margin[0] || x[1] >= margin[1];
                        break;
                    case Kind::fungible: {
                        double pooled = 0.0;
                        for (double v : x) pooled += v;
                        event = pooled >= margin[0];
                        break;
                    }
                }
                hits += event ? 1 : 0;
            }
            return hits;
        });

    OracleResult r;
    r.method = OracleMethod::monte_carlo;
    r.trials = trials;
    for (std::size_t c : counts) r.hits += c;
    r.probability = static_cast<double>(r.hits) / static_cast<double>(trials);
    r.error_estimate = 3.0 * std::sqrt(r.probability * (1.0 - r.probability) / static_cast<double>(trials));
    return r;
}

JointTailInversion invert_joint_tail(const GaussianModel& model, double delta, LeadTime lead_time) {
    if (!(delta > 0.0 && delta < 1.0)) throw ModelError("delta must lie in (0, 1)");
    const double l = lead_time.value();

    if (model.dimension() == 1) {
        const double sd = std::sqrt(l * model.covariance()(0, 0));
        if (delta >= 0.5) return {0.0, 0.5, true};
        return {sd * normal_tail_inverse(delta), delta, false};
    }
    if (model.dimension() != 2)
        throw ModelError("quadrature inversion covers one or two commodities; use joint_tail_quantile_mc");
    if (!(model.variance_x() > 0.0 && model.variance_y() > 0.0))
        throw ModelError("variances must be positive");

    auto prob = [&](double ss) {
        return bivariate_joint_tail(TailQuery::from_safety_stock(model, ss, ss, lead_time)).probability;
    };
    const double p0 = prob(0.0);
    if (delta >= p0) return {0.0, p0, true};

    double lo = 0.0;
    double hi = std::sqrt(l * std::max(model.variance_x(), model.variance_y()));
    double p_hi = prob(hi);
    while (p_hi > delta) {
        lo = hi;
        hi *= 2.0;
        p_hi = prob(hi);
    }
    double p_mid = p_hi;
    double mid = hi;
    for (int k = 0; k < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++k) {
        mid = 0.5 * (lo + hi);
        p_mid = prob(mid);
        if (p_mid > delta) lo = mid;
        else hi = mid;
    }
    return {mid, p_mid, false};
}

JointTailInversion joint_tail_quantile_mc(const GaussianModel& model, double delta,
                                          LeadTime lead_time, std::size_t trials,
                                          std::uint64_t seed) {
    if (!(delta > 0.0 && delta < 1.0)) throw ModelError("delta must lie in (0, 1)");
    if (trials < 10'000) throw ModelError("monte carlo oracle needs at least 1e4 trials");
    const auto n = static_cast<std::size_t>(model.dimension());
    const Totals totals = lead_time_factor(model, lead_time);

    auto chunks = run_chunked<std::vector<double>>(
        trials, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
            NormalStream rng(seed, chunk);
            std::vector<double> z(n);
            std::vector<double> x(n);
            std::vector<double> mins;
            mins.reserve(end - begin);
            for (std::size_t r = begin; r < end; ++r) {
                draw_total(totals, rng, z, x);
                mins.push_back(*std::min_element(x.begin(), x.end()));
            }
            return mins;
        });
    std::vector<double> mins;
    mins.reserve(trials);
    for (auto& c : chunks) mins.insert(mins.end(), c.begin(), c.end());

    const auto count_at_least = [&](double ss) {
        return static_cast<double>(std::count_if(mins.begin(), mins.end(),
                                                 [ss](double m) { return m >= ss; })) /
               static_cast<double>(trials);
    };
    const double p0 = count_at_least(0.0);
    if (delta >= p0) return {0.0, p0, true};

    // Smallest SS whose empirical exceedance frequency is <= delta.
    const auto k = static_cast<std::size_t>(std::floor(delta * static_cast<double>(trials)));
    std::sort(mins.begin(), mins.end(), std::greater<>());
    const double ss = std::nextafter(mins[k], std::numeric_limits<double>::infinity());
    return {ss, count_at_least(ss), false};
}

}  // namespace stockbound
