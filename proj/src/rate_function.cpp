#include "stockbound/rate_function.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace stockbound {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_margin(const Eigen::VectorXd& eps, std::size_t n) {
    if (static_cast<std::size_t>(eps.size()) != n)
        throw ModelError("margin has dimension " + std::to_string(eps.size()) + ", expected " +
                         std::to_string(n));
    if (!eps.allFinite()) throw ModelError("margin must be finite");
}

RateResult make_result(const Eigen::VectorXd& eps, double total, Eigen::VectorXd u) {
    RateResult r;
    r.margin = eps;
    r.total = total;
    r.per_degree = total / static_cast<double>(eps.size());
    r.maximizer = std::move(u);
    r.converged = true;
    return r;
}

// Projection onto u >= 0 intersected with any closed domain windows.
void project(Eigen::VectorXd& u, const std::vector<Interval>& domain) {
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        u[i] = std::max(u[i], 0.0);
        const Interval& d = domain[static_cast<std::size_t>(i)];
        if (d.closed) u[i] = std::clamp(u[i], std::max(d.lower, 0.0), d.upper);
    }
}

double objective(const CgfEvaluator& cgf, const Eigen::VectorXd& u, const Eigen::VectorXd& eps) {
    return u.dot(eps) - cgf(u);
}

// Evaluates the objective, mapping evaluation failures and non-finite values
// to "outside the domain".
std::optional<double> try_objective(const CgfEvaluator& cgf, const Eigen::VectorXd& u,
                                    const Eigen::VectorXd& eps) {
    if (!cgf.in_domain(u)) return std::nullopt;
    try {
        const double f = objective(cgf, u, eps);
        if (!std::isfinite(f)) return std::nullopt;
        return f;
    } catch (const DomainError&) {
        return std::nullopt;
    } catch (const DivergenceError&) {
        return std::nullopt;
    }
}

RateResult rate_for_bound(const CgfEvaluator& cgf, const Eigen::VectorXd& eps,
                          const SolverConfig& cfg) {
    if (cgf.dimension() == 1) return rate_scalar(cgf, eps[0]);
    return rate_numeric(cgf, eps, cfg);
}

double bound_from(const RateResult& r, LeadTime lead_time) {
    return std::min(1.0, std::exp(-lead_time.value() * r.total));
}

}  // namespace

void SolverConfig::validate() const {
    if (!(step > 0.0)) throw ModelError("solver step must be positive");
    if (!(stop_threshold > 0.0)) throw ModelError("solver stop threshold must be positive");
    if (max_iterations < 1) throw ModelError("solver needs at least one iteration");
}

RateResult rate_numeric(const CgfEvaluator& cgf, const Eigen::VectorXd& eps,
                        const SolverConfig& cfg) {
    cfg.validate();
    const std::size_t n = cgf.dimension();
    require_margin(eps, n);
    const auto& domain = cgf.domain();

    Eigen::VectorXd u = cfg.initial.value_or(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)));
    if (static_cast<std::size_t>(u.size()) != n) throw ModelError("initial point has wrong dimension");
    project(u, domain);
    // Pull an infeasible start toward the origin, which is always feasible.
    std::optional<double> f = try_objective(cgf, u, eps);
    for (int k = 0; k < 1100 && !f; ++k) {
        u *= 0.5;
        f = try_objective(cgf, u, eps);
    }
    if (!f) throw DomainError("no feasible starting point for rate maximization");

    const double min_step = cfg.step * 0x1.0p-60;
    double kappa = cfg.step;
    RateResult result;
    result.margin = eps;
    Eigen::VectorXd candidate(u.size());
    long s = 0;
    for (; s < cfg.max_iterations; ++s) {
        const Eigen::VectorXd ascent = eps - cgf.gradient(u);
        std::optional<double> f_next;
        while (true) {
            candidate = u + kappa * ascent;
            project(candidate, domain);
            f_next = try_objective(cgf, candidate, eps);
            if (f_next && *f_next >= *f - 1e-12 * (1.0 + std::abs(*f))) break;
            kappa *= 0.5;
            if (kappa < min_step) throw DomainError("rate solver step underflow");
        }
        const double change = (candidate - u).lpNorm<1>();
        u = candidate;
        f = f_next;
        if (change < cfg.stop_threshold) {
            result.converged = true;
            ++s;
            break;
        }
    }
    result.total = std::max(*f, 0.0);
    result.per_degree = result.total / static_cast<double>(n);
    result.maximizer = u;
    result.iterations = s;
    result.final_step = kappa;
    return result;
}

RateResult rate_gaussian_closed(const GaussianModel& model, const Eigen::VectorXd& eps) {
    const auto n = static_cast<std::size_t>(model.dimension());
    require_margin(eps, n);
    if (n > 12) return rate_numeric(CgfEvaluator::gaussian(model), eps);

    const Eigen::MatrixXd& sigma = model.covariance();
    const double scale = std::max(sigma.diagonal().maxCoeff(), 1e-300);
    const double eps_scale = 1.0 + eps.cwiseAbs().maxCoeff();

    if ((eps.array() <= 0.0).all()) return make_result(eps, 0.0, Eigen::VectorXd::Zero(eps.size()));

    // Some optimal u has a support S with Sigma_SS nonsingular and
    // Sigma_SS u_S = eps_S, u_S >= 0, (eps - Sigma u)_j <= 0 off S. If no such
    // S exists the program is unbounded.
    double best = -kInf;
    Eigen::VectorXd best_u;
    const std::uint32_t subsets = std::uint32_t{1} << n;
    for (std::uint32_t mask = 1; mask < subsets; ++mask) {
        const int k = std::popcount(mask);
        std::vector<Eigen::Index> idx;
        idx.reserve(static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::uint32_t{1} << i)) idx.push_back(static_cast<Eigen::Index>(i));

        Eigen::MatrixXd sub(k, k);
        Eigen::VectorXd rhs(k);
        for (int a = 0; a < k; ++a) {
            rhs[a] = eps[idx[static_cast<std::size_t>(a)]];
            for (int b = 0; b < k; ++b)
                sub(a, b) = sigma(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
        }
        Eigen::LLT<Eigen::MatrixXd> llt(sub);
        if (llt.info() != Eigen::Success) continue;
        const Eigen::MatrixXd lower = llt.matrixL();
        if (lower.diagonal().minCoeff() <= 1e-7 * std::sqrt(scale)) continue;
        const Eigen::VectorXd u_sub = llt.solve(rhs);

        const double u_scale = 1.0 + u_sub.cwiseAbs().maxCoeff();
        if ((u_sub.array() < -1e-12 * u_scale).any()) continue;
        Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        for (int a = 0; a < k; ++a) u[idx[static_cast<std::size_t>(a)]] = std::max(u_sub[a], 0.0);

        const Eigen::VectorXd slack = eps - sigma * u;
        bool dual_feasible = true;
        for (std::size_t j = 0; j < n; ++j)
            if (!(mask & (std::uint32_t{1} << j)) &&
                slack[static_cast<Eigen::Index>(j)] > 1e-10 * eps_scale)
                dual_feasible = false;
        if (!dual_feasible) continue;

        const double value = u.dot(eps) - 0.5 * u.dot(sigma * u);
        if (value > best) {
            best = value;
            best_u = u;
        }
    }
    if (best == -kInf) {
        return make_result(eps, kInf,
                           Eigen::VectorXd::Constant(eps.size(), kInf));
    }
    return make_result(eps, std::max(best, 0.0), best_u);
}

RateResult rate_scalar(const CgfEvaluator& cgf, double eps) {
    if (cgf.dimension() != 1) throw ModelError("rate_scalar needs a one-dimensional CGF");
    if (!std::isfinite(eps)) throw ModelError("margin must be finite");
    const Eigen::VectorXd margin = Eigen::VectorXd::Constant(1, eps);
    const Interval& dom = cgf.domain()[0];

    auto finish = [&](double u, long iterations, bool converged) {
        RateResult r = make_result(margin, std::max(u * eps - cgf(u), 0.0),
                                   Eigen::VectorXd::Constant(1, u));
        r.iterations = iterations;
        r.converged = converged;
        return r;
    };

    // Concave objective: u* = 0 whenever the slope at the origin is nonpositive.
    if (eps <= cgf.derivative(0.0)) return finish(0.0, 0, true);

    double lo = 0.0;
    double hi = 1.0;
    long iterations = 0;
    auto slope = [&](double u) { return eps - cgf.derivative(u); };
    if (dom.closed) hi = std::min(hi, dom.upper);
    else if (hi >= dom.upper) hi = 0.5 * dom.upper;

    while (slope(hi) > 0.0) {
        ++iterations;
        if (dom.closed && hi >= dom.upper) return finish(dom.upper, iterations, true);
        lo = hi;
        if (dom.closed) hi = std::min(2.0 * hi, dom.upper);
        else if (2.0 * hi < dom.upper) hi *= 2.0;
        else hi = 0.5 * (hi + dom.upper);
        if (iterations > 2000 || !std::isfinite(hi)) return finish(lo, iterations, false);
    }
    for (int k = 0; k < 200 && hi - lo > 2.0 * std::numeric_limits<double>::epsilon() * hi; ++k) {
        ++iterations;
        const double mid = 0.5 * (lo + hi);
        if (slope(mid) > 0.0) lo = mid;
        else hi = mid;
    }
    const double f_lo = lo * eps - cgf(lo);
    const double f_hi = hi * eps - cgf(hi);
    return finish(f_hi >= f_lo ? hi : lo, iterations, true);
}

double invert_rate(const CgfEvaluator& cgf, double delta, LeadTime lead_time,
                   const SolverConfig& cfg) {
    if (!(delta > 0.0 && delta < 1.0)) throw ModelError("delta must lie in (0, 1)");
    const auto n = static_cast<Eigen::Index>(cgf.dimension());
    const double target = -std::log(delta) / lead_time.value();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);

    auto rate = [&](double eps) {
        if (n == 1) return rate_scalar(cgf, eps).total;
        return rate_numeric(cgf, eps * ones, cfg).total;
    };

    double lo = 0.0;
    double hi = 1.0;
    while (rate(hi) < target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 0x1.0p60) throw UnreachableRateError("unreachable stockout rate");
    }
    for (int k = 0; k < 300 && hi - lo > 2.0 * std::numeric_limits<double>::epsilon() * hi; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (rate(mid) >= target) hi = mid;
        else lo = mid;
    }
    return lead_time.value() * hi;
}

const char* pattern_name(const StockoutPattern& pattern) {
    struct Visitor {
        const char* operator()(const AllExceed&) const { return "all-exceed"; }
        const char* operator()(const SignedOrthant&) const { return "signed-orthant"; }
        const char* operator()(const UnionOfTwo&) const { return "union"; }
        const char* operator()(const FungibleSum&) const { return "fungible-sum"; }
    };
    return std::visit(Visitor{}, pattern);
}

double chernoff_bound(const CgfEvaluator& cgf, const Eigen::VectorXd& eps, LeadTime lead_time,
                      const StockoutPattern& pattern, const SolverConfig& cfg) {
    const std::size_t n = cgf.dimension();
    struct Visitor {
        const CgfEvaluator& cgf;
        const Eigen::VectorXd& eps;
        LeadTime lead_time;
        const SolverConfig& cfg;
        std::size_t n;

        double operator()(const AllExceed&) const {
            require_margin(eps, n);
            return bound_from(rate_for_bound(cgf, eps, cfg), lead_time);
        }
        double operator()(const SignedOrthant& p) const {
            require_margin(eps, n);
            if (p.signs.size() != n) throw ModelError("sign vector does not match dimension");
            const CgfEvaluator reflected = cgf.reflected(p.signs);
            Eigen::VectorXd flipped = eps;
            for (std::size_t i = 0; i < n; ++i)
                flipped[static_cast<Eigen::Index>(i)] *= p.signs[i];
            return bound_from(rate_for_bound(reflected, flipped, cfg), lead_time);
        }
        double operator()(const UnionOfTwo&) const {
            if (n != 2) throw ModelError("union pattern needs two commodities");
            require_margin(eps, n);
            const double first =
                bound_from(rate_scalar(cgf.marginal(0), eps[0]), lead_time);
            const double second = (*this)(SignedOrthant{{-1, 1}});
            return std::min(1.0, first + second);
        }
        double operator()(const FungibleSum&) const {
            if (eps.size() != 1) throw ModelError("fungible-sum pattern takes one pooled margin");
            require_margin(eps, 1);
            const CgfEvaluator pooled = cgf.along(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)));
            return bound_from(rate_scalar(pooled, eps[0]), lead_time);
        }
    };
    return std::visit(Visitor{cgf, eps, lead_time, cfg, n}, pattern);
}

}  // namespace stockbound
