#pragma once

// Reference computations used only by the tests. None of these call into the
// library; each takes a different numerical route from the code under test.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

inline double adaptive_simpson_step(const std::function<double(double)>& f, double a, double b,
                                    double fa, double fm, double fb, double whole, double tol,
                                    int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = left + right - whole;
    if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
    return adaptive_simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double simpson(const std::function<double(double)>& f, double a, double b, double tol,
                      int depth = 40) {
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_step(f, a, b, fa, fm, fb, whole, tol, depth);
}

// Relative tolerance against a coarse first pass; [a, b] is split into pieces
// so the adaptive rule cannot miss a narrow peak.
inline double simpson_pieces(const std::function<double(double)>& f, double a, double b, int pieces,
                             double rel_tol = 1e-13) {
    const double h = (b - a) / pieces;
    double coarse = 0.0;
    for (int k = 0; k < pieces; ++k) {
        const double x = a + k * h;
        coarse += h / 6.0 * (f(x) + 4.0 * f(x + 0.5 * h) + f(x + h));
    }
    const double tol = std::max(rel_tol * std::abs(coarse), 1e-300) / pieces;
    double total = 0.0;
    for (int k = 0; k < pieces; ++k) total += simpson(f, a + k * h, a + (k + 1) * h, tol);
    return total;
}

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// Upper tail by integrating the density, [k, k + 40].
inline double normal_tail(double k) {
    if (k < 0.0) return 1.0 - normal_tail(-k);
    return simpson_pieces(normal_pdf, k, k + 40.0, 400);
}

// P(X >= a, Y >= b) for a standard bivariate normal, by integrating the
// density derivative in rho from independence:
// P(rho) = H(a) H(b) + int_0^rho phi2(a, b; r) dr.
inline double bivariate_tail(double a, double b, double rho) {
    auto phi2 = [&](double r) {
        const double q = 1.0 - r * r;
        return std::exp(-(a * a - 2.0 * r * a * b + b * b) / (2.0 * q)) / (2.0 * std::numbers::pi * std::sqrt(q));
    };
    const double base = 0.5 * std::erfc(a / std::numbers::sqrt2) * 0.5 * std::erfc(b / std::numbers::sqrt2);
    if (rho == 0.0) return base;
    return base + simpson_pieces(phi2, 0.0, rho, 64);
}

// max_{u >= 0} u.eps - u^T S u / 2 for a 2x2 positive definite S. The inner
// maximization over u2 is explicit; the outer concave problem in u1 is solved by
// golden-section search.
inline double gaussian_rate_2d(double s11, double s12, double s22, double e1, double e2) {
    auto profile = [&](double u1) {
        const double u2 = std::max(0.0, (e2 - s12 * u1) / s22);
        return u1 * e1 + u2 * e2 - 0.5 * (s11 * u1 * u1 + 2.0 * s12 * u1 * u2 + s22 * u2 * u2);
    };
    double lo = 0.0;
    double hi = 1.0;
    while (profile(hi) > profile(0.5 * hi)) hi *= 2.0;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - g * (hi - lo);
    double x2 = lo + g * (hi - lo);
    double f1 = profile(x1);
    double f2 = profile(x2);
    for (int k = 0; k < 400 && hi - lo > 1e-15 * std::max(1.0, hi); ++k) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = profile(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = profile(x1);
        }
    }
    return std::max({profile(0.5 * (lo + hi)), profile(0.0), 0.0});
}

// E[exp(u X)] for X ~ Weibull(shape, scale), optionally centered by c:
// E[exp(u (X - c))], by quadrature of the density.
inline double weibull_mgf(double shape, double scale, double u, double c = 0.0) {
    auto f = [&](double x) {
        if (x <= 0.0) return shape == 1.0 ? std::exp(-u * c) / scale : 0.0;
        const double z = x / scale;
        return std::exp(u * (x - c) - std::pow(z, shape)) * (shape / scale) * std::pow(z, shape - 1.0);
    };
    double upper = scale;
    while (std::pow(upper / scale, shape) - u * upper < 80.0) upper *= 1.5;
    return simpson_pieces(f, 0.0, upper, 2000);
}

// Naive sample CGF in long double: log((1/M) sum exp(u s_a)) / L.
inline double sample_cgf(const std::vector<double>& totals, double u, double periods) {
    long double acc = 0.0L;
    for (double s : totals) acc += std::exp(static_cast<long double>(u) * s);
    return static_cast<double>(std::log(acc / totals.size()) / periods);
}

// Standard deviation of a binomial frequency at probability p over n trials.
inline double binomial_sd(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

}  // namespace oracle
