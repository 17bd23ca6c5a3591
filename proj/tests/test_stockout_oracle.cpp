#include <doctest.h>

#include "oracles.hpp"

#include "stockbound/stockout_oracle.hpp"

#include <cmath>
#include <numbers>

using namespace stockbound;

TEST_CASE("normal tail") {
    CHECK(normal_tail(0.0) == 0.5);
    CHECK(normal_tail(40.0) < 1e-300);
    CHECK(normal_tail(-40.0) == 1.0);
    CHECK(std::abs(normal_tail(1.6448536269514722) - 0.05) < 1e-9);
    for (double k : {-2.0, -0.3, 0.5, 1.0, 2.5, 4.0})
        CHECK(std::abs(normal_tail(k) - oracle::normal_tail(k)) < 1e-13);
}

TEST_CASE("normal tail inverse") {
    CHECK(normal_tail_inverse(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(std::abs(normal_tail_inverse(0.05) - 1.6448536269514722) < 1e-12);
    for (double d : {1e-4, 1e-3, 0.01, 0.05, 0.1, 0.2, 0.4})
        CHECK(std::abs(normal_tail(normal_tail_inverse(d)) - d) < 1e-10);
    CHECK_THROWS(normal_tail_inverse(0.0));
    CHECK_THROWS(normal_tail_inverse(1.0));
}

TEST_CASE("independent pair") {
    CHECK(bivariate_joint_tail({0.0, 0.0, 0.0}).probability == doctest::Approx(0.25).epsilon(1e-12));
    for (double a : {0.0, 0.7, 1.5, 3.0})
        for (double b : {0.0, 1.0, 2.2}) {
            const double expect = normal_tail(a) * normal_tail(b);
            CHECK(std::abs(bivariate_joint_tail({a, b, 0.0}).probability - expect) < 1e-10);
            CHECK(std::abs(bivariate_joint_tail({a, b, 0.0}, OracleMethod::double_quadrature).probability - expect) < 1e-10);
        }
}

TEST_CASE("orthant probability at the origin") {
    for (double rho : {-0.9, -0.5, 0.3, 0.9}) {
        const double expect = 0.25 + std::asin(rho) / (2.0 * std::numbers::pi);
        CHECK(std::abs(bivariate_joint_tail({0.0, 0.0, rho}).probability - expect) < 1e-10);
    }
}

TEST_CASE("perfect correlation collapses to one variable") {
    const auto r = bivariate_joint_tail({1.3, 1.3, 1.0});
    CHECK(r.method == OracleMethod::closed_form);
    CHECK(r.probability == normal_tail(1.3));
    CHECK(bivariate_joint_tail({0.5, 1.3, 1.0}).probability == normal_tail(1.3));
    // Y = -X: X >= a and X <= -b.
    CHECK(bivariate_joint_tail({-1.0, -0.5, -1.0}).probability ==
          doctest::Approx(normal_tail(-1.0) - normal_tail(0.5)));
    CHECK(bivariate_joint_tail({1.0, 1.0, -1.0}).probability == 0.0);
}

TEST_CASE("both quadratures against the rho-integration oracle") {
    for (double rho : {-0.9, -0.5, 0.0, 0.5, 0.9})
        for (double a : {0.0, 1.0, 2.0, 3.0})
            for (double b : {0.0, 1.5, 3.0}) {
                const double expect = oracle::bivariate_tail(a, b, rho);
                const double c = bivariate_joint_tail({a, b, rho}).probability;
                const double d = bivariate_joint_tail({a, b, rho}, OracleMethod::double_quadrature).probability;
                CHECK_MESSAGE(std::abs(c - expect) < 1e-10, "rho=" << rho << " a=" << a << " b=" << b);
                CHECK_MESSAGE(std::abs(d - expect) < 1e-10, "rho=" << rho << " a=" << a << " b=" << b);
            }
}

TEST_CASE("negative thresholds") {
    for (double rho : {-0.6, 0.4, 0.95}) {
        const double expect = oracle::bivariate_tail(-1.5, -0.5, rho);
        CHECK(std::abs(bivariate_joint_tail({-1.5, -0.5, rho}).probability - expect) < 1e-10);
        CHECK(std::abs(bivariate_joint_tail({-1.5, -0.5, rho}, OracleMethod::double_quadrature).probability - expect) < 1e-10);
    }
}

TEST_CASE("joint tail increases with correlation") {
    for (double a : {0.0, 1.0, 2.5})
        for (double b : {0.0, 0.5, 2.0}) {
            double last = -1.0;
            for (double rho = -0.9; rho <= 0.91; rho += 0.1) {
                const double p = bivariate_joint_tail({a, b, rho}).probability;
                CHECK(p >= last - 1e-12);
                last = p;
            }
        }
}

TEST_CASE("oracle input validation") {
    CHECK_THROWS(bivariate_joint_tail({0.0, 0.0, 1.2}));
    CHECK_THROWS(bivariate_joint_tail({NAN, 0.0, 0.2}));
    CHECK_THROWS(bivariate_joint_tail({0.0, 0.0, 0.2}, OracleMethod::monte_carlo));
    CHECK(std::string(method_name(OracleMethod::double_quadrature)) == "quadrature-double");
}

TEST_CASE("monte carlo oracle") {
    SUBCASE("median of a centered normal") {
        const auto r = joint_tail_monte_carlo(GaussianModel::univariate(1.0), Eigen::VectorXd::Zero(1),
                                              LeadTime(1), 1'000'000, 1);
        CHECK(std::abs(r.probability - 0.5) < 0.0015);
        CHECK(r.trials == 1'000'000);
    }
    SUBCASE("agrees with quadrature at (1, 1), rho 0.9") {
        const auto g = GaussianModel::bivariate(1.0, 1.0, 0.9);
        const double exact = bivariate_joint_tail({1.0, 1.0, 0.9}).probability;
        const auto r = joint_tail_monte_carlo(g, Eigen::Vector2d(1.0, 1.0), LeadTime(1), 1'000'000, 2);
        CHECK(std::abs(r.probability - exact) <= 3.0 * oracle::binomial_sd(exact, 1e6));
    }
    SUBCASE("union contains all-exceed") {
        const auto g = GaussianModel::bivariate(1.0, 2.0, 0.3);
        const Eigen::Vector2d ss(2.0, 3.0);
        const auto all = joint_tail_monte_carlo(g, ss, LeadTime(4), 100'000, 3);
        const auto any = joint_tail_monte_carlo(g, ss, LeadTime(4), 100'000, 3, UnionOfTwo{});
        CHECK(any.hits >= all.hits);
    }
    SUBCASE("lead time scales the totals") {
        // X over L = 9 periods has sd 3; a margin of 3 is one standard unit.
        const auto r = joint_tail_monte_carlo(GaussianModel::univariate(1.0), Eigen::VectorXd::Constant(1, 3.0),
                                              LeadTime(9), 1'000'000, 4);
        CHECK(std::abs(r.probability - normal_tail(1.0)) <= 3.0 * oracle::binomial_sd(normal_tail(1.0), 1e6));
    }
    SUBCASE("deterministic per seed") {
        const auto g = GaussianModel::bivariate(1.0, 1.0, -0.2);
        const auto a = joint_tail_monte_carlo(g, Eigen::Vector2d(0.1, 0.2), LeadTime(2), 200'000, 9);
        const auto b = joint_tail_monte_carlo(g, Eigen::Vector2d(0.1, 0.2), LeadTime(2), 200'000, 9);
        CHECK(a.hits == b.hits);
    }
    SUBCASE("preconditions") {
        const auto g = GaussianModel::bivariate(1.0, 1.0, 0.0);
        CHECK_THROWS(joint_tail_monte_carlo(g, Eigen::Vector2d(0, 0), LeadTime(1), 100, 1));
        CHECK_THROWS(joint_tail_monte_carlo(g, Eigen::VectorXd::Zero(1), LeadTime(1), 10'000, 1));
        CHECK_THROWS(joint_tail_monte_carlo(g, Eigen::Vector2d(0, 0), LeadTime(1), 10'000, 1, FungibleSum{}));
    }
}

TEST_CASE("inversion of the joint tail") {
    const auto g = GaussianModel::bivariate(1.0, 1.0, 0.9);
    const LeadTime lt(10);
    const double p0 = bivariate_joint_tail({0.0, 0.0, 0.9}).probability;

    const auto at_p0 = invert_joint_tail(g, p0, lt);
    CHECK(at_p0.safety_stock == 0.0);
    CHECK(at_p0.no_stock_needed);

    const auto r = invert_joint_tail(g, 0.05, lt);
    CHECK_FALSE(r.no_stock_needed);
    CHECK(std::abs(r.probability - 0.05) < 1e-9);
    const auto q = TailQuery::from_safety_stock(g, r.safety_stock, r.safety_stock, lt);
    CHECK(std::abs(oracle::bivariate_tail(q.a, q.b, q.rho) - 0.05) < 1e-9);

    double last = 1e300;
    for (double d : {1e-4, 1e-3, 0.01, 0.05, 0.2, 0.4}) {
        const double ss = invert_joint_tail(g, d, lt).safety_stock;
        CHECK(ss < last);
        last = ss;
    }

    const auto indep = GaussianModel::bivariate(1.0, 1.0, 0.0);
    CHECK(invert_joint_tail(indep, 0.25, LeadTime(7)).safety_stock == 0.0);

    const auto one = invert_joint_tail(GaussianModel::univariate(4.0), 0.05, LeadTime(1));
    CHECK(one.safety_stock == doctest::Approx(2.0 * 1.6448536269514722).epsilon(1e-12));
    CHECK(invert_joint_tail(GaussianModel::univariate(4.0), 0.6, LeadTime(1)).no_stock_needed);

    GaussianModel three(Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity());
    CHECK_THROWS(invert_joint_tail(three, 0.05, lt));
}

TEST_CASE("monte carlo quantile for three commodities") {
    // Independent commodities: P(min >= s) = H(s / sqrt(L))^3, so delta = 0.001
    // gives s = sqrt(L) H^{-1}(0.1).
    GaussianModel three(Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity());
    const auto r = joint_tail_quantile_mc(three, 0.001, LeadTime(4), 1'000'000, 5);
    const double expect = 2.0 * normal_tail_inverse(0.1);
    CHECK(std::abs(r.safety_stock - expect) < 0.05);
    CHECK(r.probability <= 0.001);

    const auto zero = joint_tail_quantile_mc(three, 0.2, LeadTime(4), 100'000, 5);
    CHECK(zero.no_stock_needed);
}
