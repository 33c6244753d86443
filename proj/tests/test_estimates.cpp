#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "wassinc/estimates.hpp"

using namespace wassinc;

namespace {

HypothesisBounds make_bounds(double r, double m, double l, double L, double T, double p) {
    HypothesisBounds b;
    b.r = r;
    b.m = PiecewiseConstant::constant(m, T);
    b.l_K = PiecewiseConstant::constant(l, T);
    b.L_K = PiecewiseConstant::constant(L, T);
    b.T = T;
    b.p = p;
    return b;
}

TimeSeries constant_series(double v, double T, std::size_t steps) {
    TimeSeries s;
    for (std::size_t k = 0; k <= steps; ++k) {
        s.t.push_back(T * static_cast<double>(k) / static_cast<double>(steps));
        s.v.push_back(v);
    }
    return s;
}

}  // namespace

TEST_CASE("constants") {
    auto [c1, c1p] = constants(1.0);
    CHECK(c1 == doctest::Approx(1.0));
    CHECK(c1p == doctest::Approx(1.0));
    auto [c2, c2p] = constants(2.0);
    CHECK(c2 == doctest::Approx(std::sqrt(2.0)));
    CHECK(c2p == doctest::Approx(1.0));
    auto [c3, c3p] = constants(3.0);
    CHECK(c3 == doctest::Approx(std::pow(2.0, 2.0 / 3.0)));
    CHECK(c3p == doctest::Approx(4.0 / 3.0));
    CHECK_THROWS_AS(constants(0.5), std::domain_error);
}

TEST_CASE("piecewise constant envelopes integrate exactly") {
    PiecewiseConstant f;
    f.breaks = {0.0, 0.5, 2.0};
    f.values = {2.0, 1.0};
    f.validate();
    CHECK(f.at(0.25) == doctest::Approx(2.0));
    CHECK(f.at(1.0) == doctest::Approx(1.0));
    CHECK(f.l1() == doctest::Approx(2.5));
    CHECK(f.integral(0.25, 0.75) == doctest::Approx(0.75));
}

TEST_CASE("cauchy-lipschitz envelope") {
    const auto env1 = cauchy_lipschitz_envelope(make_bounds(1.0, 1.0, 0, 0, 1.0, 1.0));
    CHECK(env1.R_r == doctest::Approx(2.0 * std::exp(1.0)).epsilon(1e-12));
    CHECK(env1.m_r.at(0.5) == doctest::Approx(1.0 + env1.R_r));

    const auto env0 = cauchy_lipschitz_envelope(make_bounds(0.7, 0.0, 0, 0, 1.0, 1.0));
    CHECK(env0.R_r == doctest::Approx(0.7));
    CHECK(env0.m_r.at(0.3) == doctest::Approx(0.0));

    const auto env2 = cauchy_lipschitz_envelope(make_bounds(0.5, 2.0, 0, 0, 0.5, 1.0));
    CHECK(env2.R_r == doctest::Approx(1.5 * std::exp(1.0)).epsilon(1e-12));
}

TEST_CASE("momentum bound") {
    const auto b0 = make_bounds(1.0, 0.0, 0, 0, 1.0, 2.0);
    CHECK(momentum_bound(b0, 3.0, 1.0) == doctest::Approx(std::sqrt(2.0) * 3.0));

    const auto b1 = make_bounds(1.0, 1.0, 0, 0, 1.0, 1.0);
    CHECK(momentum_bound(b1, 1.0, 1.0) == doctest::Approx(2.0 * std::exp(1.0)));

    const auto b2 = make_bounds(1.0, 1.0, 0, 0, 1.0, 2.0);
    CHECK(momentum_bound(b2, 0.0, 1.0) ==
          doctest::Approx(std::sqrt(2.0) * std::exp(1.0)).epsilon(1e-12));
}

TEST_CASE("generalized momentum bound reduces to the basic one when M = 0") {
    const auto b = make_bounds(1.0, 1.0, 0, 0, 1.0, 1.0);
    const auto zero = constant_series(0.0, 1.0, 100);
    CHECK(momentum_bound_generalized(b, 1.0, zero, 1.0) ==
          doctest::Approx(momentum_bound(b, 1.0, 1.0)).epsilon(1e-9));
    const auto ones = constant_series(1.0, 1.0, 100);
    CHECK(momentum_bound_generalized(b, 1.0, ones, 1.0) >
          momentum_bound(b, 1.0, 1.0));
}

TEST_CASE("gronwall bound") {
    const auto bz = make_bounds(1.0, 0, 0, 0, 1.0, 1.0);
    CHECK(gronwall_bound(bz, 0.0, constant_series(0.0, 1.0, 10), 1.0) ==
          doctest::Approx(0.0));

    const auto bl = make_bounds(1.0, 0, 1.0, 0, 1.0, 1.0);
    CHECK(gronwall_bound(bl, 0.1, constant_series(0.0, 1.0, 10), 1.0) ==
          doctest::Approx(0.1 * std::exp(1.0)).epsilon(1e-12));

    CHECK(gronwall_bound(bz, 0.0, constant_series(0.2, 1.0, 10), 1.0) ==
          doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("filippov envelopes") {
    const auto b0 = make_bounds(1.0, 0, 0.0, 1.0, 1.0, 1.0);
    const auto env0 = filippov_envelopes(b0, 0.0, constant_series(0.1, 1.0, 100), 1.0);
    CHECK(env0.chi_p == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(env0.C_Kp == doctest::Approx(1.0).epsilon(1e-12));

    const auto b1 = make_bounds(1.0, 0, 1.0, 2.0, 1.0, 1.0);
    const auto env1 = filippov_envelopes(b1, 0.05, constant_series(0.0, 1.0, 100), 1.0);
    CHECK(env1.chi_p == doctest::Approx(0.05 * std::exp(1.0)).epsilon(1e-12));
    CHECK(env1.C_Kp == doctest::Approx(2.0 * std::exp(1.0)).epsilon(1e-12));

    const auto zero = filippov_envelopes(b1, 0.0, constant_series(0.0, 1.0, 10), 1.0);
    CHECK(zero.chi_p == doctest::Approx(0.0));
}

TEST_CASE("chained bound") {
    CHECK(chained_bound(0.0, 0.0, 5.0) == doctest::Approx(0.0));
    CHECK(chained_bound(1.0, 1.0, 1.0) == doctest::Approx(2.0 * std::exp(1.0)));
    CHECK(chained_bound(0.0, 2.0, 0.5) == doctest::Approx(2.0 * std::exp(1.0)));
    CHECK_THROWS_AS(chained_bound(-1.0, 0.0, 0.0), std::domain_error);
}

TEST_CASE("envelope bounds are monotone in their inputs") {
    const auto base = make_bounds(1.0, 0.5, 0.7, 0.3, 1.0, 1.0);
    const double ref_m = momentum_bound(base, 1.0, 1.0);
    const double ref_g = gronwall_bound(base, 0.1, constant_series(0.2, 1.0, 10), 1.0);
    const auto refenv = filippov_envelopes(base, 0.1, constant_series(0.2, 1.0, 10), 1.0);

    auto bumped = base;
    for (double& v : bumped.m.values) v += 0.1;
    for (double& v : bumped.l_K.values) v += 0.1;
    for (double& v : bumped.L_K.values) v += 0.1;
    CHECK(momentum_bound(bumped, 1.0, 1.0) >= ref_m);
    CHECK(gronwall_bound(bumped, 0.1, constant_series(0.2, 1.0, 10), 1.0) >= ref_g);
    const auto env = filippov_envelopes(bumped, 0.15, constant_series(0.25, 1.0, 10), 1.0);
    CHECK(env.chi_p >= refenv.chi_p);
    CHECK(env.C_Kp >= refenv.C_Kp);
}

TEST_CASE("certify") {
    const std::vector<double> grid{0.0, 0.5, 1.0};
    auto pass = certify("upper", grid, {0, 0, 0}, {1, 1, 1}, 0.0);
    CHECK(pass.pass);
    CHECK(pass.margin == doctest::Approx(1.0));

    auto tight = certify("tight", grid, {1, 1, 1}, {1, 1, 1}, 0.0);
    CHECK(tight.pass);

    auto fail = certify("lower", grid, {1, 1, 1}, {0, 0, 0}, 1e-6);
    CHECK_FALSE(fail.pass);
    CHECK(fail.margin == doctest::Approx(-1.0));

    CHECK_THROWS_AS(certify("bad", grid, {0.0}, {1, 1, 1}, 0.0), std::invalid_argument);
}
