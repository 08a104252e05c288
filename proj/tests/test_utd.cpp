#include <gtest/gtest.h>

#include <cmath>

#include "chantwin/utd.hpp"

using namespace chantwin;

namespace {

template <class F>
auto simpson(F f, double a, double b, int n) {
    const double h = (b - a) / n;
    auto sum = f(a) + f(b);
    for (int i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return sum * (h / 3.0);
}

// 2j sqrt(X) e^{jX} int_{sqrt X}^inf e^{-j t^2} dt, with the tail from the closed-form full integral.
Complex transition_oracle(double x) {
    const Complex j(0.0, 1.0);
    const double a = std::sqrt(x);
    const Complex full = 0.5 * std::sqrt(kPi) * std::exp(-j * kPi / 4.0);
    const Complex head = simpson([&](double t) { return std::exp(-j * t * t); }, 0.0, a, 20000);
    return 2.0 * j * a * std::exp(j * x) * (full - head);
}

double cot(double x) { return std::cos(x) / std::sin(x); }

}  // namespace

TEST(FresnelIntegrals, MatchQuadrature) {
    for (double x : {0.05, 0.3, 1.0, 1.49, 1.51, 2.5, 4.0, 6.0}) {
        const auto [c, s] = fresnel_integrals(x);
        const double cq = simpson([](double t) { return std::cos(kPi * t * t / 2.0); }, 0.0, x, 200000);
        const double sq = simpson([](double t) { return std::sin(kPi * t * t / 2.0); }, 0.0, x, 200000);
        EXPECT_NEAR(c, cq, 1e-9) << x;
        EXPECT_NEAR(s, sq, 1e-9) << x;
    }
}

TEST(FresnelIntegrals, OddAndTendToOneHalf) {
    const auto [c, s] = fresnel_integrals(-0.7);
    const auto [c2, s2] = fresnel_integrals(0.7);
    EXPECT_DOUBLE_EQ(c, -c2);
    EXPECT_DOUBLE_EQ(s, -s2);
    const auto [cl, sl] = fresnel_integrals(1e4);
    EXPECT_NEAR(cl, 0.5, 1e-4);
    EXPECT_NEAR(sl, 0.5, 1e-4);
}

TEST(TransitionFunction, MatchesIntegralDefinition) {
    for (double x : {1e-4, 0.01, 0.1, 0.5, 1.0, 3.0, 10.0, 50.0}) {
        const Complex f = transition_function(x);
        const Complex o = transition_oracle(x);
        EXPECT_NEAR(std::abs(f - o), 0.0, 1e-7 * std::max(1.0, std::abs(o))) << x;
    }
}

TEST(TransitionFunction, LimitingForms) {
    EXPECT_NEAR(std::abs(transition_function(1e4) - Complex(1.0, 0.0)), 0.0, 1e-4);
    const double x = 1e-6;
    const Complex small = std::sqrt(kPi * x) * std::exp(Complex(0.0, kPi / 4.0));
    EXPECT_NEAR(std::abs(transition_function(x) - small), 0.0, 1e-5);
}

TEST(UtdCoefficients, ReduceToKellerAwayFromBoundaries) {
    const double k = 2.0 * kPi / 0.05;
    const double L = 1e7;
    const double beta0 = kPi / 2.0;
    for (double n : {2.0, 1.5}) {
        const double phi_p = 0.4, phi = 2.3;
        const auto d = utd_coefficients(n, phi, phi_p, beta0, L, k);
        const Complex pre = -std::exp(Complex(0.0, -kPi / 4.0)) / (2.0 * n * std::sqrt(2.0 * kPi * k) * std::sin(beta0));
        const double bm = phi - phi_p, bp = phi + phi_p;
        const Complex inc = cot((kPi + bm) / (2 * n)) + cot((kPi - bm) / (2 * n));
        const Complex ref = cot((kPi + bp) / (2 * n)) + cot((kPi - bp) / (2 * n));
        EXPECT_NEAR(std::abs(d.soft - pre * (inc - ref)), 0.0, 1e-3 * std::abs(d.soft)) << n;
        EXPECT_NEAR(std::abs(d.hard - pre * (inc + ref)), 0.0, 1e-3 * std::abs(d.hard)) << n;
    }
}

TEST(UtdCoefficients, ReciprocalInAngles) {
    const double k = 2.0 * kPi / 0.1;
    for (double n : {2.0, 1.75, 1.5}) {
        const auto a = utd_coefficients(n, 2.0, 0.7, 1.1, 25.0, k);
        const auto b = utd_coefficients(n, 0.7, 2.0, 1.1, 25.0, k);
        EXPECT_NEAR(std::abs(a.soft - b.soft), 0.0, 1e-12);
        EXPECT_NEAR(std::abs(a.hard - b.hard), 0.0, 1e-12);
    }
}

TEST(UtdCoefficients, JumpCompensatesGeometricalOpticsAtShadowBoundaries) {
    // Plane-wave incidence: diffracted field D e^{-jks}/sqrt(s) with L = s, so a unit GO field
    // switching off requires a jump of sqrt(L) in D.
    const double k = 2.0 * kPi / 0.1;
    const double phi_p = 0.6, L = 50.0, eps = 1e-7;
    for (double boundary : {kPi + phi_p, kPi - phi_p}) {
        const auto lo = utd_coefficients(2.0, boundary - eps, phi_p, kPi / 2.0, L, k);
        const auto hi = utd_coefficients(2.0, boundary + eps, phi_p, kPi / 2.0, L, k);
        EXPECT_TRUE(std::isfinite(std::abs(lo.soft)) && std::isfinite(std::abs(hi.hard)));
        EXPECT_NEAR(std::abs(hi.soft - lo.soft), std::sqrt(L), 1e-3 * std::sqrt(L)) << boundary;
        EXPECT_NEAR(std::abs(hi.hard - lo.hard), std::sqrt(L), 1e-3 * std::sqrt(L)) << boundary;
    }
}
