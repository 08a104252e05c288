#include "chantwin/utd.hpp"

#include <limits>

namespace chantwin {

namespace {

constexpr double kFresnelEps = 1e-15;
constexpr int kFresnelMaxIter = 200;
constexpr double kSeriesLimit = 1.5;

// Tails 1/2 - C(x) and 1/2 - S(x) for x > kSeriesLimit, from the continued fraction of the
// complementary error function (modified Lentz).
std::pair<double, double> fresnel_tails(double x) {
    const double pix2 = kPi * x * x;
    Complex b(1.0, -pix2);
    Complex cc(1.0 / std::numeric_limits<double>::min(), 0.0);
    Complex d = 1.0 / b;
    Complex h = d;
    int n = -1;
    for (int k = 2; k <= kFresnelMaxIter; ++k) {
        n += 2;
        const double a = -static_cast<double>(n) * (n + 1);
        b += 4.0;
        d = 1.0 / (a * d + b);
        cc = b + a / cc;
        const Complex del = cc * d;
        h *= del;
        if (std::fabs(del.real() - 1.0) + std::fabs(del.imag()) < kFresnelEps) break;
    }
    h *= Complex(x, -x);
    const Complex tail = Complex(0.5, 0.5) * Complex(std::cos(0.5 * pix2), std::sin(0.5 * pix2)) * h;
    return {tail.real(), tail.imag()};
}

std::pair<double, double> fresnel_series(double x) {
    if (x < std::sqrt(std::numeric_limits<double>::min())) return {x, 0.0};
    double sum = 0.0, sums = 0.0, sumc = x, sign = 1.0, term = x;
    const double fact = kPi / 2.0 * x * x;
    bool odd = true;
    int n = 3;
    for (int k = 1; k <= kFresnelMaxIter; ++k) {
        term *= fact / k;
        sum += sign * term / n;
        const double test = std::fabs(sum) * kFresnelEps;
        if (odd) {
            sign = -sign;
            sums = sum;
            sum = sumc;
        } else {
            sumc = sum;
            sum = sums;
        }
        if (term < test) break;
        odd = !odd;
        n += 2;
    }
    return {sumc, sums};
}

// cot((pi + sign*beta) / (2n)) * F(kL a(beta)) with the grazing-limit form close to the
// shadow/reflection boundary where the cotangent diverges.
Complex utd_term(double n, double beta, int sign, double kl) {
    const double big_n = std::round((beta + sign * kPi) / (2.0 * kPi * n));
    const double c = std::cos((2.0 * kPi * n * big_n - beta) / 2.0);
    const double a = 2.0 * c * c;
    const double eps = sign > 0 ? kPi + beta - 2.0 * kPi * n * big_n : kPi - beta + 2.0 * kPi * n * big_n;
    const Complex ej4 = std::polar(1.0, kPi / 4.0);
    if (std::fabs(eps) < 1e-5) {
        const double sgn = eps >= 0.0 ? 1.0 : -1.0;
        return n * (std::sqrt(2.0 * kPi * kl) * sgn - 2.0 * kl * eps * ej4) * ej4;
    }
    const double cot = 1.0 / std::tan((kPi + sign * beta) / (2.0 * n));
    return cot * transition_function(kl * a);
}

}  // namespace

std::pair<double, double> fresnel_integrals(double x) {
    const double ax = std::fabs(x);
    std::pair<double, double> cs;
    if (ax <= kSeriesLimit) {
        cs = fresnel_series(ax);
    } else {
        const auto [tc, ts] = fresnel_tails(ax);
        cs = {0.5 - tc, 0.5 - ts};
    }
    if (x < 0) cs = {-cs.first, -cs.second};
    return cs;
}

Complex transition_function(double x) {
    if (x <= 0.0) return {0.0, 0.0};
    const double u = std::sqrt(x);
    const double t = u * std::sqrt(2.0 / kPi);
    double tail_c, tail_s;
    if (t > kSeriesLimit) {
        std::tie(tail_c, tail_s) = fresnel_tails(t);
    } else {
        const auto [c, s] = fresnel_series(t);
        tail_c = 0.5 - c;
        tail_s = 0.5 - s;
    }
    // int_u^inf e^{-j tau^2} d tau in terms of the normalized Fresnel tails.
    const Complex tail = std::sqrt(kPi / 2.0) * Complex(tail_c, -tail_s);
    return Complex(0.0, 2.0) * u * std::polar(1.0, x) * tail;
}

UtdCoefficients utd_coefficients(double n, double phi, double phi_prime, double beta0, double distance_l,
                                 double wavenumber) {
    const double kl = wavenumber * distance_l;
    const double beta_minus = phi - phi_prime;
    const double beta_plus = phi + phi_prime;
    const Complex t1 = utd_term(n, beta_minus, +1, kl);
    const Complex t2 = utd_term(n, beta_minus, -1, kl);
    const Complex t3 = utd_term(n, beta_plus, +1, kl);
    const Complex t4 = utd_term(n, beta_plus, -1, kl);
    const Complex pre = -std::polar(1.0, -kPi / 4.0) /
                        (2.0 * n * std::sqrt(2.0 * kPi * wavenumber) * std::sin(beta0));
    return {pre * (t1 + t2 - (t3 + t4)), pre * (t1 + t2 + (t3 + t4))};
}

}  // namespace chantwin
