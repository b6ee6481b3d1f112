#pragma once

#include <cmath>
#include <stdexcept>

#include "elsi/errors.hpp"

namespace elsi {

namespace detail {

// Auxiliary gamma combinations on |mu| <= 1/2, evaluated through the
// power series of 1/Gamma(1+mu) so they stay accurate as mu -> 0:
//   chi1(mu) = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)
//   chi2(mu) = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2
inline void gamma_chi(double mu, double& chi1, double& chi2) {
    // 1/Gamma(z) = sum c_k z^k
    static constexpr double c[21] = {0.0,
                                     1.0,
                                     0.5772156649015329,
                                     -0.6558780715202538,
                                     -0.0420026350340952,
                                     0.1665386113822915,
                                     -0.0421977345555443,
                                     -0.0096219715278770,
                                     0.0072189432466630,
                                     -0.0011651675918591,
                                     -0.0002152416741149,
                                     0.0001280502823882,
                                     -0.0000201348547807,
                                     -0.0000012504934821,
                                     0.0000011330272320,
                                     -0.0000002056338417,
                                     0.0000000061160950,
                                     0.0000000050020075,
                                     -0.0000000011812746,
                                     0.0000000001043427,
                                     0.0000000000077823};
    const double m2 = mu * mu;
    // 1/Gamma(1 +- mu) = sum c_k (+-mu)^{k-1}: even k cancel in the sum,
    // odd k cancel in the difference.
    double even = 0.0, odd = 0.0, pw = 1.0;
    for (int k = 1; k <= 19; k += 2) {
        odd += c[k] * pw;       // c1 + c3 mu^2 + ...
        even += c[k + 1] * pw;  // c2 + c4 mu^2 + ...
        pw *= m2;
    }
    chi1 = -even;
    chi2 = odd;
}

}  // namespace detail

/// Modified Bessel function of the second kind K_nu(x) for real order.
/// Temme's series on x <= 2, a continued fraction beyond, then stable
/// upward recurrence in the order.
inline double bessel_k(double nu, double x) {
    if (!(x > 0.0)) throw std::invalid_argument("bessel_k: requires x > 0");
    nu = std::abs(nu);

    constexpr double eps = 1e-16;
    constexpr int max_iter = 30000;
    const int steps = static_cast<int>(std::floor(nu + 0.5));
    const double mu = nu - steps;  // in [-1/2, 1/2)

    double k_mu, k_mu1;
    if (x <= 2.0) {
        const double x2 = 0.5 * x;
        const double pimu = M_PI * mu;
        const double fact = std::abs(pimu) < 1e-30 ? 1.0 : pimu / std::sin(pimu);
        double d = -std::log(x2);
        double e = mu * d;
        const double fact2 = std::abs(e) < 1e-30 ? 1.0 : std::sinh(e) / e;
        double chi1, chi2;
        detail::gamma_chi(mu, chi1, chi2);
        const double inv_gam_plus = chi2 - mu * chi1;   // 1/Gamma(1+mu)
        const double inv_gam_minus = chi2 + mu * chi1;  // 1/Gamma(1-mu)
        double ff = fact * (chi1 * std::cosh(e) + chi2 * fact2 * d);
        double sum = ff;
        e = std::exp(e);
        double p = 0.5 * e * inv_gam_plus;
        double q = 0.5 / e * inv_gam_minus;
        double cterm = 1.0;
        d = x2 * x2;
        double sum1 = p;
        int i = 1;
        for (; i <= max_iter; ++i) {
            ff = (i * ff + p + q) / (i * i - mu * mu);
            cterm *= d / i;
            p /= (i - mu);
            q /= (i + mu);
            const double del = cterm * ff;
            sum += del;
            sum1 += cterm * (p - i * ff);
            if (std::abs(del) < std::abs(sum) * eps) break;
        }
        if (i > max_iter) throw NumericalError("bessel_k: series did not converge");
        k_mu = sum;
        k_mu1 = sum1 * (2.0 / x);
    } else {
        double b = 2.0 * (1.0 + x);
        double d = 1.0 / b;
        double h = d, delh = d;
        double q1 = 0.0, q2 = 1.0;
        const double a1 = 0.25 - mu * mu;
        double q = a1, cterm = a1, a = -a1;
        double s = 1.0 + q * delh;
        int i = 2;
        for (; i <= max_iter; ++i) {
            a -= 2 * (i - 1);
            cterm = -a * cterm / i;
            const double qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += cterm * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            const double dels = q * delh;
            s += dels;
            if (std::abs(dels / s) < eps) break;
        }
        if (i > max_iter) throw NumericalError("bessel_k: continued fraction did not converge");
        h = a1 * h;
        k_mu = std::sqrt(M_PI / (2.0 * x)) * std::exp(-x) / s;
        k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
    }

    for (int i = 1; i <= steps; ++i) {
        const double next = 2.0 * (mu + i) / x * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    return k_mu;
}

}  // namespace elsi
