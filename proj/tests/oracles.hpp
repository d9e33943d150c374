#pragma once

// Reference implementations used only by the tests.  Each is written from
// its textbook definition and shares no code with the library.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace oracle
{
inline constexpr double pi = std::numbers::pi;

//! J_l(x) = (1/pi) int_0^pi cos(l t - x sin t) dt, trapezoid rule (exact for periodic integrands).
inline double bessel_j(int l, double x)
{
    int const m = 64 + 2 * static_cast<int>(std::abs(x));
    double s = 0;
    for (int k = 0; k <= m; ++k)
    {
        double const t = pi * k / m;
        double const w = (k == 0 || k == m) ? 0.5 : 1.0;
        s += w * std::cos(l * t - x * std::sin(t));
    }
    return s / m;
}

//! n-th positive zero of J_l by scanning and bisection.
inline double bessel_zero(int l, int n)
{
    double x = l > 0 ? 1e-3 : 0.0;
    double const h = 0.05;
    int found = 0;
    double f0 = bessel_j(l, x + 1e-9);
    while (true)
    {
        double const f1 = bessel_j(l, x + h);
        if (f0 * f1 < 0 && ++found == n)
        {
            double a = x, b = x + h;
            for (int it = 0; it < 80; ++it)
            {
                double const c = (a + b) / 2;
                (bessel_j(l, a) * bessel_j(l, c) <= 0 ? b : a) = c;
            }
            return (a + b) / 2;
        }
        f0 = f1;
        x += h;
    }
}

//! Free Schroedinger spreading of a Gaussian with density exp(-r^2 / sigma^2).
inline double gaussian_width(double sigma, double z, double k)
{
    double const zr = k * sigma * sigma;
    return sigma * std::sqrt(1 + (z / zr) * (z / zr));
}

/*!
 * Periodic lattice Green's function of -lap with the continuous symbol,
 * G(x, y) = (1/N^2) sum_{k != 0} cos(kx x + ky y) / |k|^2, summed directly,
 * then convolved with the source: U = gamma sum_j G(x - x_j) rho_j.
 */
inline std::vector<double> lattice_green_potential(std::vector<double> const& rho, int n,
                                                   double dx, double gamma)
{
    auto kval = [&](int i) {
        int const m = i <= n / 2 ? i : i - n;
        return 2 * pi * m / (n * dx);
    };
    std::vector<double> G(static_cast<std::size_t>(n) * n, 0.0);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
        {
            double s = 0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                {
                    if (i == 0 && j == 0)
                        continue;
                    double const kx = kval(i), ky = kval(j);
                    s += std::cos(2 * pi * (double(i) * a + double(j) * b) / n) / (kx * kx + ky * ky);
                }
            G[static_cast<std::size_t>(a) * n + b] = s / (double(n) * n);
        }
    std::vector<double> U(G.size(), 0.0);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
        {
            double s = 0;
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d)
                    s += G[static_cast<std::size_t>((a - c + n) % n) * n + (b - d + n) % n]
                         * rho[static_cast<std::size_t>(c) * n + d];
            U[static_cast<std::size_t>(a) * n + b] = gamma * s;
        }
    return U;
}

//! Fourier coefficient |c_m| of a 0/1 square wave with 50% duty: |sin(pi m / 2)| / (pi |m|).
inline double square_wave_coefficient(int m)
{
    if (m == 0)
        return 0.5;
    return std::abs(std::sin(pi * m / 2)) / (pi * std::abs(m));
}

//! Trapezoid quadrature of f on [a, b] with n panels.
template<class F>
double trapezoid(F&& f, double a, double b, int n)
{
    double const h = (b - a) / n;
    double s = 0.5 * (f(a) + f(b));
    for (int i = 1; i < n; ++i)
        s += f(a + i * h);
    return s * h;
}
} // namespace oracle
