#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "ebeam/field.hpp"
#include "ebeam/physical_params.hpp"
#include "ebeam/poisson.hpp"
#include "ebeam/radial_solver.hpp"
#include "oracles.hpp"

using namespace ebeam;

namespace
{
double max_abs(std::vector<double> const& v)
{
    double m = 0;
    for (double x : v)
        m = std::max(m, std::abs(x));
    return m;
}

// max |a - b - mean(a - b)| / max|b - mean b|
double rel_error_up_to_constant(std::vector<double> const& a, std::vector<double> const& b)
{
    std::vector<double> d(a.size());
    for (std::size_t k = 0; k < a.size(); ++k)
        d[k] = a[k] - b[k];
    double const md = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    double const mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
    double err = 0, scale = 0;
    for (std::size_t k = 0; k < a.size(); ++k)
    {
        err = std::max(err, std::abs(d[k] - md));
        scale = std::max(scale, std::abs(b[k] - mb));
    }
    return err / scale;
}
} // namespace

TEST_CASE("zero density gives zero potential")
{
    GridSpec g{32, 1.5};
    std::vector<double> rho(g.cells(), 0.0);
    auto const U = solve_poisson(rho, 0.01, g);
    CHECK(max_abs(U.values) == 0);
}

TEST_CASE("point source matches the direct lattice Green's sum")
{
    GridSpec g{32, 1.5};
    std::vector<double> rho(g.cells(), 0.0);
    rho[static_cast<std::size_t>(16) * 32 + 16] = 1.0;
    auto const U = solve_poisson(rho, 0.005, g);
    auto const ref = oracle::lattice_green_potential(rho, g.n, g.dx, 0.005);
    CHECK(rel_error_up_to_constant(U.values, ref) < 1e-6);

    SUBCASE("random source")
    {
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> u(0, 1);
        for (auto& r : rho)
            r = u(rng);
        auto const V = solve_poisson(rho, 0.02, g);
        auto const ref2 = oracle::lattice_green_potential(rho, g.n, g.dx, 0.02);
        CHECK(rel_error_up_to_constant(V.values, ref2) < 1e-6);
    }
}

TEST_CASE("gauge and residual")
{
    GridSpec g{64, 2.0};
    auto const f = gaussian(10.0, 0, g);
    auto const rho = f.density();
    auto const U = solve_poisson(rho, 0.01, g);
    double const mean = std::accumulate(U.values.begin(), U.values.end(), 0.0) / U.values.size();
    CHECK(std::abs(mean) < 1e-15 * max_abs(U.values));
    double const src = 0.01 * *std::max_element(rho.begin(), rho.end());
    CHECK(laplacian_residual(U, rho, 0.01) < 1e-10 * src);

    SUBCASE("constant potential and zero density")
    {
        Potential2D c{g, std::vector<double>(g.cells(), 3.0)};
        CHECK(laplacian_residual(c, std::vector<double>(g.cells(), 0.0), 0.01) < 1e-12);
    }
    SUBCASE("residual scales with noise amplitude")
    {
        std::mt19937 rng(3);
        std::normal_distribution<double> nd;
        std::vector<double> noise(g.cells());
        for (auto& x : noise)
            x = nd(rng);
        auto perturbed = [&](double eta) {
            Potential2D p = U;
            for (std::size_t k = 0; k < noise.size(); ++k)
                p.values[k] += eta * noise[k];
            return laplacian_residual(p, rho, 0.01);
        };
        double const r1 = perturbed(1e-6), r2 = perturbed(2e-6);
        CHECK(r2 / r1 == doctest::Approx(2.0).epsilon(1e-3));
        // the spectral Laplacian of white noise is O(eta / dx^2)
        CHECK(r1 > 1e-6 / (g.dx * g.dx));
    }
}

TEST_CASE("linearity")
{
    GridSpec g{64, 2.0};
    auto const a = gaussian(8.0, 0, g).density();
    auto const b = gaussian(15.0, 1, g).density();
    std::vector<double> c(a.size());
    for (std::size_t k = 0; k < a.size(); ++k)
        c[k] = 2 * a[k] + 0.5 * b[k];
    auto const Ua = solve_poisson(a, 0.01, g), Ub = solve_poisson(b, 0.01, g),
               Uc = solve_poisson(c, 0.01, g);
    double err = 0;
    for (std::size_t k = 0; k < a.size(); ++k)
        err = std::max(err, std::abs(Uc.values[k] - 2 * Ua.values[k] - 0.5 * Ub.values[k]));
    CHECK(err < 1e-14 * max_abs(Uc.values));
}

TEST_CASE("rotational symmetry")
{
    GridSpec g{128, 2.0};
    auto const rho = gaussian(12.0, 0, g).density();
    auto const U = solve_poisson(rho, 0.01, g);
    double asym = 0;
    int const c = g.n / 2;
    for (int i = 1; i < g.n; ++i)
        for (int j = 1; j < g.n; ++j)
        {
            double const u = U.values[static_cast<std::size_t>(i) * g.n + j];
            asym = std::max(asym, std::abs(u - U.values[static_cast<std::size_t>(j) * g.n + i]));
            asym = std::max(asym, std::abs(u - U.values[static_cast<std::size_t>(2 * c - i) * g.n + j]));
        }
    CHECK(asym < 1e-12 * max_abs(U.values));
}

TEST_CASE("matches the radial quadrature away from the boundary")
{
    GridSpec g{256, 4.0};
    double const sigma = 30.0, gamma = 0.01;
    auto const f = gaussian(sigma, 0, g);
    auto const U = solve_poisson(f.density(), gamma, g);

    // radial reference on a fine grid: phi^2 = exp(-r^2/sigma^2) / (pi sigma^2)
    std::vector<double> rho(40001), phi(40001);
    for (std::size_t i = 0; i < rho.size(); ++i)
    {
        rho[i] = 0.01 * static_cast<double>(i);
        phi[i] = std::exp(-rho[i] * rho[i] / (2 * sigma * sigma)) / std::sqrt(oracle::pi * sigma * sigma);
    }
    auto const Ur = radial_potential_from_density(rho, phi, gamma, 0.0);
    int const c = g.n / 2;
    double const offset = U.values[static_cast<std::size_t>(c) * g.n + c];
    // the periodic solve sees rho - mean(rho); the uniform background adds gamma mean r^2 / 4
    double const background = gamma / (g.n * g.dx * g.n * g.dx) / 4;
    double err = 0, scale = 0;
    for (int i = c; i < c + 3 * static_cast<int>(sigma / g.dx); ++i)
    {
        double const r = (i - c) * g.dx;
        double const ur = Ur[static_cast<std::size_t>(std::lround(r / 0.01))];
        err = std::max(err, std::abs(U.values[static_cast<std::size_t>(i) * g.n + c] - offset
                                     - background * r * r - ur));
        scale = std::max(scale, std::abs(ur));
    }
    CHECK(err < 1e-4 * scale);
}

TEST_CASE("invalid inputs")
{
    CHECK_THROWS_AS(solve_poisson(std::vector<double>(16, 0.0), 0.01, GridSpec{4, 0.0}), std::domain_error);
    CHECK_THROWS(solve_poisson(std::vector<double>(15, 0.0), 0.01, GridSpec{4, 1.0}));
}
