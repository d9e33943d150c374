#include "ebeam/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ebeam
{
namespace
{
std::vector<double> k2_table(GridSpec const& g)
{
    std::vector<double> k2(g.cells());
    for (int i = 0; i < g.n; ++i)
    {
        double const kx = fft_wavenumber(i, g.n, g.dx);
        for (int j = 0; j < g.n; ++j)
        {
            double const ky = fft_wavenumber(j, g.n, g.dx);
            k2[static_cast<std::size_t>(i) * g.n + j] = kx * kx + ky * ky;
        }
    }
    return k2;
}

void check_sizes(GridSpec const& g, std::size_t n)
{
    if (n != g.cells())
        throw std::invalid_argument("density does not match the grid");
}

void remove_mean(std::vector<double>& v)
{
    double const mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    for (auto& x : v)
        x -= mean;
}
} // namespace

PoissonSolver::PoissonSolver(GridSpec grid) : grid_(grid), fft_((grid.validate(), grid.n))
{
    // half spectrum: columns 0 .. n/2 carry non-negative ky
    int const n = grid_.n, nh = n / 2 + 1;
    double const scale = 1.0 / static_cast<double>(grid_.cells());
    inv_k2_.resize(static_cast<std::size_t>(n) * nh);
    for (int i = 0; i < n; ++i)
    {
        double const kx = fft_wavenumber(i, n, grid_.dx);
        for (int j = 0; j < nh; ++j)
        {
            double const ky = fft_wavenumber(j, n, grid_.dx);
            double const k2 = kx * kx + ky * ky;
            inv_k2_[static_cast<std::size_t>(i) * nh + j] = k2 > 0 ? scale / k2 : 0.0;
        }
    }
}

Potential2D PoissonSolver::solve(std::span<double const> density, double gamma)
{
    Potential2D U{grid_, {}};
    solve(density, gamma, U.values);
    return U;
}

void PoissonSolver::solve(std::span<double const> density, double gamma, std::vector<double>& out)
{
    check_sizes(grid_, density.size());
    out.resize(density.size());
    if (gamma == 0)
    {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    auto re = fft_.real();
    std::copy(density.begin(), density.end(), re.begin());
    fft_.forward();
    auto spec = fft_.spectrum();
    for (std::size_t k = 0; k < spec.size(); ++k)
        spec[k] *= gamma * inv_k2_[k];
    fft_.backward();
    std::copy(re.begin(), re.end(), out.begin());
    remove_mean(out);
}

Potential2D solve_poisson(std::span<double const> density, double gamma, GridSpec grid)
{
    if (!(grid.dx > 0))
        throw std::domain_error("grid spacing must be positive");
    PoissonSolver solver(grid);
    return solver.solve(density, gamma);
}

double laplacian_residual(Potential2D const& U, std::span<double const> density, double gamma)
{
    auto const& g = U.grid;
    check_sizes(g, density.size());
    check_sizes(g, U.values.size());
    Fft2D fft(g.n);
    auto buf = fft.data();
    for (std::size_t k = 0; k < buf.size(); ++k)
        buf[k] = U.values[k];
    fft.forward();
    auto const k2 = k2_table(g);
    double const scale = 1.0 / static_cast<double>(g.cells());
    for (std::size_t k = 0; k < buf.size(); ++k)
        buf[k] *= -k2[k] * scale;
    fft.backward();
    double const mean =
        std::accumulate(density.begin(), density.end(), 0.0) / static_cast<double>(density.size());
    double worst = 0;
    for (std::size_t k = 0; k < buf.size(); ++k)
        worst = std::max(worst, std::abs(buf[k].real() + gamma * (density[k] - mean)));
    return worst;
}
} // namespace ebeam
