#pragma once

#include <span>
#include <vector>

#include "ebeam/fft.hpp"
#include "ebeam/field.hpp"

namespace ebeam
{
//! Mean-field potential on a Field2D grid, in a0^-2 units, zero spatial mean.
struct Potential2D
{
    GridSpec grid;
    std::vector<double> values;
};

/*!
 * Periodic spectral solver for lap U = -gamma rho.
 *
 * U_hat(k) = gamma rho_hat(k) / |k|^2 with the continuous symbol; the k = 0
 * mode is dropped, which fixes the gauge to zero mean.  Owns its transform
 * workspace; use one instance per thread.
 */
class PoissonSolver
{
  public:
    explicit PoissonSolver(GridSpec grid);

    GridSpec const& grid() const noexcept { return grid_; }

    Potential2D solve(std::span<double const> density, double gamma);
    //! Writes into `out` (resized as needed); avoids allocation in hot loops.
    void solve(std::span<double const> density, double gamma, std::vector<double>& out);

  private:
    GridSpec grid_;
    RealFft2D fft_;
    std::vector<double> inv_k2_;
};

Potential2D solve_poisson(std::span<double const> density, double gamma, GridSpec grid);

//! max |lap U + gamma (rho - mean rho)| using the same spectral Laplacian.
double laplacian_residual(Potential2D const& U, std::span<double const> density, double gamma);
} // namespace ebeam
