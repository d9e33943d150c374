#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "ebeam/fft.hpp"

namespace ebeam
{
struct RadialProfile;

//! Square grid centred on the beam axis: x_i = (i - n/2) dx, dx in a0.
struct GridSpec
{
    int n = 512;
    double dx = 1.0;

    double coord(int i) const noexcept { return (i - n / 2) * dx; }
    double half_extent() const noexcept { return n / 2 * dx; }
    std::size_t cells() const noexcept { return static_cast<std::size_t>(n) * n; }
    void validate() const;
};

//! Complex wavefunction sampled on a GridSpec, row-major with x as the slow index.
struct Field2D
{
    GridSpec grid;
    std::vector<cplx> amps;
    nlohmann::json meta = nlohmann::json::object();

    Field2D() = default;
    explicit Field2D(GridSpec g) : grid(g), amps(g.cells()) {}

    cplx& operator()(int i, int j) { return amps[index(i, j)]; }
    cplx operator()(int i, int j) const { return amps[index(i, j)]; }
    std::size_t index(int i, int j) const noexcept
    {
        return static_cast<std::size_t>(i) * grid.n + j;
    }

    //! Integral of |psi|^2 dx dy.
    double norm() const;
    void renormalize();
    std::vector<double> density() const;
};

enum class OutsideProfile
{
    error, //!< the profile must cover the grid's half diagonal
    zero   //!< samples beyond rho_max are zero (aperture-limited profile)
};

Field2D from_radial(RadialProfile const& profile, int l, GridSpec grid,
                    OutsideProfile outside = OutsideProfile::error);

//! Density proportional to rho^(2l) exp(-rho^2 / sigma^2); l > 0 gives a Laguerre-Gauss mode.
Field2D gaussian(double sigma, int l, GridSpec grid);
Field2D bessel(double kT, int l, GridSpec grid);
Field2D plane_wave(double kx, double ky, GridSpec grid);

//! Hard circular cutoff followed by renormalization.
Field2D apply_aperture(Field2D field, double radius);

/*!
 * Add circular complex Gaussian noise, i.i.d. per cell, scaled so that its
 * integrated power is exactly ratio times the field's, then renormalize.
 */
Field2D add_noise(Field2D field, double noise_power_ratio, std::uint64_t seed);

//! Phase winding along the square loop of half-width `half_cells` around the axis.
int winding_number(Field2D const& field, int half_cells);

//! Raw little-endian complex64 samples plus a JSON sidecar (`path` + ".json").
void write_field(Field2D const& field, std::filesystem::path const& path);
Field2D read_field(std::filesystem::path const& path);

//! Density map as binary PGM, scaled to the maximum; bits is 8 or 16.
void write_density_pgm(std::span<double const> density, int n, std::filesystem::path const& path,
                       int bits = 8);
} // namespace ebeam
