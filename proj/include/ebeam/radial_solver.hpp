#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace ebeam
{
/*!
 * Shape-invariant radial profile.
 *
 * All lengths are in Bohr radii.  The sample grid is uniform and starts at
 * rho = 0, where phi and U hold their analytic limits.  phi is normalized so
 * that 2 pi int_0^rho_max phi^2 rho drho = 1.
 */
struct RadialProfile
{
    std::vector<double> rho;
    std::vector<double> phi;
    std::vector<double> dphi; //!< d phi / d rho, carried by the integrator
    std::vector<double> U;

    double kT = 0;
    int l = 0;
    double gamma = 0;
    double alpha = 0; //!< amplitude scale: phi ~ alpha J_l(kT rho) near the axis
    double rho_max = 0;

    std::vector<double> zeros;
    int lobe_count = 0;

    double norm_error = 0;          //!< |2 pi int phi^2 rho - 1|
    double ode_residual = 0;        //!< relative max residual of the phi equation
    double potential_mismatch = 0;  //!< co-integrated U vs. quadrature U, relative
    int alpha_iterations = 0;
    int normalization_brackets = 1; //!< sign changes of norm(alpha) - 1 seen in the scan

    double step() const { return rho.size() > 1 ? rho[1] - rho[0] : 0.0; }

    //! Linear interpolation of phi; zero beyond rho_max.
    double phi_at(double r) const;
};

struct RadialOptions
{
    double tol = 1e-8;             //!< normalization tolerance
    int max_iter = 100;            //!< alpha iterations
    int points_per_wavelength = 64;
    int min_points = 4096;
    double start_fraction = 1e-3;  //!< eps relative to the first Bessel zero scale
};

class ConvergenceError : public std::runtime_error
{
  public:
    ConvergenceError(std::string const& what, double residual)
        : std::runtime_error(what), residual_(residual)
    {
    }
    double residual() const noexcept { return residual_; }

  private:
    double residual_;
};

/*!
 * Solve the coupled radial system
 *
 *   phi'' + phi'/rho - l^2/rho^2 phi = U phi
 *   (rho U')' / rho = -gamma phi^2
 *
 * with U(0) = -kT^2, U'(0) = 0 and phi ~ alpha J_l(kT rho) at the axis.
 * alpha is iterated until the profile is normalized over [0, rho_max].
 */
RadialProfile solve_radial(double kT, int l, double gamma, double rho_max,
                           RadialOptions const& opts = {});

//! The kT = 0, l = 0 member: phi'(0) = phi''(0) = 0 with U(0) = 0.
RadialProfile solve_radial_flat(double gamma, double rho_max, RadialOptions const& opts = {});

/*!
 * U(rho) = U0 - gamma int_0^rho (1/r') int_0^r' phi^2 r'' dr'' dr'
 * on a uniform grid starting at rho = 0 (fourth-order cumulative quadrature).
 */
std::vector<double> radial_potential_from_density(std::span<double const> rho,
                                                  std::span<double const> phi,
                                                  double gamma, double U0);

//! Sign-change radii of phi, refined by bisection on the cubic Hermite interpolant.
std::vector<double> find_zeros(RadialProfile const& profile);
int count_lobes(RadialProfile const& profile);

//! Relative max residual of the phi equation via fourth-order differences.
double ode_residual(RadialProfile const& profile);

//! 2 pi int phi^2 rho drho over the profile grid (fourth-order quadrature).
double radial_norm(RadialProfile const& profile);

//! Second-moment width of the central lobe (up to the first zero), in a0.
double radial_main_lobe_width(RadialProfile const& profile);

nlohmann::json profile_header(RadialProfile const& profile);
void write_profile(std::ostream& os, RadialProfile const& profile);
RadialProfile read_profile(std::istream& is);
} // namespace ebeam
