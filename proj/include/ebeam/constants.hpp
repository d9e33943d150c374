#pragma once

#include <numbers>

namespace ebeam::constants
{
//---------------------------------------------------------------------------//
/*!
 * Physical constants (CODATA 2018, SI units).
 *
 * Constant            | Unit    | Notes
 * ------------------- | ------- | ---------------------------------------
 * elementary_charge   | C       | exact
 * electron_mass       | kg      |
 * planck              | J s     | exact
 * hbar                | J s     |
 * bohr_radius         | m       | internal transverse length unit
 * speed_of_light      | m/s     | exact
 * compton_wavelength  | m       | rounded value used for the spin estimate
 */
inline constexpr double pi = std::numbers::pi;

inline constexpr double elementary_charge = 1.602176634e-19;
inline constexpr double electron_mass = 9.1093837015e-31;
inline constexpr double planck = 6.62607015e-34;
inline constexpr double hbar = planck / (2 * pi);
inline constexpr double bohr_radius = 5.29177210903e-11;
inline constexpr double speed_of_light = 299792458.0;

//! Rounded Compton wavelength used in the spin-interaction estimate.
inline constexpr double compton_wavelength = 2.4e-12;

inline constexpr double first_bessel_zero = 2.404825557695773;
} // namespace ebeam::constants
