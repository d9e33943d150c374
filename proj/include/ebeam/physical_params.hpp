#pragma once

#include <json.hpp>

namespace ebeam
{
//! Lab-frame description of a beam.
struct PhysParams
{
    double voltage = 20e3;          //!< acceleration voltage [V]
    double current = 50e-6;         //!< beam current [A]; 0 selects the linear regime
    int oam_l = 0;                  //!< orbital angular momentum charge
    double aperture_radius = 140e-9; //!< [m]
    double kT = 0.0;                //!< transverse wavenumber [1/m]

    //! Throws std::domain_error when an invariant is violated.
    void validate() const;
};

//! Scales derived from PhysParams.
struct DerivedScales
{
    double velocity = 0;     //!< [m/s]
    double wavenumber = 0;   //!< de Broglie k [1/m]
    double line_density = 0; //!< electrons per meter along z
    double gamma = 0;        //!< 8 pi n a0, dimensionless Poisson source strength
};

enum class Kinematics
{
    nonrelativistic,
    relativistic //!< reserved; every conversion rejects it
};

double electron_velocity(double voltage, Kinematics kin = Kinematics::nonrelativistic);
double line_density(double current, double voltage);
double de_broglie_wavelength(double voltage, Kinematics kin = Kinematics::nonrelativistic);
double de_broglie_wavenumber(double voltage, Kinematics kin = Kinematics::nonrelativistic);
double spin_negligibility_ratio(double typical_length);
double nonlinear_coefficient(PhysParams const& params);
DerivedScales derive_scales(PhysParams const& params);

//@{
//! Transverse lengths are carried in Bohr radii internally.
double meters_to_bohr(double meters);
double bohr_to_meters(double bohr);
//@}

//@{
/*!
 * Paraxial evolution variable.
 *
 * With transverse lengths in a0 the paraxial equation reads
 * i d/dzeta psi = (-lap + U) psi with zeta = z / (2 k a0^2).
 */
double z_to_zeta(double z, double wavenumber);
double zeta_to_z(double zeta, double wavenumber);
//@}

//! Constants table echoed into output headers.
nlohmann::json constants_table();
nlohmann::json to_json(PhysParams const& p);
nlohmann::json to_json(DerivedScales const& d);
} // namespace ebeam
