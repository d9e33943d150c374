#include "ebeam/physical_params.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ebeam/constants.hpp"

namespace ebeam
{
namespace
{
void require_nonrelativistic(Kinematics kin)
{
    if (kin != Kinematics::nonrelativistic)
        throw std::logic_error("relativistic kinematics are not implemented");
}

void require_positive(double value, char const* what)
{
    if (!(value > 0) || !std::isfinite(value))
        throw std::domain_error(std::string(what) + " must be positive and finite");
}
} // namespace

void PhysParams::validate() const
{
    require_positive(voltage, "voltage");
    if (!(current >= 0) || !std::isfinite(current))
        throw std::domain_error("current must be non-negative");
    if (oam_l < 0)
        throw std::domain_error("OAM charge must be non-negative");
    require_positive(aperture_radius, "aperture radius");
    if (!(kT >= 0) || !std::isfinite(kT))
        throw std::domain_error("kT must be non-negative");
}

double electron_velocity(double voltage, Kinematics kin)
{
    require_nonrelativistic(kin);
    require_positive(voltage, "voltage");
    using namespace constants;
    return std::sqrt(2 * elementary_charge * voltage / electron_mass);
}

double line_density(double current, double voltage)
{
    if (!(current >= 0) || !std::isfinite(current))
        throw std::domain_error("current must be non-negative");
    return current / (constants::elementary_charge * electron_velocity(voltage));
}

double de_broglie_wavelength(double voltage, Kinematics kin)
{
    require_nonrelativistic(kin);
    require_positive(voltage, "voltage");
    using namespace constants;
    return planck / std::sqrt(2 * electron_mass * elementary_charge * voltage);
}

double de_broglie_wavenumber(double voltage, Kinematics kin)
{
    return 2 * constants::pi / de_broglie_wavelength(voltage, kin);
}

double spin_negligibility_ratio(double typical_length)
{
    require_positive(typical_length, "typical length");
    double const r = typical_length / constants::compton_wavelength;
    return r * r;
}

double nonlinear_coefficient(PhysParams const& params)
{
    params.validate();
    if (params.current == 0)
        return 0;
    return 8 * constants::pi * line_density(params.current, params.voltage)
           * constants::bohr_radius;
}

DerivedScales derive_scales(PhysParams const& params)
{
    params.validate();
    DerivedScales d;
    d.velocity = electron_velocity(params.voltage);
    d.wavenumber = de_broglie_wavenumber(params.voltage);
    d.line_density = line_density(params.current, params.voltage);
    d.gamma = nonlinear_coefficient(params);
    return d;
}

double meters_to_bohr(double meters)
{
    return meters / constants::bohr_radius;
}

double bohr_to_meters(double bohr)
{
    return bohr * constants::bohr_radius;
}

double z_to_zeta(double z, double wavenumber)
{
    require_positive(wavenumber, "wavenumber");
    double const a0 = constants::bohr_radius;
    return z / (2 * wavenumber * a0 * a0);
}

double zeta_to_z(double zeta, double wavenumber)
{
    require_positive(wavenumber, "wavenumber");
    double const a0 = constants::bohr_radius;
    return zeta * 2 * wavenumber * a0 * a0;
}

nlohmann::json constants_table()
{
    using namespace constants;
    return {
        {"source", "CODATA 2018"},
        {"elementary_charge_C", elementary_charge},
        {"electron_mass_kg", electron_mass},
        {"planck_Js", planck},
        {"bohr_radius_m", bohr_radius},
        {"speed_of_light_m_per_s", speed_of_light},
        {"compton_wavelength_m", compton_wavelength},
        {"kinematics", "nonrelativistic"},
    };
}

nlohmann::json to_json(PhysParams const& p)
{
    return {{"voltage_V", p.voltage},
            {"current_A", p.current},
            {"oam_l", p.oam_l},
            {"aperture_radius_m", p.aperture_radius},
            {"kT_per_m", p.kT}};
}

nlohmann::json to_json(DerivedScales const& d)
{
    return {{"velocity_m_per_s", d.velocity},
            {"wavenumber_per_m", d.wavenumber},
            {"line_density_per_m", d.line_density},
            {"gamma", d.gamma}};
}
} // namespace ebeam
