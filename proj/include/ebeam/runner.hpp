#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebeam/errors.hpp"
#include "ebeam/field.hpp"
#include "ebeam/mask.hpp"
#include "ebeam/metrics.hpp"
#include "ebeam/physical_params.hpp"
#include "ebeam/propagator.hpp"
#include "ebeam/radial_solver.hpp"

namespace ebeam
{
inline constexpr char const* scenario_schema = "ebeam-scenario/1";
inline constexpr int preset_version = 1;

enum class BeamFamily
{
    gaussian, //!< Laguerre-Gauss for l != 0
    bessel,
    shape_preserving
};

std::string to_string(BeamFamily f);
BeamFamily family_from_string(std::string const& s);

enum class RunProfile
{
    fast,
    full
};

struct BeamSpec
{
    BeamFamily family = BeamFamily::shape_preserving;
    int l = 0;
    double width = 8e-9;        //!< target effective width at launch [m]
    double kT = 0;              //!< [1/a0]; 0 matches the width instead
    bool multi_electron = true; //!< false drops the self-consistent potential
    double noise_ratio = 0;     //!< noise power relative to the beam power
    std::uint64_t seed = 1;
};

struct GridSettings
{
    int n = 512;
    double extent_apertures = 4; //!< grid side in aperture radii
};

struct PropagationSettings
{
    double z_max = 0;             //!< [m]
    double dz = 0;                //!< [m]; 0 applies the step rule
    double dz_scale = 1;          //!< multiplies the step-rule dz
    int records = 400;            //!< snapshots over z_max
    double max_phase = 0.1;
    double spectral_fraction = 0.99;
    double stop_width_factor = 1.6; //!< 0 runs to z_max
    Absorber absorber;
};

struct SweepSettings
{
    std::vector<BeamFamily> families;
    std::vector<double> widths;   //!< [m]
    double merge_tolerance = 0.1; //!< relative L_d gap below which two curves count as merged
    double min_cells_per_width = 1.25; //!< n is doubled per point until width / dx reaches this; 0 keeps n
};

inline constexpr int max_sweep_grid = 4096;

struct MaskSettings
{
    int n = 1024;
    double extent_apertures = 12;
    MaskOptions options;
};

struct Scenario
{
    std::string name;
    int version = preset_version;
    std::string description;
    PhysParams physics;
    BeamSpec beam;
    GridSettings grid;
    PropagationSettings propagation;
    std::optional<SweepSettings> sweep;
    MaskSettings mask;

    //! Throws ConfigurationError.
    void validate() const;
};

nlohmann::json to_json(Scenario const& s);
//! Unknown keys are rejected; missing keys keep their defaults.
Scenario scenario_from_json(nlohmann::json const& j);
Scenario load_scenario(std::filesystem::path const& path);

std::vector<std::string> preset_names();
//! Throws ConfigurationError for unknown names.
Scenario preset(std::string const& name, RunProfile profile = RunProfile::full);

//! kT * (effective width) of the J_l main lobe, by quadrature.
double bessel_width_product(int l);

/*!
 * Transverse wavenumber [1/a0] giving a launch field of effective width
 * `width` [a0].  For the shape-preserving family the radial profile is solved
 * at each trial kT; throws ConfigurationError above the maximal width.
 */
double matched_kT(BeamFamily family, int l, double width, double gamma, double rho_max);

//! Main-lobe width [a0] of the kT = 0 shape-preserving solution.
double maximal_width(double gamma, double rho_max);

struct LaunchField
{
    Field2D field;
    Field2D clean; //!< before noise
    double kT = 0; //!< [1/a0]; 0 for Gaussian beams
    int lobe_count = 0;
    std::optional<RadialProfile> profile;
    DerivedScales scales;
    double gamma = 0; //!< used in propagation
};

LaunchField make_launch(Scenario const& s);

using Logger = std::function<void(std::string const&)>;

struct RunOptions
{
    std::optional<std::filesystem::path> out_dir;
    Logger log;
    bool radial_density = true; //!< write radial_density.csv
};

struct RunResult
{
    std::string name;
    PropagationTrace trace;
    double Ld = unbounded;    //!< [m]
    double initial_width = 0; //!< [m]
    double lobe_current = 0;  //!< [A]
    double lobe_fraction = 0;
    int lobe_count = 0;
    double kT = 0;
    double dz = 0;
    double gamma = 0;
    std::vector<int> winding; //!< per recorded z, for l != 0
    int winding_at(double z) const;
    nlohmann::json summary;
};

RunResult run_scenario(Scenario const& s, RunOptions const& opts = {});

struct SweepRow
{
    BeamFamily family;
    double width = 0; //!< requested [m]
    double measured_width = 0;
    double kT = 0;
    double Ld = unbounded;
    double lobe_current = 0;
    double lobe_fraction = 0;
    int lobe_count = 0;
    int grid_n = 0;
};

struct SweepResult
{
    std::vector<SweepRow> rows;
    std::optional<double> critical_width; //!< [m]
    double maximal_width = 0;             //!< [m]
    std::vector<double> skipped_widths;   //!< shape-preserving samples above the maximal width
    nlohmann::json summary;

    std::optional<SweepRow> find(BeamFamily f, double width) const;
};

/*!
 * Critical width: the merge point of the shape-preserving and Bessel L_d
 * curves, interpolated where their relative gap crosses `tolerance` on the
 * way up from the narrowest sample.
 */
std::optional<double> critical_width(std::vector<SweepRow> const& rows, double tolerance);

//! Grid size for one sweep point after the min_cells_per_width refinement.
int sweep_grid_n(Scenario const& s, double width);

SweepResult run_sweep(Scenario const& s, RunOptions const& opts = {}, int threads = 1);

struct MaskReport
{
    MaskBitmap mask;
    double fidelity = 0;        //!< radial-profile Pearson of the +1 order
    double correlation_2d = 0;  //!< Pearson of |E+1| and |target| over the disc
    double mirror_error = 0;    //!< max |E-1 - conj(E+1(-x))|
    int fringe_difference = 0; //!< row count difference at +-n/16; needs contrast along both rows
    int fork_charge = 0;
    int winding_plus = 0;
    int winding_minus = 0;
    nlohmann::json report;
};

MaskReport run_mask_pipeline(Scenario const& s, RunOptions const& opts = {});
} // namespace ebeam
