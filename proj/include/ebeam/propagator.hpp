#pragma once

#include <algorithm>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ebeam/errors.hpp"
#include "ebeam/fft.hpp"
#include "ebeam/field.hpp"
#include "ebeam/metrics.hpp"
#include "ebeam/poisson.hpp"

namespace ebeam
{
//! Raised-cosine amplitude damping over the outer band of the grid.
struct Absorber
{
    bool enabled = true;
    double strength = 0.05;      //!< per-step attenuation at the grid edge
    double width_fraction = 0.1; //!< band width relative to the grid side
};

struct PropagatorConfig
{
    double dz = 0;          //!< [m]
    double z_max = 0;       //!< [m]
    int record_stride = 10; //!< steps between metric snapshots
    double gamma = 0;
    double k = 0;           //!< de Broglie wavenumber [1/m]
    Absorber absorber;
    double potential_offset = 0;    //!< constant added to U each step (gauge checks)
    double max_phase = 0.1;         //!< bound on potential_spread(U) dzeta checked at start
    double stop_width_factor = 0;   //!< stop once width exceeds this multiple of w0 (0: never)

    void validate() const;
};

class NumericBlowup : public std::runtime_error
{
  public:
    NumericBlowup(std::string const& what, long step, double z)
        : std::runtime_error(what), step_(step), z_(z)
    {
    }
    long step() const noexcept { return step_; }
    double z() const noexcept { return z_; }

  private:
    long step_;
    double z_;
};

//! Called at every recorded z with the real-space field.
using MetricsHook = std::function<void(long step, double z, Field2D const& field)>;

/*!
 * Symmetric split-step integrator for the paraxial Schroedinger-Poisson system
 *
 *   i d psi / d zeta = (-lap + U) psi,   lap U = -gamma |psi|^2,
 *
 * with zeta = z / (2 k a0^2).  One step is a half kinetic propagation in
 * Fourier space, the potential phase (with U recomputed from the current
 * density) and the absorber mask in real space, then another half kinetic
 * propagation.
 */
class SplitStepPropagator
{
  public:
    SplitStepPropagator(GridSpec grid, PropagatorConfig config);

    PropagatorConfig const& config() const noexcept { return config_; }
    double dzeta() const noexcept { return dzeta_; }

    void step(Field2D& field);
    PropagationTrace propagate(Field2D initial, MetricsHook const& hook = {});

    //! Potential phase bound check; throws ConfigurationError.
    void check_step(Field2D const& field);

  private:
    void potential_and_absorber(std::span<cplx> psi, long step, double z);
    void kinetic(std::span<cplx> psi_hat, std::vector<cplx> const& phase);

    GridSpec grid_;
    PropagatorConfig config_;
    double dzeta_;
    Fft2D fft_;
    Fft2D scratch_;
    PoissonSolver poisson_;
    std::vector<cplx> half_kin_;
    std::vector<cplx> half_phase_;
    std::vector<cplx> full_kin_;
    std::vector<double> absorber_;
    std::vector<double> density_;
    std::vector<double> potential_;
};

/*!
 * Half the peak-to-peak range of U: the largest potential phase rate left
 * after the best choice of the (physically irrelevant) constant offset.
 */
double potential_spread(std::span<double const> U);

//! Largest dz [m] allowed by each phase bound.
struct StepLimits
{
    double kinetic = unbounded;
    double potential = unbounded;
    double dz() const { return std::min(kinetic, potential); }
};

/*!
 * Step limits from the initial field: the kinetic phase at the radius
 * enclosing `spectral_fraction` of the spectral power, and the potential
 * phase potential_spread(U) dzeta, each kept at or below `max_phase`.
 */
StepLimits step_limits(Field2D const& field, double gamma, double k, double max_phase = 0.1,
                       double spectral_fraction = 0.99);

//! step_limits(...).dz(); throws std::domain_error if neither bound is finite.
double default_step(Field2D const& field, double gamma, double k, double max_phase = 0.1,
                    double spectral_fraction = 0.99);

//! int |grad psi|^2 + (1/2) int U |psi|^2, in a0 units.
double energy_functional(Field2D const& field, double gamma);
} // namespace ebeam
