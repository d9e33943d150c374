#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "ebeam/field.hpp"

namespace ebeam
{
inline constexpr double unbounded = std::numeric_limits<double>::infinity();

//! Azimuthal average of |psi|^2 in radial bins of width dx; bin b covers round(r/dx) = b.
std::vector<double> azimuthal_average(Field2D const& field);

/*!
 * Radius (in units of dx) of the first local minimum beyond the global maximum
 * whose prominence is at least `min_prominence` of the peak.  Returns
 * `unbounded` for zero-free, monotonically decaying profiles.
 */
double main_lobe_radius(std::span<double const> radial_density, double dx,
                        double min_prominence = 0.01);
double main_lobe_radius(Field2D const& field, double min_prominence = 0.01);

//! Second-moment width inside the disc r <= lobe_radius (whole grid if unbounded), in a0.
double effective_width(Field2D const& field, double lobe_radius);
double effective_width(Field2D const& field);

//! Fraction of the norm inside r <= lobe_radius.
double main_lobe_fraction(Field2D const& field, double lobe_radius);
double main_lobe_current(Field2D const& field, double total_current);

struct LobeMeasurement
{
    double lobe_radius; //!< a0, or unbounded
    double width;       //!< a0
    double lobe_fraction;
    double peak_density;
};

/*!
 * Main-lobe bookkeeping along a propagation.
 *
 * The first call fixes whether the beam has a bounded main lobe.  Afterwards a
 * newly detected minimum is accepted only if it lies within a factor
 * `max_growth` of the previous radius in either direction; otherwise (contrast lost, or the boundary jumped past a
 * filled zero) the previous radius is reused.
 */
class LobeTracker
{
  public:
    explicit LobeTracker(double min_prominence = 0.01, double max_growth = 1.5)
        : min_prominence_(min_prominence), max_growth_(max_growth)
    {
    }

    LobeMeasurement measure(Field2D const& field);
    std::optional<double> radius() const { return radius_; }

  private:
    double min_prominence_;
    double max_growth_;
    std::optional<double> radius_;
};

//! Per-z metrics of a propagation run; lengths in meters.
struct PropagationTrace
{
    std::vector<double> z;
    std::vector<double> width;
    std::vector<double> lobe_fraction;
    std::vector<double> peak_density;
    std::vector<double> lobe_radius;
    double initial_width = 0;
    double z_max = 0;
    double Ld = unbounded;
    int steps = 0;

    void append(double z_m, double width_m, double fraction, double peak, double radius_m);
};

//! First z where width reaches sqrt(2) times the initial width, linearly interpolated.
double nondiffraction_range(PropagationTrace const& trace);

//! CSV with header z[m],effective_width[m],main_lobe_current_fraction,peak_density.
void write_trace_csv(std::ostream& os, PropagationTrace const& trace);
} // namespace ebeam
