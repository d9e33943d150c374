#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "ebeam/errors.hpp"
#include "ebeam/field.hpp"

namespace ebeam
{
struct RadialProfile;

/*!
 * Binary amplitude hologram.
 *
 * The mask lives in the Fourier plane of the desired output: its far field
 * (a forward transform) is sampled on the output grid with spacing dx, and
 * the mask pixels are spaced du = 2 pi / (n dx).  kh is the output-plane
 * offset of the first orders, quantized to whole cells.
 */
struct MaskBitmap
{
    int n = 0;
    double dx = 0;        //!< output-plane spacing [a0]
    double kh = 0;        //!< carrier wavenumber, equal to the order offset [a0]
    double threshold = 0; //!< binarization level on T
    double rho_max = 0;   //!< mask aperture radius [1/a0]
    double target_radius = 0; //!< support radius of the target [a0]
    double amplitude = 1;     //!< max|Ft{target}| relative to the reference
    int l = 0;
    std::vector<std::uint8_t> bits;

    double du() const;
    int shift_cells() const;
    std::uint8_t operator()(int i, int j) const { return bits[static_cast<std::size_t>(i) * n + j]; }
    nlohmann::json manifest() const;
};

enum class ThresholdRule
{
    best_fidelity, //!< maximize profile_fidelity of the +1 order over the threshold
    median,        //!< median of T inside the aperture
    fixed          //!< MaskOptions::threshold
};

struct MaskOptions
{
    double kh = 0;                   //!< [a0]; 0 selects 4x the target radius
    ThresholdRule rule = ThresholdRule::best_fidelity;
    double threshold = 0;            //!< used with ThresholdRule::fixed
    double rho_max = 0;              //!< [1/a0]; 0 selects the inscribed disc
    double amplitude = 1;            //!< max|Ft{target}| relative to the reference wave
};

//! Radius [a0] enclosing all but `tail` of the target's power.
double support_radius(Field2D const& target, double tail = 1e-9);

/*!
 * T = |Ft{target} + exp(i kh u_x)|^2 with max|Ft{target}| scaled to 1, and
 * bits = 1 where T > threshold inside the aperture (see ThresholdRule).  Throws
 * ConfigurationError when kh cannot separate the first orders from the zeroth
 * or keep them on the grid.
 */
MaskBitmap synthesize_mask(Field2D const& target, MaskOptions const& opts = {});
MaskBitmap synthesize_mask(RadialProfile const& profile, int l, GridSpec grid,
                           MaskOptions const& opts = {});

//! Transmission T before binarization, in the same layout as the bits.
std::vector<double> mask_transmission(Field2D const& target, double kh, double amplitude = 1);

//! Forward transform of the transmission, centered and normalized on the output grid.
Field2D far_field(MaskBitmap const& mask);

/*!
 * Window of radius `window` around the order at -kh (which = +1) or +kh
 * (which = -1), moved to the grid centre and normalized.  Default window is
 * kh/3.  Throws ConfigurationError if the window reaches another order.
 */
Field2D extract_order(Field2D const& farfield, int which, MaskBitmap const& mask,
                      std::optional<double> window = {});

//! Azimuthal average of |f| in bins of width dx out to `radius`.
std::vector<double> radial_magnitude(Field2D const& f, double radius);

//! Pearson correlation of the azimuthally averaged magnitudes over [0, radius].
double profile_fidelity(Field2D const& reconstructed, Field2D const& target, double radius);

//! Pearson correlation of |a| and |b| over the disc r <= radius.
double magnitude_correlation(Field2D const& a, Field2D const& b, double radius);

//! Reflect through the grid centre: out(x) = f(-x).
Field2D point_reflect(Field2D const& f);

//! 0 -> 1 transitions along the row at y = row_offset cells, |x| <= half_length cells.
int fringe_count(MaskBitmap const& mask, int row_offset, int half_length);

/*!
 * Net fringes gained across the fork: the +1 order is demodulated back to the
 * mask plane and its phase counted around a loop through the band of
 * strongest fringe contrast.  Equals l for a hologram of an l vortex, also
 * where the contrast vanishes near the fork and row counts break down.
 */
int fork_charge(MaskBitmap const& mask);

//! P4 bitmap; black (1 in PBM) marks opaque pixels, i.e. bits = 0.
void write_pbm(MaskBitmap const& mask, std::filesystem::path const& path);
} // namespace ebeam
