#include "ebeam/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ebeam/constants.hpp"
#include "ebeam/physical_params.hpp"

namespace ebeam
{
void PropagatorConfig::validate() const
{
    if (!(dz > 0) || !std::isfinite(dz))
        throw ConfigurationError("dz must be positive");
    if (!(z_max > 0) || !std::isfinite(z_max))
        throw ConfigurationError("z_max must be positive");
    if (record_stride < 1)
        throw ConfigurationError("record stride must be at least 1");
    if (!(gamma >= 0))
        throw ConfigurationError("gamma must be non-negative");
    if (!(k > 0))
        throw ConfigurationError("wavenumber must be positive");
    if (absorber.enabled
        && !(absorber.strength >= 0 && absorber.strength < 1 && absorber.width_fraction > 0
             && absorber.width_fraction < 0.5))
        throw ConfigurationError("absorber strength must lie in [0, 1) and width in (0, 0.5)");
}

namespace
{
std::vector<double> absorber_profile(GridSpec const& g, Absorber const& a)
{
    std::vector<double> edge(static_cast<std::size_t>(g.n), 1.0);
    if (a.enabled)
    {
        double const band = a.width_fraction * g.n;
        for (int i = 0; i < g.n; ++i)
        {
            // cells from the periodic seam at i = 0, symmetric about the grid centre
            double const from_edge = g.n / 2 - std::abs(i - g.n / 2);
            double const depth = std::clamp((band - from_edge) / band, 0.0, 1.0);
            edge[static_cast<std::size_t>(i)] =
                1 - a.strength * (1 - std::cos(constants::pi * depth)) / 2;
        }
    }
    std::vector<double> mask(g.cells());
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            mask[static_cast<std::size_t>(i) * g.n + j] =
                edge[static_cast<std::size_t>(i)] * edge[static_cast<std::size_t>(j)];
    return mask;
}

// scale absorbs the 1/n^2 of one unnormalized forward/backward transform pair
std::vector<cplx> kinetic_phase(GridSpec const& g, double dzeta, double scale)
{
    std::vector<cplx> ph(g.cells());
    for (int i = 0; i < g.n; ++i)
    {
        double const kx = fft_wavenumber(i, g.n, g.dx);
        for (int j = 0; j < g.n; ++j)
        {
            double const ky = fft_wavenumber(j, g.n, g.dx);
            ph[static_cast<std::size_t>(i) * g.n + j] =
                std::polar(scale, -(kx * kx + ky * ky) * dzeta);
        }
    }
    return ph;
}
} // namespace

SplitStepPropagator::SplitStepPropagator(GridSpec grid, PropagatorConfig config)
    : grid_((grid.validate(), grid)),
      config_((config.validate(), config)),
      dzeta_(z_to_zeta(config.dz, config.k)),
      fft_(grid.n),
      scratch_(grid.n),
      poisson_(grid),
      half_kin_(kinetic_phase(grid, dzeta_ / 2, 1.0 / static_cast<double>(grid.cells()))),
      half_phase_(kinetic_phase(grid, dzeta_ / 2, 1.0)),
      full_kin_(kinetic_phase(grid, dzeta_, 1.0 / static_cast<double>(grid.cells()))),
      absorber_(absorber_profile(grid, config.absorber)),
      density_(grid.cells()),
      potential_(grid.cells())
{
}

void SplitStepPropagator::kinetic(std::span<cplx> psi_hat, std::vector<cplx> const& phase)
{
    for (std::size_t k = 0; k < psi_hat.size(); ++k)
        psi_hat[k] *= phase[k];
}

void SplitStepPropagator::potential_and_absorber(std::span<cplx> psi, long step, double z)
{
    double total = 0;
    for (std::size_t k = 0; k < psi.size(); ++k)
    {
        density_[k] = std::norm(psi[k]);
        total += density_[k];
    }
    if (!std::isfinite(total))
        throw NumericBlowup("non-finite field at step " + std::to_string(step), step, z);
    bool const absorb = config_.absorber.enabled;
    if (config_.gamma == 0 && config_.potential_offset == 0)
    {
        if (absorb)
            for (std::size_t k = 0; k < psi.size(); ++k)
                psi[k] *= absorber_[k];
        return;
    }
    poisson_.solve(density_, config_.gamma, potential_);
    for (std::size_t k = 0; k < psi.size(); ++k)
    {
        double const phase = -(potential_[k] + config_.potential_offset) * dzeta_;
        psi[k] *= std::polar(absorb ? absorber_[k] : 1.0, phase);
    }
}

void SplitStepPropagator::check_step(Field2D const& field)
{
    if (config_.gamma == 0)
        return;
    auto const d = field.density();
    poisson_.solve(d, config_.gamma, potential_);
    double const phase = potential_spread(potential_) * dzeta_;
    if (phase > config_.max_phase * (1 + 1e-9))
        throw ConfigurationError("potential phase per step " + std::to_string(phase)
                                 + " rad exceeds the bound; reduce dz");
}

void SplitStepPropagator::step(Field2D& field)
{
    if (field.grid.n != grid_.n || field.grid.dx != grid_.dx)
        throw ConfigurationError("field grid does not match the propagator");
    auto buf = fft_.data();
    std::copy(field.amps.begin(), field.amps.end(), buf.begin());
    fft_.forward();
    kinetic(buf, half_kin_);
    fft_.backward();
    potential_and_absorber(buf, 0, 0.0);
    fft_.forward();
    kinetic(buf, half_kin_);
    fft_.backward();
    std::copy(buf.begin(), buf.end(), field.amps.begin());
}

PropagationTrace SplitStepPropagator::propagate(Field2D initial, MetricsHook const& hook)
{
    if (initial.grid.n != grid_.n || initial.grid.dx != grid_.dx)
        throw ConfigurationError("field grid does not match the propagator");
    check_step(initial);

    PropagationTrace trace;
    trace.z_max = config_.z_max;
    LobeTracker tracker;
    auto record = [&](long s, double z, Field2D const& f) {
        auto const m = tracker.measure(f);
        trace.append(z, bohr_to_meters(m.width), m.lobe_fraction, m.peak_density,
                     std::isfinite(m.lobe_radius) ? bohr_to_meters(m.lobe_radius) : unbounded);
        if (hook)
            hook(s, z, f);
    };
    record(0, 0.0, initial);

    long const nsteps = static_cast<long>(std::ceil(config_.z_max / config_.dz - 1e-9));
    Field2D snapshot(grid_);
    snapshot.meta = initial.meta;

    auto buf = fft_.data();
    std::copy(initial.amps.begin(), initial.amps.end(), buf.begin());
    fft_.forward();
    kinetic(buf, half_kin_);
    long s = 1;
    for (; s <= nsteps; ++s)
    {
        double const z = static_cast<double>(s) * config_.dz;
        fft_.backward();
        potential_and_absorber(buf, s, z);
        fft_.forward();
        bool const rec = (s % config_.record_stride == 0) || s == nsteps;
        if (!rec)
        {
            kinetic(buf, full_kin_);
            continue;
        }
        kinetic(buf, half_kin_);
        auto sb = scratch_.data();
        std::copy(buf.begin(), buf.end(), sb.begin());
        scratch_.backward();
        std::copy(sb.begin(), sb.end(), snapshot.amps.begin());
        record(s, z, snapshot);
        if (config_.stop_width_factor > 0
            && trace.width.back() >= config_.stop_width_factor * trace.initial_width)
            break;
        kinetic(buf, half_phase_);
    }
    trace.steps = static_cast<int>(std::min(s, nsteps));
    trace.Ld = nondiffraction_range(trace);
    return trace;
}

double potential_spread(std::span<double const> U)
{
    if (U.empty())
        return 0;
    auto const [lo, hi] = std::minmax_element(U.begin(), U.end());
    return (*hi - *lo) / 2;
}

StepLimits step_limits(Field2D const& field, double gamma, double k, double max_phase,
                       double spectral_fraction)
{
    if (!(max_phase > 0) || !(spectral_fraction > 0 && spectral_fraction <= 1))
        throw std::domain_error("phase bound and spectral fraction must be positive");
    auto const& g = field.grid;
    Fft2D fft(g.n);
    auto buf = fft.data();
    std::copy(field.amps.begin(), field.amps.end(), buf.begin());
    fft.forward();
    std::vector<std::pair<double, double>> spectrum(buf.size());
    double total = 0;
    for (int i = 0; i < g.n; ++i)
    {
        double const kx = fft_wavenumber(i, g.n, g.dx);
        for (int j = 0; j < g.n; ++j)
        {
            double const ky = fft_wavenumber(j, g.n, g.dx);
            auto const idx = static_cast<std::size_t>(i) * g.n + j;
            double const p = std::norm(buf[idx]);
            spectrum[idx] = {kx * kx + ky * ky, p};
            total += p;
        }
    }
    std::sort(spectrum.begin(), spectrum.end());
    double acc = 0, k2_eff = spectrum.back().first;
    for (auto const& [k2, p] : spectrum)
    {
        acc += p;
        if (acc >= spectral_fraction * total)
        {
            k2_eff = k2;
            break;
        }
    }
    StepLimits lim;
    lim.kinetic = k2_eff > 0 ? zeta_to_z(max_phase / k2_eff, k) : unbounded;
    if (gamma > 0)
    {
        auto const U = solve_poisson(field.density(), gamma, g);
        double const spread = potential_spread(U.values);
        if (spread > 0)
            lim.potential = zeta_to_z(max_phase / spread, k);
    }
    return lim;
}

double default_step(Field2D const& field, double gamma, double k, double max_phase,
                    double spectral_fraction)
{
    auto const lim = step_limits(field, gamma, k, max_phase, spectral_fraction);
    double const dz = lim.dz();
    if (!std::isfinite(dz))
        throw std::domain_error("field has no kinetic or potential phase to bound the step");
    return dz;
}

double energy_functional(Field2D const& field, double gamma)
{
    auto const& g = field.grid;
    Fft2D fft(g.n);
    auto buf = fft.data();
    std::copy(field.amps.begin(), field.amps.end(), buf.begin());
    fft.forward();
    double kinetic = 0;
    for (int i = 0; i < g.n; ++i)
    {
        double const kx = fft_wavenumber(i, g.n, g.dx);
        for (int j = 0; j < g.n; ++j)
        {
            double const ky = fft_wavenumber(j, g.n, g.dx);
            kinetic += (kx * kx + ky * ky) * std::norm(buf[static_cast<std::size_t>(i) * g.n + j]);
        }
    }
    kinetic *= g.dx * g.dx / static_cast<double>(g.cells());
    if (gamma == 0)
        return kinetic;
    auto const d = field.density();
    auto const U = solve_poisson(d, gamma, g);
    double hartree = 0;
    for (std::size_t k = 0; k < d.size(); ++k)
        hartree += U.values[k] * d[k];
    return kinetic + 0.5 * hartree * g.dx * g.dx;
}
} // namespace ebeam
