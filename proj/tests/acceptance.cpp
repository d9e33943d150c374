// Acceptance report: one PASS/FAIL line per criterion.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ebeam/constants.hpp"
#include "ebeam/fft.hpp"
#include "ebeam/field.hpp"
#include "ebeam/metrics.hpp"
#include "ebeam/physical_params.hpp"
#include "ebeam/poisson.hpp"
#include "ebeam/propagator.hpp"
#include "ebeam/radial_solver.hpp"
#include "ebeam/runner.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace ebeam;

namespace
{
struct Outcome
{
    bool pass;
    std::string detail;
    //! failure matches a documented conflict in the criterion itself; reported, not fatal
    std::string known;
};

struct Context
{
    RunProfile profile = RunProfile::fast;
    std::optional<fs::path> out;
    bool verbose = false;
    std::map<std::string, RunResult> runs;

    RunOptions options(std::string const& tag) const
    {
        RunOptions o;
        if (out)
            o.out_dir = *out / tag;
        if (verbose)
            o.log = [](std::string const& m) { std::fprintf(stderr, "  %s\n", m.c_str()); };
        return o;
    }

    RunResult const& run(std::string const& tag, Scenario const& s)
    {
        auto it = runs.find(tag);
        if (it == runs.end())
            it = runs.emplace(tag, run_scenario(s, options(tag))).first;
        return it->second;
    }

    RunResult const& preset_run(std::string const& name)
    {
        return run(name, preset(name, profile));
    }
};

std::string fmt(char const* f, auto... args)
{
    std::string out(static_cast<std::size_t>(std::snprintf(nullptr, 0, f, args...)), '\0');
    std::snprintf(out.data(), out.size() + 1, f, args...);
    return out;
}

double um(double m)
{
    return m * 1e6;
}

double nm(double m)
{
    return m * 1e9;
}

Outcome linear_gaussian(Context& c)
{
    auto s = preset("fig3a", c.profile);
    auto const k = derive_scales(s.physics).wavenumber;
    double const sigma = s.beam.width;
    double const zr = k * sigma * sigma;
    // width doubles at sqrt 3 zr
    s.propagation.z_max = 2 * std::sqrt(3.0) * zr;
    s.propagation.stop_width_factor = 0;
    s.propagation.records = 100;
    auto const& r = c.run("linear_gaussian", s);
    double worst = 0;
    for (std::size_t i = 0; i < r.trace.z.size(); ++i)
    {
        double const w = oracle::gaussian_width(sigma, r.trace.z[i], k);
        worst = std::max(worst, std::abs(r.trace.width[i] / w - 1));
    }
    return {worst < 0.01, fmt("max width error %.2e over %zu records to z = %.1f um (tol 1e-2)", worst,
                              r.trace.z.size(), um(s.propagation.z_max))};
}

double bessel_l2(RadialProfile const& p)
{
    double nref = 0, nphi = 0, cross = 0;
    for (std::size_t i = 1; i < p.rho.size(); ++i)
    {
        double const h = p.rho[i] - p.rho[i - 1];
        for (std::size_t j : {i - 1, i})
        {
            double const b = std::cyl_bessel_j(p.l, p.kT * p.rho[j]);
            double const w = h / 2 * p.rho[j];
            nref += w * b * b;
            nphi += w * p.phi[j] * p.phi[j];
            cross += w * b * p.phi[j];
        }
    }
    double const scale = cross / nref;
    return std::sqrt(std::max(0.0, nphi - 2 * scale * cross + scale * scale * nref) / nphi);
}

Outcome radial_linear(Context&)
{
    double const R = meters_to_bohr(140e-9);
    double worst = 0;
    for (int l : {0, 1, 3, 5})
        worst = std::max(worst, bessel_l2(solve_radial(0.0074, l, 0.0, R)));
    return {worst < 1e-6, fmt("max relative L2 distance to J_l %.2e for l in {0,1,3,5} (tol 1e-6)", worst)};
}

Outcome poisson_oracle(Context&)
{
    GridSpec const g{32, 1.5};
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> rho(g.cells());
    for (auto& v : rho)
        v = u(rng);
    double const gamma = 0.02;
    auto const U = solve_poisson(rho, gamma, g);
    auto const ref = oracle::lattice_green_potential(rho, g.n, g.dx, gamma);
    double ma = 0, mb = 0;
    for (std::size_t k = 0; k < rho.size(); ++k)
        ma += U.values[k], mb += ref[k];
    ma /= rho.size(), mb /= rho.size();
    double err = 0, scale = 0;
    for (std::size_t k = 0; k < rho.size(); ++k)
    {
        err = std::max(err, std::abs((U.values[k] - ma) - (ref[k] - mb)));
        scale = std::max(scale, std::abs(ref[k] - mb));
    }
    return {err < 1e-6 * scale, fmt("relative error vs lattice Green's function %.2e on 32x32 (tol 1e-6)", err / scale)};
}

Outcome unitarity(Context& c)
{
    auto s = preset("fig3e", c.profile);
    if (c.profile == RunProfile::fast)
        s.grid.n = 256;
    auto const L = make_launch(s);
    auto const k = L.scales.wavenumber;
    PropagatorConfig cfg;
    cfg.gamma = L.gamma;
    cfg.k = k;
    cfg.dz = default_step(L.field, L.gamma, k);
    cfg.z_max = cfg.dz;
    cfg.absorber.enabled = false;
    SplitStepPropagator p(L.field.grid, cfg);
    auto f = L.field;
    double const e0 = energy_functional(f, L.gamma);
    double n_prev = f.norm();
    double drift = 0, e_worst = 0;
    int const steps = 10000;
    for (int i = 1; i <= steps; ++i)
    {
        p.step(f);
        double const n = f.norm();
        drift = std::max(drift, std::abs(n - n_prev));
        n_prev = n;
        if (i % 500 == 0)
            e_worst = std::max(e_worst, std::abs(energy_functional(f, L.gamma) / e0 - 1));
    }
    bool const ok = drift < 1e-10 && e_worst < 1e-6;
    return {ok, fmt("%d steps at %dx%d, dz %.3f um: max norm drift/step %.2e (tol 1e-10), energy drift %.2e (tol 1e-6)",
                    steps, s.grid.n, s.grid.n, um(cfg.dz), drift, e_worst)};
}

struct Fig3
{
    double a, b, c, d, e;
};

Fig3 fig3(Context& c)
{
    return {c.preset_run("fig3a").Ld, c.preset_run("fig3b").Ld, c.preset_run("fig3c").Ld,
            c.preset_run("fig3d").Ld, c.preset_run("fig3e").Ld};
}

Outcome fig3_ordering(Context& c)
{
    auto const L = fig3(c);
    bool const finite = std::isfinite(L.a) && std::isfinite(L.b) && std::isfinite(L.c) && std::isfinite(L.d)
                        && std::isfinite(L.e);
    bool const ok = finite && L.c < L.a && L.a < L.d && L.d < L.e && L.e < L.b;
    return {ok, fmt("L_d gauss-multi %.1f < gauss-single %.1f < bessel-multi %.1f < shape-preserving %.1f < "
                    "bessel-single %.1f um",
                    um(L.c), um(L.a), um(L.d), um(L.e), um(L.b))};
}

Outcome fig3_ratio(Context& c)
{
    auto const L = fig3(c);
    double const ratio = L.e / L.d;
    return {std::abs(ratio / 5 - 1) <= 0.4, fmt("L_d(shape-preserving)/L_d(bessel-multi) = %.2f (target 5 +/- 40%%)", ratio)};
}

Outcome noise(Context& c)
{
    double const clean = c.preset_run("fig3e").Ld;
    double worst = 0;
    std::string vals;
    for (std::uint64_t seed : {1, 2, 3})
    {
        auto s = preset("fig3f", c.profile);
        s.beam.seed = seed;
        double const ld = c.run("fig3f_seed" + std::to_string(seed), s).Ld;
        double const change = std::isfinite(ld) ? std::abs(ld / clean - 1) : unbounded;
        worst = std::max(worst, change);
        vals += fmt(" %.1f", um(ld));
    }
    return {worst < 0.1, fmt("noiseless %.1f um, seeds 1-3:%s um; max change %.1f%% (tol 10%%)", um(clean),
                             vals.c_str(), 100 * worst)};
}

Outcome fig4(Context& c)
{
    auto const s = preset("fig4", c.profile);
    auto const r = run_sweep(s, c.options("fig4"));
    bool const merge = r.critical_width.has_value();
    bool const maximal = r.maximal_width > 0 && std::isfinite(r.maximal_width);
    bool current = true;
    int compared = 0;
    for (double w : s.sweep->widths)
    {
        auto const sp = r.find(BeamFamily::shape_preserving, w);
        auto const b = r.find(BeamFamily::bessel, w);
        if (!sp || !b || (r.critical_width && w <= *r.critical_width))
            continue;
        ++compared;
        current = current && sp->lobe_current >= b->lobe_current;
    }
    std::string curve;
    for (auto const& row : r.rows)
        curve += fmt(" %s@%.1f:%.0f", row.family == BeamFamily::bessel ? "B" : "SP", nm(row.width), um(row.Ld));
    bool const ok = merge && maximal && current && compared > 0;
    return {ok, fmt("(a) critical width %s (expected 4.2 nm), (b) maximal width %.2f nm, "
                    "(c) SP lobe current >= Bessel at %d widths above it: %s; L_d [um]:%s",
                    merge ? fmt("%.2f nm", nm(*r.critical_width)).c_str() : "none", nm(r.maximal_width), compared,
                    current ? "yes" : "no", curve.c_str())};
}

Outcome supp3(Context& c)
{
    auto const s140 = preset("supp3-140", c.profile);
    auto const s420 = preset("supp3-420", c.profile);
    auto const r140 = run_sweep(s140, c.options("supp3-140"));
    auto const r420 = run_sweep(s420, c.options("supp3-420"));
    bool ok = true;
    bool others_ok = true;    // Bessel and shape-preserving
    bool gauss_blind = true; // Gaussian identical in both apertures
    std::string detail;
    for (double w : s140.sweep->widths)
        for (auto f : s140.sweep->families)
        {
            auto const a = r140.find(f, w);
            auto const b = r420.find(f, w);
            if (!a || !b)
            {
                ok = others_ok = false;
                detail += fmt(" %s@%.0fnm missing;", to_string(f).c_str(), nm(w));
                continue;
            }
            bool const longer = b->Ld > a->Ld;
            bool const less = b->lobe_current < a->lobe_current;
            ok = ok && longer && less;
            if (f == BeamFamily::gaussian)
                gauss_blind = gauss_blind && std::abs(b->Ld / a->Ld - 1) < 0.01
                              && std::abs(b->lobe_current / a->lobe_current - 1) < 0.01;
            else
                others_ok = others_ok && longer && less;
            detail += fmt(" %s@%.0fnm L_d %.1f->%.1f um%s, I_lobe %.3g->%.3g uA%s;", to_string(f).c_str(), nm(w),
                          um(a->Ld), um(b->Ld), longer ? "" : " (not larger)", a->lobe_current * 1e6,
                          b->lobe_current * 1e6, less ? "" : " (not smaller)");
        }
    Outcome o{ok, "140 nm -> 420 nm:" + detail, ""};
    if (!ok && others_ok && gauss_blind)
        o.known = "the Gaussian launch lies inside both apertures, so its L_d and current cannot depend on the aperture";
    return o;
}

Outcome fig5(Context& c)
{
    auto const& lg = c.preset_run("fig5a");
    auto const& b = c.preset_run("fig5b");
    auto const& sp = c.preset_run("fig5c");
    bool const order = std::isfinite(sp.Ld) && std::isfinite(b.Ld) && std::isfinite(lg.Ld) && sp.Ld > b.Ld
                       && b.Ld > lg.Ld;
    bool winding = true;
    std::string w;
    for (auto const* r : {&lg, &b, &sp})
    {
        int const w0 = r->winding.front();
        int const wh = std::isfinite(r->Ld) ? r->winding_at(r->Ld / 2) : 0;
        winding = winding && w0 == 1 && wh == 1;
        w += fmt(" %d/%d", w0, wh);
    }
    return {order && winding, fmt("L_d shape-preserving %.1f > bessel %.1f > laguerre-gauss %.1f um; "
                                  "winding launch/half-L_d (LG, B, SP):%s",
                                  um(sp.Ld), um(b.Ld), um(lg.Ld), w.c_str())};
}

Outcome mask(Context& c)
{
    auto s = preset("fig2", c.profile);
    auto const r0 = run_mask_pipeline(s, c.options("fig2_l0"));
    bool ok = r0.fidelity >= 0.95 && r0.mirror_error < 1e-9 && r0.fork_charge == 0;
    std::string forks = fmt(" 0->%d (rows %d)", r0.fork_charge, r0.fringe_difference);
    for (int l : {1, 3})
    {
        auto sl = s;
        sl.beam.l = l;
        sl.physics.oam_l = l;
        auto const r = run_mask_pipeline(sl, c.options("fig2_l" + std::to_string(l)));
        ok = ok && r.fork_charge == l && r.mirror_error < 1e-9;
        forks += fmt(" %d->%d (rows %d)", l, r.fork_charge, r.fringe_difference);
    }
    return {ok, fmt("+1 order radial fidelity %.4f (tol 0.95), 2D magnitude correlation %.4f, "
                    "mirror-conjugate error %.1e, fork charge l->count:%s",
                    r0.fidelity, r0.correlation_2d, r0.mirror_error, forks.c_str())};
}

Outcome convergence(Context& c)
{
    double const base = c.preset_run("fig3e").Ld;
    auto half_dz = preset("fig3e", c.profile);
    half_dz.propagation.dz_scale = 0.5;
    auto fine = preset("fig3e", c.profile);
    fine.grid.n *= 2;
    double const a = c.run("fig3e_half_dz", half_dz).Ld;
    double const b = c.run("fig3e_half_dx", fine).Ld;
    double const da = std::abs(a / base - 1), db = std::abs(b / base - 1);
    return {da < 0.02 && db < 0.02, fmt("fig3e L_d %.2f um; dz/2 %.2f um (%.2f%%), dx/2 %.2f um (%.2f%%) (tol 2%%)",
                                        um(base), um(a), 100 * da, um(b), 100 * db)};
}
} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance criteria"};
    std::string profile = "fast";
    std::string out;
    std::vector<std::string> only;
    std::string report;
    bool verbose = false;
    app.add_option("--profile", profile, "fast (CI) or full")->check(CLI::IsMember({"fast", "full"}));
    app.add_option("--out", out, "write run bundles here");
    app.add_option("--only", only, "criteria to run");
    app.add_option("--report", report, "also write the report lines to this file");
    app.add_flag("-v,--verbose", verbose, "progress on stderr");
    CLI11_PARSE(app, argc, argv);

    Context ctx;
    ctx.profile = profile == "full" ? RunProfile::full : RunProfile::fast;
    ctx.verbose = verbose;
    if (!out.empty())
        ctx.out = fs::path(out);

    std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> const criteria{
        {"linear-limit-gaussian", linear_gaussian},
        {"radial-linear-limit", radial_linear},
        {"poisson-oracle", poisson_oracle},
        {"unitarity", unitarity},
        {"fig3-ordering", fig3_ordering},
        {"fig3-ratio", fig3_ratio},
        {"noise-robustness", noise},
        {"fig4-topology", fig4},
        {"supp3-aperture-trend", supp3},
        {"fig5-oam", fig5},
        {"mask-fidelity", mask},
        {"convergence", convergence},
    };

    std::FILE* rep = report.empty() ? nullptr : std::fopen(report.c_str(), "w");
    auto emit = [&](std::string const& line) {
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
        if (rep)
        {
            std::fprintf(rep, "%s\n", line.c_str());
            std::fflush(rep);
        }
    };
    emit("acceptance profile: " + profile);
    int failures = 0, known = 0;
    for (auto const& [name, fn] : criteria)
    {
        if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end())
            continue;
        auto const t0 = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = fn(ctx);
        }
        catch (std::exception const& e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        double const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool const tolerated = !o.pass && !o.known.empty();
        failures += !o.pass && !tolerated;
        known += tolerated;
        emit(fmt("%s  %-22s ", o.pass ? "PASS" : "FAIL", name.c_str()) + o.detail + fmt(" [%.0f s]", secs)
             + (tolerated ? " [documented conflict: " + o.known + "]" : ""));
    }
    emit(fmt("%d criteria failed, %d failed with a documented conflict", failures, known));
    if (rep)
        std::fclose(rep);
    return failures ? 1 : 0;
}
