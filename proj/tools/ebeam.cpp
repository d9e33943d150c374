#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ebeam/fft.hpp"
#include "ebeam/physical_params.hpp"
#include "ebeam/radial_solver.hpp"
#include "ebeam/runner.hpp"

namespace fs = std::filesystem;
using namespace ebeam;

namespace
{
struct Common
{
    std::string preset;
    std::string scenario;
    std::string out;
    std::string profile = "full";
    std::optional<std::uint64_t> seed;
    int threads = 1;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_threads)
{
    auto* p = cmd->add_option("--preset", c.preset, "named preset (see `ebeam presets`)");
    auto* s = cmd->add_option("--scenario", c.scenario, "scenario JSON file")->check(CLI::ExistingFile);
    p->excludes(s);
    cmd->add_option("--out", c.out, "output directory for the bundle");
    cmd->add_option("--profile", c.profile, "preset profile")
        ->check(CLI::IsMember({"fast", "full"}));
    cmd->add_option("--seed", c.seed, "noise seed override");
    if (with_threads)
        cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("-q,--quiet", c.quiet, "suppress progress lines");
}

Scenario resolve(Common const& c)
{
    if (c.preset.empty() == c.scenario.empty())
        throw ConfigurationError("give exactly one of --preset or --scenario");
    Scenario s = c.scenario.empty()
                     ? preset(c.preset, c.profile == "fast" ? RunProfile::fast : RunProfile::full)
                     : load_scenario(c.scenario);
    if (c.seed)
        s.beam.seed = *c.seed;
    return s;
}

RunOptions run_options(Common const& c)
{
    RunOptions o;
    if (!c.out.empty())
        o.out_dir = fs::path(c.out);
    if (!c.quiet)
        o.log = [](std::string const& m) { std::cerr << m << '\n'; };
    return o;
}

std::string metres(double v, double scale, char const* unit)
{
    if (!std::isfinite(v))
        return "inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f %s", v * scale, unit);
    return buf;
}

void report_dir(fs::path const& dir)
{
    std::vector<fs::path> files;
    for (auto const& e : fs::recursive_directory_iterator(dir))
    {
        auto const name = e.path().filename().string();
        if (name == "summary.json" || name == "sweep.json" || name == "mask_report.json")
            files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw ConfigurationError("no bundles under " + dir.string());
    for (auto const& f : files)
    {
        std::ifstream is(f);
        auto const j = nlohmann::json::parse(is);
        auto const& sc = j.at("scenario");
        auto ld = [](nlohmann::json const& v) { return v.is_null() ? std::string("inf") : metres(v.get<double>(), 1e6, "um"); };
        if (f.filename() == "summary.json")
        {
            auto const& r = j.at("results");
            std::printf("%-28s %-17s L_d %-12s w0 %-10s I_lobe %.3g A  lobes %d\n",
                        sc.at("name").get<std::string>().c_str(),
                        sc.at("beam").at("family").get<std::string>().c_str(), ld(r.at("L_d_m")).c_str(),
                        metres(r.at("initial_width_m").get<double>(), 1e9, "nm").c_str(),
                        r.at("main_lobe_current_A").get<double>(), r.at("lobe_count").get<int>());
        }
        else if (f.filename() == "sweep.json")
        {
            std::printf("%s: critical width %s, maximal width %s\n", sc.at("name").get<std::string>().c_str(),
                        j.at("critical_width_m").is_null()
                            ? "none"
                            : metres(j.at("critical_width_m").get<double>(), 1e9, "nm").c_str(),
                        metres(j.at("maximal_width_m").get<double>(), 1e9, "nm").c_str());
            for (auto const& r : j.at("rows"))
                std::printf("  %-17s w %-10s L_d %-12s I_lobe %.3g A\n",
                            r.at("family").get<std::string>().c_str(),
                            metres(r.at("width_m").get<double>(), 1e9, "nm").c_str(), ld(r.at("L_d_m")).c_str(),
                            r.at("main_lobe_current_A").get<double>());
        }
        else
            std::printf("%s: mask fidelity %.4f, 2D correlation %.4f, fork charge %d\n",
                        sc.at("name").get<std::string>().c_str(), j.at("fidelity_radial").get<double>(),
                        j.at("correlation_2d").get<double>(), j.at("fork_charge").get<int>());
    }
}
} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Shape-preserving multi-electron beams: radial solver, propagation, masks"};
    app.require_subcommand(1);
    std::string planning = "measure";
    std::string wisdom;
    app.add_option("--fft-planning", planning, "FFTW planner effort")
        ->check(CLI::IsMember({"estimate", "measure"}));
    app.add_option("--wisdom", wisdom, "FFTW wisdom file, read if present and updated on exit");

    // solve
    auto* solve = app.add_subcommand("solve", "solve the radial shape-preserving profile");
    double kT = 0, width_nm = 0, voltage = 20e3, current = 50e-6, aperture_nm = 140;
    int l = 0;
    std::string profile_out;
    bool flat = false;
    auto* kt_opt = solve->add_option("--kT", kT, "transverse wavenumber [1/a0]");
    solve->add_option("--width-nm", width_nm, "match the main-lobe width instead")->excludes(kt_opt);
    solve->add_flag("--flat", flat, "the kT = 0 solution (l = 0)");
    solve->add_option("--l", l, "OAM charge");
    solve->add_option("--voltage", voltage, "acceleration voltage [V]");
    solve->add_option("--current", current, "beam current [A]");
    solve->add_option("--aperture-nm", aperture_nm, "aperture radius [nm]");
    solve->add_option("--out", profile_out, "profile file (columns rho phi U dphi)");

    Common prop_c, sweep_c, mask_c;
    auto* propagate = app.add_subcommand("propagate", "propagate one scenario and write its bundle");
    add_common(propagate, prop_c, false);
    auto* sweep = app.add_subcommand("sweep", "L_d and main-lobe current versus width");
    add_common(sweep, sweep_c, true);
    auto* mask = app.add_subcommand("mask", "synthesize and verify the binary hologram");
    add_common(mask, mask_c, false);
    std::optional<int> mask_l;
    mask->add_option("--l", mask_l, "OAM charge override");

    auto* report = app.add_subcommand("report", "summarize bundles under a directory");
    std::string report_in;
    report->add_option("dir", report_in, "bundle directory")->required()->check(CLI::ExistingDirectory);

    auto* presets = app.add_subcommand("presets", "list presets or print one as JSON");
    std::string dump;
    std::string dump_profile = "full";
    presets->add_option("name", dump, "preset to print");
    presets->add_option("--profile", dump_profile)->check(CLI::IsMember({"fast", "full"}));

    CLI11_PARSE(app, argc, argv);

    try
    {
        set_fft_planning(planning == "measure" ? FftPlanning::measure : FftPlanning::estimate);
        if (!wisdom.empty() && fs::exists(wisdom) && !import_fft_wisdom(wisdom))
            std::cerr << "warning: could not read wisdom from " << wisdom << '\n';

        if (*solve)
        {
            PhysParams p;
            p.voltage = voltage;
            p.current = current;
            p.oam_l = l;
            p.aperture_radius = aperture_nm * 1e-9;
            p.validate();
            double const gamma = derive_scales(p).gamma;
            double const R = meters_to_bohr(p.aperture_radius);
            RadialProfile prof;
            if (flat)
                prof = solve_radial_flat(gamma, R);
            else
            {
                if (width_nm > 0)
                    kT = matched_kT(BeamFamily::shape_preserving, l, meters_to_bohr(width_nm * 1e-9), gamma, R);
                if (!(kT > 0))
                    throw ConfigurationError("give --kT, --width-nm or --flat");
                prof = solve_radial(kT, l, gamma, R);
            }
            auto h = profile_header(prof);
            h["main_lobe_width_m"] = bohr_to_meters(radial_main_lobe_width(prof));
            std::cout << h.dump(2) << '\n';
            if (!profile_out.empty())
            {
                std::ofstream os(profile_out);
                write_profile(os, prof);
            }
        }
        else if (*propagate)
        {
            auto const s = resolve(prop_c);
            auto const r = run_scenario(s, run_options(prop_c));
            std::cout << r.summary.at("results").dump(2) << '\n';
        }
        else if (*sweep)
        {
            auto const s = resolve(sweep_c);
            auto const r = run_sweep(s, run_options(sweep_c), sweep_c.threads);
            std::cout << nlohmann::json{{"critical_width_m", r.summary.at("critical_width_m")},
                                        {"maximal_width_m", r.summary.at("maximal_width_m")},
                                        {"rows", r.summary.at("rows")}}
                             .dump(2)
                      << '\n';
        }
        else if (*mask)
        {
            auto s = resolve(mask_c);
            if (mask_l)
            {
                s.beam.l = *mask_l;
                s.physics.oam_l = *mask_l;
            }
            auto const r = run_mask_pipeline(s, run_options(mask_c));
            auto j = r.report;
            j.erase("scenario");
            std::cout << j.dump(2) << '\n';
        }
        else if (*report)
            report_dir(report_in);
        else if (*presets)
        {
            if (dump.empty())
                for (auto const& n : preset_names())
                    std::cout << n << "  " << preset(n).description << '\n';
            else
                std::cout << to_json(preset(dump, dump_profile == "fast" ? RunProfile::fast : RunProfile::full)).dump(2)
                          << '\n';
        }
        if (!wisdom.empty())
            export_fft_wisdom(wisdom);
    }
    catch (ConfigurationError const& e)
    {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    }
    catch (std::exception const& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
