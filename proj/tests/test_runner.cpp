#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ebeam/physical_params.hpp"
#include "ebeam/runner.hpp"
#include "oracles.hpp"

using namespace ebeam;
namespace fs = std::filesystem;

namespace
{
std::string slurp(fs::path const& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(std::string const& tag)
{
    auto const d = fs::temp_directory_path() / ("ebeam_test_runner_" + tag);
    fs::remove_all(d);
    return d;
}

Scenario small(std::string const& name)
{
    auto s = preset(name, RunProfile::fast);
    s.grid.n = 128;
    s.propagation.z_max = 20e-6;
    s.propagation.records = 10;
    return s;
}

SweepRow row(BeamFamily f, double w, double ld)
{
    SweepRow r;
    r.family = f;
    r.width = w;
    r.Ld = ld;
    return r;
}
} // namespace

TEST_CASE("every preset validates and survives a JSON round trip")
{
    for (auto const profile : {RunProfile::fast, RunProfile::full})
        for (auto const& name : preset_names())
        {
            CAPTURE(name);
            auto const s = preset(name, profile);
            CHECK_NOTHROW(s.validate());
            auto const j = to_json(s);
            CHECK(to_json(scenario_from_json(j)) == j);
        }
    CHECK_THROWS_AS(preset("fig9"), ConfigurationError);
}

TEST_CASE("scenario parsing rejects unknown keys and bad values")
{
    auto const good = to_json(preset("fig3e"));
    auto j = good;
    j["beam"]["widht_m"] = 8e-9;
    CHECK_THROWS_AS(scenario_from_json(j), ConfigurationError);
    j = good;
    j["extra"] = 1;
    CHECK_THROWS_AS(scenario_from_json(j), ConfigurationError);
    j = good;
    j["schema"] = "ebeam-scenario/99";
    CHECK_THROWS_AS(scenario_from_json(j), ConfigurationError);
    j = good;
    j["grid"]["n"] = "large";
    CHECK_THROWS_AS(scenario_from_json(j), ConfigurationError);
    j = good;
    j["grid"]["n"] = 500;
    CHECK_THROWS_AS(scenario_from_json(j), ConfigurationError);
    j = good;
    j["beam"]["family"] = "airy";
    CHECK_THROWS_AS(scenario_from_json(j), ConfigurationError);
    j = good;
    j["physics"]["current_A"] = -1;
    CHECK_THROWS_AS(scenario_from_json(j), ConfigurationError);

    nlohmann::json partial = {{"schema", scenario_schema}, {"name", "p"}, {"beam", {{"l", 2}}}};
    auto const s = scenario_from_json(partial);
    CHECK(s.beam.l == 2);
    CHECK(s.grid.n == GridSettings{}.n);
}

TEST_CASE("Bessel width product matches quadrature of the main lobe")
{
    for (int l : {0, 1, 3})
    {
        double const j = oracle::bessel_zero(l, 1);
        auto f = [&](double x, int p) {
            double const b = oracle::bessel_j(l, x);
            return b * b * std::pow(x, p);
        };
        double const num = oracle::trapezoid([&](double x) { return f(x, 3); }, 0, j, 4000);
        double const den = oracle::trapezoid([&](double x) { return f(x, 1); }, 0, j, 4000);
        CHECK(bessel_width_product(l) == doctest::Approx(std::sqrt(num / den)).epsilon(1e-6));
    }
    CHECK(bessel_width_product(0) == doctest::Approx(1.1230).epsilon(1e-3));
}

TEST_CASE("matched kT reproduces the requested width")
{
    PhysParams p;
    auto const sc = derive_scales(p);
    double const R = meters_to_bohr(p.aperture_radius);
    double const w = meters_to_bohr(8e-9);

    CHECK(matched_kT(BeamFamily::bessel, 0, w, sc.gamma, R) * w == doctest::Approx(bessel_width_product(0)));
    CHECK(matched_kT(BeamFamily::gaussian, 0, w, sc.gamma, R) == 0);
    for (int l : {0, 1})
    {
        double const kT = matched_kT(BeamFamily::shape_preserving, l, w, sc.gamma, R);
        CHECK(radial_main_lobe_width(solve_radial(kT, l, sc.gamma, R)) == doctest::Approx(w).epsilon(1e-6));
    }
    double const wmax = maximal_width(sc.gamma, R);
    CHECK(wmax > w);
    CHECK_THROWS_AS(matched_kT(BeamFamily::shape_preserving, 0, 1.01 * wmax, sc.gamma, R), ConfigurationError);
}

TEST_CASE("noise adds current to the propagation coupling")
{
    auto s = small("fig3f");
    auto const L = make_launch(s);
    CHECK(L.gamma == doctest::Approx(L.scales.gamma * (1 + s.beam.noise_ratio)));
    CHECK(L.field.norm() == doctest::Approx(1.0).epsilon(1e-12));
    s.beam.multi_electron = false;
    CHECK(make_launch(s).gamma == 0);
}

TEST_CASE("critical width interpolates the merge point")
{
    using F = BeamFamily;
    std::vector<SweepRow> rows;
    double const sp[] = {100, 104, 150, 300};
    for (int i = 0; i < 4; ++i)
    {
        rows.push_back(row(F::shape_preserving, i + 1, sp[i]));
        rows.push_back(row(F::bessel, i + 1, 100));
    }
    auto const c = critical_width(rows, 0.1);
    REQUIRE(c);
    // gap 0.04 at 2, 0.5 at 3
    CHECK(*c == doctest::Approx(2 + 0.06 / 0.46));

    for (auto& r : rows)
        if (r.family == F::shape_preserving)
            r.Ld = 100;
    CHECK_FALSE(critical_width(rows, 0.1));

    for (auto& r : rows)
        if (r.family == F::shape_preserving)
            r.Ld = 500;
    CHECK_FALSE(critical_width(rows, 0.1));

    rows = {row(F::shape_preserving, 1, unbounded), row(F::bessel, 1, unbounded),
            row(F::shape_preserving, 2, unbounded), row(F::bessel, 2, 50)};
    REQUIRE(critical_width(rows, 0.1));
    CHECK(*critical_width(rows, 0.1) == 1);
}

TEST_CASE("run bundle is complete and deterministic")
{
    auto const s = small("fig3e");
    auto const d1 = scratch_dir("a");
    auto const d2 = scratch_dir("b");
    auto const r1 = run_scenario(s, {.out_dir = d1});
    auto const r2 = run_scenario(s, {.out_dir = d2});

    for (char const* f : {"summary.json", "scenario.json", "trace.csv", "radial_density.csv", "density_z0.pgm",
                          "density_final.pgm", "profile.txt"})
    {
        CAPTURE(f);
        CHECK(fs::exists(d1 / f));
        CHECK(slurp(d1 / f) == slurp(d2 / f));
    }
    auto const j = nlohmann::json::parse(slurp(d1 / "summary.json"));
    CHECK(j.at("schema") == "ebeam-run-summary/1");
    CHECK(j.at("provenance").at("grid").at("n") == 128);
    CHECK(j.at("provenance").at("seed") == s.beam.seed);
    CHECK(scenario_from_json(nlohmann::json::parse(slurp(d1 / "scenario.json"))).name == s.name);
    CHECK(r1.trace.z.size() == r2.trace.z.size());
    CHECK(r1.initial_width == doctest::Approx(8e-9).epsilon(0.02));
    CHECK(r1.lobe_fraction > 0);
    CHECK(r1.lobe_fraction < 1);
    CHECK(slurp(d1 / "trace.csv").starts_with("z[m]"));

    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("vortex runs record the launch winding number")
{
    auto s = small("fig5a");
    auto const r = run_scenario(s);
    REQUIRE(r.winding.size() == r.trace.z.size());
    CHECK(r.winding.front() == 1);
    CHECK(r.winding_at(0) == 1);
    CHECK(r.summary.at("results").at("winding_launch") == 1);
}

TEST_CASE("sweep writes one row per family and width")
{
    auto s = small("fig4");
    s.sweep->widths = {6e-9, 8e-9};
    s.propagation.z_max = 5e-6;
    auto const d = scratch_dir("sweep");
    auto const r = run_sweep(s, {.out_dir = d}, 2);
    CHECK(r.rows.size() == 4);
    CHECK(r.find(BeamFamily::bessel, 6e-9));
    CHECK(r.find(BeamFamily::shape_preserving, 8e-9));
    CHECK(r.maximal_width > 8e-9);
    CHECK(fs::exists(d / "sweep.json"));
    CHECK(fs::exists(d / "sweep.csv"));
    fs::remove_all(d);
}

TEST_CASE("sweep grids are refined for narrow widths")
{
    auto s = preset("fig4", RunProfile::fast);
    double const dx = 4 * 140e-9 / 512; // extent 4 R on 512 cells
    CHECK(s.grid.n == 512);
    CHECK(sweep_grid_n(s, 1.25 * dx * 1.01) == 512);
    CHECK(sweep_grid_n(s, 1.25 * dx * 0.99) == 1024);
    CHECK(sweep_grid_n(s, 1.25 * dx * 0.49) == 2048);
    CHECK(sweep_grid_n(s, 1e-13) == max_sweep_grid);
    s.sweep->min_cells_per_width = 0;
    CHECK(sweep_grid_n(s, 1e-13) == 512);
}
