#include "ebeam/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "ebeam/constants.hpp"
#include "ebeam/fft.hpp"

namespace ebeam
{
using nlohmann::json;

std::string to_string(BeamFamily f)
{
    switch (f)
    {
    case BeamFamily::gaussian:
        return "gaussian";
    case BeamFamily::bessel:
        return "bessel";
    case BeamFamily::shape_preserving:
        return "shape_preserving";
    }
    return "unknown";
}

BeamFamily family_from_string(std::string const& s)
{
    if (s == "gaussian")
        return BeamFamily::gaussian;
    if (s == "bessel")
        return BeamFamily::bessel;
    if (s == "shape_preserving")
        return BeamFamily::shape_preserving;
    throw ConfigurationError("unknown beam family '" + s + "'");
}

namespace
{
std::string rule_name(ThresholdRule r)
{
    switch (r)
    {
    case ThresholdRule::best_fidelity:
        return "best_fidelity";
    case ThresholdRule::median:
        return "median";
    case ThresholdRule::fixed:
        return "fixed";
    }
    return "unknown";
}

ThresholdRule rule_from_string(std::string const& s)
{
    if (s == "best_fidelity")
        return ThresholdRule::best_fidelity;
    if (s == "median")
        return ThresholdRule::median;
    if (s == "fixed")
        return ThresholdRule::fixed;
    throw ConfigurationError("unknown threshold rule '" + s + "'");
}

bool power_of_two(int n)
{
    return n >= 4 && (n & (n - 1)) == 0;
}

void require(bool ok, std::string const& what)
{
    if (!ok)
        throw ConfigurationError(what);
}

// output values are rounded so that FFT plan choice does not leak into the bundle
double sig(double v)
{
    if (!std::isfinite(v))
        return v;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::strtod(buf, nullptr);
}

json num(double v)
{
    return std::isfinite(v) ? json(sig(v)) : json(nullptr);
}

// object reader that rejects unknown keys
class Reader
{
  public:
    Reader(json const& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j_.is_object())
            throw ConfigurationError(where_ + " must be an object");
    }
    ~Reader() noexcept(false)
    {
        if (std::uncaught_exceptions())
            return;
        for (auto const& [k, v] : j_.items())
            if (!seen_.count(k))
                throw ConfigurationError("unknown key '" + k + "' in " + where_);
    }
    template<class T>
    void get(char const* key, T& out)
    {
        seen_.insert(key);
        if (!j_.contains(key))
            return;
        try
        {
            out = j_.at(key).get<T>();
        }
        catch (json::exception const& e)
        {
            throw ConfigurationError(where_ + "." + key + ": " + e.what());
        }
    }
    bool has(char const* key)
    {
        seen_.insert(key);
        return j_.contains(key);
    }
    json const& at(char const* key) const { return j_.at(key); }

  private:
    json const& j_;
    std::string where_;
    std::set<std::string> seen_;
};

double aperture_a0(Scenario const& s)
{
    return meters_to_bohr(s.physics.aperture_radius);
}

GridSpec grid_of(Scenario const& s)
{
    return {s.grid.n, s.grid.extent_apertures * aperture_a0(s) / s.grid.n};
}

double first_zero(int l)
{
    // first positive zero of J_l by scan and bisection
    double a = std::max(0.5, static_cast<double>(l));
    double fa = std::cyl_bessel_j(l, a);
    double b = a;
    for (;;)
    {
        b = a + 0.05;
        double const fb = std::cyl_bessel_j(l, b);
        if ((fa < 0) != (fb < 0))
            break;
        a = b;
        fa = fb;
    }
    for (int it = 0; it < 100; ++it)
    {
        double const m = (a + b) / 2;
        double const fm = std::cyl_bessel_j(l, m);
        if ((fa < 0) == (fm < 0))
        {
            a = m;
            fa = fm;
        }
        else
            b = m;
    }
    return (a + b) / 2;
}

int bessel_lobes(int l, double kT, double R)
{
    int zeros = 0;
    double const x = kT * R;
    // count sign changes of J_l on (0, x]
    int const samples = std::max(1000, static_cast<int>(x * 50));
    double prev = std::cyl_bessel_j(l, x / samples);
    for (int i = 2; i <= samples; ++i)
    {
        double const cur = std::cyl_bessel_j(l, x * i / samples);
        if ((prev < 0) != (cur < 0))
            ++zeros;
        if (cur != 0)
            prev = cur;
    }
    return zeros + 1;
}
} // namespace

void Scenario::validate() const
{
    require(!name.empty(), "scenario needs a name");
    try
    {
        physics.validate();
    }
    catch (std::domain_error const& e)
    {
        throw ConfigurationError(std::string("physics: ") + e.what());
    }
    require(beam.l >= 0 && beam.l <= 20, "beam.l must lie in [0, 20]");
    require(beam.kT > 0 || beam.width > 0, "beam needs a positive width or kT");
    require(beam.kT >= 0 && std::isfinite(beam.kT), "beam.kT must be non-negative");
    require(beam.noise_ratio >= 0 && std::isfinite(beam.noise_ratio),
            "beam.noise_ratio must be non-negative");
    require(power_of_two(grid.n) && grid.n >= 32, "grid.n must be a power of two >= 32");
    require(grid.extent_apertures >= 2, "grid.extent_apertures must be at least 2");
    auto const& p = propagation;
    require(p.z_max >= 0 && std::isfinite(p.z_max), "propagation.z_max_m must be >= 0 (0: automatic)");
    require(p.dz >= 0 && std::isfinite(p.dz), "propagation.dz_m must be >= 0 (0: step rule)");
    require(p.dz_scale > 0, "propagation.dz_scale must be positive");
    require(p.records >= 2, "propagation.records must be at least 2");
    require(p.max_phase > 0, "propagation.max_phase must be positive");
    require(p.spectral_fraction > 0 && p.spectral_fraction <= 1,
            "propagation.spectral_fraction must lie in (0, 1]");
    require(p.stop_width_factor == 0 || p.stop_width_factor > std::sqrt(2.0),
            "propagation.stop_width_factor must be 0 or exceed sqrt 2");
    if (p.absorber.enabled)
        require(p.absorber.strength >= 0 && p.absorber.strength < 1 && p.absorber.width_fraction > 0
                    && p.absorber.width_fraction < 0.5,
                "absorber strength must lie in [0, 1) and width_fraction in (0, 0.5)");
    if (sweep)
    {
        require(!sweep->families.empty(), "sweep.families must not be empty");
        require(!sweep->widths.empty(), "sweep.widths_m must not be empty");
        for (double w : sweep->widths)
            require(w > 0 && std::isfinite(w), "sweep widths must be positive");
        require(sweep->merge_tolerance > 0, "sweep.merge_tolerance must be positive");
        require(sweep->min_cells_per_width >= 0, "sweep.min_cells_per_width must be >= 0");
    }
    require(power_of_two(mask.n) && mask.n >= 64, "mask.n must be a power of two >= 64");
    require(mask.extent_apertures >= 10, "mask.extent_apertures must be at least 10");
    require(mask.options.kh >= 0 && mask.options.amplitude > 0, "mask kh and amplitude must be valid");
}

json to_json(Scenario const& s)
{
    json j;
    j["schema"] = scenario_schema;
    j["name"] = s.name;
    j["version"] = s.version;
    j["description"] = s.description;
    j["physics"] = {{"voltage_V", s.physics.voltage},
                    {"current_A", s.physics.current},
                    {"aperture_radius_m", s.physics.aperture_radius}};
    j["beam"] = {{"family", to_string(s.beam.family)},
                 {"l", s.beam.l},
                 {"width_m", s.beam.width},
                 {"kT_per_a0", s.beam.kT},
                 {"multi_electron", s.beam.multi_electron},
                 {"noise_ratio", s.beam.noise_ratio},
                 {"seed", s.beam.seed}};
    j["grid"] = {{"n", s.grid.n}, {"extent_apertures", s.grid.extent_apertures}};
    auto const& p = s.propagation;
    j["propagation"] = {{"z_max_m", p.z_max},
                        {"dz_m", p.dz},
                        {"dz_scale", p.dz_scale},
                        {"records", p.records},
                        {"max_phase", p.max_phase},
                        {"spectral_fraction", p.spectral_fraction},
                        {"stop_width_factor", p.stop_width_factor},
                        {"absorber",
                         {{"enabled", p.absorber.enabled},
                          {"strength", p.absorber.strength},
                          {"width_fraction", p.absorber.width_fraction}}}};
    if (s.sweep)
    {
        json fam = json::array();
        for (auto f : s.sweep->families)
            fam.push_back(to_string(f));
        j["sweep"] = {{"families", fam},
                      {"widths_m", s.sweep->widths},
                      {"merge_tolerance", s.sweep->merge_tolerance},
                      {"min_cells_per_width", s.sweep->min_cells_per_width}};
    }
    j["mask"] = {{"n", s.mask.n},
                 {"extent_apertures", s.mask.extent_apertures},
                 {"kh_a0", s.mask.options.kh},
                 {"rule", rule_name(s.mask.options.rule)},
                 {"threshold", s.mask.options.threshold},
                 {"amplitude", s.mask.options.amplitude}};
    return j;
}

Scenario scenario_from_json(json const& j)
{
    Scenario s;
    {
        Reader r(j, "scenario");
        std::string schema = scenario_schema;
        r.get("schema", schema);
        if (schema != scenario_schema)
            throw ConfigurationError("unsupported scenario schema '" + schema + "'");
        r.get("name", s.name);
        r.get("version", s.version);
        r.get("description", s.description);
        if (r.has("physics"))
        {
            Reader p(r.at("physics"), "physics");
            p.get("voltage_V", s.physics.voltage);
            p.get("current_A", s.physics.current);
            p.get("aperture_radius_m", s.physics.aperture_radius);
        }
        if (r.has("beam"))
        {
            Reader b(r.at("beam"), "beam");
            std::string fam = to_string(s.beam.family);
            b.get("family", fam);
            s.beam.family = family_from_string(fam);
            b.get("l", s.beam.l);
            b.get("width_m", s.beam.width);
            b.get("kT_per_a0", s.beam.kT);
            b.get("multi_electron", s.beam.multi_electron);
            b.get("noise_ratio", s.beam.noise_ratio);
            b.get("seed", s.beam.seed);
        }
        if (r.has("grid"))
        {
            Reader g(r.at("grid"), "grid");
            g.get("n", s.grid.n);
            g.get("extent_apertures", s.grid.extent_apertures);
        }
        if (r.has("propagation"))
        {
            Reader p(r.at("propagation"), "propagation");
            auto& q = s.propagation;
            p.get("z_max_m", q.z_max);
            p.get("dz_m", q.dz);
            p.get("dz_scale", q.dz_scale);
            p.get("records", q.records);
            p.get("max_phase", q.max_phase);
            p.get("spectral_fraction", q.spectral_fraction);
            p.get("stop_width_factor", q.stop_width_factor);
            if (p.has("absorber"))
            {
                Reader a(p.at("absorber"), "propagation.absorber");
                a.get("enabled", q.absorber.enabled);
                a.get("strength", q.absorber.strength);
                a.get("width_fraction", q.absorber.width_fraction);
            }
        }
        if (r.has("sweep"))
        {
            Reader w(r.at("sweep"), "sweep");
            SweepSettings sw;
            std::vector<std::string> fam;
            w.get("families", fam);
            for (auto const& f : fam)
                sw.families.push_back(family_from_string(f));
            w.get("widths_m", sw.widths);
            w.get("merge_tolerance", sw.merge_tolerance);
            w.get("min_cells_per_width", sw.min_cells_per_width);
            s.sweep = sw;
        }
        if (r.has("mask"))
        {
            Reader m(r.at("mask"), "mask");
            m.get("n", s.mask.n);
            m.get("extent_apertures", s.mask.extent_apertures);
            m.get("kh_a0", s.mask.options.kh);
            std::string rule = rule_name(s.mask.options.rule);
            m.get("rule", rule);
            s.mask.options.rule = rule_from_string(rule);
            m.get("threshold", s.mask.options.threshold);
            m.get("amplitude", s.mask.options.amplitude);
        }
    }
    s.physics.oam_l = s.beam.l;
    s.validate();
    return s;
}

Scenario load_scenario(std::filesystem::path const& path)
{
    std::ifstream is(path);
    if (!is)
        throw ConfigurationError("cannot open scenario file " + path.string());
    json j;
    try
    {
        j = json::parse(is);
    }
    catch (json::parse_error const& e)
    {
        throw ConfigurationError(path.string() + ": " + e.what());
    }
    return scenario_from_json(j);
}

namespace
{
Scenario base(std::string name, std::string description)
{
    Scenario s;
    s.name = std::move(name);
    s.description = std::move(description);
    return s;
}

Scenario fig3(char panel)
{
    Scenario s = base(std::string("fig3") + panel, "");
    switch (panel)
    {
    case 'a':
        s.description = "single-electron Gaussian";
        s.beam.family = BeamFamily::gaussian;
        s.beam.multi_electron = false;
        s.propagation.z_max = 200e-6;
        break;
    case 'b':
        s.description = "single-electron Bessel";
        s.beam.family = BeamFamily::bessel;
        s.beam.multi_electron = false;
        s.propagation.z_max = 1.5e-3;
        break;
    case 'c':
        s.description = "multi-electron Gaussian";
        s.beam.family = BeamFamily::gaussian;
        s.propagation.z_max = 100e-6;
        break;
    case 'd':
        s.description = "multi-electron Bessel";
        s.beam.family = BeamFamily::bessel;
        s.propagation.z_max = 400e-6;
        break;
    case 'e':
        s.description = "multi-electron shape-preserving";
        s.beam.family = BeamFamily::shape_preserving;
        s.propagation.z_max = 800e-6;
        break;
    default:
        s.description = "multi-electron shape-preserving with noise of equal power";
        s.beam.family = BeamFamily::shape_preserving;
        s.beam.noise_ratio = 1;
        s.propagation.z_max = 800e-6;
        break;
    }
    return s;
}

Scenario fig5(char panel)
{
    Scenario s = base(std::string("fig5") + panel, "");
    s.beam.l = 1;
    s.physics.oam_l = 1;
    switch (panel)
    {
    case 'a':
        s.description = "multi-electron Laguerre-Gauss, l = 1";
        s.beam.family = BeamFamily::gaussian;
        s.propagation.z_max = 150e-6;
        break;
    case 'b':
        s.description = "multi-electron Bessel, l = 1";
        s.beam.family = BeamFamily::bessel;
        s.propagation.z_max = 800e-6;
        break;
    default:
        s.description = "multi-electron shape-preserving, l = 1";
        s.beam.family = BeamFamily::shape_preserving;
        s.propagation.z_max = 1.2e-3;
        break;
    }
    return s;
}

std::vector<double> nm(std::initializer_list<double> v)
{
    std::vector<double> out;
    for (double x : v)
        out.push_back(x * 1e-9);
    return out;
}
} // namespace

std::vector<std::string> preset_names()
{
    return {"fig2",  "fig3a", "fig3b", "fig3c", "fig3d", "fig3e",     "fig3f",    "fig4",
            "fig5a", "fig5b", "fig5c", "supp3-140", "supp3-420"};
}

Scenario preset(std::string const& name, RunProfile profile)
{
    bool const fast = profile == RunProfile::fast;
    Scenario s;
    if (name.size() == 5 && name.rfind("fig3", 0) == 0 && name[4] >= 'a' && name[4] <= 'f')
        s = fig3(name[4]);
    else if (name.size() == 5 && name.rfind("fig5", 0) == 0 && name[4] >= 'a' && name[4] <= 'c')
        s = fig5(name[4]);
    else if (name == "fig2")
    {
        s = base(name, "binary mask for the shape-preserving profile");
        if (fast)
            s.mask.n = 512;
    }
    else if (name == "fig4")
    {
        s = base(name, "L_d and main-lobe current versus width");
        SweepSettings sw;
        sw.families = {BeamFamily::shape_preserving, BeamFamily::bessel};
        sw.widths = fast ? nm({1.0, 2.0, 4.0, 8.0})
                         : nm({1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0, 7.0, 8.0, 8.8});
        s.sweep = sw;
        s.grid.n = fast ? 512 : 1024;
    }
    else if (name == "supp3-140" || name == "supp3-420")
    {
        bool const wide = name == "supp3-420";
        s = base(name, wide ? "5 uA, 420 nm aperture" : "5 uA, 140 nm aperture");
        s.physics.current = 5e-6;
        s.physics.aperture_radius = wide ? 420e-9 : 140e-9;
        SweepSettings sw;
        sw.families = {BeamFamily::gaussian, BeamFamily::bessel, BeamFamily::shape_preserving};
        sw.widths = fast ? nm({8.0}) : nm({6.0, 8.0, 10.0});
        s.sweep = sw;
        s.grid.n = wide ? 1024 : 512;
    }
    else
        throw ConfigurationError("unknown preset '" + name + "'");
    s.version = preset_version;
    s.validate();
    return s;
}

double bessel_width_product(int l)
{
    double const j = first_zero(l);
    int const n = 20000;
    double num = 0, den = 0;
    for (int i = 0; i <= n; ++i)
    {
        double const x = j * i / n;
        double const w = (i == 0 || i == n) ? 0.5 : 1.0;
        double const b = std::cyl_bessel_j(l, x);
        num += w * b * b * x * x * x;
        den += w * b * b * x;
    }
    return std::sqrt(num / den);
}

double maximal_width(double gamma, double rho_max)
{
    return radial_main_lobe_width(solve_radial_flat(gamma, rho_max));
}

double matched_kT(BeamFamily family, int l, double width, double gamma, double rho_max)
{
    if (!(width > 0))
        throw ConfigurationError("width must be positive");
    double const kb = bessel_width_product(l) / width;
    if (family == BeamFamily::bessel || (family == BeamFamily::shape_preserving && gamma == 0))
        return kb;
    if (family == BeamFamily::gaussian)
        return 0;
    auto w_of = [&](double kT) { return radial_main_lobe_width(solve_radial(kT, l, gamma, rho_max)); };
    if (l == 0 && width >= maximal_width(gamma, rho_max))
        throw ConfigurationError("width exceeds the maximal shape-preserving width");
    double hi = 2 * kb;
    while (w_of(hi) > width)
        hi *= 2;
    double lo = hi / 2;
    while (w_of(lo) < width)
    {
        lo /= 2;
        if (lo < 1e-9)
            throw ConfigurationError("no shape-preserving profile of the requested width");
    }
    for (int it = 0; it < 60 && hi / lo - 1 > 1e-10; ++it)
    {
        double const mid = std::sqrt(lo * hi);
        (w_of(mid) > width ? lo : hi) = mid;
    }
    return std::sqrt(lo * hi);
}

LaunchField make_launch(Scenario const& s)
{
    s.validate();
    LaunchField L;
    PhysParams phys = s.physics;
    phys.oam_l = s.beam.l;
    L.scales = derive_scales(phys);
    double const R = aperture_a0(s);
    auto const g = grid_of(s);
    double const w = meters_to_bohr(s.beam.width);
    int const l = s.beam.l;
    switch (s.beam.family)
    {
    case BeamFamily::gaussian:
        L.clean = apply_aperture(gaussian(w / std::sqrt(l + 1.0), l, g), R);
        L.lobe_count = 1;
        break;
    case BeamFamily::bessel:
        L.kT = s.beam.kT > 0 ? s.beam.kT : matched_kT(BeamFamily::bessel, l, w, 0, R);
        L.clean = apply_aperture(bessel(L.kT, l, g), R);
        L.lobe_count = bessel_lobes(l, L.kT, R);
        break;
    case BeamFamily::shape_preserving:
        L.kT = s.beam.kT > 0 ? s.beam.kT
                             : matched_kT(BeamFamily::shape_preserving, l, w, L.scales.gamma, R);
        L.profile = solve_radial(L.kT, l, L.scales.gamma, R);
        L.clean = from_radial(*L.profile, l, g, OutsideProfile::zero);
        L.lobe_count = L.profile->lobe_count;
        break;
    }
    L.field = s.beam.noise_ratio > 0 ? add_noise(L.clean, s.beam.noise_ratio, s.beam.seed) : L.clean;
    // noise carries its own current on top of the beam's
    L.gamma = s.beam.multi_electron ? L.scales.gamma * (1 + s.beam.noise_ratio) : 0.0;
    return L;
}

int RunResult::winding_at(double z) const
{
    if (winding.empty() || trace.z.empty())
        return 0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < trace.z.size(); ++i)
        if (std::abs(trace.z[i] - z) < std::abs(trace.z[best] - z))
            best = i;
    return winding[best];
}

namespace
{
double auto_z_max(Scenario const& s, LaunchField const& L)
{
    double const k_a0 = L.scales.wavenumber * constants::bohr_radius;
    double const R = aperture_a0(s);
    double z_a0;
    if (s.beam.family == BeamFamily::gaussian)
    {
        double const sigma = meters_to_bohr(s.beam.width);
        z_a0 = 4 * k_a0 * sigma * sigma;
    }
    else
        z_a0 = 1.5 * R * k_a0 / L.kT;
    return bohr_to_meters(z_a0);
}

int loop_half_cells(Field2D const& f)
{
    double r = main_lobe_radius(f);
    if (!std::isfinite(r))
        r = effective_width(f, unbounded);
    int const h = static_cast<int>(std::lround(0.5 * r / f.grid.dx));
    return std::clamp(h, 2, f.grid.n / 2 - 1);
}

void write_json(std::filesystem::path const& path, json const& j)
{
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot open " + path.string());
    os << j.dump(2) << '\n';
}

void log_line(RunOptions const& o, std::string const& s)
{
    if (o.log)
        o.log(s);
}
} // namespace

RunResult run_scenario(Scenario const& s, RunOptions const& opts)
{
    auto const L = make_launch(s);
    auto const g = L.field.grid;
    double const k = L.scales.wavenumber;
    auto const& ps = s.propagation;

    double dz = ps.dz;
    if (dz == 0)
    {
        auto const clean = step_limits(L.clean, L.gamma, k, ps.max_phase, ps.spectral_fraction);
        // noise widens the spectrum but not the beam; only its potential bounds the step
        double const pot = s.beam.noise_ratio > 0
                               ? step_limits(L.field, L.gamma, k, ps.max_phase, 1.0).potential
                               : unbounded;
        dz = std::min(clean.dz(), pot) * ps.dz_scale;
        if (!std::isfinite(dz))
            throw ConfigurationError("step rule gives no finite dz; set propagation.dz_m");
    }
    double const z_max = ps.z_max > 0 ? ps.z_max : auto_z_max(s, L);

    PropagatorConfig cfg;
    cfg.dz = dz;
    cfg.z_max = z_max;
    cfg.gamma = L.gamma;
    cfg.k = k;
    cfg.absorber = ps.absorber;
    cfg.max_phase = ps.max_phase;
    cfg.stop_width_factor = ps.stop_width_factor;
    cfg.record_stride = std::max(1, static_cast<int>(std::lround(z_max / dz / ps.records)));

    log_line(opts, s.name + ": " + to_string(s.beam.family) + " l=" + std::to_string(s.beam.l)
                       + " n=" + std::to_string(g.n) + " dz=" + std::to_string(dz * 1e6) + " um");

    std::optional<std::filesystem::path> dir = opts.out_dir;
    if (dir)
        std::filesystem::create_directories(*dir);

    RunResult res;
    res.name = s.name;
    int const half_cells = s.beam.l != 0 ? loop_half_cells(L.clean) : 0;
    std::ofstream radial;
    if (dir && opts.radial_density)
    {
        radial.open(*dir / "radial_density.csv");
        radial << "z[m],rho[m],density[a0^-2]\n";
    }
    std::vector<double> last_density;
    auto hook = [&](long, double z, Field2D const& f) {
        if (s.beam.l != 0)
            res.winding.push_back(winding_number(f, half_cells));
        if (radial.is_open())
        {
            auto const prof = azimuthal_average(f);
            for (std::size_t b = 0; b < prof.size(); ++b)
                radial << sig(z) << ',' << sig(bohr_to_meters(b * g.dx)) << ',' << sig(prof[b]) << '\n';
        }
        if (dir)
            last_density = f.density();
    };

    SplitStepPropagator prop(g, cfg);
    res.trace = prop.propagate(L.field, hook);
    res.Ld = res.trace.Ld;
    res.initial_width = res.trace.initial_width;
    res.lobe_fraction = res.trace.lobe_fraction.front();
    res.lobe_current = s.physics.current * res.lobe_fraction;
    res.lobe_count = L.lobe_count;
    res.kT = L.kT;
    res.dz = dz;
    res.gamma = L.gamma;

    json results = {{"L_d_m", num(res.Ld)},
                    {"initial_width_m", num(res.initial_width)},
                    {"main_lobe_current_A", num(res.lobe_current)},
                    {"main_lobe_fraction", num(res.lobe_fraction)},
                    {"lobe_count", res.lobe_count},
                    {"kT_per_a0", num(res.kT)},
                    {"kT_per_m", num(res.kT / constants::bohr_radius)}};
    if (s.beam.l != 0)
    {
        results["winding_launch"] = res.winding.front();
        results["winding_half_L_d"] =
            std::isfinite(res.Ld) ? json(res.winding_at(res.Ld / 2)) : json(nullptr);
    }
    res.summary = {
        {"schema", "ebeam-run-summary/1"},
        {"scenario", to_json(s)},
        {"results", results},
        {"provenance",
         {{"constants", constants_table()},
          {"physics", to_json(s.physics)},
          {"derived", {{"velocity_m_per_s", num(L.scales.velocity)},
                       {"wavenumber_per_m", num(L.scales.wavenumber)},
                       {"line_density_per_m", num(L.scales.line_density)},
                       {"gamma", num(L.scales.gamma)}}},
          {"gamma_propagation", num(L.gamma)},
          {"grid", {{"n", g.n}, {"dx_a0", num(g.dx)}, {"dx_m", num(bohr_to_meters(g.dx))}}},
          {"dz_m", num(dz)},
          {"z_max_m", num(z_max)},
          {"record_stride", cfg.record_stride},
          {"steps", res.trace.steps},
          {"records", res.trace.z.size()},
          {"preset_version", s.version},
          {"seed", s.beam.seed},
          {"noise_ratio", s.beam.noise_ratio},
          {"fft_planning", fft_planning() == FftPlanning::measure ? "measure" : "estimate"}}}};

    if (dir)
    {
        write_json(*dir / "summary.json", res.summary);
        write_json(*dir / "scenario.json", to_json(s));
        std::ofstream tr(*dir / "trace.csv");
        write_trace_csv(tr, res.trace);
        write_density_pgm(L.field.density(), g.n, *dir / "density_z0.pgm", 16);
        if (!last_density.empty())
            write_density_pgm(last_density, g.n, *dir / "density_final.pgm", 16);
        if (L.profile)
        {
            std::ofstream pf(*dir / "profile.txt");
            write_profile(pf, *L.profile);
        }
    }
    log_line(opts, s.name + ": L_d = "
                       + (std::isfinite(res.Ld) ? std::to_string(res.Ld * 1e6) + " um" : "not reached")
                       + ", w0 = " + std::to_string(res.initial_width * 1e9) + " nm, "
                       + std::to_string(res.trace.steps) + " steps");
    return res;
}

std::optional<SweepRow> SweepResult::find(BeamFamily f, double width) const
{
    for (auto const& r : rows)
        if (r.family == f && std::abs(r.width - width) <= 1e-6 * width)
            return r;
    return std::nullopt;
}

int sweep_grid_n(Scenario const& s, double width)
{
    int n = s.grid.n;
    if (!s.sweep || s.sweep->min_cells_per_width <= 0)
        return n;
    double const w = meters_to_bohr(width);
    double const side = s.grid.extent_apertures * aperture_a0(s);
    while (n < max_sweep_grid && w * n / side < s.sweep->min_cells_per_width)
        n *= 2;
    return n;
}

std::optional<double> critical_width(std::vector<SweepRow> const& rows, double tolerance)
{
    std::map<double, std::pair<double, double>> pairs; // width -> (SP, Bessel)
    std::map<double, int> seen;
    for (auto const& r : rows)
    {
        if (r.family == BeamFamily::shape_preserving)
            pairs[r.width].first = r.Ld, seen[r.width] |= 1;
        else if (r.family == BeamFamily::bessel)
            pairs[r.width].second = r.Ld, seen[r.width] |= 2;
    }
    std::vector<std::pair<double, double>> gaps;
    for (auto const& [w, ld] : pairs)
    {
        if (seen[w] != 3)
            continue;
        auto const [sp, b] = ld;
        double gap;
        if (!std::isfinite(sp) && !std::isfinite(b))
            gap = 0;
        else if (!std::isfinite(sp) || !std::isfinite(b))
            gap = unbounded;
        else
            gap = std::abs(sp - b) / b;
        gaps.emplace_back(w, gap);
    }
    if (gaps.empty() || gaps.front().second >= tolerance)
        return std::nullopt;
    for (std::size_t i = 1; i < gaps.size(); ++i)
    {
        if (gaps[i].second < tolerance)
            continue;
        auto const [w0, g0] = gaps[i - 1];
        auto const [w1, g1] = gaps[i];
        if (!std::isfinite(g1))
            return w0;
        return w0 + (tolerance - g0) / (g1 - g0) * (w1 - w0);
    }
    return std::nullopt;
}

SweepResult run_sweep(Scenario const& s, RunOptions const& opts, int threads)
{
    if (!s.sweep)
        throw ConfigurationError("scenario '" + s.name + "' has no sweep section");
    auto const& sw = *s.sweep;
    SweepResult out;
    PhysParams phys = s.physics;
    auto const scales = derive_scales(phys);
    double const R = aperture_a0(s);
    if (s.beam.l == 0 && scales.gamma > 0)
        out.maximal_width = bohr_to_meters(maximal_width(scales.gamma, R));

    struct Job
    {
        BeamFamily family;
        double width;
    };
    std::vector<Job> jobs;
    for (double w : sw.widths)
        for (auto f : sw.families)
        {
            if (f == BeamFamily::shape_preserving && out.maximal_width > 0 && w >= out.maximal_width)
            {
                out.skipped_widths.push_back(w);
                continue;
            }
            jobs.push_back({f, w});
        }

    std::vector<SweepRow> rows(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    RunOptions inner;
    inner.radial_density = opts.radial_density;
    if (opts.log)
        inner.log = [&](std::string const& m) {
            std::lock_guard lock(log_mutex);
            opts.log(m);
        };
    auto worker = [&] {
        for (std::size_t i; (i = next++) < jobs.size();)
        {
            try
            {
                Scenario one = s;
                one.sweep.reset();
                one.beam.family = jobs[i].family;
                one.beam.width = jobs[i].width;
                one.beam.kT = 0;
                one.grid.n = sweep_grid_n(s, jobs[i].width);
                char tag[64];
                std::snprintf(tag, sizeof tag, "%s_w%.2fnm", to_string(jobs[i].family).c_str(),
                              jobs[i].width * 1e9);
                one.name = s.name + "/" + tag;
                RunOptions o = inner;
                if (opts.out_dir)
                    o.out_dir = *opts.out_dir / tag;
                auto const r = run_scenario(one, o);
                rows[i] = {jobs[i].family, jobs[i].width, r.initial_width, r.kT,           r.Ld,
                           r.lobe_current,  r.lobe_fraction, r.lobe_count, one.grid.n};
            }
            catch (...)
            {
                errors[i] = std::current_exception();
            }
        }
    };
    int const nt = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
    {
        std::vector<std::jthread> pool;
        for (int t = 1; t < nt; ++t)
            pool.emplace_back(worker);
        worker();
    }
    for (auto const& e : errors)
        if (e)
            std::rethrow_exception(e);
    out.rows = rows;
    out.critical_width = critical_width(rows, sw.merge_tolerance);

    json jr = json::array();
    for (auto const& r : rows)
        jr.push_back({{"family", to_string(r.family)},
                      {"width_m", num(r.width)},
                      {"measured_width_m", num(r.measured_width)},
                      {"kT_per_a0", num(r.kT)},
                      {"L_d_m", num(r.Ld)},
                      {"main_lobe_current_A", num(r.lobe_current)},
                      {"main_lobe_fraction", num(r.lobe_fraction)},
                      {"lobe_count", r.lobe_count},
                      {"grid_n", r.grid_n}});
    out.summary = {{"schema", "ebeam-sweep/1"},
                   {"scenario", to_json(s)},
                   {"rows", jr},
                   {"critical_width_m", out.critical_width ? num(*out.critical_width) : json(nullptr)},
                   {"maximal_width_m", num(out.maximal_width)},
                   {"skipped_widths_m", out.skipped_widths},
                   {"provenance",
                    {{"constants", constants_table()},
                     {"physics", to_json(s.physics)},
                     {"gamma", num(scales.gamma)},
                     {"preset_version", s.version}}}};
    if (opts.out_dir)
    {
        std::filesystem::create_directories(*opts.out_dir);
        write_json(*opts.out_dir / "sweep.json", out.summary);
        std::ofstream csv(*opts.out_dir / "sweep.csv");
        csv << "family,width[m],measured_width[m],kT[1/a0],L_d[m],main_lobe_current[A],main_lobe_fraction,"
               "lobe_count,grid_n\n";
        csv << std::setprecision(9);
        for (auto const& r : rows)
            csv << to_string(r.family) << ',' << sig(r.width) << ',' << sig(r.measured_width) << ','
                << sig(r.kT) << ',' << sig(r.Ld) << ',' << sig(r.lobe_current) << ',' << sig(r.lobe_fraction)
                << ',' << r.lobe_count << ',' << r.grid_n << '\n';
    }
    return out;
}

MaskReport run_mask_pipeline(Scenario const& s, RunOptions const& opts)
{
    Scenario t = s;
    t.grid.n = s.mask.n;
    t.grid.extent_apertures = s.mask.extent_apertures;
    t.beam.noise_ratio = 0;
    auto const L = make_launch(t);
    auto const& target = L.clean;
    auto const& g = target.grid;
    double const R = aperture_a0(t);

    log_line(opts, s.name + ": mask n=" + std::to_string(g.n));
    MaskReport rep;
    rep.mask = synthesize_mask(target, s.mask.options);
    rep.mask.l = s.beam.l;
    auto const ff = far_field(rep.mask);
    auto const plus = extract_order(ff, 1, rep.mask);
    auto const minus = extract_order(ff, -1, rep.mask);
    auto const mirrored = point_reflect(plus);
    for (std::size_t k = 0; k < plus.amps.size(); ++k)
        rep.mirror_error = std::max(rep.mirror_error, std::abs(minus.amps[k] - std::conj(mirrored.amps[k])));
    rep.fidelity = profile_fidelity(plus, target, R);
    rep.correlation_2d = magnitude_correlation(plus, point_reflect(target), R);
    int const off = g.n / 16, half = g.n / 4;
    rep.fringe_difference = fringe_count(rep.mask, off, half) - fringe_count(rep.mask, -off, half);
    rep.fork_charge = fork_charge(rep.mask);
    if (s.beam.l != 0)
    {
        int const h = loop_half_cells(target);
        rep.winding_plus = winding_number(plus, h);
        rep.winding_minus = winding_number(minus, h);
    }
    rep.report = {{"schema", "ebeam-mask-report/1"},
                  {"scenario", to_json(s)},
                  {"mask", rep.mask.manifest()},
                  {"fidelity_radial", num(rep.fidelity)},
                  {"correlation_2d", num(rep.correlation_2d)},
                  {"mirror_error", num(rep.mirror_error)},
                  {"fringe_difference", rep.fringe_difference},
                  {"fork_charge", rep.fork_charge},
                  {"winding_plus", rep.winding_plus},
                  {"winding_minus", rep.winding_minus},
                  {"kT_per_a0", num(L.kT)}};
    if (opts.out_dir)
    {
        auto const& dir = *opts.out_dir;
        std::filesystem::create_directories(dir);
        write_pbm(rep.mask, dir / "mask.pbm");
        write_json(dir / "mask_report.json", rep.report);
        write_density_pgm(target.density(), g.n, dir / "target.pgm", 16);
        write_density_pgm(ff.density(), g.n, dir / "farfield.pgm", 16);
        write_density_pgm(plus.density(), g.n, dir / "order_plus.pgm", 16);
        write_density_pgm(minus.density(), g.n, dir / "order_minus.pgm", 16);
        std::ofstream rm(dir / "radial_magnitude.csv");
        rm << "rho[m],target,order_plus\n";
        auto const a = radial_magnitude(target, R), b = radial_magnitude(plus, R);
        for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
            rm << sig(bohr_to_meters(i * g.dx)) << ',' << sig(a[i]) << ',' << sig(b[i]) << '\n';
    }
    log_line(opts, s.name + ": fidelity " + std::to_string(rep.fidelity));
    return rep;
}
} // namespace ebeam
