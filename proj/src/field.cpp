#include "ebeam/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "ebeam/constants.hpp"
#include "ebeam/radial_solver.hpp"

namespace ebeam
{
void GridSpec::validate() const
{
    if (n < 4 || (n & (n - 1)) != 0)
        throw std::domain_error("grid size must be a power of two >= 4");
    if (!(dx > 0) || !std::isfinite(dx))
        throw std::domain_error("grid spacing must be positive");
}

double Field2D::norm() const
{
    double s = 0;
    for (auto const& a : amps)
        s += std::norm(a);
    return s * grid.dx * grid.dx;
}

void Field2D::renormalize()
{
    double const nrm = norm();
    if (!(nrm > 0) || !std::isfinite(nrm))
        throw std::domain_error("cannot renormalize a field with zero or non-finite norm");
    double const s = 1 / std::sqrt(nrm);
    for (auto& a : amps)
        a *= s;
}

std::vector<double> Field2D::density() const
{
    std::vector<double> d(amps.size());
    std::transform(amps.begin(), amps.end(), d.begin(), [](cplx a) { return std::norm(a); });
    return d;
}

namespace
{
template<class F>
Field2D fill_polar(GridSpec grid, F&& radial, int l)
{
    grid.validate();
    Field2D f(grid);
    for (int i = 0; i < grid.n; ++i)
    {
        double const x = grid.coord(i);
        for (int j = 0; j < grid.n; ++j)
        {
            double const y = grid.coord(j);
            double const r = std::hypot(x, y);
            double const amp = radial(r);
            if (l == 0)
                f(i, j) = amp;
            else if (r == 0)
                f(i, j) = 0;
            else
                f(i, j) = std::polar(amp, l * std::atan2(y, x));
        }
    }
    return f;
}
} // namespace

Field2D from_radial(RadialProfile const& profile, int l, GridSpec grid, OutsideProfile outside)
{
    grid.validate();
    double const corner = grid.half_extent() * std::sqrt(2.0);
    if (outside == OutsideProfile::error && profile.rho_max < corner)
        throw std::domain_error("radial profile does not cover the grid");
    Field2D f = fill_polar(grid, [&](double r) { return profile.phi_at(r); }, l);
    f.renormalize();
    f.meta = {{"constructor", "from_radial"},
              {"kT", profile.kT},
              {"l", l},
              {"gamma", profile.gamma},
              {"rho_max", profile.rho_max}};
    return f;
}

Field2D gaussian(double sigma, int l, GridSpec grid)
{
    if (!(sigma > 0))
        throw std::domain_error("gaussian width must be positive");
    if (l < 0)
        throw std::domain_error("OAM charge must be non-negative");
    Field2D f = fill_polar(
        grid,
        [&](double r) {
            double const s = r / sigma;
            return std::pow(s, l) * std::exp(-s * s / 2);
        },
        l);
    f.renormalize();
    f.meta = {{"constructor", l == 0 ? "gaussian" : "laguerre-gauss"}, {"sigma", sigma}, {"l", l}};
    return f;
}

Field2D bessel(double kT, int l, GridSpec grid)
{
    if (!(kT > 0))
        throw std::domain_error("bessel kT must be positive");
    if (l < 0)
        throw std::domain_error("OAM charge must be non-negative");
    Field2D f = fill_polar(
        grid, [&](double r) { return std::cyl_bessel_j(static_cast<double>(l), kT * r); }, l);
    f.renormalize();
    f.meta = {{"constructor", "bessel"}, {"kT", kT}, {"l", l}};
    return f;
}

Field2D plane_wave(double kx, double ky, GridSpec grid)
{
    grid.validate();
    Field2D f(grid);
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j)
            f(i, j) = std::polar(1.0, kx * grid.coord(i) + ky * grid.coord(j));
    f.renormalize();
    f.meta = {{"constructor", "plane_wave"}, {"kx", kx}, {"ky", ky}};
    return f;
}

Field2D apply_aperture(Field2D field, double radius)
{
    auto const& g = field.grid;
    double const corner = g.half_extent() * std::sqrt(2.0);
    if (!(radius > 0) || radius > corner * (1 + 1e-12))
        throw std::domain_error("aperture radius must lie within the grid");
    double const r2 = radius * radius;
    for (int i = 0; i < g.n; ++i)
    {
        double const x = g.coord(i);
        for (int j = 0; j < g.n; ++j)
        {
            double const y = g.coord(j);
            if (x * x + y * y > r2)
                field(i, j) = 0;
        }
    }
    field.renormalize();
    field.meta["aperture_radius"] = radius;
    return field;
}

Field2D add_noise(Field2D field, double ratio, std::uint64_t seed)
{
    if (!(ratio >= 0) || !std::isfinite(ratio))
        throw std::domain_error("noise power ratio must be non-negative");
    if (ratio == 0)
        return field;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<cplx> noise(field.amps.size());
    double power = 0;
    for (auto& n : noise)
    {
        double const re = normal(rng);
        double const im = normal(rng);
        n = {re, im};
        power += re * re + im * im;
    }
    power *= field.grid.dx * field.grid.dx;
    double const scale = std::sqrt(ratio * field.norm() / power);
    for (std::size_t k = 0; k < noise.size(); ++k)
        field.amps[k] += scale * noise[k];
    field.renormalize();
    field.meta["noise"] = {{"ratio", ratio}, {"seed", seed}};
    return field;
}

int winding_number(Field2D const& field, int half_cells)
{
    int const c = field.grid.n / 2;
    if (half_cells < 1 || half_cells >= c)
        throw std::domain_error("winding loop must fit inside the grid");
    // counter-clockwise in the (x, y) plane with x the first index
    std::vector<std::pair<int, int>> loop;
    int const m = half_cells;
    for (int j = -m; j < m; ++j)
        loop.emplace_back(c + m, c + j);
    for (int i = m; i > -m; --i)
        loop.emplace_back(c + i, c + m);
    for (int j = m; j > -m; --j)
        loop.emplace_back(c - m, c + j);
    for (int i = -m; i < m; ++i)
        loop.emplace_back(c + i, c - m);
    double total = 0;
    for (std::size_t k = 0; k < loop.size(); ++k)
    {
        auto [i0, j0] = loop[k];
        auto [i1, j1] = loop[(k + 1) % loop.size()];
        double d = std::arg(field(i1, j1)) - std::arg(field(i0, j0));
        d = std::remainder(d, 2 * constants::pi);
        total += d;
    }
    return static_cast<int>(std::lround(total / (2 * constants::pi)));
}

void write_field(Field2D const& field, std::filesystem::path const& path)
{
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot open " + path.string());
    std::vector<float> buf(field.amps.size() * 2);
    for (std::size_t k = 0; k < field.amps.size(); ++k)
    {
        buf[2 * k] = static_cast<float>(field.amps[k].real());
        buf[2 * k + 1] = static_cast<float>(field.amps[k].imag());
    }
    os.write(reinterpret_cast<char const*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
    nlohmann::json side = {{"format", "complex64-le"},
                           {"n", field.grid.n},
                           {"dx_a0", field.grid.dx},
                           {"layout", "row-major, x slow"},
                           {"meta", field.meta}};
    std::ofstream js(path.string() + ".json");
    js << side.dump(2) << '\n';
}

Field2D read_field(std::filesystem::path const& path)
{
    std::ifstream js(path.string() + ".json");
    if (!js)
        throw std::runtime_error("missing sidecar for " + path.string());
    auto const side = nlohmann::json::parse(js);
    GridSpec g{side.at("n").get<int>(), side.at("dx_a0").get<double>()};
    g.validate();
    Field2D f(g);
    f.meta = side.value("meta", nlohmann::json::object());
    std::ifstream is(path, std::ios::binary);
    std::vector<float> buf(f.amps.size() * 2);
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (is.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)))
        throw std::runtime_error("truncated field file " + path.string());
    for (std::size_t k = 0; k < f.amps.size(); ++k)
        f.amps[k] = {buf[2 * k], buf[2 * k + 1]};
    return f;
}

void write_density_pgm(std::span<double const> density, int n, std::filesystem::path const& path,
                       int bits)
{
    if (bits != 8 && bits != 16)
        throw std::invalid_argument("PGM depth must be 8 or 16 bits");
    if (density.size() != static_cast<std::size_t>(n) * n)
        throw std::invalid_argument("density size does not match n");
    double const peak = *std::max_element(density.begin(), density.end());
    int const maxval = bits == 8 ? 255 : 65535;
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot open " + path.string());
    os << "P5\n" << n << ' ' << n << '\n' << maxval << '\n';
    for (double d : density)
    {
        auto const v = static_cast<unsigned>(
            std::lround(peak > 0 ? std::clamp(d / peak, 0.0, 1.0) * maxval : 0.0));
        if (bits == 8)
            os.put(static_cast<char>(v));
        else
        {
            os.put(static_cast<char>(v >> 8));
            os.put(static_cast<char>(v & 0xff));
        }
    }
}
} // namespace ebeam
