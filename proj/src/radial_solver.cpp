#include "ebeam/radial_solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ebeam/constants.hpp"

namespace ebeam
{
namespace
{
// phi, phi', W = rho U', U, accumulated norm
using State = std::array<double, 5>;

struct System
{
    double kT;
    int l;
    double gamma;

    State operator()(double r, State const& s) const
    {
        double const phi = s[0];
        double const dphi = s[1];
        double const l2 = static_cast<double>(l) * l;
        return {dphi,
                -dphi / r + (l2 / (r * r) + s[3]) * phi,
                -gamma * r * phi * phi,
                s[2] / r,
                2 * constants::pi * r * phi * phi};
    }
};

State axpy(State const& y, double a, State const& k)
{
    State out;
    for (std::size_t i = 0; i < y.size(); ++i)
        out[i] = y[i] + a * k[i];
    return out;
}

State rk4(System const& sys, double r, State const& y, double h)
{
    State const k1 = sys(r, y);
    State const k2 = sys(r + h / 2, axpy(y, h / 2, k1));
    State const k3 = sys(r + h / 2, axpy(y, h / 2, k2));
    State const k4 = sys(r + h, axpy(y, h, k3));
    State out;
    for (std::size_t i = 0; i < y.size(); ++i)
        out[i] = y[i] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    return out;
}

double factorial(int n)
{
    double f = 1;
    for (int i = 2; i <= n; ++i)
        f *= i;
    return f;
}

double bessel_j(int l, double x)
{
    return std::cyl_bessel_j(static_cast<double>(l), x);
}

double bessel_j_prime(int l, double x)
{
    if (l == 0)
        return -bessel_j(1, x);
    return 0.5 * (bessel_j(l - 1, x) - bessel_j(l + 1, x));
}

// Series start at rho = eps.
State initial_state(System const& sys, double alpha, double eps)
{
    int const l = sys.l;
    double const g = sys.gamma;
    State s{};
    if (sys.kT > 0)
    {
        s[0] = alpha * bessel_j(l, sys.kT * eps);
        s[1] = alpha * sys.kT * bessel_j_prime(l, sys.kT * eps);
    }
    else
    {
        // U ~ -gamma alpha^2 rho^2 / 4 gives phi ~ alpha (1 - gamma alpha^2 rho^4 / 64)
        double const e4 = eps * eps * eps * eps;
        s[0] = alpha * (1 - g * alpha * alpha * e4 / 64);
        s[1] = -g * alpha * alpha * alpha * eps * eps * eps / 16;
    }
    // phi ~ alpha (kT rho / 2)^l / l! near the axis
    double const c = l == 0 ? 1.0 : std::pow(sys.kT / 2, 2 * l) / (factorial(l) * factorial(l));
    double const p = std::pow(eps, 2 * l + 2);
    double const m = 2.0 * l + 2;
    s[2] = -g * alpha * alpha * c * p / m;
    s[3] = -sys.kT * sys.kT - g * alpha * alpha * c * p / (m * m);
    s[4] = 2 * constants::pi * alpha * alpha * c * p / m;
    return s;
}

struct Integration
{
    std::vector<State> states; // states[i] at rho = i h, i >= 1
    double norm = 0;
};

int substeps(int l, double r, double h)
{
    // keeps h * (l + 1) / r small where the centrifugal and 1/rho terms dominate
    double const n = std::ceil(h * (l + 1) / (0.25 * r));
    return std::max(1, static_cast<int>(std::min(n, 1e6)));
}

Integration integrate(System const& sys, double alpha, double h, int npts, double eps,
                      bool keep)
{
    Integration out;
    if (keep)
        out.states.resize(static_cast<std::size_t>(npts));
    State y = initial_state(sys, alpha, eps);
    double r = eps;
    for (int i = 1; i < npts; ++i)
    {
        double const target = i * h;
        double const span = target - r;
        int const m = substeps(sys.l, r, span);
        double const hs = span / m;
        for (int j = 0; j < m; ++j)
        {
            y = rk4(sys, r, y, hs);
            r = (j + 1 == m) ? target : r + hs;
        }
        if (!std::isfinite(y[0]) || !std::isfinite(y[3]))
        {
            out.norm = std::numeric_limits<double>::infinity();
            return out;
        }
        if (keep)
            out.states[static_cast<std::size_t>(i)] = y;
    }
    out.norm = y[4];
    return out;
}

// Cubic-exact cumulative integral on a uniform grid.
std::vector<double> cumulative_integral(std::span<double const> f, double h)
{
    std::size_t const n = f.size();
    std::vector<double> out(n, 0.0);
    if (n < 2)
        return out;
    if (n < 4)
    {
        for (std::size_t i = 1; i < n; ++i)
            out[i] = out[i - 1] + h * (f[i - 1] + f[i]) / 2;
        return out;
    }
    for (std::size_t i = 0; i + 1 < n; ++i)
    {
        double seg;
        if (i == 0)
            seg = 9 * f[0] + 19 * f[1] - 5 * f[2] + f[3];
        else if (i + 2 >= n)
            seg = f[i - 2] - 5 * f[i - 1] + 19 * f[i] + 9 * f[i + 1];
        else
            seg = -f[i - 1] + 13 * f[i] + 13 * f[i + 1] - f[i + 2];
        out[i + 1] = out[i] + h * seg / 24;
    }
    return out;
}

double start_offset(double kT, double rho_max, double h, RadialOptions const& opts)
{
    double scale = rho_max;
    if (kT > 0)
        scale = std::min(constants::first_bessel_zero / kT, rho_max);
    return std::min(opts.start_fraction * scale, 0.5 * h);
}

RadialProfile assemble(System const& sys, double alpha, double rho_max, int npts,
                       double h, Integration const& run)
{
    RadialProfile p;
    p.kT = sys.kT;
    p.l = sys.l;
    p.gamma = sys.gamma;
    p.alpha = alpha;
    p.rho_max = rho_max;
    auto const n = static_cast<std::size_t>(npts);
    p.rho.resize(n);
    p.phi.resize(n);
    p.dphi.resize(n);
    p.U.resize(n);
    p.rho[0] = 0;
    p.phi[0] = sys.l == 0 ? alpha : 0.0;
    p.dphi[0] = sys.l == 1 ? alpha * sys.kT / 2 : 0.0;
    p.U[0] = -sys.kT * sys.kT;
    for (std::size_t i = 1; i < n; ++i)
    {
        p.rho[i] = static_cast<double>(i) * h;
        p.phi[i] = run.states[i][0];
        p.dphi[i] = run.states[i][1];
        p.U[i] = run.states[i][3];
    }
    p.rho.back() = rho_max;
    return p;
}

void finalize(RadialProfile& p)
{
    p.norm_error = std::abs(radial_norm(p) - 1);
    p.zeros = find_zeros(p);
    p.lobe_count = count_lobes(p);
    p.ode_residual = ode_residual(p);
    auto const quad = radial_potential_from_density(p.rho, p.phi, p.gamma, -p.kT * p.kT);
    double diff = 0, scale = 0;
    for (std::size_t i = 0; i < quad.size(); ++i)
    {
        diff = std::max(diff, std::abs(quad[i] - p.U[i]));
        scale = std::max(scale, std::abs(p.U[i]));
    }
    p.potential_mismatch = scale > 0 ? diff / scale : diff;
}

struct AlphaSolve
{
    double alpha;
    int iterations;
    int brackets;
};

AlphaSolve solve_alpha(System const& sys, double h, int npts, double eps, double alpha_guess,
                       RadialOptions const& opts)
{
    auto residual = [&](double a) { return integrate(sys, a, h, npts, eps, false).norm - 1; };

    if (sys.gamma == 0)
    {
        double const n1 = integrate(sys, 1.0, h, npts, eps, false).norm;
        return {1 / std::sqrt(n1), 1, 1};
    }

    double lo = alpha_guess, hi = alpha_guess;
    double flo = residual(lo), fhi = flo;
    int expansions = 0;
    while (flo > 0 && expansions < 200)
    {
        hi = lo;
        fhi = flo;
        lo /= 2;
        flo = residual(lo);
        ++expansions;
    }
    while (fhi < 0 && expansions < 200)
    {
        lo = hi;
        flo = fhi;
        hi *= 2;
        fhi = residual(hi);
        ++expansions;
    }

    // coarse scan for additional roots of norm(alpha) = 1
    int brackets = 0;
    {
        int const samples = 24;
        double const a0 = lo / 8, a1 = hi * 8;
        double prev = residual(a0);
        for (int i = 1; i <= samples; ++i)
        {
            double const a = a0 * std::pow(a1 / a0, static_cast<double>(i) / samples);
            double const cur = residual(a);
            if ((prev < 0) != (cur < 0))
                ++brackets;
            prev = cur;
        }
    }

    if (!(flo <= 0 && fhi >= 0))
    {
        // secant fallback
        double x0 = alpha_guess, x1 = alpha_guess * 1.1;
        double f0 = residual(x0), f1 = residual(x1);
        for (int it = 0; it < opts.max_iter; ++it)
        {
            if (std::abs(f1) < opts.tol)
                return {x1, it + 1, brackets};
            double const x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
            if (!(x2 > 0) || !std::isfinite(x2))
                break;
            x0 = x1;
            f0 = f1;
            x1 = x2;
            f1 = residual(x1);
        }
        throw ConvergenceError("normalization amplitude could not be bracketed", std::abs(f1));
    }

    double mid = std::sqrt(lo * hi);
    double fmid = 0;
    for (int it = 0; it < opts.max_iter; ++it)
    {
        mid = std::sqrt(lo * hi);
        fmid = residual(mid);
        if (std::abs(fmid) < opts.tol)
            return {mid, it + 1, std::max(brackets, 1)};
        if (fmid > 0)
            hi = mid;
        else
            lo = mid;
    }
    throw ConvergenceError("normalization amplitude did not converge", std::abs(fmid));
}

RadialProfile solve(System const& sys, double rho_max, RadialOptions const& opts)
{
    // start from the linear wavelength so the first pass is already resolved
    double const linear_points = rho_max * sys.kT * opts.points_per_wavelength / (2 * constants::pi);
    int npts = std::max({opts.min_points, 16, static_cast<int>(std::ceil(linear_points)) + 1});
    double alpha_guess = 0;
    for (int refine = 0; refine < 6; ++refine)
    {
        double const h = rho_max / (npts - 1);
        double const eps = start_offset(sys.kT, rho_max, h, opts);
        if (alpha_guess == 0)
        {
            System const lin{sys.kT, sys.l, 0.0};
            double const n1 = integrate(lin, 1.0, h, npts, eps, false).norm;
            alpha_guess = 1 / std::sqrt(n1);
        }
        auto const a = solve_alpha(sys, h, npts, eps, alpha_guess, opts);
        auto const run = integrate(sys, a.alpha, h, npts, eps, true);
        RadialProfile p = assemble(sys, a.alpha, rho_max, npts, h, run);
        p.alpha_iterations = a.iterations;
        p.normalization_brackets = a.brackets;

        double umin = 0;
        for (double u : p.U)
            umin = std::min(umin, u);
        double const kmax = std::sqrt(-umin);
        double const needed = kmax > 0 ? 2 * constants::pi / (opts.points_per_wavelength * kmax)
                                       : std::numeric_limits<double>::infinity();
        if (h <= needed)
        {
            finalize(p);
            return p;
        }
        npts = static_cast<int>(std::ceil(1.2 * rho_max / needed)) + 1;
        alpha_guess = a.alpha;
    }
    throw ConvergenceError("radial grid refinement did not settle", 0.0);
}
} // namespace

double RadialProfile::phi_at(double r) const
{
    if (rho.empty() || r < 0 || r > rho_max)
        return 0.0;
    double const h = step();
    auto i = static_cast<std::size_t>(r / h);
    if (i + 1 >= rho.size())
        return phi.back();
    double const t = (r - rho[i]) / h;
    return (1 - t) * phi[i] + t * phi[i + 1];
}

RadialProfile solve_radial(double kT, int l, double gamma, double rho_max,
                           RadialOptions const& opts)
{
    if (!(kT >= 0) || !std::isfinite(kT))
        throw std::domain_error("kT must be non-negative");
    if (l < 0)
        throw std::domain_error("OAM charge must be non-negative");
    if (!(gamma >= 0) || !std::isfinite(gamma))
        throw std::domain_error("gamma must be non-negative");
    if (!(rho_max > 0) || !std::isfinite(rho_max))
        throw std::domain_error("rho_max must be positive");
    if (!(opts.tol > 0))
        throw std::domain_error("tolerance must be positive");
    if (kT == 0)
    {
        if (l > 0)
            throw std::domain_error("kT = 0 admits no OAM");
        return solve_radial_flat(gamma, rho_max, opts);
    }
    return solve(System{kT, l, gamma}, rho_max, opts);
}

RadialProfile solve_radial_flat(double gamma, double rho_max, RadialOptions const& opts)
{
    if (!(gamma > 0) || !std::isfinite(gamma))
        throw std::domain_error("kT = 0 requires gamma > 0; the linear limit is a plane wave");
    if (!(rho_max > 0) || !std::isfinite(rho_max))
        throw std::domain_error("rho_max must be positive");
    return solve(System{0.0, 0, gamma}, rho_max, opts);
}

std::vector<double> radial_potential_from_density(std::span<double const> rho,
                                                  std::span<double const> phi, double gamma,
                                                  double U0)
{
    std::size_t const n = rho.size();
    if (phi.size() != n)
        throw std::invalid_argument("rho and phi sizes differ");
    if (n == 0)
        return {};
    if (n == 1)
        return {U0};
    double const h = rho[1] - rho[0];
    std::vector<double> integrand(n);
    for (std::size_t i = 0; i < n; ++i)
        integrand[i] = phi[i] * phi[i] * rho[i];
    auto const enclosed = cumulative_integral(integrand, h);
    std::vector<double> field(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        field[i] = enclosed[i] / rho[i];
    auto const outer = cumulative_integral(field, h);
    std::vector<double> U(n);
    for (std::size_t i = 0; i < n; ++i)
        U[i] = U0 - gamma * outer[i];
    return U;
}

std::vector<double> find_zeros(RadialProfile const& p)
{
    std::vector<double> zeros;
    double const h = p.step();
    auto hermite = [&](std::size_t i, double t) {
        double const t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * p.phi[i] + (t3 - 2 * t2 + t) * h * p.dphi[i]
               + (-2 * t3 + 3 * t2) * p.phi[i + 1] + (t3 - t2) * h * p.dphi[i + 1];
    };
    // the axis node of an l > 0 profile is a structural zero, not a lobe boundary
    for (std::size_t i = 1; i + 1 < p.phi.size(); ++i)
    {
        double const a = p.phi[i], b = p.phi[i + 1];
        if (a == 0)
        {
            zeros.push_back(p.rho[i]);
            continue;
        }
        if ((a < 0) == (b < 0) || b == 0)
            continue;
        double lo = 0, hi = 1;
        double flo = hermite(i, lo);
        for (int it = 0; it < 60; ++it)
        {
            double const mid = (lo + hi) / 2;
            double const fm = hermite(i, mid);
            if ((fm < 0) == (flo < 0))
            {
                lo = mid;
                flo = fm;
            }
            else
                hi = mid;
        }
        zeros.push_back(p.rho[i] + h * (lo + hi) / 2);
    }
    return zeros;
}

int count_lobes(RadialProfile const& p)
{
    if (p.phi.empty())
        return 0;
    auto const zs = find_zeros(p);
    auto const inside = std::count_if(zs.begin(), zs.end(),
                                      [&](double z) { return z < p.rho_max; });
    return static_cast<int>(inside) + 1;
}

double ode_residual(RadialProfile const& p)
{
    std::size_t const n = p.rho.size();
    if (n < 8)
        return 0;
    double const h = p.step();
    double const l2 = static_cast<double>(p.l) * p.l;
    double worst = 0, scale = 0;
    for (std::size_t i = 3; i + 2 < n; ++i)
    {
        double const d2 =
            (-p.dphi[i + 2] + 8 * p.dphi[i + 1] - 8 * p.dphi[i - 1] + p.dphi[i - 2]) / (12 * h);
        double const r = p.rho[i];
        double const res = d2 + p.dphi[i] / r - l2 * p.phi[i] / (r * r) - p.U[i] * p.phi[i];
        worst = std::max(worst, std::abs(res));
        scale = std::max(scale, std::abs(d2));
    }
    return scale > 0 ? worst / scale : worst;
}

double radial_norm(RadialProfile const& p)
{
    if (p.rho.size() < 2)
        return 0;
    std::vector<double> f(p.rho.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = p.phi[i] * p.phi[i] * p.rho[i];
    return 2 * constants::pi * cumulative_integral(f, p.step()).back();
}

double radial_main_lobe_width(RadialProfile const& p)
{
    double edge = p.rho_max;
    auto const zs = find_zeros(p);
    if (!zs.empty())
        edge = zs.front();
    double num = 0, den = 0;
    double const h = p.step();
    for (std::size_t i = 0; i + 1 < p.rho.size(); ++i)
    {
        double const r0 = p.rho[i];
        if (r0 >= edge)
            break;
        double const r1 = std::min(p.rho[i + 1], edge);
        double const t1 = (r1 - r0) / h;
        double const f0 = p.phi[i] * p.phi[i];
        double const f1v = (1 - t1) * p.phi[i] + t1 * p.phi[i + 1];
        double const f1 = f1v * f1v;
        double const w = r1 - r0;
        num += w * (f0 * r0 * r0 * r0 + f1 * r1 * r1 * r1) / 2;
        den += w * (f0 * r0 + f1 * r1) / 2;
    }
    return den > 0 ? std::sqrt(num / den) : 0.0;
}

nlohmann::json profile_header(RadialProfile const& p)
{
    return {{"format", "ebeam-radial-profile"},
            {"version", 1},
            {"units", {{"rho", "a0"}, {"phi", "a0^-1"}, {"U", "a0^-2"}}},
            {"kT", p.kT},
            {"l", p.l},
            {"gamma", p.gamma},
            {"alpha", p.alpha},
            {"rho_max", p.rho_max},
            {"points", p.rho.size()},
            {"lobe_count", p.lobe_count},
            {"zeros", p.zeros},
            {"residuals",
             {{"norm", p.norm_error},
              {"ode", p.ode_residual},
              {"potential", p.potential_mismatch}}},
            {"normalization_brackets", p.normalization_brackets}};
}

void write_profile(std::ostream& os, RadialProfile const& p)
{
    os << "# " << profile_header(p).dump() << '\n';
    os << "# rho[a0] phi U dphi\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < p.rho.size(); ++i)
        os << p.rho[i] << ' ' << p.phi[i] << ' ' << p.U[i] << ' ' << p.dphi[i] << '\n';
}

RadialProfile read_profile(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line.rfind("# ", 0) != 0)
        throw std::runtime_error("radial profile: missing JSON header");
    auto const header = nlohmann::json::parse(line.substr(2));
    if (header.value("format", "") != "ebeam-radial-profile")
        throw std::runtime_error("radial profile: unexpected format tag");
    RadialProfile p;
    p.kT = header.at("kT").get<double>();
    p.l = header.at("l").get<int>();
    p.gamma = header.at("gamma").get<double>();
    p.alpha = header.at("alpha").get<double>();
    p.rho_max = header.at("rho_max").get<double>();
    p.lobe_count = header.value("lobe_count", 0);
    p.zeros = header.value("zeros", std::vector<double>{});
    if (header.contains("residuals"))
    {
        auto const& r = header["residuals"];
        p.norm_error = r.value("norm", 0.0);
        p.ode_residual = r.value("ode", 0.0);
        p.potential_mismatch = r.value("potential", 0.0);
    }
    while (std::getline(is, line))
    {
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream row(line);
        double r, phi, u, d = 0;
        if (!(row >> r >> phi >> u))
            throw std::runtime_error("radial profile: malformed row");
        row >> d;
        p.rho.push_back(r);
        p.phi.push_back(phi);
        p.U.push_back(u);
        p.dphi.push_back(d);
    }
    if (p.rho.size() < 2)
        throw std::runtime_error("radial profile: too few samples");
    return p;
}
} // namespace ebeam
