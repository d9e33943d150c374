#include "ebeam/mask.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "ebeam/constants.hpp"
#include "ebeam/fft.hpp"
#include "ebeam/physical_params.hpp"
#include "ebeam/radial_solver.hpp"

namespace ebeam
{
namespace
{
// Transform with the origin at index n/2 on both sides; (-1)^(i+j) twiddles.
void centered_transform(Fft2D& fft, bool forward)
{
    int const n = fft.size();
    auto buf = fft.data();
    auto twiddle = [&] {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if ((i + j) % 2)
                    buf[static_cast<std::size_t>(i) * n + j] = -buf[static_cast<std::size_t>(i) * n + j];
    };
    twiddle();
    forward ? fft.forward() : fft.backward();
    twiddle();
}

void centered_forward(Fft2D& fft)
{
    centered_transform(fft, true);
}

double shift_limit(GridSpec const& g)
{
    return g.half_extent();
}

double pearson(std::vector<double> const& a, std::vector<double> const& b)
{
    auto const n = static_cast<double>(a.size());
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (std::size_t k = 0; k < a.size(); ++k)
    {
        sa += a[k];
        sb += b[k];
        saa += a[k] * a[k];
        sbb += b[k] * b[k];
        sab += a[k] * b[k];
    }
    double const va = saa / n - (sa / n) * (sa / n), vb = sbb / n - (sb / n) * (sb / n);
    if (!(va > 0 && vb > 0))
        return 0;
    return (sab / n - (sa / n) * (sb / n)) / std::sqrt(va * vb);
}
} // namespace

std::vector<double> radial_magnitude(Field2D const& f, double radius)
{
    auto const& g = f.grid;
    auto const bins = static_cast<std::size_t>(radius / g.dx) + 1;
    std::vector<double> sum(bins, 0.0), cnt(bins, 0.0);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
        {
            auto const b = static_cast<std::size_t>(
                std::lround(std::hypot(g.coord(i), g.coord(j)) / g.dx));
            if (b >= bins)
                continue;
            sum[b] += std::abs(f(i, j));
            cnt[b] += 1;
        }
    for (std::size_t b = 0; b < bins; ++b)
        sum[b] = cnt[b] > 0 ? sum[b] / cnt[b] : 0.0;
    return sum;
}

double profile_fidelity(Field2D const& reconstructed, Field2D const& target, double radius)
{
    return pearson(radial_magnitude(reconstructed, radius), radial_magnitude(target, radius));
}

double MaskBitmap::du() const
{
    return 2 * constants::pi / (n * dx);
}

int MaskBitmap::shift_cells() const
{
    return static_cast<int>(std::lround(kh / dx));
}

nlohmann::json MaskBitmap::manifest() const
{
    double const nm = bohr_to_meters(1.0) * 1e9;
    return {{"n", n},
            {"dx_nm", dx * nm},
            {"mask_pitch_per_nm", du() / nm},
            {"kh_nm", kh * nm},
            {"threshold", threshold},
            {"rho_max_per_nm", rho_max / nm},
            {"target_radius_nm", target_radius * nm},
            {"amplitude", amplitude},
            {"oam_l", l},
            {"plane", "Fourier plane of the output; far field is the forward transform"}};
}

double support_radius(Field2D const& target, double tail)
{
    auto const& g = target.grid;
    std::vector<std::pair<double, double>> rp;
    rp.reserve(g.cells());
    double total = 0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
        {
            double const d = std::norm(target(i, j));
            if (d > 0)
                rp.emplace_back(std::hypot(g.coord(i), g.coord(j)), d);
            total += d;
        }
    if (!(total > 0))
        throw std::domain_error("target has no power");
    std::sort(rp.begin(), rp.end());
    double acc = 0;
    for (auto const& [r, d] : rp)
    {
        acc += d;
        if (acc >= (1 - tail) * total)
            return r;
    }
    return rp.back().first;
}

std::vector<double> mask_transmission(Field2D const& target, double kh, double amplitude)
{
    auto const& g = target.grid;
    Fft2D fft(g.n);
    auto buf = fft.data();
    std::copy(target.amps.begin(), target.amps.end(), buf.begin());
    centered_forward(fft);
    double amax = 0;
    for (auto const& a : buf)
        amax = std::max(amax, std::abs(a));
    if (!(amax > 0))
        throw std::domain_error("target has no power");
    double const s = std::round(kh / g.dx);
    std::vector<double> T(g.cells());
    for (int i = 0; i < g.n; ++i)
    {
        cplx const ref = std::polar(1.0, 2 * constants::pi * s * (i - g.n / 2) / g.n);
        for (int j = 0; j < g.n; ++j)
        {
            auto const idx = static_cast<std::size_t>(i) * g.n + j;
            T[idx] = std::norm(amplitude * buf[idx] / amax + ref);
        }
    }
    return T;
}

MaskBitmap synthesize_mask(Field2D const& target, MaskOptions const& opts)
{
    auto const& g = target.grid;
    g.validate();
    MaskBitmap m;
    m.n = g.n;
    m.dx = g.dx;
    m.l = target.meta.value("l", 0);
    m.target_radius = support_radius(target);
    double const kh = opts.kh > 0 ? opts.kh : 4 * m.target_radius;
    m.kh = std::round(kh / g.dx) * g.dx;
    // zeroth order spans twice the target radius; first orders span one
    if (m.kh < 3 * m.target_radius)
        throw ConfigurationError("carrier too slow: first orders overlap the zeroth order (kh = "
                                 + std::to_string(m.kh) + " a0, needs >= "
                                 + std::to_string(3 * m.target_radius) + ")");
    if (m.kh + m.target_radius >= shift_limit(g))
        throw ConfigurationError("carrier too fast: first orders leave the grid");

    double const half = g.n / 2 * m.du();
    m.rho_max = opts.rho_max > 0 ? opts.rho_max : half;
    m.amplitude = opts.amplitude;
    auto const T = mask_transmission(target, m.kh, m.amplitude);

    auto inside = [&](int i, int j) {
        double const u = (i - g.n / 2) * m.du(), v = (j - g.n / 2) * m.du();
        return u * u + v * v < m.rho_max * m.rho_max;
    };
    auto binarize = [&](double tau) {
        m.threshold = tau;
        m.bits.assign(g.cells(), 0);
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
            {
                auto const idx = static_cast<std::size_t>(i) * g.n + j;
                m.bits[idx] = (inside(i, j) && T[idx] > tau) ? 1 : 0;
            }
    };

    switch (opts.rule)
    {
    case ThresholdRule::fixed:
        binarize(opts.threshold);
        break;
    case ThresholdRule::median:
    {
        std::vector<double> in;
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                if (inside(i, j))
                    in.push_back(T[static_cast<std::size_t>(i) * g.n + j]);
        if (in.empty())
            throw ConfigurationError("mask aperture contains no pixels");
        auto mid = in.begin() + static_cast<std::ptrdiff_t>(in.size() / 2);
        std::nth_element(in.begin(), mid, in.end());
        binarize(*mid);
        break;
    }
    case ThresholdRule::best_fidelity:
    {
        auto const ref = radial_magnitude(target, m.target_radius);
        auto score = [&](double tau) {
            binarize(tau);
            if (std::none_of(m.bits.begin(), m.bits.end(), [](auto b) { return b != 0; }))
                return -1.0;
            auto const e = extract_order(far_field(m), 1, m);
            return pearson(radial_magnitude(e, m.target_radius), ref);
        };
        // T spans [(1 - A)^2, (1 + A)^2]; coarse scan, then golden section around the best
        double const lo = std::pow(std::max(0.0, 1 - m.amplitude), 2);
        double const hi = std::pow(1 + m.amplitude, 2);
        int const coarse = 16;
        double const h = (hi - lo) / coarse;
        double best_tau = lo + h / 2, best = -2;
        for (int k = 0; k < coarse; ++k)
        {
            double const tau = lo + (k + 0.5) * h;
            double const f = score(tau);
            if (f > best)
                best = f, best_tau = tau;
        }
        double a = best_tau - h, b = best_tau + h;
        double const r = (std::sqrt(5.0) - 1) / 2;
        double c = b - r * (b - a), d = a + r * (b - a);
        double fc = score(c), fd = score(d);
        for (int it = 0; it < 20; ++it)
        {
            if (fc > fd)
                b = d, d = c, fd = fc, c = b - r * (b - a), fc = score(c);
            else
                a = c, c = d, fc = fd, d = a + r * (b - a), fd = score(d);
        }
        double const tau = fc > fd ? c : d;
        binarize(std::max(fc, fd) >= best ? tau : best_tau);
        break;
    }
    }
    return m;
}
MaskBitmap synthesize_mask(RadialProfile const& profile, int l, GridSpec grid,
                           MaskOptions const& opts)
{
    auto target = from_radial(profile, l, grid, OutsideProfile::zero);
    target.meta["l"] = l;
    return synthesize_mask(target, opts);
}

Field2D far_field(MaskBitmap const& mask)
{
    GridSpec const g{mask.n, mask.dx};
    Fft2D fft(g.n);
    auto buf = fft.data();
    for (std::size_t k = 0; k < buf.size(); ++k)
        buf[k] = mask.bits[k];
    centered_forward(fft);
    Field2D f(g);
    std::copy(buf.begin(), buf.end(), f.amps.begin());
    f.renormalize();
    f.meta = {{"constructor", "far_field"}, {"mask", mask.manifest()}};
    return f;
}

Field2D extract_order(Field2D const& farfield, int which, MaskBitmap const& mask,
                      std::optional<double> window)
{
    if (which != 1 && which != -1)
        throw std::invalid_argument("order must be +1 or -1");
    auto const& g = farfield.grid;
    if (g.n != mask.n || g.dx != mask.dx)
        throw ConfigurationError("far field does not match the mask grid");
    double const rw = window.value_or(mask.kh / 3);
    if (!(rw > 0))
        throw ConfigurationError("extraction window must be positive");
    if (rw + 2 * mask.target_radius > mask.kh)
        throw ConfigurationError("extraction window reaches the zeroth order");
    if (rw >= mask.kh)
        throw ConfigurationError("extraction windows of the two orders overlap");
    if (mask.kh + rw >= g.half_extent())
        throw ConfigurationError("extraction window leaves the grid");

    int const s = mask.shift_cells();
    int const di = which == 1 ? -s : s;
    Field2D out(g);
    for (int i = 0; i < g.n; ++i)
    {
        double const x = g.coord(i);
        for (int j = 0; j < g.n; ++j)
        {
            double const y = g.coord(j);
            if (x * x + y * y > rw * rw)
                continue;
            out(i, j) = farfield(i + di, j);
        }
    }
    out.renormalize();
    out.meta = {{"constructor", "extract_order"}, {"order", which}, {"window_a0", rw}};
    return out;
}

double magnitude_correlation(Field2D const& a, Field2D const& b, double radius)
{
    auto const& g = a.grid;
    if (b.grid.n != g.n || b.grid.dx != g.dx)
        throw std::invalid_argument("fields must share a grid");
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    long cnt = 0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
        {
            double const x = g.coord(i), y = g.coord(j);
            if (x * x + y * y > radius * radius)
                continue;
            double const u = std::abs(a(i, j)), v = std::abs(b(i, j));
            sa += u;
            sb += v;
            saa += u * u;
            sbb += v * v;
            sab += u * v;
            ++cnt;
        }
    if (cnt < 2)
        throw std::domain_error("correlation disc holds fewer than two samples");
    double const ma = sa / cnt, mb = sb / cnt;
    double const va = saa / cnt - ma * ma, vb = sbb / cnt - mb * mb;
    if (!(va > 0 && vb > 0))
        throw std::domain_error("constant magnitude inside the correlation disc");
    return (sab / cnt - ma * mb) / std::sqrt(va * vb);
}

Field2D point_reflect(Field2D const& f)
{
    auto const& g = f.grid;
    Field2D out(g);
    out.meta = f.meta;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            out(i, j) = f((g.n - i) % g.n, (g.n - j) % g.n);
    return out;
}

int fringe_count(MaskBitmap const& mask, int row_offset, int half_length)
{
    int const c = mask.n / 2;
    int const j = c + row_offset;
    if (j < 0 || j >= mask.n || half_length < 1 || c + half_length >= mask.n)
        throw std::domain_error("fringe line leaves the mask");
    int count = 0;
    for (int i = c - half_length; i < c + half_length; ++i)
        if (mask(i, j) == 0 && mask(i + 1, j) == 1)
            ++count;
    return count;
}

int fork_charge(MaskBitmap const& mask)
{
    auto const plus = extract_order(far_field(mask), 1, mask);
    Fft2D fft(mask.n);
    auto buf = fft.data();
    std::copy(plus.amps.begin(), plus.amps.end(), buf.begin());
    centered_transform(fft, false);
    Field2D fringes(GridSpec{mask.n, mask.du()});
    std::copy(buf.begin(), buf.end(), fringes.amps.begin());

    // circle through the band of strongest fringe contrast
    auto const prof = radial_magnitude(fringes, fringes.grid.half_extent());
    std::size_t peak = 1;
    for (std::size_t b = 1; b < prof.size(); ++b)
        if (prof[b] > prof[peak])
            peak = b;
    double const r = static_cast<double>(std::min<std::size_t>(peak, mask.n / 2 - 2));
    int const c = mask.n / 2;
    auto sample = [&](double x, double y) {
        int const i = static_cast<int>(std::floor(x)), j = static_cast<int>(std::floor(y));
        double const fx = x - i, fy = y - j;
        return (1 - fx) * ((1 - fy) * fringes(c + i, c + j) + fy * fringes(c + i, c + j + 1))
               + fx * ((1 - fy) * fringes(c + i + 1, c + j) + fy * fringes(c + i + 1, c + j + 1));
    };
    int const steps = std::max(64, static_cast<int>(16 * std::numbers::pi * r));
    double total = 0;
    cplx prev = sample(r, 0);
    for (int k = 1; k <= steps; ++k)
    {
        double const t = 2 * std::numbers::pi * k / steps;
        cplx const cur = sample(r * std::cos(t), r * std::sin(t));
        total += std::arg(cur * std::conj(prev));
        prev = cur;
    }
    return static_cast<int>(std::lround(total / (2 * std::numbers::pi)));
}

void write_pbm(MaskBitmap const& mask, std::filesystem::path const& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot open " + path.string());
    // rows run along y so the carrier fringes appear as columns
    os << "P4\n" << mask.n << ' ' << mask.n << '\n';
    int const bytes = (mask.n + 7) / 8;
    std::vector<unsigned char> row(static_cast<std::size_t>(bytes));
    for (int j = mask.n - 1; j >= 0; --j)
    {
        std::fill(row.begin(), row.end(), 0);
        for (int i = 0; i < mask.n; ++i)
            if (!mask(i, j))
                row[static_cast<std::size_t>(i / 8)] |= static_cast<unsigned char>(0x80 >> (i % 8));
        os.write(reinterpret_cast<char const*>(row.data()), bytes);
    }
    if (!os)
        throw std::runtime_error("write failed: " + path.string());
}
} // namespace ebeam
