#include "ebeam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace ebeam
{
std::vector<double> azimuthal_average(Field2D const& field)
{
    auto const& g = field.grid;
    int const bins = g.n / 2;
    std::vector<double> sum(static_cast<std::size_t>(bins), 0.0);
    std::vector<int> count(static_cast<std::size_t>(bins), 0);
    for (int i = 0; i < g.n; ++i)
    {
        int const di = i - g.n / 2;
        for (int j = 0; j < g.n; ++j)
        {
            int const dj = j - g.n / 2;
            auto const b = static_cast<int>(std::lround(std::sqrt(double(di * di + dj * dj))));
            if (b >= bins)
                continue;
            sum[static_cast<std::size_t>(b)] += std::norm(field(i, j));
            ++count[static_cast<std::size_t>(b)];
        }
    }
    for (std::size_t b = 0; b < sum.size(); ++b)
        sum[b] = count[b] ? sum[b] / count[b] : 0.0;
    return sum;
}

double main_lobe_radius(std::span<double const> prof, double dx, double min_prominence)
{
    if (prof.empty())
        throw std::domain_error("empty radial density");
    auto const peak_it = std::max_element(prof.begin(), prof.end());
    double const peak = *peak_it;
    if (!(peak > 0))
        throw std::domain_error("radial density has no positive peak");
    auto const n = prof.size();
    for (auto j = static_cast<std::size_t>(peak_it - prof.begin()) + 1; j + 1 < n; ++j)
    {
        if (!(prof[j] < prof[j - 1] && prof[j] <= prof[j + 1]))
            continue;
        std::size_t m = j + 1;
        while (m + 1 < n && prof[m + 1] >= prof[m])
            ++m;
        double const prominence = std::min(peak, prof[m]) - prof[j];
        if (prominence >= min_prominence * peak)
            return static_cast<double>(j) * dx;
    }
    return unbounded;
}

double main_lobe_radius(Field2D const& field, double min_prominence)
{
    auto const prof = azimuthal_average(field);
    return main_lobe_radius(prof, field.grid.dx, min_prominence);
}

namespace
{
struct Moments
{
    double m0 = 0;
    double m2 = 0;
    double total = 0;
    double peak = 0;
};

Moments moments(Field2D const& field, double radius)
{
    auto const& g = field.grid;
    double const r2max = radius * radius;
    bool const all = !std::isfinite(radius);
    Moments m;
    for (int i = 0; i < g.n; ++i)
    {
        double const x = g.coord(i);
        for (int j = 0; j < g.n; ++j)
        {
            double const y = g.coord(j);
            double const d = std::norm(field(i, j));
            double const r2 = x * x + y * y;
            m.total += d;
            m.peak = std::max(m.peak, d);
            if (all || r2 <= r2max)
            {
                m.m0 += d;
                m.m2 += d * r2;
            }
        }
    }
    return m;
}
} // namespace

double effective_width(Field2D const& field, double lobe_radius)
{
    auto const m = moments(field, lobe_radius);
    if (!(m.m0 > 0))
        throw std::domain_error("zero density inside the main lobe");
    return std::sqrt(m.m2 / m.m0);
}

double effective_width(Field2D const& field)
{
    return effective_width(field, main_lobe_radius(field));
}

double main_lobe_fraction(Field2D const& field, double lobe_radius)
{
    auto const m = moments(field, lobe_radius);
    if (!(m.total > 0))
        throw std::domain_error("zero density");
    return m.m0 / m.total;
}

double main_lobe_current(Field2D const& field, double total_current)
{
    if (!(total_current >= 0))
        throw std::domain_error("current must be non-negative");
    return total_current * main_lobe_fraction(field, main_lobe_radius(field));
}

LobeMeasurement LobeTracker::measure(Field2D const& field)
{
    double const found = main_lobe_radius(field, min_prominence_);
    double radius;
    if (!radius_)
        radius = found;
    else if (!std::isfinite(*radius_))
        radius = unbounded;
    else if (std::isfinite(found) && found <= max_growth_ * *radius_
             && found * max_growth_ >= *radius_)
        radius = found;
    else
        radius = *radius_;
    radius_ = radius;

    auto const m = moments(field, radius);
    if (!(m.m0 > 0))
        throw std::domain_error("zero density inside the main lobe");
    return {radius, std::sqrt(m.m2 / m.m0), m.m0 / m.total, m.peak};
}

void PropagationTrace::append(double z_m, double width_m, double fraction, double peak,
                              double radius_m)
{
    if (z.empty())
        initial_width = width_m;
    z.push_back(z_m);
    width.push_back(width_m);
    lobe_fraction.push_back(fraction);
    peak_density.push_back(peak);
    lobe_radius.push_back(radius_m);
}

double nondiffraction_range(PropagationTrace const& trace)
{
    auto const& z = trace.z;
    auto const& w = trace.width;
    if (z.size() < 2 || w.size() != z.size())
        throw std::domain_error("trace needs at least two samples");
    for (std::size_t i = 1; i < z.size(); ++i)
        if (!(z[i] > z[i - 1]))
            throw std::domain_error("trace z must be strictly increasing");
    double const target = std::sqrt(2.0) * w.front();
    for (std::size_t i = 1; i < z.size(); ++i)
    {
        if (w[i] >= target)
        {
            double const t = (target - w[i - 1]) / (w[i] - w[i - 1]);
            return z[i - 1] + t * (z[i] - z[i - 1]);
        }
    }
    return unbounded;
}

void write_trace_csv(std::ostream& os, PropagationTrace const& trace)
{
    os << "z[m],effective_width[m],main_lobe_current_fraction,peak_density\n";
    os << std::setprecision(10);
    for (std::size_t i = 0; i < trace.z.size(); ++i)
        os << trace.z[i] << ',' << trace.width[i] << ',' << trace.lobe_fraction[i] << ','
           << trace.peak_density[i] << '\n';
}
} // namespace ebeam
