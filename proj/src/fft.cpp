#include "ebeam/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <new>
#include <stdexcept>
#include <utility>

#include "ebeam/constants.hpp"

namespace ebeam
{
namespace
{
// the FFTW planner is not reentrant
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

std::atomic<FftPlanning> planning{FftPlanning::measure};

unsigned planner_flags()
{
    return planning.load() == FftPlanning::measure ? FFTW_MEASURE : FFTW_ESTIMATE;
}
} // namespace

void set_fft_planning(FftPlanning mode)
{
    planning.store(mode);
}

FftPlanning fft_planning()
{
    return planning.load();
}

bool import_fft_wisdom(std::filesystem::path const& path)
{
    std::lock_guard lock(planner_mutex());
    return fftw_import_wisdom_from_filename(path.c_str()) != 0;
}

void export_fft_wisdom(std::filesystem::path const& path)
{
    std::lock_guard lock(planner_mutex());
    if (!fftw_export_wisdom_to_filename(path.c_str()))
        throw std::runtime_error("cannot write FFT wisdom to " + path.string());
}

Fft2D::Fft2D(int n) : n_(n)
{
    if (n < 2)
        throw std::invalid_argument("FFT size must be at least 2");
    buf_ = reinterpret_cast<cplx*>(fftw_malloc(sizeof(fftw_complex) * count()));
    if (!buf_)
        throw std::bad_alloc();
    std::lock_guard lock(planner_mutex());
    auto* raw = reinterpret_cast<fftw_complex*>(buf_);
    // measuring planners scribble on the buffer, so plan before any data is written
    fwd_ = fftw_plan_dft_2d(n, n, raw, raw, FFTW_FORWARD, planner_flags());
    bwd_ = fftw_plan_dft_2d(n, n, raw, raw, FFTW_BACKWARD, planner_flags());
    if (!fwd_ || !bwd_)
    {
        if (fwd_)
            fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
        if (bwd_)
            fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
        fftw_free(buf_);
        throw std::runtime_error("FFTW planning failed");
    }
    std::fill(buf_, buf_ + count(), cplx{});
}

Fft2D::~Fft2D()
{
    release();
}

Fft2D::Fft2D(Fft2D&& other) noexcept
    : n_(std::exchange(other.n_, 0)),
      buf_(std::exchange(other.buf_, nullptr)),
      fwd_(std::exchange(other.fwd_, nullptr)),
      bwd_(std::exchange(other.bwd_, nullptr))
{
}

Fft2D& Fft2D::operator=(Fft2D&& other) noexcept
{
    if (this != &other)
    {
        release();
        n_ = std::exchange(other.n_, 0);
        buf_ = std::exchange(other.buf_, nullptr);
        fwd_ = std::exchange(other.fwd_, nullptr);
        bwd_ = std::exchange(other.bwd_, nullptr);
    }
    return *this;
}

void Fft2D::release() noexcept
{
    std::lock_guard lock(planner_mutex());
    if (fwd_)
        fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    if (bwd_)
        fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
    if (buf_)
        fftw_free(buf_);
    fwd_ = bwd_ = nullptr;
    buf_ = nullptr;
}

void Fft2D::forward()
{
    fftw_execute(static_cast<fftw_plan>(fwd_));
}

void Fft2D::backward()
{
    fftw_execute(static_cast<fftw_plan>(bwd_));
}

RealFft2D::RealFft2D(int n) : n_(n)
{
    if (n < 2 || n % 2)
        throw std::invalid_argument("real FFT size must be even");
    auto const nr = static_cast<std::size_t>(n) * n;
    auto const nc = static_cast<std::size_t>(n) * (n / 2 + 1);
    real_ = static_cast<double*>(fftw_malloc(sizeof(double) * nr));
    spec_ = reinterpret_cast<cplx*>(fftw_malloc(sizeof(fftw_complex) * nc));
    if (!real_ || !spec_)
    {
        fftw_free(real_);
        fftw_free(spec_);
        throw std::bad_alloc();
    }
    std::lock_guard lock(planner_mutex());
    auto* c = reinterpret_cast<fftw_complex*>(spec_);
    fwd_ = fftw_plan_dft_r2c_2d(n, n, real_, c, planner_flags());
    bwd_ = fftw_plan_dft_c2r_2d(n, n, c, real_, planner_flags());
    if (!fwd_ || !bwd_)
    {
        if (fwd_)
            fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
        if (bwd_)
            fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
        fftw_free(real_);
        fftw_free(spec_);
        throw std::runtime_error("FFTW planning failed");
    }
    std::fill(real_, real_ + nr, 0.0);
    std::fill(spec_, spec_ + nc, cplx{});
}

RealFft2D::~RealFft2D()
{
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
    fftw_free(real_);
    fftw_free(spec_);
}

void RealFft2D::forward()
{
    fftw_execute(static_cast<fftw_plan>(fwd_));
}

void RealFft2D::backward()
{
    fftw_execute(static_cast<fftw_plan>(bwd_));
}

double fft_wavenumber(int i, int n, double dx)
{
    int const m = i <= n / 2 ? i : i - n;
    return 2 * constants::pi * m / (n * dx);
}
} // namespace ebeam
