#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>

namespace ebeam
{
using cplx = std::complex<double>;

enum class FftPlanning
{
    estimate, //!< heuristic plans; identical on every run
    measure   //!< timed plans; reproducible across runs only through a wisdom file
};

//! Process-wide planner mode for transforms constructed afterwards.  Default: measure.
void set_fft_planning(FftPlanning mode);
FftPlanning fft_planning();

//! Import or export FFTW wisdom; import returns false if the file is missing or invalid.
bool import_fft_wisdom(std::filesystem::path const& path);
void export_fft_wisdom(std::filesystem::path const& path);

/*!
 * In-place 2D complex FFT on an n x n row-major buffer, backed by FFTW.
 *
 * The inverse is unnormalized; callers scale by 1/n^2.  Instances own their
 * buffer and are not shared between threads.
 */
class Fft2D
{
  public:
    explicit Fft2D(int n);
    ~Fft2D();
    Fft2D(Fft2D const&) = delete;
    Fft2D& operator=(Fft2D const&) = delete;
    Fft2D(Fft2D&&) noexcept;
    Fft2D& operator=(Fft2D&&) noexcept;

    int size() const noexcept { return n_; }
    std::span<cplx> data() noexcept { return {buf_, count()}; }
    std::span<cplx const> data() const noexcept { return {buf_, count()}; }

    void forward();
    void backward();

  private:
    std::size_t count() const noexcept { return static_cast<std::size_t>(n_) * n_; }
    void release() noexcept;

    int n_ = 0;
    cplx* buf_ = nullptr;
    void* fwd_ = nullptr;
    void* bwd_ = nullptr;
};

/*!
 * Real-to-half-complex 2D FFT: n x n real samples, n x (n/2 + 1) spectrum.
 * Unnormalized like Fft2D.
 */
class RealFft2D
{
  public:
    explicit RealFft2D(int n);
    ~RealFft2D();
    RealFft2D(RealFft2D const&) = delete;
    RealFft2D& operator=(RealFft2D const&) = delete;

    int size() const noexcept { return n_; }
    std::span<double> real() noexcept { return {real_, static_cast<std::size_t>(n_) * n_}; }
    std::span<cplx> spectrum() noexcept { return {spec_, static_cast<std::size_t>(n_) * (n_ / 2 + 1)}; }

    void forward();  //!< real -> spectrum
    void backward(); //!< spectrum -> real; overwrites the spectrum

  private:
    int n_ = 0;
    double* real_ = nullptr;
    cplx* spec_ = nullptr;
    void* fwd_ = nullptr;
    void* bwd_ = nullptr;
};

//! Angular wavenumber of FFT bin i on a grid of n samples spaced dx.
double fft_wavenumber(int i, int n, double dx);
} // namespace ebeam
