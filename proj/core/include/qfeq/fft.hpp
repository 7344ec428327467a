#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace qfeq {

/// In-place complex FFT of a fixed length, backed by FFTW.
/// `inverse` is normalized by 1/n so that inverse(forward(x)) == x.
/// Plans are created under a process-wide lock; executing distinct Fft
/// objects concurrently is safe.
class Fft {
 public:
  explicit Fft(std::size_t n);
  ~Fft();
  Fft(Fft&&) noexcept;
  Fft& operator=(Fft&&) noexcept;
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  std::size_t size() const noexcept;
  void forward(std::span<std::complex<double>> data);
  void inverse(std::span<std::complex<double>> data);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Angular frequency (rad/s) of FFT bin k for n samples at the given rate,
/// using the standard wrap: bins above n/2 are negative.
double bin_angular_frequency(std::size_t k, std::size_t n, double sample_rate) noexcept;

}  // namespace qfeq
