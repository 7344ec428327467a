#include "qfeq/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <numbers>

#include "qfeq/errors.hpp"

namespace qfeq {
namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct Fft::Impl {
  std::size_t n = 0;
  fftw_complex* buffer = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  explicit Impl(std::size_t size) : n(size) {
    std::lock_guard lock(planner_mutex());
    buffer = fftw_alloc_complex(n);
    fwd = fftw_plan_dft_1d(static_cast<int>(n), buffer, buffer, FFTW_FORWARD, FFTW_ESTIMATE);
    inv = fftw_plan_dft_1d(static_cast<int>(n), buffer, buffer, FFTW_BACKWARD, FFTW_ESTIMATE);
  }

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    fftw_free(buffer);
  }

  void run(fftw_plan plan, std::span<std::complex<double>> data, double scale) {
    require(data.size() == n, ErrorClass::Length, "fft length mismatch");
    auto* buf = reinterpret_cast<std::complex<double>*>(buffer);
    std::copy(data.begin(), data.end(), buf);
    fftw_execute(plan);
    if (scale == 1.0) {
      std::copy(buf, buf + n, data.begin());
    } else {
      std::transform(buf, buf + n, data.begin(), [scale](std::complex<double> v) { return v * scale; });
    }
  }
};

Fft::Fft(std::size_t n) {
  require(n > 0, ErrorClass::Length, "fft of empty sequence");
  impl_ = std::make_unique<Impl>(n);
}
Fft::~Fft() = default;
Fft::Fft(Fft&&) noexcept = default;
Fft& Fft::operator=(Fft&&) noexcept = default;

std::size_t Fft::size() const noexcept { return impl_->n; }

void Fft::forward(std::span<std::complex<double>> data) { impl_->run(impl_->fwd, data, 1.0); }

void Fft::inverse(std::span<std::complex<double>> data) {
  impl_->run(impl_->inv, data, 1.0 / static_cast<double>(impl_->n));
}

double bin_angular_frequency(std::size_t k, std::size_t n, double sample_rate) noexcept {
  const auto signed_k = k < (n + 1) / 2 ? static_cast<double>(k)
                                         : static_cast<double>(k) - static_cast<double>(n);
  return 2.0 * std::numbers::pi * signed_k * sample_rate / static_cast<double>(n);
}

}  // namespace qfeq
