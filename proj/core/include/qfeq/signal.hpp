#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace qfeq {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using BitVec = std::vector<std::uint8_t>;

inline constexpr int kBitsPerSymbol = 4;
inline constexpr int kPolarizations = 2;

/// Gray-labelled square 16-QAM at unit average symbol energy.
///
/// The label of a point is (I-gray << 2) | Q-gray, where the per-axis gray
/// code is -3 -> 00, -1 -> 01, +1 -> 11, +3 -> 10. Point index equals label,
/// so label 0b0000 is (-3 - 3i)/sqrt(10).
class Qam16Constellation {
 public:
  static const Qam16Constellation& standard();

  std::span<const cplx> points() const noexcept { return points_; }
  cplx point(std::uint8_t label) const { return points_.at(label); }

  /// Index (== label) of the Euclidean-nearest point; ties go to the lowest index.
  std::uint8_t nearest(cplx z) const noexcept;

  /// Per-axis slicer. Agrees with nearest() except on exact decision boundaries.
  cplx slice(cplx z) const noexcept;

  double min_distance() const noexcept { return min_distance_; }

 private:
  Qam16Constellation();

  std::array<cplx, 16> points_{};
  double min_distance_ = 0.0;
};

struct SymbolFrame {
  CVec x;
  CVec y;

  std::size_t length() const noexcept { return x.size(); }
};

/// Dual-polarization sampled baseband field. Samples carry sqrt(W) so that
/// |x|^2 + |y|^2 is instantaneous power in watts.
struct ComplexField {
  CVec x;
  CVec y;
  double sample_rate = 0.0;  // Hz

  std::size_t length() const noexcept { return x.size(); }
  /// Average total power over both polarizations, mW.
  double power_mw() const noexcept;
  void validate() const;
};

/// Bits are packed one per byte (0/1). Symbol k takes bits [8k, 8k+4) for x
/// and [8k+4, 8k+8) for y, most significant bit first.
SymbolFrame map_bits_to_symbols(std::span<const std::uint8_t> bits,
                                const Qam16Constellation& constellation = Qam16Constellation::standard());

BitVec demap_symbols(std::span<const cplx> symbols,
                     const Qam16Constellation& constellation = Qam16Constellation::standard());

/// Demap both polarizations back into the interleaved bit order used by map_bits_to_symbols.
BitVec demap_frame(const SymbolFrame& frame,
                   const Qam16Constellation& constellation = Qam16Constellation::standard());

BitVec random_bits(std::size_t count, std::uint64_t seed);

/// Root-raised-cosine taps, span_symbols * sps + 1 long, unit energy.
std::vector<double> rrc_taps(double rolloff, int sps, int span_symbols);

/// Upsample by sps and filter with the RRC taps. The signal is treated as
/// periodic (circular convolution), so the output has exactly
/// length * sps samples and sample k * sps is the peak of symbol k.
/// Energy per symbol is preserved.
ComplexField rrc_shape(const SymbolFrame& frame, double rolloff, int sps, int span_symbols,
                       double symbol_rate);

/// Circular filtering of a sequence with a centred, odd-length real filter.
CVec circular_filter(std::span<const cplx> input, std::span<const double> taps);

/// Scale a field so its average total power equals power_mw.
ComplexField set_power(ComplexField field, double power_mw);

double dbm_to_mw(double dbm) noexcept;
double mw_to_dbm(double mw) noexcept;

}  // namespace qfeq
