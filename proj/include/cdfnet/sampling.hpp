#pragma once

#include <cstdint>

#include "cdfnet/tensor.hpp"

namespace cdfnet {

// Cartesian phase-encode line mask. Rows (phase-encode axis) are either
// fully acquired or fully skipped; the frequency-encode axis (columns) is
// always fully sampled.
struct SamplingMask {
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  std::vector<std::uint8_t> rows;  // per-row indicator, size == height

  // generation metadata, echoed into reports
  double acceleration = 0.0;
  int num_center_lines = 0;
  double sigma_frac = 0.0;
  std::uint64_t seed = 0;

  bool row_selected(Eigen::Index y) const { return rows[static_cast<std::size_t>(y)] != 0; }
  Eigen::Index selected_count() const;

  /// Dense 0/1 representation, shape [H,W], imaginary part zero.
  ComplexTensor dense() const;
};

/// Rounds half-way cases to the nearest even integer.
Eigen::Index round_half_even(double x);

/// Draws a line mask: the `num_center` rows around DC are always kept and the
/// remaining budget of round(H/R) - num_center rows is sampled without
/// replacement with probability proportional to a zero-mean Gaussian in the
/// row distance from DC (sigma = sigma_frac * H). Deterministic per seed.
SamplingMask make_mask(Eigen::Index height, Eigen::Index width, double acceleration,
                       int num_center, double sigma_frac, std::uint64_t seed);

/// Zero-filled retention of acquired k-space samples: y_f masked to the lines.
ComplexTensor undersample(const ComplexTensor& y_f, const SamplingMask& mask);

/// Zero-filled reconstruction, the aliased network input.
ComplexTensor zero_fill_recon(const ComplexTensor& y_u, const SamplingMask& mask);

}  // namespace cdfnet
