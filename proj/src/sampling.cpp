#include "cdfnet/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "cdfnet/fft.hpp"
#include "cdfnet/rng.hpp"

namespace cdfnet {

Eigen::Index SamplingMask::selected_count() const {
  Eigen::Index n = 0;
  for (const std::uint8_t r : rows) n += (r != 0);
  return n;
}

ComplexTensor SamplingMask::dense() const {
  ComplexTensor m({height, width});
  for (Eigen::Index y = 0; y < height; ++y) {
    if (row_selected(y)) m.re().segment(y * width, width).setOnes();
  }
  return m;
}

Eigen::Index round_half_even(double x) {
  const double fl = std::floor(x);
  const double frac = x - fl;
  auto lo = static_cast<Eigen::Index>(fl);
  if (frac > 0.5) return lo + 1;
  if (frac < 0.5) return lo;
  return (lo % 2 == 0) ? lo : lo + 1;
}

SamplingMask make_mask(Eigen::Index height, Eigen::Index width, double acceleration,
                       int num_center, double sigma_frac, std::uint64_t seed) {
  require(height > 0 && width > 0, "make_mask: extents must be positive");
  require(acceleration >= 1.0, "make_mask: acceleration must be >= 1");
  require(num_center >= 0 && num_center <= height, "make_mask: invalid center line count");
  require(sigma_frac > 0.0, "make_mask: sigma_frac must be positive");

  const Eigen::Index budget = round_half_even(static_cast<double>(height) / acceleration);
  require(budget >= num_center,
          "make_mask: line budget " + std::to_string(budget) + " cannot cover " +
              std::to_string(num_center) + " center lines");

  SamplingMask mask;
  mask.height = height;
  mask.width = width;
  mask.rows.assign(static_cast<std::size_t>(height), 0);
  mask.acceleration = acceleration;
  mask.num_center_lines = num_center;
  mask.sigma_frac = sigma_frac;
  mask.seed = seed;

  // DC sits at H/2 in the centered layout; the center block spans
  // [H/2 - nc/2, H/2 + nc/2) for even nc.
  const Eigen::Index dc = height / 2;
  const Eigen::Index center_lo = dc - num_center / 2;
  for (Eigen::Index y = center_lo; y < center_lo + num_center; ++y) {
    mask.rows[static_cast<std::size_t>(y)] = 1;
  }

  // Remaining rows drawn without replacement, weight = Gaussian pdf of the
  // distance to DC. Sequential draws from the renormalized weights.
  const double sigma = sigma_frac * static_cast<double>(height);
  std::vector<Eigen::Index> candidates;
  std::vector<double> weights;
  for (Eigen::Index y = 0; y < height; ++y) {
    if (mask.rows[static_cast<std::size_t>(y)]) continue;
    const double d = static_cast<double>(y - dc);
    candidates.push_back(y);
    weights.push_back(std::exp(-0.5 * (d / sigma) * (d / sigma)));
  }

  Rng rng(seed);
  Eigen::Index remaining = budget - num_center;
  while (remaining-- > 0) {
    double total = 0.0;
    for (const double w : weights) total += w;
    double u = rng.uniform() * total;
    std::size_t pick = weights.size() - 1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      u -= weights[i];
      if (u <= 0.0) {
        pick = i;
        break;
      }
    }
    mask.rows[static_cast<std::size_t>(candidates[pick])] = 1;
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
    weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return mask;
}

namespace {
void apply_mask_rows(const ComplexTensor& src, const SamplingMask& mask, ComplexTensor& dst) {
  const Eigen::Index H = mask.height, W = mask.width;
  const Eigen::Index slices = src.numel() / (H * W);
  for (Eigen::Index s = 0; s < slices; ++s) {
    for (Eigen::Index y = 0; y < H; ++y) {
      if (!mask.row_selected(y)) continue;
      const Eigen::Index off = s * H * W + y * W;
      dst.re().segment(off, W) = src.re().segment(off, W);
      dst.im().segment(off, W) = src.im().segment(off, W);
    }
  }
}
}  // namespace

ComplexTensor undersample(const ComplexTensor& y_f, const SamplingMask& mask) {
  require(y_f.rank() >= 2 && y_f.dim(-2) == mask.height && y_f.dim(-1) == mask.width,
          "undersample: k-space and mask shapes do not match");
  ComplexTensor y_u = zeros_like(y_f);
  apply_mask_rows(y_f, mask, y_u);
  return y_u;
}

ComplexTensor zero_fill_recon(const ComplexTensor& y_u, const SamplingMask& mask) {
  require(y_u.rank() >= 2 && y_u.dim(-2) == mask.height && y_u.dim(-1) == mask.width,
          "zero_fill_recon: k-space and mask shapes do not match");
  return ifft2(y_u);
}

}  // namespace cdfnet
