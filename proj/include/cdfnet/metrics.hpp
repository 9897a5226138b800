#pragma once

#include <cstdint>

#include "cdfnet/losses.hpp"
#include "cdfnet/tensor.hpp"

namespace cdfnet {

/// Mean squared difference between two real images of the same shape.
double mse(const RealImage& p, const RealImage& q);

struct EdgeMapParams {
  double threshold_frac = 0.25;  // threshold at frac * max gradient magnitude
};

struct EdgeMap {
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  std::vector<std::uint8_t> on;  // binary per-pixel indicator
  EdgeMapParams params;

  bool at(Eigen::Index y, Eigen::Index x) const { return on[static_cast<std::size_t>(y * width + x)] != 0; }
  Eigen::Index count() const;
};

/// Sobel gradient magnitude (replicated borders) thresholded at
/// threshold_frac times its maximum. Invariant under positive affine
/// intensity rescaling.
EdgeMap edge_map(const RealImage& p, EdgeMapParams params = {});

/// Exact squared Euclidean distance to the nearest on-pixel, per pixel
/// (two-pass lower-envelope transform).
Eigen::ArrayXd squared_distance_transform(const EdgeMap& ref);

/// Pratt figure of merit: (1/max(N_ref, N_det)) * sum over detected pixels
/// of 1/(1 + alpha d^2), d the Euclidean distance to the nearest reference
/// edge pixel. Requires a non-empty reference.
double pratts_fom(const EdgeMap& detected, const EdgeMap& reference, double alpha = 1.0 / 9.0);

struct RgbImage {
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  std::vector<std::uint8_t> rgb;  // 3 bytes per pixel, row-major

  RgbImage() = default;
  RgbImage(Eigen::Index h, Eigen::Index w) : height(h), width(w), rgb(static_cast<std::size_t>(h * w * 3), 0) {}
};

/// Tri-color comparison: green = edge in both, red = edge only in the
/// ground truth (missing), blue = edge only in the reconstruction
/// (hallucinated); background black.
RgbImage edge_difference_map(const EdgeMap& recon, const EdgeMap& gt);

struct ImageEval {
  double mse = 0.0;
  double ssim = 0.0;
  double pratts_fom = 0.0;
};

/// Full per-image evaluation on magnitude images. Magnitudes are normalized
/// by the ground-truth maximum (the dynamic range policy) before MSE; SSIM
/// uses the same range for its stabilizers.
ImageEval evaluate_pair(const ComplexTensor& recon, const ComplexTensor& gt,
                        const LossConfig& loss_cfg = {}, EdgeMapParams edge_params = {});

}  // namespace cdfnet
