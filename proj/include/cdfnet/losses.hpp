#pragma once

#include "cdfnet/tensor.hpp"

namespace cdfnet {

struct LossConfig {
  double lambda = 2.0;      // weight of the SSIM term in the composite loss
  int ssim_window = 11;     // odd window size
  double ssim_sigma = 1.5;  // Gaussian window width
  // dynamic range policy: L = max magnitude of the reference image

  void validate() const;
};

struct LossValue {
  double value = 0.0;
  ComplexTensor grad;  // w.r.t. the reconstruction, real parametrization
};

/// Squared-error loss over the complex difference, mean over the batch:
/// (1/B) sum_b sum_pixels |x_f - x_r|^2.
LossValue l2_loss(const ComplexTensor& x_r, const ComplexTensor& x_f);

struct SsimResult {
  double value = 0.0;
  Eigen::ArrayXd grad_p;  // d ssim / d p, same layout as p
};

/// Mean structural similarity over valid sliding windows with a Gaussian
/// window and stabilizers C1 = (0.01 L)^2, C2 = (0.03 L)^2. When
/// dynamic_range <= 0, L defaults to max(q) per the dynamic range policy
/// (q is the reference image).
SsimResult ssim(const RealImage& p, const RealImage& q, const LossConfig& cfg,
                double dynamic_range = -1.0);

/// (1/B) sum_b (1 - S(|x_r_b|, |x_f_b|)), gradient chained through the
/// magnitude with a guarded derivative at |z| = 0.
LossValue ssim_loss(const ComplexTensor& x_r, const ComplexTensor& x_f, const LossConfig& cfg);

struct CompositeLoss {
  double value = 0.0;
  double l2 = 0.0;
  double ssim = 0.0;  // the (1 - S) term before weighting
  ComplexTensor grad;
};

/// L = L_l2 + lambda * L_ssim.
CompositeLoss composite_loss(const ComplexTensor& x_r, const ComplexTensor& x_f,
                             const LossConfig& cfg);

}  // namespace cdfnet
