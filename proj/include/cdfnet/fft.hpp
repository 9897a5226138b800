#pragma once

#include "cdfnet/tensor.hpp"

namespace cdfnet {

// Centered orthonormal 2-D DFT for power-of-two extents.
//
// Both image and spectrum use the shifted layout with the DC bin at
// (H/2, W/2), and each direction carries a 1/sqrt(H*W) factor, so the
// transform is unitary and forward/inverse are exact mirrors.
class FftPlan {
 public:
  FftPlan(Eigen::Index height, Eigen::Index width);

  Eigen::Index height() const { return height_; }
  Eigen::Index width() const { return width_; }

  /// Transform every trailing [H,W] slice of `x` (any leading dims).
  ComplexTensor forward(const ComplexTensor& x) const;
  ComplexTensor inverse(const ComplexTensor& y) const;

 private:
  void transform(ComplexTensor& t, bool inverse) const;

  Eigen::Index height_, width_;
  std::vector<Eigen::Index> rev_rows_, rev_cols_;  // bit-reversal permutations
  std::vector<double> tw_re_rows_, tw_im_rows_;    // exp(-2*pi*i*k/W), k < W/2
  std::vector<double> tw_re_cols_, tw_im_cols_;
};

ComplexTensor fft2(const ComplexTensor& x, const FftPlan& plan);
ComplexTensor ifft2(const ComplexTensor& y, const FftPlan& plan);

/// Convenience overloads building the plan from the tensor's last two dims.
ComplexTensor fft2(const ComplexTensor& x);
ComplexTensor ifft2(const ComplexTensor& y);

}  // namespace cdfnet
