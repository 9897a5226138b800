#pragma once

#include <Eigen/Core>

#include <complex>
#include <string>
#include <vector>

#include "cdfnet/errors.hpp"

namespace cdfnet {

using Shape = std::vector<Eigen::Index>;

Eigen::Index shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);
bool shapes_equal(const Shape& a, const Shape& b);

// N-dimensional complex array stored as separate real/imaginary planes in
// row-major order. Split storage lets the complex convolutions run as four
// real convolutions directly on the parts.
class ComplexTensor {
 public:
  ComplexTensor() = default;
  explicit ComplexTensor(Shape shape);
  ComplexTensor(Shape shape, Eigen::ArrayXd re, Eigen::ArrayXd im);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  Eigen::Index numel() const { return re_.size(); }

  /// Extent along axis `i`; negative indices count from the end.
  Eigen::Index dim(int i) const;

  Eigen::ArrayXd& re() { return re_; }
  const Eigen::ArrayXd& re() const { return re_; }
  Eigen::ArrayXd& im() { return im_; }
  const Eigen::ArrayXd& im() const { return im_; }

  std::complex<double> at(Eigen::Index i) const { return {re_[i], im_[i]}; }
  void set(Eigen::Index i, std::complex<double> v) {
    re_[i] = v.real();
    im_[i] = v.imag();
  }

  bool all_finite() const { return re_.isFinite().all() && im_.isFinite().all(); }

 private:
  Shape shape_;
  Eigen::ArrayXd re_, im_;
};

ComplexTensor operator+(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor operator-(const ComplexTensor& a, const ComplexTensor& b);
/// Elementwise complex product.
ComplexTensor operator*(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor operator*(const ComplexTensor& a, std::complex<double> s);
inline ComplexTensor operator*(std::complex<double> s, const ComplexTensor& a) { return a * s; }
inline ComplexTensor operator*(const ComplexTensor& a, double s) { return a * std::complex<double>(s, 0.0); }

ComplexTensor conj(const ComplexTensor& a);
ComplexTensor zeros_like(const ComplexTensor& a);
ComplexTensor reshape(const ComplexTensor& a, Shape shape);

/// Elementwise |z| = sqrt(re^2 + im^2), flattened in the tensor's layout.
Eigen::ArrayXd magnitude(const ComplexTensor& a);

double max_abs_diff(const ComplexTensor& a, const ComplexTensor& b);

void require_same_shape(const ComplexTensor& a, const ComplexTensor& b, const char* op);

/// Concatenate rank-4 [B,C,H,W] tensors along the channel axis.
ComplexTensor concat_channels(const std::vector<const ComplexTensor*>& parts);
/// Split a rank-4 tensor into channel groups of the given sizes.
std::vector<ComplexTensor> split_channels(const ComplexTensor& t, const std::vector<Eigen::Index>& sizes);

/// Stack rank-2 [H,W] images into a rank-4 [B,1,H,W] batch.
ComplexTensor stack_images(const std::vector<ComplexTensor>& images);

// Real-valued single image, row-major.
struct RealImage {
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  Eigen::ArrayXd values;

  RealImage() = default;
  RealImage(Eigen::Index h, Eigen::Index w) : height(h), width(w), values(Eigen::ArrayXd::Zero(h * w)) {}

  double& at(Eigen::Index y, Eigen::Index x) { return values[y * width + x]; }
  double at(Eigen::Index y, Eigen::Index x) const { return values[y * width + x]; }
};

/// Magnitude image of one [*, 1, H, W] batch entry (or of a rank-2 tensor).
RealImage magnitude_image(const ComplexTensor& t, Eigen::Index batch_index = 0);

}  // namespace cdfnet
