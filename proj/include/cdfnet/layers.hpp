#pragma once

#include <cstdint>
#include <string>

#include "cdfnet/rng.hpp"
#include "cdfnet/tensor.hpp"

namespace cdfnet {

// Learnable real-valued tensor with its gradient accumulator. Complex
// quantities are parameterized by separate real/imag parts, so backprop is
// ordinary real differentiation throughout.
struct Parameter {
  std::string name;
  Shape shape;
  Eigen::ArrayXd value;
  Eigen::ArrayXd grad;

  Parameter() = default;
  Parameter(std::string n, Shape s)
      : name(std::move(n)),
        shape(std::move(s)),
        value(Eigen::ArrayXd::Zero(shape_numel(shape))),
        grad(Eigen::ArrayXd::Zero(shape_numel(shape))) {}

  void zero_grad() { grad.setZero(); }
};

// Complex 2-D convolution (cross-correlation convention) with weights
// W = W_R + i*W_I expanded into four real convolutions:
//   W (*) h = (a*W_R - b*W_I) + i(a*W_I + b*W_R),  h = a + i*b.
class ComplexConvLayer {
 public:
  ComplexConvLayer(std::string name, int in_channels, int out_channels, int ksize,
                   int stride = 1, int padding = -1);  // padding -1 => (k-1)/2 ("same")

  /// Rayleigh-magnitude, uniform-phase kernels; biases zero.
  void init(Rng& rng);

  ComplexTensor forward(const ComplexTensor& x);
  /// Accumulates parameter gradients, returns gradient w.r.t. the input.
  ComplexTensor backward(const ComplexTensor& grad_out);

  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }
  int ksize() const { return ksize_; }
  void params_into(std::vector<Parameter*>& out);

  Parameter w_re, w_im;  // [out, in, k, k]
  Parameter b_re, b_im;  // [out]

 private:
  int in_channels_, out_channels_, ksize_, stride_, padding_;
  ComplexTensor cached_input_;
};

// Whitening batch normalization for complex features: per channel, the
// (re, im) pair is centered and multiplied by the inverse square root of
// twice its 2x2 covariance, giving equal variance 1/2 in both components
// and zero cross-covariance, then an affine 2x2 Gamma and complex beta
// are applied.
class ComplexBatchNormLayer {
 public:
  ComplexBatchNormLayer(std::string name, int channels, double momentum = 0.1, double eps = 1e-8);

  ComplexTensor forward(const ComplexTensor& x, bool training);
  ComplexTensor backward(const ComplexTensor& grad_out);

  int channels() const { return channels_; }
  const std::string& name() const { return name_; }
  void params_into(std::vector<Parameter*>& out);

  Parameter gamma;  // [C, 4] row-major 2x2 per channel, init (1/sqrt(2)) * I
  Parameter beta;   // [C, 2] complex shift per channel, init 0

  // running statistics (training state, not optimized)
  Eigen::ArrayXd running_mean;  // [C, 2]
  Eigen::ArrayXd running_cov;   // [C, 3] = (Vrr, Vri, Vii)
  bool update_running_stats = true;

 private:
  std::string name_;
  int channels_;
  double momentum_, eps_;

  // backward cache (train mode)
  bool cached_training_ = false;
  Shape cached_shape_;
  Eigen::ArrayXd cached_centered_re_, cached_centered_im_;
  Eigen::ArrayXd cached_norm_re_, cached_norm_im_;
  Eigen::ArrayXd cached_whiten_;  // [C, 3] = (W00, W01, W11)
  Eigen::ArrayXd cached_cov_;     // [C, 3] eps-regularized covariance
};

/// ReLU applied to the real and imaginary parts independently.
class CRelu {
 public:
  ComplexTensor forward(const ComplexTensor& x);
  ComplexTensor backward(const ComplexTensor& grad_out) const;

 private:
  Eigen::ArrayXd mask_re_, mask_im_;
};

/// 2x2 max-pool, stride 2, per part. Spatial extents must be even.
class CMaxPool2 {
 public:
  ComplexTensor forward(const ComplexTensor& x);
  ComplexTensor backward(const ComplexTensor& grad_out) const;

 private:
  Shape in_shape_;
  std::vector<Eigen::Index> argmax_re_, argmax_im_;
};

/// Nearest-neighbor 2x spatial upsampling, identical on both parts.
class CUpsample2 {
 public:
  ComplexTensor forward(const ComplexTensor& x);
  ComplexTensor backward(const ComplexTensor& grad_out) const;

 private:
  Shape in_shape_;
};

// Stateless functional forms.
ComplexTensor crelu(const ComplexTensor& x);
ComplexTensor cmaxpool2(const ComplexTensor& x);
ComplexTensor upsample2(const ComplexTensor& x);

// Three conv -> batch norm -> ReLU units with dense feed-forward wiring:
// unit j consumes the channel concatenation of the block input and every
// earlier unit's output, and the block emits the full concatenation.
class DenseBlock {
 public:
  DenseBlock(std::string name, int in_channels, int growth, int ksize = 3,
             double bn_momentum = 0.1, double bn_eps = 1e-8);

  void init(Rng& rng);
  ComplexTensor forward(const ComplexTensor& x, bool training);
  ComplexTensor backward(const ComplexTensor& grad_out);

  int in_channels() const { return in_channels_; }
  int growth() const { return growth_; }
  int out_channels() const { return in_channels_ + 3 * growth_; }
  void params_into(std::vector<Parameter*>& out);
  void set_update_running_stats(bool v);

  struct Unit {
    ComplexConvLayer conv;
    ComplexBatchNormLayer bn;
    CRelu relu;
  };
  std::vector<Unit> units;

 private:
  int in_channels_, growth_;
  std::vector<ComplexTensor> cached_features_;  // block input + unit outputs
};

}  // namespace cdfnet
