#pragma once

#include <cstdint>
#include <optional>

#include "cdfnet/layers.hpp"
#include "cdfnet/sampling.hpp"

namespace cdfnet {

/// Replaces predicted k-space with the acquired samples on the sampled
/// lines and keeps the prediction elsewhere:
///   y_r(z) = y_u(z) for z in the mask, fft2(x_tilde)(z) otherwise,
/// then returns ifft2(y_r). Parameter-free. `masks` holds one mask per
/// batch entry, or a single mask shared by the whole batch.
ComplexTensor dcl(const ComplexTensor& x_tilde, const ComplexTensor& y_u,
                  const std::vector<SamplingMask>& masks);

/// Adjoint of `dcl` w.r.t. x_tilde: acquired bins receive zero gradient.
ComplexTensor dcl_backward(const ComplexTensor& grad_x_r, const std::vector<SamplingMask>& masks);

struct CdfNetConfig {
  int growth = 8;       // channels added per dense-block conv; feature width
  int in_channels = 1;  // complex image channels
  int ksize = 3;
  bool dcl_enabled = true;
  double bn_momentum = 0.1;
  double bn_eps = 1e-8;
};

// Encoder/decoder network over complex images: four dense encoder blocks
// with 2x2 max-pooling, a dense bottleneck, four dense decoder blocks with
// 2x nearest upsampling and skip concatenation from the matching encoder,
// a 1x1 reconstruction conv, and the optional data-consistency head.
// Each dense block is followed by a 1x1 conv resetting the width to
// `growth` channels.
class CdfNet {
 public:
  explicit CdfNet(const CdfNetConfig& config);

  void init_params(std::uint64_t seed);

  struct Output {
    ComplexTensor x_r;      // final reconstruction
    ComplexTensor x_tilde;  // pre-data-consistency reconstruction
  };

  /// x_u: [B,1,H,W] with H, W divisible by 16. When the data-consistency
  /// head is enabled, y_u and masks must be supplied (masks: one per batch
  /// entry or a single shared one).
  Output forward(const ComplexTensor& x_u, const ComplexTensor& y_u,
                 const std::vector<SamplingMask>& masks, bool training);

  /// Inference-only convenience without data consistency inputs
  /// (valid only when dcl is disabled).
  Output forward(const ComplexTensor& x_u, bool training);

  /// Gradient w.r.t. the network input, with parameter gradients accumulated.
  ComplexTensor backward(const ComplexTensor& grad_x_r);

  std::vector<Parameter*> parameters();

  struct StateTensor {
    std::string name;
    Shape shape;
    Eigen::ArrayXd* values;
  };
  /// Parameters plus batch-norm running statistics, for checkpointing.
  std::vector<StateTensor> state_tensors();
  std::size_t parameter_count();

  const CdfNetConfig& config() const { return config_; }
  void zero_grad();
  void set_update_running_stats(bool v);

 private:
  struct EncoderStage {
    DenseBlock block;
    ComplexConvLayer transition;
    CMaxPool2 pool;
  };
  struct DecoderStage {
    CUpsample2 upsample;
    DenseBlock block;
    ComplexConvLayer transition;
  };

  CdfNetConfig config_;
  std::vector<EncoderStage> encoders_;
  DenseBlock bottleneck_;
  ComplexConvLayer bottleneck_transition_;
  std::vector<DecoderStage> decoders_;
  ComplexConvLayer recon_;

  // forward/backward caches
  std::vector<SamplingMask> cached_masks_;
  std::vector<Eigen::Index> cached_skip_channels_;
  std::vector<ComplexTensor> cached_skip_grads_;
};

}  // namespace cdfnet
