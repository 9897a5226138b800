#include "cdfnet/network.hpp"

#include "cdfnet/fft.hpp"

namespace cdfnet {

namespace {

void check_mask_batch(const ComplexTensor& t, const std::vector<SamplingMask>& masks) {
  require(!masks.empty(), "dcl: at least one sampling mask required");
  const Eigen::Index B = t.dim(0);
  require(static_cast<Eigen::Index>(masks.size()) == B || masks.size() == 1,
          "dcl: mask count must be 1 or match the batch size");
  for (const SamplingMask& m : masks) {
    require(m.height == t.dim(-2) && m.width == t.dim(-1), "dcl: mask extents do not match tensor");
  }
}

const SamplingMask& mask_for(const std::vector<SamplingMask>& masks, Eigen::Index b) {
  return masks.size() == 1 ? masks.front() : masks[static_cast<std::size_t>(b)];
}

}  // namespace

ComplexTensor dcl(const ComplexTensor& x_tilde, const ComplexTensor& y_u,
                  const std::vector<SamplingMask>& masks) {
  require(x_tilde.rank() == 4 && x_tilde.dim(1) == 1, "dcl: [B,1,H,W] tensor expected");
  require_same_shape(x_tilde, y_u, "dcl");
  check_mask_batch(x_tilde, masks);

  const Eigen::Index B = x_tilde.dim(0), H = x_tilde.dim(2), W = x_tilde.dim(3);
  const FftPlan plan(H, W);
  ComplexTensor y_r = plan.forward(x_tilde);
  for (Eigen::Index b = 0; b < B; ++b) {
    const SamplingMask& m = mask_for(masks, b);
    for (Eigen::Index y = 0; y < H; ++y) {
      if (!m.row_selected(y)) continue;
      const Eigen::Index off = (b * H + y) * W;
      y_r.re().segment(off, W) = y_u.re().segment(off, W);
      y_r.im().segment(off, W) = y_u.im().segment(off, W);
    }
  }
  return plan.inverse(y_r);
}

ComplexTensor dcl_backward(const ComplexTensor& grad_x_r, const std::vector<SamplingMask>& masks) {
  require(grad_x_r.rank() == 4 && grad_x_r.dim(1) == 1, "dcl_backward: [B,1,H,W] tensor expected");
  check_mask_batch(grad_x_r, masks);

  const Eigen::Index B = grad_x_r.dim(0), H = grad_x_r.dim(2), W = grad_x_r.dim(3);
  const FftPlan plan(H, W);
  // adjoint of ifft2 is fft2 (unitary), then zero the acquired bins, then
  // the adjoint of fft2 is ifft2.
  ComplexTensor g = plan.forward(grad_x_r);
  for (Eigen::Index b = 0; b < B; ++b) {
    const SamplingMask& m = mask_for(masks, b);
    for (Eigen::Index y = 0; y < H; ++y) {
      if (!m.row_selected(y)) continue;
      const Eigen::Index off = (b * H + y) * W;
      g.re().segment(off, W).setZero();
      g.im().segment(off, W).setZero();
    }
  }
  return plan.inverse(g);
}

CdfNet::CdfNet(const CdfNetConfig& config)
    : config_(config),
      bottleneck_("bottleneck.block", config.growth, config.growth, config.ksize, config.bn_momentum,
                  config.bn_eps),
      bottleneck_transition_("bottleneck.transition", config.growth + 3 * config.growth, config.growth,
                             1),
      recon_("recon", config.growth, 1, 1) {
  require(config.growth > 0, "CdfNet: growth must be positive");
  require(config.in_channels > 0, "CdfNet: in_channels must be positive");
  const int g = config.growth;
  for (int k = 0; k < 4; ++k) {
    const int in_ch = (k == 0) ? config.in_channels : g;
    const std::string name = "enc" + std::to_string(k + 1);
    encoders_.push_back(EncoderStage{
        DenseBlock(name + ".block", in_ch, g, config.ksize, config.bn_momentum, config.bn_eps),
        ComplexConvLayer(name + ".transition", in_ch + 3 * g, g, 1), CMaxPool2{}});
  }
  for (int k = 0; k < 4; ++k) {
    const std::string name = "dec" + std::to_string(k + 1);
    decoders_.push_back(DecoderStage{
        CUpsample2{},
        DenseBlock(name + ".block", 2 * g, g, config.ksize, config.bn_momentum, config.bn_eps),
        ComplexConvLayer(name + ".transition", 2 * g + 3 * g, g, 1)});
  }
}

void CdfNet::init_params(std::uint64_t seed) {
  Rng rng(seed);
  for (EncoderStage& e : encoders_) {
    e.block.init(rng);
    e.transition.init(rng);
  }
  bottleneck_.init(rng);
  bottleneck_transition_.init(rng);
  for (DecoderStage& d : decoders_) {
    d.block.init(rng);
    d.transition.init(rng);
  }
  recon_.init(rng);
}

CdfNet::Output CdfNet::forward(const ComplexTensor& x_u, const ComplexTensor& y_u,
                               const std::vector<SamplingMask>& masks, bool training) {
  require(x_u.rank() == 4 && x_u.dim(1) == config_.in_channels,
          "CdfNet: [B," + std::to_string(config_.in_channels) + ",H,W] input expected");
  const Eigen::Index H = x_u.dim(2), W = x_u.dim(3);
  require(H % 16 == 0 && W % 16 == 0,
          "CdfNet: spatial extents must be divisible by 16, got " + shape_to_string(x_u.shape()));
  if (config_.dcl_enabled) {
    require(!masks.empty(), "CdfNet: sampling mask required when the data-consistency head is enabled");
    require_same_shape(x_u, y_u, "CdfNet forward (y_u)");
  }

  // Encoder: dense block -> 1x1 transition -> pool; pre-pool output is the skip.
  std::vector<ComplexTensor> skips;
  ComplexTensor h = x_u;
  for (EncoderStage& e : encoders_) {
    h = e.transition.forward(e.block.forward(h, training));
    skips.push_back(h);
    h = e.pool.forward(h);
  }

  h = bottleneck_transition_.forward(bottleneck_.forward(h, training));

  // Decoder: upsample -> concat matching skip -> dense block -> transition.
  cached_skip_channels_.clear();
  for (std::size_t k = 0; k < decoders_.size(); ++k) {
    DecoderStage& d = decoders_[k];
    const ComplexTensor up = d.upsample.forward(h);
    const ComplexTensor& skip = skips[skips.size() - 1 - k];
    cached_skip_channels_.push_back(skip.dim(1));
    h = d.transition.forward(d.block.forward(concat_channels({&up, &skip}), training));
  }

  Output out;
  out.x_tilde = recon_.forward(h);
  if (config_.dcl_enabled) {
    cached_masks_ = masks;
    out.x_r = dcl(out.x_tilde, y_u, masks);
  } else {
    cached_masks_.clear();
    out.x_r = out.x_tilde;
  }
  return out;
}

CdfNet::Output CdfNet::forward(const ComplexTensor& x_u, bool training) {
  require(!config_.dcl_enabled,
          "CdfNet: mask and y_u are required because the data-consistency head is enabled");
  return forward(x_u, ComplexTensor{}, {}, training);
}

ComplexTensor CdfNet::backward(const ComplexTensor& grad_x_r) {
  ComplexTensor g = grad_x_r;
  if (config_.dcl_enabled) {
    g = dcl_backward(g, cached_masks_);
  }
  g = recon_.backward(g);
  for (std::size_t k = decoders_.size(); k-- > 0;) {
    DecoderStage& d = decoders_[k];
    g = d.block.backward(d.transition.backward(g));
    std::vector<ComplexTensor> parts =
        split_channels(g, {g.dim(1) - cached_skip_channels_[k], cached_skip_channels_[k]});
    // parts[1] flows into the matching encoder skip; parts[0] continues down.
    g = d.upsample.backward(parts[0]);
    // stash the skip gradient on the encoder side
    cached_skip_grads_.push_back(std::move(parts[1]));
  }
  g = bottleneck_.backward(bottleneck_transition_.backward(g));
  // decoder stage k consumed encoder (3-k)'s skip, and the loop above ran
  // k = 3..0, so cached_skip_grads_[i] already belongs to encoder i
  for (std::size_t k = encoders_.size(); k-- > 0;) {
    EncoderStage& e = encoders_[k];
    ComplexTensor ge = e.pool.backward(g);
    ge = ge + cached_skip_grads_[k];
    g = e.block.backward(e.transition.backward(ge));
  }
  cached_skip_grads_.clear();
  return g;
}

std::vector<Parameter*> CdfNet::parameters() {
  std::vector<Parameter*> out;
  for (EncoderStage& e : encoders_) {
    e.block.params_into(out);
    e.transition.params_into(out);
  }
  bottleneck_.params_into(out);
  bottleneck_transition_.params_into(out);
  for (DecoderStage& d : decoders_) {
    d.block.params_into(out);
    d.transition.params_into(out);
  }
  recon_.params_into(out);
  return out;
}

std::vector<CdfNet::StateTensor> CdfNet::state_tensors() {
  std::vector<StateTensor> out;
  for (Parameter* p : parameters()) out.push_back({p->name, p->shape, &p->value});
  auto add_bn = [&out](DenseBlock& block) {
    for (DenseBlock::Unit& u : block.units) {
      const Eigen::Index c = u.bn.channels();
      out.push_back({u.bn.name() + ".running_mean", Shape{c, 2}, &u.bn.running_mean});
      out.push_back({u.bn.name() + ".running_cov", Shape{c, 3}, &u.bn.running_cov});
    }
  };
  for (EncoderStage& e : encoders_) add_bn(e.block);
  add_bn(bottleneck_);
  for (DecoderStage& d : decoders_) add_bn(d.block);
  return out;
}

std::size_t CdfNet::parameter_count() {
  std::size_t n = 0;
  for (Parameter* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void CdfNet::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

void CdfNet::set_update_running_stats(bool v) {
  for (EncoderStage& e : encoders_) e.block.set_update_running_stats(v);
  bottleneck_.set_update_running_stats(v);
  for (DecoderStage& d : decoders_) d.block.set_update_running_stats(v);
}

}  // namespace cdfnet
