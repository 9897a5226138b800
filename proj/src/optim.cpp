#include "cdfnet/optim.hpp"

#include <algorithm>
#include <cmath>

#include "cdfnet/fft.hpp"
#include "cdfnet/phantom.hpp"
#include "cdfnet/rng.hpp"

namespace cdfnet {

RmsProp::RmsProp(std::vector<Parameter*> params, RmsPropConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  require(cfg.lr > 0.0, "rmsprop: learning rate must be positive");
  require(cfg.decay > 0.0 && cfg.decay < 1.0, "rmsprop: decay must lie in (0,1)");
  require(cfg.eps > 0.0, "rmsprop: eps must be positive");
  v_.reserve(params_.size());
  for (const Parameter* p : params_) v_.push_back(Eigen::ArrayXd::Zero(p->value.size()));
}

void RmsProp::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (!p.grad.isFinite().all()) {
      throw NumericError("rmsprop: non-finite gradient in parameter '" + p.name + "'");
    }
    v_[i] = cfg_.decay * v_[i] + (1.0 - cfg_.decay) * p.grad.square();
    p.value -= cfg_.lr * p.grad / (v_[i].sqrt() + cfg_.eps);
  }
}

std::vector<CdfNet::StateTensor> RmsProp::state_tensors() {
  std::vector<CdfNet::StateTensor> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back({"opt." + params_[i]->name + ".v", params_[i]->shape, &v_[i]});
  }
  return out;
}

void TrainConfig::validate() const {
  require(epochs >= 0, "train config: epochs must be non-negative");
  require(batch_size >= 1, "train config: batch size must be positive");
  require(lambda >= 0.0, "train config: lambda must be non-negative");
  require(accel >= 1.0, "train config: acceleration must be >= 1");
  require(sigma_frac > 0.0, "train config: sigma_frac must be positive");
  require(center_lines >= 0, "train config: center lines must be non-negative");
  require(checkpoint_every >= 1, "train config: checkpoint cadence must be positive");
  RmsProp dummy({}, opt);  // validates optimizer hyperparameters
}

nlohmann::json train_config_to_json(const TrainConfig& cfg, const CdfNetConfig& net_cfg) {
  return nlohmann::json{
      {"epochs", cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"lambda", cfg.lambda},
      {"accel", cfg.accel},
      {"sigma_frac", cfg.sigma_frac},
      {"center_lines", cfg.center_lines},
      {"augment", cfg.augment},
      {"checkpoint_every", cfg.checkpoint_every},
      {"seed", cfg.seed},
      {"lr", cfg.opt.lr},
      {"decay", cfg.opt.decay},
      {"opt_eps", cfg.opt.eps},
      {"growth", net_cfg.growth},
      {"dcl", net_cfg.dcl_enabled},
  };
}

void train_config_from_json(const nlohmann::json& j, TrainConfig& cfg, CdfNetConfig& net_cfg) {
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.lambda = j.value("lambda", cfg.lambda);
  cfg.accel = j.value("accel", cfg.accel);
  cfg.sigma_frac = j.value("sigma_frac", cfg.sigma_frac);
  cfg.center_lines = j.value("center_lines", cfg.center_lines);
  cfg.augment = j.value("augment", cfg.augment);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.opt.lr = j.value("lr", cfg.opt.lr);
  cfg.opt.decay = j.value("decay", cfg.opt.decay);
  cfg.opt.eps = j.value("opt_eps", cfg.opt.eps);
  net_cfg.growth = j.value("growth", net_cfg.growth);
  net_cfg.dcl_enabled = j.value("dcl", net_cfg.dcl_enabled);
}

namespace {

// Verifies the acquired k-space lines survived the forward pass unchanged
// (checked on batch entry 0).
void check_dc_invariant(const ComplexTensor& x_r, const ComplexTensor& y_u,
                        const SamplingMask& mask) {
  const Eigen::Index H = mask.height, W = mask.width;
  ComplexTensor x0({H, W}, x_r.re().segment(0, H * W), x_r.im().segment(0, H * W));
  const ComplexTensor y_r = fft2(x0);
  for (Eigen::Index y = 0; y < H; ++y) {
    if (!mask.row_selected(y)) continue;
    const double err = std::max(
        (y_r.re().segment(y * W, W) - y_u.re().segment(y * W, W)).abs().maxCoeff(),
        (y_r.im().segment(y * W, W) - y_u.im().segment(y * W, W)).abs().maxCoeff());
    if (err > 1e-10) {
      throw NumericError("data-consistency invariant violated during training (err " +
                         std::to_string(err) + ")");
    }
  }
}

}  // namespace

std::vector<EpochStats> train(CdfNet& net, RmsProp& opt, const std::vector<ComplexTensor>& images,
                              const TrainConfig& cfg, int start_epoch,
                              const TrainCallbacks& callbacks) {
  cfg.validate();
  require(!images.empty(), "train: dataset is empty");
  const Eigen::Index H = images.front().dim(0), W = images.front().dim(1);
  for (const ComplexTensor& img : images) {
    require(img.rank() == 2 && img.dim(0) == H && img.dim(1) == W,
            "train: all images must share one [H,W] shape");
  }
  const LossConfig loss_cfg = cfg.loss();
  const bool dcl_on = net.config().dcl_enabled;

  std::vector<EpochStats> log;
  const std::size_t n_images = images.size();

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    Rng mask_rng(Rng::derive_seed(cfg.seed, "mask/epoch" + std::to_string(epoch)));
    Rng aug_rng(Rng::derive_seed(cfg.seed, "augment/epoch" + std::to_string(epoch)));
    Rng shuffle_rng(Rng::derive_seed(cfg.seed, "shuffle/epoch" + std::to_string(epoch)));

    std::vector<std::size_t> order(n_images);
    for (std::size_t i = 0; i < n_images; ++i) order[i] = i;
    for (std::size_t i = n_images; i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
    }

    EpochStats stats;
    stats.epoch = epoch;
    std::size_t seen = 0;
    bool checked_dc = false;

    for (std::size_t batch_start = 0; batch_start < n_images; batch_start += cfg.batch_size) {
      const std::size_t bsz = std::min<std::size_t>(cfg.batch_size, n_images - batch_start);
      std::vector<ComplexTensor> batch_xf;
      std::vector<SamplingMask> masks;
      batch_xf.reserve(bsz);
      masks.reserve(bsz);
      for (std::size_t i = 0; i < bsz; ++i) {
        ComplexTensor img = images[order[batch_start + i]];
        if (cfg.augment) img = rigid_augment(img, aug_rng.next_u64());
        batch_xf.push_back(std::move(img));
        masks.push_back(make_mask(H, W, cfg.accel, cfg.center_lines, cfg.sigma_frac,
                                  mask_rng.next_u64()));
      }
      const ComplexTensor x_f = stack_images(batch_xf);
      ComplexTensor y_u = fft2(x_f);
      for (std::size_t i = 0; i < bsz; ++i) {
        // zero the skipped lines per sample
        for (Eigen::Index y = 0; y < H; ++y) {
          if (masks[i].row_selected(y)) continue;
          const Eigen::Index off = (static_cast<Eigen::Index>(i) * H + y) * W;
          y_u.re().segment(off, W).setZero();
          y_u.im().segment(off, W).setZero();
        }
      }
      const ComplexTensor x_u = ifft2(y_u);

      net.zero_grad();
      const CdfNet::Output out = net.forward(x_u, y_u, masks, /*training=*/true);
      const CompositeLoss loss = composite_loss(out.x_r, x_f, loss_cfg);
      if (!std::isfinite(loss.value)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      net.backward(loss.grad);
      opt.step();

      if (dcl_on && !checked_dc) {
        check_dc_invariant(out.x_r, y_u, masks[0]);
        checked_dc = true;
      }

      stats.l2 += loss.l2 * static_cast<double>(bsz);
      stats.ssim += loss.ssim * static_cast<double>(bsz);
      stats.composite += loss.value * static_cast<double>(bsz);
      seen += bsz;
    }

    stats.l2 /= static_cast<double>(seen);
    stats.ssim /= static_cast<double>(seen);
    stats.composite /= static_cast<double>(seen);
    log.push_back(stats);
    if (callbacks.on_epoch) callbacks.on_epoch(stats);
    const bool last = epoch + 1 == cfg.epochs;
    if (callbacks.on_checkpoint && ((epoch + 1) % cfg.checkpoint_every == 0 || last)) {
      callbacks.on_checkpoint(epoch);
    }
  }
  return log;
}

Checkpoint make_checkpoint(CdfNet& net, RmsProp* opt, nlohmann::json config) {
  Checkpoint ckpt;
  ckpt.config = std::move(config);
  for (const CdfNet::StateTensor& t : net.state_tensors()) {
    ckpt.tensors.push_back({t.name, t.shape, *t.values});
  }
  if (opt != nullptr) {
    for (const CdfNet::StateTensor& t : opt->state_tensors()) {
      ckpt.tensors.push_back({t.name, t.shape, *t.values});
    }
  }
  return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, CdfNet& net, RmsProp* opt) {
  auto restore = [&ckpt](const CdfNet::StateTensor& t) {
    const NamedTensor* found = ckpt.find(t.name);
    require(found != nullptr, "checkpoint: missing tensor '" + t.name + "'");
    require(found->values.size() == t.values->size(),
            "checkpoint: tensor '" + t.name + "' has wrong size");
    *t.values = found->values;
  };
  for (const CdfNet::StateTensor& t : net.state_tensors()) restore(t);
  if (opt != nullptr) {
    for (const CdfNet::StateTensor& t : opt->state_tensors()) restore(t);
  }
}

}  // namespace cdfnet
