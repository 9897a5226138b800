#pragma once

#include <functional>

#include "cdfnet/io.hpp"
#include "cdfnet/losses.hpp"
#include "cdfnet/network.hpp"

namespace cdfnet {

struct RmsPropConfig {
  double lr = 5e-5;
  double decay = 0.9;  // accumulator coefficient rho
  double eps = 1e-8;
};

// RMSProp: v <- rho*v + (1-rho)*g^2;  theta <- theta - lr * g / (sqrt(v) + eps).
class RmsProp {
 public:
  RmsProp(std::vector<Parameter*> params, RmsPropConfig cfg);

  /// One update from the gradients currently held in the parameters.
  /// Throws NumericError naming the parameter on non-finite gradients.
  void step();

  const RmsPropConfig& config() const { return cfg_; }
  std::vector<CdfNet::StateTensor> state_tensors();

 private:
  std::vector<Parameter*> params_;
  std::vector<Eigen::ArrayXd> v_;
  RmsPropConfig cfg_;
};

struct TrainConfig {
  int epochs = 50;          // target epoch count (resume continues toward it)
  int batch_size = 5;
  double lambda = 2.0;
  double accel = 4.0;
  double sigma_frac = 0.15;
  int center_lines = 8;
  bool augment = false;
  int checkpoint_every = 10;
  std::uint64_t seed = 1;   // master seed; init/mask/augment/shuffle streams derive from it
  RmsPropConfig opt;

  LossConfig loss() const { return LossConfig{lambda}; }
  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg, const CdfNetConfig& net_cfg);
void train_config_from_json(const nlohmann::json& j, TrainConfig& cfg, CdfNetConfig& net_cfg);

struct EpochStats {
  int epoch = 0;
  double l2 = 0.0;
  double ssim = 0.0;  // unweighted (1 - S) term
  double composite = 0.0;
};

struct TrainCallbacks {
  std::function<void(const EpochStats&)> on_epoch;
  std::function<void(int epoch)> on_checkpoint;  // cadence hits and the final epoch
};

/// Supervised training over fully-sampled [H,W] images. Per epoch every
/// sample gets a freshly drawn mask (and optional rigid augmentation), is
/// retrospectively undersampled and zero-filled, and the composite loss
/// drives one RMSProp step per batch. Fully deterministic given cfg.seed.
/// Returns per-epoch mean losses for epochs [start_epoch, cfg.epochs).
std::vector<EpochStats> train(CdfNet& net, RmsProp& opt, const std::vector<ComplexTensor>& images,
                              const TrainConfig& cfg, int start_epoch = 0,
                              const TrainCallbacks& callbacks = {});

/// Checkpoint holding network parameters, batch-norm running statistics and
/// (optionally) optimizer accumulators, with the given config echo.
Checkpoint make_checkpoint(CdfNet& net, RmsProp* opt, nlohmann::json config);
/// Restores every tensor found in the checkpoint into the network/optimizer.
void apply_checkpoint(const Checkpoint& ckpt, CdfNet& net, RmsProp* opt);

}  // namespace cdfnet
