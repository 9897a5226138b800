// Acceptance suite, part 2: desk-scale training efficacy, ablation ordering,
// cross-acceleration robustness and end-to-end determinism. The training
// protocol is pinned here: 40 synthetic 64x64 phantoms, R = 4, growth 8,
// batch 5, 30 epochs, RMSProp with the desk-scale learning rate 1e-3.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "cdfnet/fft.hpp"
#include "cdfnet/metrics.hpp"
#include "cdfnet/optim.hpp"
#include "cdfnet/phantom.hpp"
#include "gate.hpp"
#include "test_util.hpp"

using namespace cdfnet;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDataSeed = 7;
constexpr std::uint64_t kTrainSeed = 100;
constexpr int kTrainImages = 40;
constexpr int kHoldout = 10;
constexpr int kEpochs = 30;

struct Protocol {
  std::vector<ComplexTensor> train_images;
  std::vector<ComplexTensor> holdout;
};

Protocol make_protocol() {
  Protocol p;
  for (int i = 0; i < kTrainImages + kHoldout; ++i) {
    ComplexTensor img = gen_phantom(64, 64, Rng::derive_seed(kDataSeed, "phantom/" + std::to_string(i)));
    if (i < kTrainImages) {
      p.train_images.push_back(std::move(img));
    } else {
      p.holdout.push_back(std::move(img));
    }
  }
  return p;
}

TrainConfig desk_config(double lambda) {
  TrainConfig cfg;
  cfg.epochs = kEpochs;
  cfg.batch_size = 5;
  cfg.lambda = lambda;
  cfg.accel = 4.0;
  cfg.sigma_frac = 0.15;
  cfg.center_lines = 8;
  cfg.seed = kTrainSeed;
  cfg.opt.lr = 1e-3;  // desk-scale rate; the full-scale default stays 5e-5
  return cfg;
}

struct TrainedModel {
  std::unique_ptr<CdfNet> net;
  std::vector<EpochStats> log;
};

TrainedModel train_variant(const Protocol& data, bool dcl, double lambda) {
  CdfNetConfig net_cfg;
  net_cfg.growth = 8;
  net_cfg.dcl_enabled = dcl;
  TrainedModel model;
  model.net = std::make_unique<CdfNet>(net_cfg);
  model.net->init_params(Rng::derive_seed(kTrainSeed, "init"));
  RmsProp opt(model.net->parameters(), desk_config(lambda).opt);
  model.log = train(*model.net, opt, data.train_images, desk_config(lambda));
  return model;
}

struct Means {
  double ssim = 0.0, mse = 0.0, fom = 0.0;
};

// Shared evaluation: the holdout image i always gets the same mask at a
// given acceleration so every model sees identical inputs.
Means evaluate_model(CdfNet* net, const Protocol& data, double accel, Means* zero_fill) {
  Means model_means, zf_means;
  for (int i = 0; i < kHoldout; ++i) {
    const ComplexTensor& gt2d = data.holdout[static_cast<std::size_t>(i)];
    const SamplingMask mask =
        make_mask(64, 64, accel, 8, 0.15,
                  Rng::derive_seed(kDataSeed, "eval-mask/" + std::to_string(accel) + "/" + std::to_string(i)));
    const ComplexTensor gt = reshape(gt2d, {1, 1, 64, 64});
    const ComplexTensor y_u = undersample(fft2(gt), mask);
    const ComplexTensor x_u = ifft2(y_u);

    const ImageEval zf = evaluate_pair(x_u, gt);
    zf_means.ssim += zf.ssim;
    zf_means.mse += zf.mse;
    zf_means.fom += zf.pratts_fom;

    if (net != nullptr) {
      const CdfNet::Output out = net->config().dcl_enabled
                                     ? net->forward(x_u, y_u, {mask}, false)
                                     : net->forward(x_u, false);
      const ImageEval ev = evaluate_pair(out.x_r, gt);
      model_means.ssim += ev.ssim;
      model_means.mse += ev.mse;
      model_means.fom += ev.pratts_fom;
    }
  }
  model_means.ssim /= kHoldout;
  model_means.mse /= kHoldout;
  model_means.fom /= kHoldout;
  zf_means.ssim /= kHoldout;
  zf_means.mse /= kHoldout;
  zf_means.fom /= kHoldout;
  if (zero_fill != nullptr) *zero_fill = zf_means;
  return model_means;
}

int smoothed_loss_violations(const std::vector<EpochStats>& log) {
  // 5-epoch moving average of the composite loss should be non-increasing
  std::vector<double> avg;
  for (std::size_t i = 4; i < log.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = i - 4; j <= i; ++j) s += log[j].composite;
    avg.push_back(s / 5.0);
  }
  int violations = 0;
  for (std::size_t i = 1; i < avg.size(); ++i) {
    if (avg[i] > avg[i - 1]) ++violations;
  }
  return violations;
}

int run_cmd(const std::string& args) {
  const std::string cmd = std::string(CDFNET_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main() {
  test::Gate gate;

  const Protocol data = make_protocol();
  TrainedModel full, bl2, bl3;
  Means full4, zf4;

  gate.run(5, "desk-scale training beats the zero-filled input", [&](std::string& detail) {
    full = train_variant(data, /*dcl=*/true, /*lambda=*/2.0);
    full4 = evaluate_model(full.net.get(), data, 4.0, &zf4);
    const int violations = smoothed_loss_violations(full.log);
    std::ostringstream os;
    os << "ssim " << full4.ssim << " vs zero-fill " << zf4.ssim << " (margin "
       << full4.ssim - zf4.ssim << "), mse " << full4.mse << " vs " << zf4.mse << ", fom "
       << full4.fom << " vs " << zf4.fom << ", smoothed-loss violations " << violations;
    detail = os.str();
    return full4.ssim >= zf4.ssim + 0.02 && full4.mse < zf4.mse && full4.fom > zf4.fom &&
           violations <= 1;
  });

  gate.run(6, "ablation ordering: full model fom >= no-DCL and >= lambda=0", [&](std::string& detail) {
    bl2 = train_variant(data, /*dcl=*/false, /*lambda=*/2.0);
    bl3 = train_variant(data, /*dcl=*/true, /*lambda=*/0.0);
    const Means m2 = evaluate_model(bl2.net.get(), data, 4.0, nullptr);
    const Means m3 = evaluate_model(bl3.net.get(), data, 4.0, nullptr);
    std::ostringstream os;
    os << "fom full " << full4.fom << ", no-DCL " << m2.fom << ", lambda=0 " << m3.fom;
    detail = os.str();
    return full4.fom >= m2.fom && full4.fom >= m3.fom;
  });

  gate.run(7, "model trained at 4x still beats zero-filling at 6x", [&](std::string& detail) {
    Means zf6;
    const Means full6 = evaluate_model(full.net.get(), data, 6.0, &zf6);
    std::ostringstream os;
    os << "ssim " << full6.ssim << " vs zero-fill " << zf6.ssim << ", mse " << full6.mse << " vs "
       << zf6.mse;
    detail = os.str();
    return full6.ssim > zf6.ssim && full6.mse < zf6.mse;
  });

  gate.run(9, "end-to-end runs with identical seeds are bitwise identical", [&](std::string& detail) {
    const fs::path work = fs::temp_directory_path() / "cdfnet_acceptance_e2e";
    fs::remove_all(work);
    fs::create_directories(work);
    for (const char* tag : {"a", "b"}) {
      const fs::path root = work / tag;
      if (run_cmd("gen-phantoms --count 6 --size 32 --seed 71 --out " + (root / "data").string()) != 0 ||
          run_cmd("make-mask --size 32 --accel 2 --center-lines 4 --seed 72 --out " +
                  (root / "mask").string()) != 0 ||
          run_cmd("train --data " + (root / "data").string() + " --out " + (root / "train").string() +
                  " --epochs 3 --batch-size 2 --growth 2 --lr 1e-3 --seed 73") != 0 ||
          run_cmd("reconstruct --checkpoint " + (root / "train" / "checkpoint_final.cdfc").string() +
                  " --image " + (root / "data" / "phantom_005.ctns").string() + " --mask " +
                  (root / "mask" / "mask.pgm").string() + " --out " + (root / "recon").string()) != 0 ||
          run_cmd("evaluate --recon " + (root / "recon" / "x_r.ctns").string() + " --gt " +
                  (root / "data" / "phantom_005.ctns").string() + " --out " +
                  (root / "eval").string()) != 0) {
        detail = "pipeline command failed under " + root.string();
        return false;
      }
    }
    const std::pair<const char*, const char*> artifacts[] = {
        {"train", "checkpoint_final.cdfc"}, {"train", "loss.csv"},   {"recon", "x_r.ctns"},
        {"recon", "x_tilde.ctns"},          {"eval", "report.json"}, {"eval", "report.csv"}};
    for (const auto& [dir, file] : artifacts) {
      const std::string a = slurp(work / "a" / dir / file);
      const std::string b = slurp(work / "b" / dir / file);
      if (a.empty() || a != b) {
        detail = std::string("mismatch or empty artifact: ") + dir + "/" + file;
        return false;
      }
    }
    detail = "checkpoints, tensors, loss log and reports byte-identical";
    return true;
  });

  return gate.finish();
}
