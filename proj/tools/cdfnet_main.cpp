// Command-line pipeline: phantom generation, mask generation, training,
// reconstruction and evaluation. Every command writes its outputs plus a
// manifest.json (effective config, seeds, inputs/outputs) into --out, and is
// replayable from that manifest to bitwise-identical outputs.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cdfnet/fft.hpp"
#include "cdfnet/io.hpp"
#include "cdfnet/metrics.hpp"
#include "cdfnet/optim.hpp"
#include "cdfnet/phantom.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cdfnet;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class ManifestWriter {
 public:
  ManifestWriter(std::string command, const fs::path& out_dir, json config)
      : out_dir_(out_dir), started_(std::chrono::system_clock::now()) {
    fs::create_directories(out_dir);
    manifest_["command"] = std::move(command);
    manifest_["tool_version"] = kVersion;
    manifest_["config"] = std::move(config);
    manifest_["inputs"] = json::object();
    manifest_["outputs"] = json::array();
  }

  void input(const std::string& key, const fs::path& p) { manifest_["inputs"][key] = p.string(); }
  void output(const fs::path& p) { manifest_["outputs"].push_back(p.filename().string()); }
  fs::path dir() const { return out_dir_; }

  void write() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(started_);
    char iso[32];
    std::strftime(iso, sizeof(iso), "%FT%TZ", std::gmtime(&t));
    manifest_["wall_clock"] = {
        {"started", iso},
        {"seconds", std::chrono::duration<double>(now - started_).count()}};
    std::ofstream out(out_dir_ / "manifest.json", std::ios::trunc);
    out << manifest_.dump(2) << "\n";
  }

 private:
  fs::path out_dir_;
  json manifest_;
  std::chrono::system_clock::time_point started_;
};

std::vector<fs::path> sorted_tensor_files(const fs::path& dir) {
  require(fs::is_directory(dir), "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".ctns") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

ComplexTensor load_image_tensor(const fs::path& path) {
  ComplexTensor t = load_tensor(path);
  if (t.rank() == 4) {
    require(t.dim(0) == 1 && t.dim(1) == 1, "expected a single [H,W] image in " + path.string());
    t = reshape(t, Shape{t.dim(2), t.dim(3)});
  }
  require(t.rank() == 2, "expected a [H,W] image in " + path.string());
  return t;
}

// ---------------------------------------------------------------------------

int cmd_gen_phantoms(int count, Eigen::Index size, std::uint64_t seed, const fs::path& out) {
  ManifestWriter manifest("gen-phantoms", out,
                          {{"count", count}, {"size", size}, {"seed", seed}});
  for (int i = 0; i < count; ++i) {
    const std::uint64_t phantom_seed = Rng::derive_seed(seed, "phantom/" + std::to_string(i));
    const ComplexTensor phantom = gen_phantom(size, size, phantom_seed);
    char name[32];
    std::snprintf(name, sizeof(name), "phantom_%03d.ctns", i);
    save_tensor(phantom, out / name);
    manifest.output(out / name);
  }
  manifest.write();
  std::cout << "wrote " << count << " phantoms to " << out << "\n";
  return 0;
}

int cmd_make_mask(Eigen::Index size, double accel, int center_lines, double sigma_frac,
                  std::uint64_t seed, const fs::path& out, const std::string& format) {
  const SamplingMask mask = make_mask(size, size, accel, center_lines, sigma_frac, seed);
  ManifestWriter manifest("make-mask", out,
                          {{"size", size},
                           {"accel", accel},
                           {"center_lines", center_lines},
                           {"sigma_frac", sigma_frac},
                           {"seed", seed},
                           {"format", format},
                           {"selected_lines", mask.selected_count()}});
  if (format == "pgm") {
    save_mask_pgm(mask, out / "mask.pgm");
    manifest.output(out / "mask.pgm");
  } else {
    save_mask_tensor(mask, out / "mask.ctns");
    manifest.output(out / "mask.ctns");
  }
  manifest.write();
  std::cout << "mask with " << mask.selected_count() << "/" << size << " lines written to " << out
            << "\n";
  return 0;
}

int cmd_train(const fs::path& data_dir, const fs::path& out, const fs::path& config_path,
              const fs::path& resume_path, const CLI::App* cmd, TrainConfig cfg,
              CdfNetConfig net_cfg) {
  // precedence: defaults < config file < explicit flags
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    require(in.good(), "cannot open config file: " + config_path.string());
    json j = json::parse(in, nullptr, false);
    require(!j.is_discarded(), "malformed config file: " + config_path.string());
    TrainConfig file_cfg = cfg;
    CdfNetConfig file_net = net_cfg;
    train_config_from_json(j, file_cfg, file_net);
    const TrainConfig flag_cfg = cfg;
    const CdfNetConfig flag_net = net_cfg;
    cfg = file_cfg;
    net_cfg = file_net;
    auto passed = [cmd](const std::string& name) { return cmd->count(name) > 0; };
    if (passed("--epochs")) cfg.epochs = flag_cfg.epochs;
    if (passed("--batch-size")) cfg.batch_size = flag_cfg.batch_size;
    if (passed("--lambda")) cfg.lambda = flag_cfg.lambda;
    if (passed("--accel")) cfg.accel = flag_cfg.accel;
    if (passed("--sigma-frac")) cfg.sigma_frac = flag_cfg.sigma_frac;
    if (passed("--center-lines")) cfg.center_lines = flag_cfg.center_lines;
    if (passed("--augment")) cfg.augment = flag_cfg.augment;
    if (passed("--checkpoint-every")) cfg.checkpoint_every = flag_cfg.checkpoint_every;
    if (passed("--seed")) cfg.seed = flag_cfg.seed;
    if (passed("--lr")) cfg.opt.lr = flag_cfg.opt.lr;
    if (passed("--decay")) cfg.opt.decay = flag_cfg.opt.decay;
    if (passed("--growth")) net_cfg.growth = flag_net.growth;
    if (passed("--no-dcl")) net_cfg.dcl_enabled = flag_net.dcl_enabled;
  }
  cfg.validate();

  int start_epoch = 0;
  Checkpoint resume_ckpt;
  if (!resume_path.empty()) {
    resume_ckpt = load_checkpoint(resume_path);
    TrainConfig saved_cfg;
    CdfNetConfig saved_net;
    train_config_from_json(resume_ckpt.config, saved_cfg, saved_net);
    net_cfg = saved_net;  // the architecture comes from the checkpoint
    start_epoch = resume_ckpt.config.value("epochs_completed", 0);
  }

  const std::vector<fs::path> files = sorted_tensor_files(data_dir);
  require(!files.empty(), "no .ctns images found in " + data_dir.string());
  std::vector<ComplexTensor> images;
  images.reserve(files.size());
  for (const fs::path& f : files) images.push_back(load_image_tensor(f));

  const json effective = train_config_to_json(cfg, net_cfg);
  ManifestWriter manifest("train", out, effective);
  manifest.input("data", data_dir);
  if (!resume_path.empty()) manifest.input("resume", resume_path);

  CdfNet net(net_cfg);
  net.init_params(Rng::derive_seed(cfg.seed, "init"));
  RmsProp opt(net.parameters(), cfg.opt);
  if (!resume_path.empty()) apply_checkpoint(resume_ckpt, net, &opt);

  const fs::path csv_path = out / "loss.csv";
  std::ofstream csv;
  if (start_epoch > 0 && fs::exists(csv_path)) {
    csv.open(csv_path, std::ios::app);
  } else {
    csv.open(csv_path, std::ios::trunc);
    csv << "epoch,l2,ssim_loss,composite\n";
  }
  manifest.output(csv_path);

  TrainCallbacks callbacks;
  callbacks.on_epoch = [&](const EpochStats& s) {
    csv << s.epoch << "," << fmt_double(s.l2) << "," << fmt_double(s.ssim) << ","
        << fmt_double(s.composite) << "\n";
    csv.flush();
    std::cout << "epoch " << s.epoch << "  l2 " << s.l2 << "  ssim_loss " << s.ssim
              << "  composite " << s.composite << "\n";
  };
  callbacks.on_checkpoint = [&](int epoch) {
    json echo = effective;
    echo["epochs_completed"] = epoch + 1;
    char name[48];
    std::snprintf(name, sizeof(name), "checkpoint_epoch_%04d.cdfc", epoch + 1);
    save_checkpoint(make_checkpoint(net, &opt, echo), out / name);
    save_checkpoint(make_checkpoint(net, &opt, echo), out / "checkpoint_final.cdfc");
    manifest.output(out / name);
  };

  train(net, opt, images, cfg, start_epoch, callbacks);
  manifest.output(out / "checkpoint_final.cdfc");
  manifest.write();
  std::cout << "training finished after epoch " << cfg.epochs - 1 << ", outputs in " << out << "\n";
  return 0;
}

int cmd_reconstruct(const fs::path& ckpt_path, const fs::path& image_path,
                    const fs::path& kspace_path, const fs::path& mask_path, const fs::path& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  TrainConfig saved_cfg;
  CdfNetConfig net_cfg;
  train_config_from_json(ckpt.config, saved_cfg, net_cfg);
  CdfNet net(net_cfg);
  apply_checkpoint(ckpt, net, nullptr);

  const SamplingMask mask = load_mask(mask_path);
  ComplexTensor y_u;
  if (!image_path.empty()) {
    const ComplexTensor x = load_image_tensor(image_path);
    y_u = undersample(fft2(x), mask);
  } else {
    y_u = undersample(load_image_tensor(kspace_path), mask);
  }
  const Eigen::Index H = y_u.dim(0), W = y_u.dim(1);
  const ComplexTensor x_u = zero_fill_recon(y_u, mask);

  const ComplexTensor x_u4 = reshape(x_u, {1, 1, H, W});
  const ComplexTensor y_u4 = reshape(y_u, {1, 1, H, W});
  const CdfNet::Output result = net.forward(x_u4, y_u4, {mask}, /*training=*/false);

  ManifestWriter manifest("reconstruct", out, ckpt.config);
  manifest.input("checkpoint", ckpt_path);
  manifest.input("mask", mask_path);
  if (!image_path.empty()) manifest.input("image", image_path);
  if (!kspace_path.empty()) manifest.input("kspace", kspace_path);

  const struct {
    const char* name;
    const ComplexTensor* tensor;
  } items[] = {{"x_u", &x_u4}, {"x_tilde", &result.x_tilde}, {"x_r", &result.x_r}};
  double vis_max = 0.0;
  for (const auto& item : items) vis_max = std::max(vis_max, magnitude(*item.tensor).maxCoeff());
  for (const auto& item : items) {
    const fs::path tpath = out / (std::string(item.name) + ".ctns");
    save_tensor(reshape(*item.tensor, {H, W}), tpath);
    manifest.output(tpath);
    const fs::path ppath = out / (std::string(item.name) + ".pgm");
    write_pgm(magnitude_image(*item.tensor), ppath, vis_max);
    manifest.output(ppath);
  }
  manifest.write();
  std::cout << "reconstruction written to " << out << "\n";
  return 0;
}

int cmd_evaluate(const fs::path& recon_path, const fs::path& gt_path, const fs::path& out,
                 double lambda) {
  std::vector<std::pair<fs::path, fs::path>> pairs;
  if (fs::is_directory(recon_path)) {
    const std::vector<fs::path> recons = sorted_tensor_files(recon_path);
    const std::vector<fs::path> gts = sorted_tensor_files(gt_path);
    require(recons.size() == gts.size() && !recons.empty(),
            "evaluate: reconstruction and ground-truth directories must pair up");
    for (std::size_t i = 0; i < recons.size(); ++i) pairs.emplace_back(recons[i], gts[i]);
  } else {
    require(fs::exists(recon_path), "missing reconstruction file: " + recon_path.string());
    require(fs::exists(gt_path), "missing ground-truth file: " + gt_path.string());
    pairs.emplace_back(recon_path, gt_path);
  }

  LossConfig loss_cfg;
  loss_cfg.lambda = lambda;
  ManifestWriter manifest("evaluate", out,
                          {{"lambda", lambda}, {"pairs", pairs.size()}});
  manifest.input("recon", recon_path);
  manifest.input("gt", gt_path);

  json images = json::array();
  double sum_mse = 0.0, sum_ssim = 0.0, sum_fom = 0.0;
  std::ofstream csv(out / "report.csv", std::ios::trunc);
  csv << "name,mse,ssim,pratts_fom\n";

  for (const auto& [rp, gp] : pairs) {
    const ComplexTensor recon = load_image_tensor(rp);
    const ComplexTensor gt = load_image_tensor(gp);
    const ImageEval ev = evaluate_pair(recon, gt, loss_cfg);
    const std::string name = rp.stem().string();
    images.push_back(
        {{"name", name}, {"mse", ev.mse}, {"ssim", ev.ssim}, {"pratts_fom", ev.pratts_fom}});
    csv << name << "," << fmt_double(ev.mse) << "," << fmt_double(ev.ssim) << ","
        << fmt_double(ev.pratts_fom) << "\n";
    sum_mse += ev.mse;
    sum_ssim += ev.ssim;
    sum_fom += ev.pratts_fom;

    // error map |gt| - |recon|, normalized by the ground-truth maximum
    RealImage mr = magnitude_image(recon);
    RealImage mf = magnitude_image(gt);
    const double range = std::max(mf.values.maxCoeff(), 1e-12);
    RealImage err(mr.height, mr.width);
    err.values = (mf.values - mr.values).abs() / range;
    write_pgm(err, out / ("error_map_" + name + ".pgm"), 1.0);
    manifest.output(out / ("error_map_" + name + ".pgm"));

    const EdgeMap edges_recon = edge_map(mr);
    const EdgeMap edges_gt = edge_map(mf);
    write_ppm(edge_difference_map(edges_recon, edges_gt), out / ("edge_diff_" + name + ".ppm"));
    manifest.output(out / ("edge_diff_" + name + ".ppm"));
  }

  const double n = static_cast<double>(pairs.size());
  json report;
  report["images"] = images;
  report["aggregate"] = {
      {"mse", sum_mse / n}, {"ssim", sum_ssim / n}, {"pratts_fom", sum_fom / n}};
  std::ofstream jout(out / "report.json", std::ios::trunc);
  jout << report.dump(2) << "\n";
  manifest.output(out / "report.json");
  manifest.output(out / "report.csv");
  manifest.write();
  std::cout << "evaluated " << pairs.size() << " pair(s): mean ssim " << sum_ssim / n
            << ", mean mse " << sum_mse / n << ", mean fom " << sum_fom / n << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"complex-valued MR reconstruction pipeline"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-phantoms", "generate synthetic complex phantoms");
  int gen_count = 10;
  Eigen::Index gen_size = 64;
  std::uint64_t gen_seed = 1;
  fs::path gen_out;
  gen->add_option("--count", gen_count, "number of phantoms");
  gen->add_option("--size", gen_size, "square image extent (divisible by 16)");
  gen->add_option("--seed", gen_seed, "master seed");
  gen->add_option("--out", gen_out, "output directory")->required();

  auto* mk = app.add_subcommand("make-mask", "draw a Cartesian undersampling mask");
  Eigen::Index mk_size = 64;
  double mk_accel = 4.0, mk_sigma = 0.15;
  int mk_center = 8;
  std::uint64_t mk_seed = 1;
  std::string mk_format = "pgm";
  fs::path mk_out;
  mk->add_option("--size", mk_size, "square mask extent");
  mk->add_option("--accel", mk_accel, "acceleration factor R");
  mk->add_option("--center-lines", mk_center, "always-sampled central lines");
  mk->add_option("--sigma-frac", mk_sigma, "Gaussian width as a fraction of height");
  mk->add_option("--seed", mk_seed, "mask seed");
  mk->add_option("--format", mk_format, "pgm or tensor")->check(CLI::IsMember({"pgm", "tensor"}));
  mk->add_option("--out", mk_out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train the reconstruction network");
  fs::path tr_data, tr_out, tr_config, tr_resume;
  TrainConfig tr_cfg;
  CdfNetConfig tr_net;
  bool tr_no_dcl = false, tr_augment = false;
  tr->add_option("--data", tr_data, "directory of fully-sampled .ctns images")->required();
  tr->add_option("--out", tr_out, "output directory")->required();
  tr->add_option("--config", tr_config, "JSON config file (flags override)");
  tr->add_option("--resume", tr_resume, "checkpoint to resume from");
  tr->add_option("--epochs", tr_cfg.epochs, "target epoch count");
  tr->add_option("--batch-size", tr_cfg.batch_size, "batch size");
  tr->add_option("--lambda", tr_cfg.lambda, "SSIM loss weight");
  tr->add_option("--accel", tr_cfg.accel, "acceleration factor R");
  tr->add_option("--sigma-frac", tr_cfg.sigma_frac, "mask Gaussian width fraction");
  tr->add_option("--center-lines", tr_cfg.center_lines, "always-sampled central lines");
  tr->add_option("--checkpoint-every", tr_cfg.checkpoint_every, "checkpoint cadence (epochs)");
  tr->add_option("--seed", tr_cfg.seed, "master seed");
  tr->add_option("--lr", tr_cfg.opt.lr, "learning rate");
  tr->add_option("--decay", tr_cfg.opt.decay, "RMSProp accumulator coefficient");
  tr->add_option("--growth", tr_net.growth, "dense block growth (feature width)");
  tr->add_flag("--no-dcl", tr_no_dcl, "disable the data-consistency head");
  tr->add_flag("--augment", tr_augment, "enable rigid augmentation");

  auto* rc = app.add_subcommand("reconstruct", "de-alias one undersampled image");
  fs::path rc_ckpt, rc_image, rc_kspace, rc_mask, rc_out;
  rc->add_option("--checkpoint", rc_ckpt, "trained checkpoint")->required();
  auto* rc_img_opt = rc->add_option("--image", rc_image, "fully-sampled complex image (.ctns)");
  auto* rc_ksp_opt = rc->add_option("--kspace", rc_kspace, "acquired k-space (.ctns)");
  rc_img_opt->excludes(rc_ksp_opt);
  rc->add_option("--mask", rc_mask, "sampling mask (.pgm or .ctns)")->required();
  rc->add_option("--out", rc_out, "output directory")->required();

  auto* ev = app.add_subcommand("evaluate", "score reconstructions against ground truth");
  fs::path ev_recon, ev_gt, ev_out;
  double ev_lambda = 2.0;
  ev->add_option("--recon", ev_recon, "reconstruction .ctns file or directory")->required();
  ev->add_option("--gt", ev_gt, "ground-truth .ctns file or directory")->required();
  ev->add_option("--lambda", ev_lambda, "config echo for the report");
  ev->add_option("--out", ev_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // 1 = usage error
  }

  try {
    if (gen->parsed()) return cmd_gen_phantoms(gen_count, gen_size, gen_seed, gen_out);
    if (mk->parsed())
      return cmd_make_mask(mk_size, mk_accel, mk_center, mk_sigma, mk_seed, mk_out, mk_format);
    if (tr->parsed()) {
      if (tr_no_dcl) tr_net.dcl_enabled = false;
      tr_cfg.augment = tr_augment;
      return cmd_train(tr_data, tr_out, tr_config, tr_resume, tr, tr_cfg, tr_net);
    }
    if (rc->parsed()) {
      require(!rc_image.empty() || !rc_kspace.empty(), "reconstruct: --image or --kspace required");
      return cmd_reconstruct(rc_ckpt, rc_image, rc_kspace, rc_mask, rc_out);
    }
    if (ev->parsed()) return cmd_evaluate(ev_recon, ev_gt, ev_out, ev_lambda);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
