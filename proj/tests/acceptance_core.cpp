// Acceptance suite, part 1: oracle equivalence, gradient checks, transform
// identities, the data-consistency invariant and metric unit checks. Prints
// one PASS/FAIL line per criterion and exits nonzero if any fail.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "cdfnet/fft.hpp"
#include "cdfnet/losses.hpp"
#include "cdfnet/metrics.hpp"
#include "cdfnet/network.hpp"
#include "cdfnet/phantom.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cdfnet;

namespace {

struct Gate {
  int failed = 0;

  void run(int number, const std::string& name, const std::function<bool(std::string&)>& fn) {
    std::string detail;
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    try {
      pass = fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d [%s] %s (%.2fs)%s%s\n", number, pass ? "PASS" : "FAIL", name.c_str(),
                secs, detail.empty() ? "" : " -- ", detail.c_str());
    if (!pass) ++failed;
  }
};

// Maximum relative FD error over sampled parameter and input coordinates of
// an arbitrary scalar objective.
struct FdReport {
  double max_rel = 0.0;
  std::string worst;
};

void fd_probe(const std::function<double()>& objective, Eigen::ArrayXd& storage,
              const Eigen::ArrayXd& analytic, const std::string& label, Rng& pick, int n_probes,
              FdReport& report) {
  const double h = 1e-5;
  for (int t = 0; t < n_probes; ++t) {
    const Eigen::Index j = static_cast<Eigen::Index>(pick.uniform_index(storage.size()));
    const double saved = storage[j];
    storage[j] = saved + h;
    const double lp = objective();
    storage[j] = saved - h;
    const double lm = objective();
    storage[j] = saved;
    const double fd = (lp - lm) / (2.0 * h);
    const double rel = std::abs(fd - analytic[j]) / std::max({std::abs(fd), std::abs(analytic[j]), 1.0});
    if (rel > report.max_rel) {
      report.max_rel = rel;
      std::ostringstream os;
      os << label << "[" << j << "] fd " << fd << " analytic " << analytic[j];
      report.worst = os.str();
    }
  }
}

bool criterion1_conv_oracle(std::string& detail) {
  Rng rng(1001);
  double max_err = 0.0;
  int instances = 0;
  const int kernels[] = {1, 3, 5};
  while (instances < 120) {
    const int cin = 1 + static_cast<int>(rng.uniform_index(4));
    const int cout = 1 + static_cast<int>(rng.uniform_index(4));
    const int k = kernels[rng.uniform_index(3)];
    const Eigen::Index hw = std::max<Eigen::Index>(k, 3 + static_cast<Eigen::Index>(rng.uniform_index(6)));
    ComplexConvLayer layer("conv", cin, cout, k);
    layer.init(rng);
    for (Eigen::Index i = 0; i < layer.b_re.value.size(); ++i) {
      layer.b_re.value[i] = rng.normal();
      layer.b_im.value[i] = rng.normal();
    }
    ComplexTensor x = test::random_tensor({1 + static_cast<Eigen::Index>(rng.uniform_index(2)), cin, hw, hw}, rng);
    max_err = std::max(max_err, max_abs_diff(layer.forward(x), test::conv_oracle(x, layer, 1, (k - 1) / 2)));
    ++instances;
  }
  std::ostringstream os;
  os << instances << " instances, max abs err " << max_err;
  detail = os.str();
  return max_err < 1e-12;
}

bool criterion2_gradient_suite(std::string& detail) {
  std::ostringstream os;
  bool ok = true;
  auto judge = [&](const char* what, const FdReport& r, double tol) {
    os << what << " " << r.max_rel << (r.max_rel <= tol ? "" : " (FAIL: " + r.worst + ")") << "; ";
    if (r.max_rel > tol) ok = false;
  };

  {  // complex convolution, tolerance 1e-5
    Rng rng(2001);
    ComplexConvLayer conv("conv", 2, 3, 3);
    conv.init(rng);
    ComplexTensor x = test::random_tensor({2, 2, 5, 5}, rng);
    const ComplexTensor proj = test::random_tensor({2, 3, 5, 5}, rng);
    conv.forward(x);
    const ComplexTensor gin = conv.backward(proj);
    auto objective = [&]() { return test::projection(conv.forward(x), proj); };
    FdReport r;
    Rng pick(1);
    fd_probe(objective, conv.w_re.value, conv.w_re.grad, "w_re", pick, 24, r);
    fd_probe(objective, conv.w_im.value, conv.w_im.grad, "w_im", pick, 24, r);
    fd_probe(objective, conv.b_re.value, conv.b_re.grad, "b_re", pick, 6, r);
    fd_probe(objective, conv.b_im.value, conv.b_im.grad, "b_im", pick, 6, r);
    fd_probe(objective, x.re(), gin.re(), "in_re", pick, 24, r);
    fd_probe(objective, x.im(), gin.im(), "in_im", pick, 24, r);
    judge("conv", r, 1e-5);
  }
  {  // batch norm, train and eval mode
    for (const bool training : {true, false}) {
      Rng rng(2002);
      ComplexBatchNormLayer bn("bn", 2);
      bn.update_running_stats = false;
      for (Eigen::Index i = 0; i < bn.gamma.value.size(); ++i) bn.gamma.value[i] = rng.normal();
      ComplexTensor x = test::random_tensor({2, 2, 4, 4}, rng);
      x.im() = 0.5 * x.im() + 0.5 * x.re();
      const ComplexTensor proj = test::random_tensor({2, 2, 4, 4}, rng);
      bn.gamma.zero_grad();
      bn.beta.zero_grad();
      bn.forward(x, training);
      const ComplexTensor gin = bn.backward(proj);
      auto objective = [&]() { return test::projection(bn.forward(x, training), proj); };
      FdReport r;
      Rng pick(2);
      fd_probe(objective, bn.gamma.value, bn.gamma.grad, "gamma", pick, 8, r);
      fd_probe(objective, bn.beta.value, bn.beta.grad, "beta", pick, 4, r);
      fd_probe(objective, x.re(), gin.re(), "in_re", pick, 24, r);
      fd_probe(objective, x.im(), gin.im(), "in_im", pick, 24, r);
      judge(training ? "bn-train" : "bn-eval", r, 1e-5);
    }
  }
  {  // relu / pool / upsample
    Rng rng(2003);
    CRelu relu;
    ComplexTensor x = test::random_tensor({1, 2, 4, 4}, rng);
    const ComplexTensor proj = test::random_tensor({1, 2, 4, 4}, rng);
    relu.forward(x);
    const ComplexTensor gin = relu.backward(proj);
    auto objective = [&]() { return test::projection(relu.forward(x), proj); };
    FdReport r;
    Rng pick(3);
    fd_probe(objective, x.re(), gin.re(), "in_re", pick, 16, r);
    fd_probe(objective, x.im(), gin.im(), "in_im", pick, 16, r);
    judge("crelu", r, 1e-5);

    CMaxPool2 pool;
    ComplexTensor xp = test::random_tensor({1, 2, 4, 4}, rng);
    const ComplexTensor projp = test::random_tensor({1, 2, 2, 2}, rng);
    pool.forward(xp);
    const ComplexTensor ginp = pool.backward(projp);
    auto objp = [&]() { return test::projection(pool.forward(xp), projp); };
    FdReport rp;
    fd_probe(objp, xp.re(), ginp.re(), "in_re", pick, 16, rp);
    fd_probe(objp, xp.im(), ginp.im(), "in_im", pick, 16, rp);
    judge("maxpool", rp, 1e-5);

    CUpsample2 up;
    ComplexTensor xu = test::random_tensor({1, 2, 3, 3}, rng);
    const ComplexTensor proju = test::random_tensor({1, 2, 6, 6}, rng);
    up.forward(xu);
    const ComplexTensor ginu = up.backward(proju);
    auto obju = [&]() { return test::projection(up.forward(xu), proju); };
    FdReport ru;
    fd_probe(obju, xu.re(), ginu.re(), "in_re", pick, 12, ru);
    fd_probe(obju, xu.im(), ginu.im(), "in_im", pick, 12, ru);
    judge("upsample", ru, 1e-5);
  }
  {  // dense block
    Rng rng(2004);
    DenseBlock block("block", 2, 2);
    block.init(rng);
    block.set_update_running_stats(false);
    ComplexTensor x = test::random_tensor({2, 2, 4, 4}, rng);
    const ComplexTensor proj = test::random_tensor({2, 8, 4, 4}, rng);
    std::vector<Parameter*> params;
    block.params_into(params);
    for (Parameter* p : params) p->zero_grad();
    block.forward(x, true);
    const ComplexTensor gin = block.backward(proj);
    auto objective = [&]() { return test::projection(block.forward(x, true), proj); };
    FdReport r;
    Rng pick(4);
    for (Parameter* p : params) fd_probe(objective, p->value, p->grad, p->name, pick, 6, r);
    fd_probe(objective, x.re(), gin.re(), "in_re", pick, 12, r);
    fd_probe(objective, x.im(), gin.im(), "in_im", pick, 12, r);
    judge("dense-block", r, 1e-5);
  }
  {  // l2 loss, tolerance 1e-8
    Rng rng(2005);
    ComplexTensor x_r = test::random_tensor({2, 1, 4, 4}, rng);
    const ComplexTensor x_f = test::random_tensor({2, 1, 4, 4}, rng);
    const LossValue loss = l2_loss(x_r, x_f);
    auto objective = [&]() { return l2_loss(x_r, x_f).value; };
    FdReport r;
    Rng pick(5);
    fd_probe(objective, x_r.re(), loss.grad.re(), "re", pick, 16, r);
    fd_probe(objective, x_r.im(), loss.grad.im(), "im", pick, 16, r);
    judge("l2", r, 1e-8);
  }
  {  // ssim gradient, tolerance 1e-5
    Rng rng(2006);
    RealImage p(16, 16), q(16, 16);
    for (Eigen::Index i = 0; i < 256; ++i) {
      p.values[i] = 0.5 + rng.uniform();
      q.values[i] = 0.5 + rng.uniform();
    }
    const SsimResult s = ssim(p, q, LossConfig{}, 2.0);
    auto objective = [&]() { return ssim(p, q, LossConfig{}, 2.0).value; };
    FdReport r;
    Rng pick(6);
    fd_probe(objective, p.values, s.grad_p, "p", pick, 32, r);
    judge("ssim", r, 1e-5);
  }
  {  // ssim loss through the magnitude, tolerance 1e-4
    Rng rng(2007);
    ComplexTensor x_r = test::random_tensor({1, 1, 16, 16}, rng);
    ComplexTensor x_f = test::random_tensor({1, 1, 16, 16}, rng);
    x_r.re() += 3.0;
    x_f.re() += 3.0;
    const LossValue loss = ssim_loss(x_r, x_f, LossConfig{});
    auto objective = [&]() { return ssim_loss(x_r, x_f, LossConfig{}).value; };
    FdReport r;
    Rng pick(7);
    fd_probe(objective, x_r.re(), loss.grad.re(), "re", pick, 24, r);
    fd_probe(objective, x_r.im(), loss.grad.im(), "im", pick, 24, r);
    judge("ssim-loss", r, 1e-4);
  }
  {  // data-consistency layer, tolerance 1e-6
    Rng rng(2008);
    const SamplingMask mask = make_mask(16, 16, 2.0, 4, 0.2, 77);
    ComplexTensor x_tilde = test::random_tensor({1, 1, 16, 16}, rng);
    const ComplexTensor y_u = test::random_tensor({1, 1, 16, 16}, rng);
    const ComplexTensor proj = test::random_tensor({1, 1, 16, 16}, rng);
    const ComplexTensor gin = dcl_backward(proj, {mask});
    auto objective = [&]() { return test::projection(dcl(x_tilde, y_u, {mask}), proj); };
    FdReport r;
    Rng pick(8);
    fd_probe(objective, x_tilde.re(), gin.re(), "re", pick, 24, r);
    fd_probe(objective, x_tilde.im(), gin.im(), "im", pick, 24, r);
    judge("dcl", r, 1e-6);
  }
  {  // full desk-scale network with the composite loss, tolerance 1e-4
    CdfNetConfig cfg;
    cfg.growth = 8;
    CdfNet net(cfg);
    net.init_params(2009);
    net.set_update_running_stats(false);
    ComplexTensor x_f = reshape(gen_phantom(64, 64, 3), {1, 1, 64, 64});
    x_f.re() += 0.3;  // keep magnitudes off the kink
    const SamplingMask mask = make_mask(64, 64, 4.0, 8, 0.15, 13);
    const ComplexTensor y_u = undersample(fft2(x_f), mask);
    const ComplexTensor x_u = ifft2(y_u);
    LossConfig loss_cfg;

    net.zero_grad();
    CdfNet::Output out = net.forward(x_u, y_u, {mask}, true);
    net.backward(composite_loss(out.x_r, x_f, loss_cfg).grad);
    auto objective = [&]() {
      CdfNet::Output o = net.forward(x_u, y_u, {mask}, true);
      return composite_loss(o.x_r, x_f, loss_cfg).value;
    };
    std::vector<Parameter*> params = net.parameters();
    FdReport r;
    Rng pick(9);
    for (int t = 0; t < 8; ++t) {
      Parameter* p = params[pick.uniform_index(params.size())];
      fd_probe(objective, p->value, p->grad, p->name, pick, 1, r);
    }
    judge("desk-net", r, 1e-4);
  }

  detail = "max rel errs: " + os.str();
  return ok;
}

bool criterion3_fft_suite(std::string& detail) {
  Rng rng(3001);
  double worst_round = 0.0, worst_parseval = 0.0, worst_oracle = 0.0;
  for (int trial = 0; trial < 8; ++trial) {
    const Eigen::Index n = std::vector<Eigen::Index>{8, 16, 32, 64}[rng.uniform_index(4)];
    const ComplexTensor x = test::random_tensor({n, n}, rng);
    const ComplexTensor y = fft2(x);
    const double norm = std::sqrt(x.re().square().sum() + x.im().square().sum());
    worst_round = std::max(worst_round, max_abs_diff(ifft2(y), x) / norm);
    const double ex = x.re().square().sum() + x.im().square().sum();
    const double ey = y.re().square().sum() + y.im().square().sum();
    worst_parseval = std::max(worst_parseval, std::abs(ex - ey) / ex);
  }
  for (int trial = 0; trial < 4; ++trial) {
    const ComplexTensor x = test::random_tensor({8, 8}, rng);
    worst_oracle = std::max(worst_oracle, max_abs_diff(fft2(x), test::direct_dft2(x, false)));
    worst_oracle = std::max(worst_oracle, max_abs_diff(ifft2(x), test::direct_dft2(x, true)));
  }
  std::ostringstream os;
  os << "roundtrip " << worst_round << ", parseval " << worst_parseval << ", oracle " << worst_oracle;
  detail = os.str();
  return worst_round <= 1e-10 && worst_parseval <= 1e-10 && worst_oracle <= 1e-10;
}

bool criterion4_data_consistency(std::string& detail) {
  double worst_on = 0.0, worst_off = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    CdfNetConfig cfg;
    cfg.growth = 4;
    CdfNet net(cfg);
    net.init_params(4000 + trial);
    Rng rng(4100 + trial);
    const ComplexTensor x_u_src = test::random_tensor({1, 1, 32, 32}, rng);
    const SamplingMask mask = make_mask(32, 32, 2.0 + (trial % 3), 4, 0.2, 4200 + trial);
    const ComplexTensor y_u = undersample(fft2(x_u_src), mask);
    const ComplexTensor x_u = ifft2(y_u);
    const CdfNet::Output out = net.forward(x_u, y_u, {mask}, false);
    const ComplexTensor y_r = fft2(out.x_r);
    const ComplexTensor y_tilde = fft2(out.x_tilde);
    for (Eigen::Index y = 0; y < 32; ++y) {
      for (Eigen::Index x = 0; x < 32; ++x) {
        const Eigen::Index i = y * 32 + x;
        const double err_on = std::abs(y_r.at(i) - y_u.at(i));
        const double err_off = std::abs(y_r.at(i) - y_tilde.at(i));
        if (mask.row_selected(y)) {
          worst_on = std::max(worst_on, err_on);
        } else {
          worst_off = std::max(worst_off, err_off);
        }
      }
    }
  }
  std::ostringstream os;
  os << "20 triples, on-mask err " << worst_on << ", off-mask err " << worst_off;
  detail = os.str();
  return worst_on <= 1e-10 && worst_off <= 1e-10;
}

bool criterion8_metric_units(std::string& detail) {
  bool ok = true;
  std::ostringstream os;

  EdgeMap e;
  e.height = 16;
  e.width = 16;
  e.on.assign(256, 0);
  e.on[5 * 16 + 5] = e.on[9 * 16 + 12] = e.on[2 * 16 + 13] = 1;
  const double self_fom = pratts_fom(e, e);
  os << "fom(e,e)=" << self_fom;
  ok = ok && self_fom == 1.0;

  EdgeMap ref = e;
  ref.on.assign(256, 0);
  ref.on[8 * 16 + 4] = 1;
  EdgeMap det = ref;
  det.on.assign(256, 0);
  det.on[8 * 16 + 7] = 1;
  const double d3 = pratts_fom(det, ref);
  os << ", fom(d=3)=" << d3;
  ok = ok && std::abs(d3 - 0.5) < 1e-12;

  Rng rng(8001);
  RealImage p(16, 16);
  for (Eigen::Index i = 0; i < 256; ++i) p.values[i] = rng.uniform();
  const double self_ssim = ssim(p, p, LossConfig{}).value;
  os << ", ssim(p,p)=" << self_ssim;
  ok = ok && self_ssim == 1.0;

  RealImage c1(16, 16), c2(16, 16);
  c1.values.setConstant(0.4);
  c2.values.setConstant(0.9);
  const double C1 = 1e-4;  // (0.01 * L)^2 with L = 1
  const double closed = (2.0 * 0.4 * 0.9 + C1) / (0.4 * 0.4 + 0.9 * 0.9 + C1);
  const double got = ssim(c1, c2, LossConfig{}, 1.0).value;
  os << ", |const-ssim err|=" << std::abs(got - closed);
  ok = ok && std::abs(got - closed) < 1e-12;

  detail = os.str();
  return ok;
}

}  // namespace

int main() {
  Gate gate;
  gate.run(1, "complex-conv scalar oracle (>=100 instances, <1e-12)", criterion1_conv_oracle);
  gate.run(2, "gradient suite (layers, losses, dcl, desk-scale net)", criterion2_gradient_suite);
  gate.run(3, "fft suite (roundtrip, Parseval, direct DFT)", criterion3_fft_suite);
  gate.run(4, "data-consistency invariant on random triples", criterion4_data_consistency);
  gate.run(8, "metric unit checks (fom, ssim closed forms)", criterion8_metric_units);
  if (gate.failed) {
    std::printf("%d criterion(s) FAILED\n", gate.failed);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
