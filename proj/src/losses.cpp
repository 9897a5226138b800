#include "cdfnet/losses.hpp"

#include <cmath>

namespace cdfnet {

void LossConfig::validate() const {
  require(lambda >= 0.0, "loss config: lambda must be non-negative");
  require(ssim_window >= 3 && ssim_window % 2 == 1, "loss config: ssim window must be odd and >= 3");
  require(ssim_sigma > 0.0, "loss config: ssim sigma must be positive");
}

LossValue l2_loss(const ComplexTensor& x_r, const ComplexTensor& x_f) {
  require_same_shape(x_r, x_f, "l2_loss");
  const double batch = x_r.rank() == 4 ? static_cast<double>(x_r.dim(0)) : 1.0;
  const Eigen::ArrayXd dre = x_r.re() - x_f.re();
  const Eigen::ArrayXd dim = x_r.im() - x_f.im();
  LossValue out;
  out.value = (dre.square().sum() + dim.square().sum()) / batch;
  out.grad = ComplexTensor(x_r.shape(), (2.0 / batch) * dre, (2.0 / batch) * dim);
  return out;
}

namespace {

// Gaussian window, normalized so the taps sum to exactly 1.
Eigen::ArrayXd gaussian_window(int k, double sigma) {
  Eigen::ArrayXd w(k * k);
  const int half = (k - 1) / 2;
  for (int dy = 0; dy < k; ++dy) {
    for (int dx = 0; dx < k; ++dx) {
      const double ry = dy - half, rx = dx - half;
      w[dy * k + dx] = std::exp(-(ry * ry + rx * rx) / (2.0 * sigma * sigma));
    }
  }
  w /= w.sum();
  w[half * k + half] += 1.0 - w.sum();
  return w;
}

}  // namespace

SsimResult ssim(const RealImage& p, const RealImage& q, const LossConfig& cfg, double dynamic_range) {
  cfg.validate();
  require(p.height == q.height && p.width == q.width, "ssim: image shapes do not match");
  const int k = cfg.ssim_window;
  require(p.height >= k && p.width >= k,
          "ssim: image smaller than the " + std::to_string(k) + "x" + std::to_string(k) + " window");

  double L = dynamic_range;
  if (L <= 0.0) L = q.values.maxCoeff();
  if (L < 1e-12) L = 1e-12;
  const double c1 = (0.01 * L) * (0.01 * L);
  const double c2 = (0.03 * L) * (0.03 * L);

  const Eigen::ArrayXd w = gaussian_window(k, cfg.ssim_sigma);
  const Eigen::Index H = p.height, W = p.width;
  const Eigen::Index wh = H - k + 1, ww = W - k + 1;
  const double n_windows = static_cast<double>(wh * ww);

  SsimResult out;
  out.grad_p = Eigen::ArrayXd::Zero(H * W);
  double total = 0.0;

  for (Eigen::Index wy = 0; wy < wh; ++wy) {
    for (Eigen::Index wx = 0; wx < ww; ++wx) {
      double mu_p = 0.0, mu_q = 0.0, pp = 0.0, qq = 0.0, pq = 0.0;
      for (int dy = 0; dy < k; ++dy) {
        const double* prow = p.values.data() + (wy + dy) * W + wx;
        const double* qrow = q.values.data() + (wy + dy) * W + wx;
        const double* wrow = w.data() + dy * k;
        for (int dx = 0; dx < k; ++dx) {
          const double wv = wrow[dx];
          mu_p += wv * prow[dx];
          mu_q += wv * qrow[dx];
          pp += wv * prow[dx] * prow[dx];
          qq += wv * qrow[dx] * qrow[dx];
          pq += wv * prow[dx] * qrow[dx];
        }
      }
      const double var_p = pp - mu_p * mu_p;
      const double var_q = qq - mu_q * mu_q;
      const double cov = pq - mu_p * mu_q;
      const double a1 = 2.0 * mu_p * mu_q + c1;
      const double b1 = mu_p * mu_p + mu_q * mu_q + c1;
      const double a2 = 2.0 * cov + c2;
      const double b2 = var_p + var_q + c2;
      const double s = (a1 * a2) / (b1 * b2);
      total += s;

      // dS/dp_t = w_t * (coef_const + coef_q * q_t + coef_p * p_t)
      const double inv_b1b2 = 1.0 / (b1 * b2);
      const double coef_q = 2.0 * a1 * inv_b1b2;
      const double coef_p = -2.0 * a1 * a2 * inv_b1b2 / b2;
      const double coef_const = 2.0 * mu_q * a2 * inv_b1b2 - 2.0 * mu_p * a1 * a2 * inv_b1b2 / b1 -
                                mu_q * coef_q - mu_p * coef_p;
      for (int dy = 0; dy < k; ++dy) {
        const double* prow = p.values.data() + (wy + dy) * W + wx;
        const double* qrow = q.values.data() + (wy + dy) * W + wx;
        const double* wrow = w.data() + dy * k;
        double* grow = out.grad_p.data() + (wy + dy) * W + wx;
        for (int dx = 0; dx < k; ++dx) {
          grow[dx] += wrow[dx] * (coef_const + coef_q * qrow[dx] + coef_p * prow[dx]);
        }
      }
    }
  }

  out.value = total / n_windows;
  out.grad_p /= n_windows;
  return out;
}

LossValue ssim_loss(const ComplexTensor& x_r, const ComplexTensor& x_f, const LossConfig& cfg) {
  require_same_shape(x_r, x_f, "ssim_loss");
  require(x_r.rank() == 2 || (x_r.rank() == 4 && x_r.dim(1) == 1),
          "ssim_loss: [B,1,H,W] or [H,W] tensors expected");
  const Eigen::Index B = x_r.rank() == 4 ? x_r.dim(0) : 1;
  const Eigen::Index plane = x_r.dim(-2) * x_r.dim(-1);

  LossValue out;
  out.grad = zeros_like(x_r);
  double total = 0.0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const RealImage mr = magnitude_image(x_r, x_r.rank() == 4 ? b : 0);
    const RealImage mf = magnitude_image(x_f, x_f.rank() == 4 ? b : 0);
    const SsimResult s = ssim(mr, mf, cfg);
    total += 1.0 - s.value;
    // chain d(1-S)/d|z| through |z|, guarded at the origin
    const Eigen::Index off = b * plane;
    for (Eigen::Index i = 0; i < plane; ++i) {
      const double m = mr.values[i];
      if (m < 1e-12) continue;
      const double gm = -s.grad_p[i] / static_cast<double>(B);
      out.grad.re()[off + i] = gm * x_r.re()[off + i] / m;
      out.grad.im()[off + i] = gm * x_r.im()[off + i] / m;
    }
  }
  out.value = total / static_cast<double>(B);
  return out;
}

CompositeLoss composite_loss(const ComplexTensor& x_r, const ComplexTensor& x_f,
                             const LossConfig& cfg) {
  const LossValue l2 = l2_loss(x_r, x_f);
  const LossValue ls = ssim_loss(x_r, x_f, cfg);
  CompositeLoss out;
  out.l2 = l2.value;
  out.ssim = ls.value;
  out.value = l2.value + cfg.lambda * ls.value;
  out.grad = ComplexTensor(x_r.shape(), l2.grad.re() + cfg.lambda * ls.grad.re(),
                           l2.grad.im() + cfg.lambda * ls.grad.im());
  return out;
}

}  // namespace cdfnet
