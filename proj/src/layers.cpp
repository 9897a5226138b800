#include "cdfnet/layers.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace cdfnet {

namespace {

struct ConvDims {
  Eigen::Index B, Cin, H, W, Cout, K, stride, pad, Ho, Wo;
};

ConvDims conv_dims(const Shape& in_shape, Eigen::Index cout, Eigen::Index k, Eigen::Index stride,
                   Eigen::Index pad) {
  ConvDims d;
  d.B = in_shape[0];
  d.Cin = in_shape[1];
  d.H = in_shape[2];
  d.W = in_shape[3];
  d.Cout = cout;
  d.K = k;
  d.stride = stride;
  d.pad = pad;
  require(d.H + 2 * pad >= k && d.W + 2 * pad >= k, "conv2d: kernel larger than padded input");
  d.Ho = (d.H + 2 * pad - k) / stride + 1;
  d.Wo = (d.W + 2 * pad - k) / stride + 1;
  return d;
}

// out[b,oc] += sign * sum_ic cross_correlate(in[b,ic], w[oc,ic])
void conv2d_accum(const double* in, const double* w, double sign, double* out, const ConvDims& d) {
#pragma omp parallel for schedule(static)
  for (Eigen::Index bo = 0; bo < d.B * d.Cout; ++bo) {
    const Eigen::Index b = bo / d.Cout;
    const Eigen::Index oc = bo % d.Cout;
    double* outp = out + bo * d.Ho * d.Wo;
    for (Eigen::Index ic = 0; ic < d.Cin; ++ic) {
      const double* inp = in + (b * d.Cin + ic) * d.H * d.W;
      const double* wp = w + (oc * d.Cin + ic) * d.K * d.K;
      for (Eigen::Index oy = 0; oy < d.Ho; ++oy) {
        const Eigen::Index iy0 = oy * d.stride - d.pad;
        for (Eigen::Index ky = 0; ky < d.K; ++ky) {
          const Eigen::Index iy = iy0 + ky;
          if (iy < 0 || iy >= d.H) continue;
          const double* inrow = inp + iy * d.W;
          double* outrow = outp + oy * d.Wo;
          for (Eigen::Index kx = 0; kx < d.K; ++kx) {
            const double wv = sign * wp[ky * d.K + kx];
            // valid ox range so that ix = ox*stride + kx - pad lies in [0, W)
            Eigen::Index ox_lo = 0, ox_hi = d.Wo;
            if (d.stride == 1) {
              ox_lo = std::max<Eigen::Index>(0, d.pad - kx);
              ox_hi = std::min<Eigen::Index>(d.Wo, d.W + d.pad - kx);
              const double* src = inrow + ox_lo + kx - d.pad;
              double* dst = outrow + ox_lo;
              for (Eigen::Index i = 0; i < ox_hi - ox_lo; ++i) dst[i] += wv * src[i];
            } else {
              for (Eigen::Index ox = ox_lo; ox < ox_hi; ++ox) {
                const Eigen::Index ix = ox * d.stride + kx - d.pad;
                if (ix < 0 || ix >= d.W) continue;
                outrow[ox] += wv * inrow[ix];
              }
            }
          }
        }
      }
    }
  }
}

// gw[oc,ic,ky,kx] += sign * sum_{b,oy,ox} grad[b,oc,oy,ox] * in[b,ic,oy*s+ky-p,ox*s+kx-p]
void conv2d_grad_w(const double* in, const double* grad, double sign, double* gw, const ConvDims& d) {
#pragma omp parallel for schedule(static)
  for (Eigen::Index oi = 0; oi < d.Cout * d.Cin; ++oi) {
    const Eigen::Index oc = oi / d.Cin;
    const Eigen::Index ic = oi % d.Cin;
    double* gwp = gw + oi * d.K * d.K;
    for (Eigen::Index b = 0; b < d.B; ++b) {
      const double* inp = in + (b * d.Cin + ic) * d.H * d.W;
      const double* gp = grad + (b * d.Cout + oc) * d.Ho * d.Wo;
      for (Eigen::Index ky = 0; ky < d.K; ++ky) {
        for (Eigen::Index kx = 0; kx < d.K; ++kx) {
          double acc = 0.0;
          for (Eigen::Index oy = 0; oy < d.Ho; ++oy) {
            const Eigen::Index iy = oy * d.stride + ky - d.pad;
            if (iy < 0 || iy >= d.H) continue;
            const double* inrow = inp + iy * d.W;
            const double* grow = gp + oy * d.Wo;
            for (Eigen::Index ox = 0; ox < d.Wo; ++ox) {
              const Eigen::Index ix = ox * d.stride + kx - d.pad;
              if (ix < 0 || ix >= d.W) continue;
              acc += grow[ox] * inrow[ix];
            }
          }
          gwp[ky * d.K + kx] += sign * acc;
        }
      }
    }
  }
}

// gin[b,ic] += sign * adjoint correlation of grad with w
void conv2d_grad_in(const double* w, const double* grad, double sign, double* gin, const ConvDims& d) {
#pragma omp parallel for schedule(static)
  for (Eigen::Index bi = 0; bi < d.B * d.Cin; ++bi) {
    const Eigen::Index b = bi / d.Cin;
    const Eigen::Index ic = bi % d.Cin;
    double* gip = gin + bi * d.H * d.W;
    for (Eigen::Index oc = 0; oc < d.Cout; ++oc) {
      const double* gp = grad + (b * d.Cout + oc) * d.Ho * d.Wo;
      const double* wp = w + (oc * d.Cin + ic) * d.K * d.K;
      for (Eigen::Index oy = 0; oy < d.Ho; ++oy) {
        const double* grow = gp + oy * d.Wo;
        for (Eigen::Index ky = 0; ky < d.K; ++ky) {
          const Eigen::Index iy = oy * d.stride + ky - d.pad;
          if (iy < 0 || iy >= d.H) continue;
          double* girow = gip + iy * d.W;
          for (Eigen::Index kx = 0; kx < d.K; ++kx) {
            const double wv = sign * wp[ky * d.K + kx];
            for (Eigen::Index ox = 0; ox < d.Wo; ++ox) {
              const Eigen::Index ix = ox * d.stride + kx - d.pad;
              if (ix < 0 || ix >= d.W) continue;
              girow[ix] += wv * grow[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

ComplexConvLayer::ComplexConvLayer(std::string name, int in_channels, int out_channels, int ksize,
                                   int stride, int padding)
    : in_channels_(in_channels), out_channels_(out_channels), ksize_(ksize), stride_(stride) {
  require(in_channels > 0 && out_channels > 0, name + ": channel counts must be positive");
  require(ksize > 0 && ksize % 2 == 1, name + ": kernel size must be odd, got " + std::to_string(ksize));
  require(stride > 0, name + ": stride must be positive");
  padding_ = padding < 0 ? (ksize - 1) / 2 : padding;
  const Shape wshape{out_channels, in_channels, ksize, ksize};
  w_re = Parameter(name + ".w_re", wshape);
  w_im = Parameter(name + ".w_im", wshape);
  b_re = Parameter(name + ".b_re", {out_channels});
  b_im = Parameter(name + ".b_im", {out_channels});
}

void ComplexConvLayer::init(Rng& rng) {
  // Rayleigh magnitude with sigma from the fan-in/fan-out criterion and
  // uniform phase; real/imag parts are the polar projections.
  const double fan_in = static_cast<double>(in_channels_) * ksize_ * ksize_;
  const double fan_out = static_cast<double>(out_channels_) * ksize_ * ksize_;
  const double sigma = 1.0 / std::sqrt(fan_in + fan_out);
  for (Eigen::Index i = 0; i < w_re.value.size(); ++i) {
    double u = rng.uniform();
    while (u >= 1.0) u = rng.uniform();
    const double r = sigma * std::sqrt(-2.0 * std::log(1.0 - u));
    const double phi = rng.uniform(-std::numbers::pi, std::numbers::pi);
    w_re.value[i] = r * std::cos(phi);
    w_im.value[i] = r * std::sin(phi);
  }
  b_re.value.setZero();
  b_im.value.setZero();
}

ComplexTensor ComplexConvLayer::forward(const ComplexTensor& x) {
  require(x.rank() == 4, "complex_conv2d: rank-4 [B,C,H,W] input expected");
  require(x.dim(1) == in_channels_,
          "complex_conv2d: input has " + std::to_string(x.dim(1)) + " channels, layer expects " +
              std::to_string(in_channels_));
  const ConvDims d = conv_dims(x.shape(), out_channels_, ksize_, stride_, padding_);
  cached_input_ = x;

  ComplexTensor out({d.B, d.Cout, d.Ho, d.Wo});
  for (Eigen::Index b = 0; b < d.B; ++b) {
    for (Eigen::Index oc = 0; oc < d.Cout; ++oc) {
      out.re().segment((b * d.Cout + oc) * d.Ho * d.Wo, d.Ho * d.Wo).setConstant(b_re.value[oc]);
      out.im().segment((b * d.Cout + oc) * d.Ho * d.Wo, d.Ho * d.Wo).setConstant(b_im.value[oc]);
    }
  }
  conv2d_accum(x.re().data(), w_re.value.data(), +1.0, out.re().data(), d);
  conv2d_accum(x.im().data(), w_im.value.data(), -1.0, out.re().data(), d);
  conv2d_accum(x.re().data(), w_im.value.data(), +1.0, out.im().data(), d);
  conv2d_accum(x.im().data(), w_re.value.data(), +1.0, out.im().data(), d);
  return out;
}

ComplexTensor ComplexConvLayer::backward(const ComplexTensor& grad_out) {
  require(cached_input_.numel() > 0, "complex_conv2d backward called before forward");
  const ComplexTensor& x = cached_input_;
  const ConvDims d = conv_dims(x.shape(), out_channels_, ksize_, stride_, padding_);
  require(grad_out.rank() == 4 && grad_out.dim(0) == d.B && grad_out.dim(1) == d.Cout &&
              grad_out.dim(2) == d.Ho && grad_out.dim(3) == d.Wo,
          "complex_conv2d backward: gradient shape mismatch");

  conv2d_grad_w(x.re().data(), grad_out.re().data(), +1.0, w_re.grad.data(), d);
  conv2d_grad_w(x.im().data(), grad_out.im().data(), +1.0, w_re.grad.data(), d);
  conv2d_grad_w(x.re().data(), grad_out.im().data(), +1.0, w_im.grad.data(), d);
  conv2d_grad_w(x.im().data(), grad_out.re().data(), -1.0, w_im.grad.data(), d);

  for (Eigen::Index b = 0; b < d.B; ++b) {
    for (Eigen::Index oc = 0; oc < d.Cout; ++oc) {
      b_re.grad[oc] += grad_out.re().segment((b * d.Cout + oc) * d.Ho * d.Wo, d.Ho * d.Wo).sum();
      b_im.grad[oc] += grad_out.im().segment((b * d.Cout + oc) * d.Ho * d.Wo, d.Ho * d.Wo).sum();
    }
  }

  ComplexTensor grad_in(x.shape());
  conv2d_grad_in(w_re.value.data(), grad_out.re().data(), +1.0, grad_in.re().data(), d);
  conv2d_grad_in(w_im.value.data(), grad_out.im().data(), +1.0, grad_in.re().data(), d);
  conv2d_grad_in(w_im.value.data(), grad_out.re().data(), -1.0, grad_in.im().data(), d);
  conv2d_grad_in(w_re.value.data(), grad_out.im().data(), +1.0, grad_in.im().data(), d);
  return grad_in;
}

void ComplexConvLayer::params_into(std::vector<Parameter*>& out) {
  out.push_back(&w_re);
  out.push_back(&w_im);
  out.push_back(&b_re);
  out.push_back(&b_im);
}

// ---------------------------------------------------------------------------
// Complex batch normalization
// ---------------------------------------------------------------------------

namespace {

// Entries (W00, W01, W11) of A^{-1/2} for symmetric positive definite
// A = [[a, b], [b, c]]:  s = sqrt(det A), t = sqrt(tr A + 2s),
// A^{-1/2} = [[c+s, -b], [-b, a+s]] / (s*t).
struct InvSqrt2x2 {
  double w00, w01, w11;
  double s, t;
};

InvSqrt2x2 inv_sqrt_2x2(double a, double b, double c) {
  const double det = a * c - b * b;
  if (!(det > 0.0) || !std::isfinite(det)) {
    throw NumericError("complex_batch_norm: covariance is not positive definite");
  }
  InvSqrt2x2 r;
  r.s = std::sqrt(det);
  r.t = std::sqrt(a + c + 2.0 * r.s);
  const double denom = r.s * r.t;
  r.w00 = (c + r.s) / denom;
  r.w01 = -b / denom;
  r.w11 = (a + r.s) / denom;
  return r;
}

// dL/d(a,b,c) given dL/dW for W = A^{-1/2}; gw01 carries the sum of both
// off-diagonal sensitivities.
void inv_sqrt_2x2_backward(double a, double b, double c, const InvSqrt2x2& f, double gw00,
                           double gw01, double gw11, double& ga, double& gb, double& gc) {
  const double s = f.s, t = f.t;
  const double denom = s * t;
  const double ds_da = c / (2.0 * s);
  const double ds_dc = a / (2.0 * s);
  const double ds_db = -b / s;
  const double dt_da = (1.0 + 2.0 * ds_da) / (2.0 * t);
  const double dt_dc = (1.0 + 2.0 * ds_dc) / (2.0 * t);
  const double dt_db = ds_db / t;
  const double dd_da = ds_da * t + s * dt_da;
  const double dd_dc = ds_dc * t + s * dt_dc;
  const double dd_db = ds_db * t + s * dt_db;
  const double inv_d = 1.0 / denom;
  const double m00 = c + s, m01 = -b, m11 = a + s;

  auto partial = [&](double dm00, double dm01, double dm11, double dd) {
    const double dw00 = dm00 * inv_d - m00 * dd * inv_d * inv_d;
    const double dw01 = dm01 * inv_d - m01 * dd * inv_d * inv_d;
    const double dw11 = dm11 * inv_d - m11 * dd * inv_d * inv_d;
    return gw00 * dw00 + gw01 * dw01 + gw11 * dw11;
  };
  ga = partial(ds_da, 0.0, 1.0 + ds_da, dd_da);
  gc = partial(1.0 + ds_dc, 0.0, ds_dc, dd_dc);
  gb = partial(ds_db, -1.0, ds_db, dd_db);
}

}  // namespace

ComplexBatchNormLayer::ComplexBatchNormLayer(std::string name, int channels, double momentum,
                                             double eps)
    : name_(name), channels_(channels), momentum_(momentum), eps_(eps) {
  require(channels > 0, name + ": channel count must be positive");
  require(momentum > 0.0 && momentum < 1.0, name + ": momentum must lie in (0,1)");
  require(eps > 0.0, name + ": eps must be positive");
  gamma = Parameter(name + ".gamma", {channels, 4});
  beta = Parameter(name + ".beta", {channels, 2});
  const double g0 = 1.0 / std::sqrt(2.0);
  for (int c = 0; c < channels; ++c) {
    gamma.value[c * 4 + 0] = g0;
    gamma.value[c * 4 + 3] = g0;
  }
  running_mean = Eigen::ArrayXd::Zero(channels * 2);
  running_cov = Eigen::ArrayXd::Zero(channels * 3);
  for (int c = 0; c < channels; ++c) {
    running_cov[c * 3 + 0] = 0.5;
    running_cov[c * 3 + 2] = 0.5;
  }
}

ComplexTensor ComplexBatchNormLayer::forward(const ComplexTensor& x, bool training) {
  require(x.rank() == 4, "complex_batch_norm: rank-4 [B,C,H,W] input expected");
  require(x.dim(1) == channels_, "complex_batch_norm: channel count mismatch");
  const Eigen::Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const Eigen::Index plane = H * W;
  const Eigen::Index n = B * plane;

  cached_training_ = training;
  cached_shape_ = x.shape();
  cached_centered_re_.resize(x.numel());
  cached_centered_im_.resize(x.numel());
  cached_norm_re_.resize(x.numel());
  cached_norm_im_.resize(x.numel());
  cached_whiten_.resize(C * 3);
  cached_cov_.resize(C * 3);

  ComplexTensor out(x.shape());
  for (Eigen::Index c = 0; c < C; ++c) {
    double mean_re, mean_im, vrr, vri, vii;
    if (training) {
      double sum_re = 0.0, sum_im = 0.0;
      for (Eigen::Index b = 0; b < B; ++b) {
        const Eigen::Index off = (b * C + c) * plane;
        sum_re += x.re().segment(off, plane).sum();
        sum_im += x.im().segment(off, plane).sum();
      }
      mean_re = sum_re / static_cast<double>(n);
      mean_im = sum_im / static_cast<double>(n);
      double srr = 0.0, sri = 0.0, sii = 0.0;
      for (Eigen::Index b = 0; b < B; ++b) {
        const Eigen::Index off = (b * C + c) * plane;
        const auto u = x.re().segment(off, plane) - mean_re;
        const auto v = x.im().segment(off, plane) - mean_im;
        cached_centered_re_.segment(off, plane) = u;
        cached_centered_im_.segment(off, plane) = v;
        srr += u.square().sum();
        sri += (u * v).sum();
        sii += v.square().sum();
      }
      vrr = srr / static_cast<double>(n);
      vri = sri / static_cast<double>(n);
      vii = sii / static_cast<double>(n);
      if (!std::isfinite(mean_re) || !std::isfinite(mean_im) || !std::isfinite(vrr) ||
          !std::isfinite(vri) || !std::isfinite(vii)) {
        throw NumericError("complex_batch_norm: non-finite batch statistics");
      }
      if (update_running_stats) {
        running_mean[c * 2 + 0] = (1.0 - momentum_) * running_mean[c * 2 + 0] + momentum_ * mean_re;
        running_mean[c * 2 + 1] = (1.0 - momentum_) * running_mean[c * 2 + 1] + momentum_ * mean_im;
        running_cov[c * 3 + 0] = (1.0 - momentum_) * running_cov[c * 3 + 0] + momentum_ * vrr;
        running_cov[c * 3 + 1] = (1.0 - momentum_) * running_cov[c * 3 + 1] + momentum_ * vri;
        running_cov[c * 3 + 2] = (1.0 - momentum_) * running_cov[c * 3 + 2] + momentum_ * vii;
      }
    } else {
      mean_re = running_mean[c * 2 + 0];
      mean_im = running_mean[c * 2 + 1];
      vrr = running_cov[c * 3 + 0];
      vri = running_cov[c * 3 + 1];
      vii = running_cov[c * 3 + 2];
      for (Eigen::Index b = 0; b < B; ++b) {
        const Eigen::Index off = (b * C + c) * plane;
        cached_centered_re_.segment(off, plane) = x.re().segment(off, plane) - mean_re;
        cached_centered_im_.segment(off, plane) = x.im().segment(off, plane) - mean_im;
      }
    }

    // Whiten by (2*(V + eps*I))^{-1/2} so both parts end up with variance 1/2.
    const double a = 2.0 * (vrr + eps_);
    const double bb = 2.0 * vri;
    const double cc = 2.0 * (vii + eps_);
    const InvSqrt2x2 wmat = inv_sqrt_2x2(a, bb, cc);
    cached_cov_[c * 3 + 0] = vrr + eps_;
    cached_cov_[c * 3 + 1] = vri;
    cached_cov_[c * 3 + 2] = vii + eps_;
    cached_whiten_[c * 3 + 0] = wmat.w00;
    cached_whiten_[c * 3 + 1] = wmat.w01;
    cached_whiten_[c * 3 + 2] = wmat.w11;

    const double g00 = gamma.value[c * 4 + 0], g01 = gamma.value[c * 4 + 1];
    const double g10 = gamma.value[c * 4 + 2], g11 = gamma.value[c * 4 + 3];
    const double beta_re = beta.value[c * 2 + 0], beta_im = beta.value[c * 2 + 1];
    for (Eigen::Index b = 0; b < B; ++b) {
      const Eigen::Index off = (b * C + c) * plane;
      const auto u = cached_centered_re_.segment(off, plane);
      const auto v = cached_centered_im_.segment(off, plane);
      cached_norm_re_.segment(off, plane) = wmat.w00 * u + wmat.w01 * v;
      cached_norm_im_.segment(off, plane) = wmat.w01 * u + wmat.w11 * v;
      const auto nr = cached_norm_re_.segment(off, plane);
      const auto ni = cached_norm_im_.segment(off, plane);
      out.re().segment(off, plane) = g00 * nr + g01 * ni + beta_re;
      out.im().segment(off, plane) = g10 * nr + g11 * ni + beta_im;
    }
  }
  return out;
}

ComplexTensor ComplexBatchNormLayer::backward(const ComplexTensor& grad_out) {
  require(!cached_shape_.empty(), "complex_batch_norm backward called before forward");
  require(shapes_equal(grad_out.shape(), cached_shape_), "complex_batch_norm backward: shape mismatch");
  const Eigen::Index B = cached_shape_[0], C = cached_shape_[1];
  const Eigen::Index plane = cached_shape_[2] * cached_shape_[3];
  const Eigen::Index n = B * plane;

  ComplexTensor grad_in(cached_shape_);
  Eigen::ArrayXd p_re(n), p_im(n), dc_re(n), dc_im(n);

  for (Eigen::Index c = 0; c < C; ++c) {
    const double g00 = gamma.value[c * 4 + 0], g01 = gamma.value[c * 4 + 1];
    const double g10 = gamma.value[c * 4 + 2], g11 = gamma.value[c * 4 + 3];
    const double w00 = cached_whiten_[c * 3 + 0];
    const double w01 = cached_whiten_[c * 3 + 1];
    const double w11 = cached_whiten_[c * 3 + 2];

    double gg00 = 0.0, gg01 = 0.0, gg10 = 0.0, gg11 = 0.0, gb_re = 0.0, gb_im = 0.0;
    for (Eigen::Index b = 0; b < B; ++b) {
      const Eigen::Index off = (b * C + c) * plane;
      const auto gr = grad_out.re().segment(off, plane);
      const auto gi = grad_out.im().segment(off, plane);
      const auto nr = cached_norm_re_.segment(off, plane);
      const auto ni = cached_norm_im_.segment(off, plane);
      gg00 += (gr * nr).sum();
      gg01 += (gr * ni).sum();
      gg10 += (gi * nr).sum();
      gg11 += (gi * ni).sum();
      gb_re += gr.sum();
      gb_im += gi.sum();
      // p = Gamma^T g, gradient w.r.t. the whitened value
      p_re.segment(b * plane, plane) = g00 * gr + g10 * gi;
      p_im.segment(b * plane, plane) = g01 * gr + g11 * gi;
    }
    gamma.grad[c * 4 + 0] += gg00;
    gamma.grad[c * 4 + 1] += gg01;
    gamma.grad[c * 4 + 2] += gg10;
    gamma.grad[c * 4 + 3] += gg11;
    beta.grad[c * 2 + 0] += gb_re;
    beta.grad[c * 2 + 1] += gb_im;

    if (!cached_training_) {
      // Whitening matrix and mean are constants in eval mode.
      for (Eigen::Index b = 0; b < B; ++b) {
        const Eigen::Index off = (b * C + c) * plane;
        const auto pr = p_re.segment(b * plane, plane);
        const auto pi = p_im.segment(b * plane, plane);
        grad_in.re().segment(off, plane) = w00 * pr + w01 * pi;
        grad_in.im().segment(off, plane) = w01 * pr + w11 * pi;
      }
      continue;
    }

    // Through W = A^{-1/2}, A = 2*(V + eps I), V = (1/n) sum c c^T.
    double gw00 = 0.0, gw01 = 0.0, gw11 = 0.0;  // gw01 carries both off-diagonals
    for (Eigen::Index b = 0; b < B; ++b) {
      const Eigen::Index off = (b * C + c) * plane;
      const auto u = cached_centered_re_.segment(off, plane);
      const auto v = cached_centered_im_.segment(off, plane);
      const auto pr = p_re.segment(b * plane, plane);
      const auto pi = p_im.segment(b * plane, plane);
      gw00 += (pr * u).sum();
      gw01 += (pr * v).sum() + (pi * u).sum();
      gw11 += (pi * v).sum();
    }

    const double a = 2.0 * cached_cov_[c * 3 + 0];
    const double bb = 2.0 * cached_cov_[c * 3 + 1];
    const double cc = 2.0 * cached_cov_[c * 3 + 2];
    InvSqrt2x2 f;
    f.s = std::sqrt(a * cc - bb * bb);
    f.t = std::sqrt(a + cc + 2.0 * f.s);
    f.w00 = w00;
    f.w01 = w01;
    f.w11 = w11;
    double ga, gb, gc;
    inv_sqrt_2x2_backward(a, bb, cc, f, gw00, gw01, gw11, ga, gb, gc);
    // A = 2 * (V + eps I)
    const double gvrr = 2.0 * ga;
    const double gvri = 2.0 * gb;
    const double gvii = 2.0 * gc;

    double mean_dc_re = 0.0, mean_dc_im = 0.0;
    for (Eigen::Index b = 0; b < B; ++b) {
      const Eigen::Index off = (b * C + c) * plane;
      const auto u = cached_centered_re_.segment(off, plane);
      const auto v = cached_centered_im_.segment(off, plane);
      const auto pr = p_re.segment(b * plane, plane);
      const auto pi = p_im.segment(b * plane, plane);
      dc_re.segment(b * plane, plane) =
          w00 * pr + w01 * pi + (2.0 * gvrr * u + gvri * v) / static_cast<double>(n);
      dc_im.segment(b * plane, plane) =
          w01 * pr + w11 * pi + (2.0 * gvii * v + gvri * u) / static_cast<double>(n);
      mean_dc_re += dc_re.segment(b * plane, plane).sum();
      mean_dc_im += dc_im.segment(b * plane, plane).sum();
    }
    mean_dc_re /= static_cast<double>(n);
    mean_dc_im /= static_cast<double>(n);
    for (Eigen::Index b = 0; b < B; ++b) {
      const Eigen::Index off = (b * C + c) * plane;
      grad_in.re().segment(off, plane) = dc_re.segment(b * plane, plane) - mean_dc_re;
      grad_in.im().segment(off, plane) = dc_im.segment(b * plane, plane) - mean_dc_im;
    }
  }
  return grad_in;
}

void ComplexBatchNormLayer::params_into(std::vector<Parameter*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

// ---------------------------------------------------------------------------
// Pointwise and resampling layers
// ---------------------------------------------------------------------------

ComplexTensor CRelu::forward(const ComplexTensor& x) {
  mask_re_ = (x.re() > 0.0).cast<double>();
  mask_im_ = (x.im() > 0.0).cast<double>();
  return {x.shape(), x.re().max(0.0), x.im().max(0.0)};
}

ComplexTensor CRelu::backward(const ComplexTensor& grad_out) const {
  require(grad_out.numel() == mask_re_.size(), "crelu backward called before forward");
  return {grad_out.shape(), grad_out.re() * mask_re_, grad_out.im() * mask_im_};
}

ComplexTensor CMaxPool2::forward(const ComplexTensor& x) {
  require(x.rank() == 4, "cmaxpool2: rank-4 [B,C,H,W] input expected");
  const Eigen::Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require(H % 2 == 0 && W % 2 == 0,
          "cmaxpool2: spatial extents must be even, got " + shape_to_string(x.shape()));
  in_shape_ = x.shape();
  const Eigen::Index Ho = H / 2, Wo = W / 2;
  ComplexTensor out({B, C, Ho, Wo});
  argmax_re_.assign(static_cast<std::size_t>(out.numel()), 0);
  argmax_im_.assign(static_cast<std::size_t>(out.numel()), 0);
  for (Eigen::Index bc = 0; bc < B * C; ++bc) {
    const double* re = x.re().data() + bc * H * W;
    const double* im = x.im().data() + bc * H * W;
    for (Eigen::Index oy = 0; oy < Ho; ++oy) {
      for (Eigen::Index ox = 0; ox < Wo; ++ox) {
        const Eigen::Index o = (bc * Ho + oy) * Wo + ox;
        Eigen::Index best_re = (2 * oy) * W + 2 * ox;
        Eigen::Index best_im = best_re;
        for (Eigen::Index dy = 0; dy < 2; ++dy) {
          for (Eigen::Index dx = 0; dx < 2; ++dx) {
            const Eigen::Index idx = (2 * oy + dy) * W + 2 * ox + dx;
            if (re[idx] > re[best_re]) best_re = idx;
            if (im[idx] > im[best_im]) best_im = idx;
          }
        }
        out.re()[o] = re[best_re];
        out.im()[o] = im[best_im];
        argmax_re_[static_cast<std::size_t>(o)] = bc * H * W + best_re;
        argmax_im_[static_cast<std::size_t>(o)] = bc * H * W + best_im;
      }
    }
  }
  return out;
}

ComplexTensor CMaxPool2::backward(const ComplexTensor& grad_out) const {
  require(!in_shape_.empty(), "cmaxpool2 backward called before forward");
  require(grad_out.numel() == static_cast<Eigen::Index>(argmax_re_.size()),
          "cmaxpool2 backward: gradient shape mismatch");
  ComplexTensor grad_in(in_shape_);
  for (Eigen::Index o = 0; o < grad_out.numel(); ++o) {
    grad_in.re()[argmax_re_[static_cast<std::size_t>(o)]] += grad_out.re()[o];
    grad_in.im()[argmax_im_[static_cast<std::size_t>(o)]] += grad_out.im()[o];
  }
  return grad_in;
}

ComplexTensor CUpsample2::forward(const ComplexTensor& x) {
  require(x.rank() == 4, "upsample2: rank-4 [B,C,H,W] input expected");
  in_shape_ = x.shape();
  const Eigen::Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  ComplexTensor out({B, C, 2 * H, 2 * W});
  for (Eigen::Index bc = 0; bc < B * C; ++bc) {
    const double* re = x.re().data() + bc * H * W;
    const double* im = x.im().data() + bc * H * W;
    double* ore = out.re().data() + bc * 4 * H * W;
    double* oim = out.im().data() + bc * 4 * H * W;
    for (Eigen::Index y = 0; y < 2 * H; ++y) {
      const Eigen::Index sy = y / 2;
      for (Eigen::Index x2 = 0; x2 < 2 * W; ++x2) {
        ore[y * 2 * W + x2] = re[sy * W + x2 / 2];
        oim[y * 2 * W + x2] = im[sy * W + x2 / 2];
      }
    }
  }
  return out;
}

ComplexTensor CUpsample2::backward(const ComplexTensor& grad_out) const {
  require(!in_shape_.empty(), "upsample2 backward called before forward");
  const Eigen::Index B = in_shape_[0], C = in_shape_[1], H = in_shape_[2], W = in_shape_[3];
  require(grad_out.rank() == 4 && grad_out.dim(2) == 2 * H && grad_out.dim(3) == 2 * W,
          "upsample2 backward: gradient shape mismatch");
  ComplexTensor grad_in(in_shape_);
  for (Eigen::Index bc = 0; bc < B * C; ++bc) {
    const double* gre = grad_out.re().data() + bc * 4 * H * W;
    const double* gim = grad_out.im().data() + bc * 4 * H * W;
    double* ore = grad_in.re().data() + bc * H * W;
    double* oim = grad_in.im().data() + bc * H * W;
    for (Eigen::Index y = 0; y < 2 * H; ++y) {
      const Eigen::Index sy = y / 2;
      for (Eigen::Index x2 = 0; x2 < 2 * W; ++x2) {
        ore[sy * W + x2 / 2] += gre[y * 2 * W + x2];
        oim[sy * W + x2 / 2] += gim[y * 2 * W + x2];
      }
    }
  }
  return grad_in;
}

ComplexTensor crelu(const ComplexTensor& x) {
  return {x.shape(), x.re().max(0.0), x.im().max(0.0)};
}

ComplexTensor cmaxpool2(const ComplexTensor& x) {
  CMaxPool2 pool;
  return pool.forward(x);
}

ComplexTensor upsample2(const ComplexTensor& x) {
  CUpsample2 up;
  return up.forward(x);
}

// ---------------------------------------------------------------------------
// Dense block
// ---------------------------------------------------------------------------

DenseBlock::DenseBlock(std::string name, int in_channels, int growth, int ksize, double bn_momentum,
                       double bn_eps)
    : in_channels_(in_channels), growth_(growth) {
  require(growth > 0, name + ": growth must be positive");
  for (int j = 0; j < 3; ++j) {
    const int unit_in = in_channels + j * growth;
    const std::string unit_name = name + ".unit" + std::to_string(j);
    units.push_back(Unit{ComplexConvLayer(unit_name + ".conv", unit_in, growth, ksize),
                         ComplexBatchNormLayer(unit_name + ".bn", growth, bn_momentum, bn_eps),
                         CRelu{}});
  }
}

void DenseBlock::init(Rng& rng) {
  for (Unit& u : units) u.conv.init(rng);
}

ComplexTensor DenseBlock::forward(const ComplexTensor& x, bool training) {
  require(x.rank() == 4 && x.dim(1) == in_channels_,
          "dense_block: input channel count mismatch, expected " + std::to_string(in_channels_));
  cached_features_.clear();
  cached_features_.push_back(x);
  for (Unit& u : units) {
    std::vector<const ComplexTensor*> parts;
    for (const ComplexTensor& f : cached_features_) parts.push_back(&f);
    const ComplexTensor unit_in = concat_channels(parts);
    cached_features_.push_back(u.relu.forward(u.bn.forward(u.conv.forward(unit_in), training)));
  }
  std::vector<const ComplexTensor*> parts;
  for (const ComplexTensor& f : cached_features_) parts.push_back(&f);
  return concat_channels(parts);
}

ComplexTensor DenseBlock::backward(const ComplexTensor& grad_out) {
  require(!cached_features_.empty(), "dense_block backward called before forward");
  std::vector<Eigen::Index> sizes{in_channels_};
  for (int j = 0; j < 3; ++j) sizes.push_back(growth_);
  std::vector<ComplexTensor> gfeat = split_channels(grad_out, sizes);

  for (int j = 2; j >= 0; --j) {
    Unit& u = units[static_cast<std::size_t>(j)];
    ComplexTensor g = u.conv.backward(u.bn.backward(u.relu.backward(gfeat[static_cast<std::size_t>(j + 1)])));
    // distribute over the concatenated unit input: block input + units < j
    std::vector<Eigen::Index> in_sizes{in_channels_};
    for (int i = 0; i < j; ++i) in_sizes.push_back(growth_);
    std::vector<ComplexTensor> gparts = split_channels(g, in_sizes);
    for (std::size_t i = 0; i < gparts.size(); ++i) {
      gfeat[i] = gfeat[i] + gparts[i];
    }
  }
  return gfeat[0];
}

void DenseBlock::params_into(std::vector<Parameter*>& out) {
  for (Unit& u : units) {
    u.conv.params_into(out);
    u.bn.params_into(out);
  }
}

void DenseBlock::set_update_running_stats(bool v) {
  for (Unit& u : units) u.bn.update_running_stats = v;
}

}  // namespace cdfnet
