#include "cdfnet/fft.hpp"

#include <cmath>
#include <numbers>

namespace cdfnet {

namespace {

bool is_pow2(Eigen::Index n) { return n > 0 && (n & (n - 1)) == 0; }

std::vector<Eigen::Index> bit_reversal(Eigen::Index n) {
  std::vector<Eigen::Index> rev(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 1; i < n; ++i) {
    rev[i] = (rev[i >> 1] >> 1) | ((i & 1) ? n >> 1 : 0);
  }
  return rev;
}

void make_twiddles(Eigen::Index n, std::vector<double>& tw_re, std::vector<double>& tw_im) {
  const Eigen::Index half = n / 2;
  tw_re.resize(static_cast<std::size_t>(std::max<Eigen::Index>(half, 1)));
  tw_im.resize(tw_re.size());
  for (Eigen::Index k = 0; k < half; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    tw_re[k] = std::cos(angle);
    tw_im[k] = std::sin(angle);
  }
}

// Iterative radix-2 on strided data; twiddles are conjugated for the inverse.
void fft1d(double* re, double* im, Eigen::Index n, Eigen::Index stride,
           const std::vector<Eigen::Index>& rev, const std::vector<double>& tw_re,
           const std::vector<double>& tw_im, bool inverse) {
  if (n <= 1) return;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = rev[i];
    if (i < j) {
      std::swap(re[i * stride], re[j * stride]);
      std::swap(im[i * stride], im[j * stride]);
    }
  }
  const double conj_sign = inverse ? -1.0 : 1.0;
  for (Eigen::Index len = 2; len <= n; len <<= 1) {
    const Eigen::Index half = len >> 1;
    const Eigen::Index step = n / len;
    for (Eigen::Index start = 0; start < n; start += len) {
      for (Eigen::Index k = 0; k < half; ++k) {
        const double wr = tw_re[k * step];
        const double wi = conj_sign * tw_im[k * step];
        double* ar = re + (start + k) * stride;
        double* ai = im + (start + k) * stride;
        double* br = re + (start + k + half) * stride;
        double* bi = im + (start + k + half) * stride;
        const double vr = *br * wr - *bi * wi;
        const double vi = *br * wi + *bi * wr;
        const double ur = *ar;
        const double ui = *ai;
        *ar = ur + vr;
        *ai = ui + vi;
        *br = ur - vr;
        *bi = ui - vi;
      }
    }
  }
}

// Swap half-planes along both axes; its own inverse for even extents.
void shift2(double* re, double* im, Eigen::Index h, Eigen::Index w) {
  const Eigen::Index hh = h / 2, hw = w / 2;
  if (hh > 0) {
    for (Eigen::Index y = 0; y < hh; ++y) {
      for (Eigen::Index x = 0; x < w; ++x) {
        std::swap(re[y * w + x], re[(y + hh) * w + x]);
        std::swap(im[y * w + x], im[(y + hh) * w + x]);
      }
    }
  }
  if (hw > 0) {
    for (Eigen::Index y = 0; y < h; ++y) {
      for (Eigen::Index x = 0; x < hw; ++x) {
        std::swap(re[y * w + x], re[y * w + x + hw]);
        std::swap(im[y * w + x], im[y * w + x + hw]);
      }
    }
  }
}

}  // namespace

FftPlan::FftPlan(Eigen::Index height, Eigen::Index width) : height_(height), width_(width) {
  require(is_pow2(height) && is_pow2(width),
          "fft: extents must be powers of two, got " + std::to_string(height) + "x" +
              std::to_string(width));
  rev_rows_ = bit_reversal(width);
  rev_cols_ = bit_reversal(height);
  make_twiddles(width, tw_re_rows_, tw_im_rows_);
  make_twiddles(height, tw_re_cols_, tw_im_cols_);
}

void FftPlan::transform(ComplexTensor& t, bool inverse) const {
  const Eigen::Index H = height_, W = width_;
  const Eigen::Index slices = t.numel() / (H * W);
  const double scale = 1.0 / std::sqrt(static_cast<double>(H * W));
  for (Eigen::Index s = 0; s < slices; ++s) {
    double* re = t.re().data() + s * H * W;
    double* im = t.im().data() + s * H * W;
    shift2(re, im, H, W);
    for (Eigen::Index y = 0; y < H; ++y) {
      fft1d(re + y * W, im + y * W, W, 1, rev_rows_, tw_re_rows_, tw_im_rows_, inverse);
    }
    for (Eigen::Index x = 0; x < W; ++x) {
      fft1d(re + x, im + x, H, W, rev_cols_, tw_re_cols_, tw_im_cols_, inverse);
    }
    shift2(re, im, H, W);
  }
  t.re() *= scale;
  t.im() *= scale;
}

ComplexTensor FftPlan::forward(const ComplexTensor& x) const {
  require(x.rank() >= 2 && x.dim(-2) == height_ && x.dim(-1) == width_,
          "fft2: tensor extents do not match plan " + std::to_string(height_) + "x" +
              std::to_string(width_));
  ComplexTensor out = x;
  transform(out, /*inverse=*/false);
  return out;
}

ComplexTensor FftPlan::inverse(const ComplexTensor& y) const {
  require(y.rank() >= 2 && y.dim(-2) == height_ && y.dim(-1) == width_,
          "ifft2: tensor extents do not match plan " + std::to_string(height_) + "x" +
              std::to_string(width_));
  ComplexTensor out = y;
  transform(out, /*inverse=*/true);
  return out;
}

ComplexTensor fft2(const ComplexTensor& x, const FftPlan& plan) { return plan.forward(x); }
ComplexTensor ifft2(const ComplexTensor& y, const FftPlan& plan) { return plan.inverse(y); }

ComplexTensor fft2(const ComplexTensor& x) {
  require(x.rank() >= 2, "fft2: rank-2 or higher tensor expected");
  return FftPlan(x.dim(-2), x.dim(-1)).forward(x);
}

ComplexTensor ifft2(const ComplexTensor& y) {
  require(y.rank() >= 2, "ifft2: rank-2 or higher tensor expected");
  return FftPlan(y.dim(-2), y.dim(-1)).inverse(y);
}

}  // namespace cdfnet
