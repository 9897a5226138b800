#include "cdfnet/metrics.hpp"

#include <cmath>
#include <limits>

namespace cdfnet {

double mse(const RealImage& p, const RealImage& q) {
  require(p.height == q.height && p.width == q.width, "mse: image shapes do not match");
  return (p.values - q.values).square().mean();
}

Eigen::Index EdgeMap::count() const {
  Eigen::Index n = 0;
  for (const std::uint8_t v : on) n += (v != 0);
  return n;
}

EdgeMap edge_map(const RealImage& p, EdgeMapParams params) {
  require(p.values.isFinite().all(), "edge_map: image must be finite");
  const Eigen::Index H = p.height, W = p.width;
  EdgeMap out;
  out.height = H;
  out.width = W;
  out.on.assign(static_cast<std::size_t>(H * W), 0);
  out.params = params;

  const auto clamp = [](Eigen::Index v, Eigen::Index hi) { return v < 0 ? 0 : (v >= hi ? hi - 1 : v); };
  Eigen::ArrayXd gmag(H * W);
  for (Eigen::Index y = 0; y < H; ++y) {
    for (Eigen::Index x = 0; x < W; ++x) {
      auto px = [&](Eigen::Index dy, Eigen::Index dx) {
        return p.at(clamp(y + dy, H), clamp(x + dx, W));
      };
      const double gx = (px(-1, 1) + 2.0 * px(0, 1) + px(1, 1)) -
                        (px(-1, -1) + 2.0 * px(0, -1) + px(1, -1));
      const double gy = (px(1, -1) + 2.0 * px(1, 0) + px(1, 1)) -
                        (px(-1, -1) + 2.0 * px(-1, 0) + px(-1, 1));
      gmag[y * W + x] = std::sqrt(gx * gx + gy * gy);
    }
  }
  const double gmax = gmag.maxCoeff();
  if (gmax <= 0.0) return out;  // flat image, no edges
  const double thresh = params.threshold_frac * gmax;
  for (Eigen::Index i = 0; i < H * W; ++i) {
    if (gmag[i] >= thresh) out.on[static_cast<std::size_t>(i)] = 1;
  }
  return out;
}

namespace {

// 1-D squared distance transform via the lower envelope of parabolas.
// Infinite entries contribute no parabola.
void dt_1d(const double* f, Eigen::Index n, Eigen::Index stride, double* out,
           std::vector<Eigen::Index>& v, std::vector<double>& z) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  v.resize(static_cast<std::size_t>(n));
  z.resize(static_cast<std::size_t>(n + 1));
  Eigen::Index k = -1;
  for (Eigen::Index q = 0; q < n; ++q) {
    const double fq = f[q * stride];
    if (fq == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s;
    while (true) {
      s = ((fq + static_cast<double>(q * q)) -
           (f[v[k] * stride] + static_cast<double>(v[k] * v[k]))) /
          (2.0 * static_cast<double>(q - v[k]));
      if (s <= z[k]) {
        --k;  // z[0] = -inf guarantees termination at k >= 0
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    for (Eigen::Index q = 0; q < n; ++q) out[q] = kInf;
    return;
  }
  Eigen::Index kk = 0;
  for (Eigen::Index q = 0; q < n; ++q) {
    while (z[kk + 1] < static_cast<double>(q)) ++kk;
    const double d = static_cast<double>(q - v[kk]);
    out[q] = d * d + f[v[kk] * stride];
  }
}

}  // namespace

Eigen::ArrayXd squared_distance_transform(const EdgeMap& ref) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const Eigen::Index H = ref.height, W = ref.width;
  Eigen::ArrayXd f(H * W);
  for (Eigen::Index i = 0; i < H * W; ++i) {
    f[i] = ref.on[static_cast<std::size_t>(i)] ? 0.0 : kInf;
  }
  std::vector<Eigen::Index> v;
  std::vector<double> z;
  Eigen::ArrayXd tmp(H * W);
  // columns first, then rows
  std::vector<double> line(static_cast<std::size_t>(std::max(H, W)));
  for (Eigen::Index x = 0; x < W; ++x) {
    dt_1d(f.data() + x, H, W, line.data(), v, z);
    for (Eigen::Index y = 0; y < H; ++y) tmp[y * W + x] = line[static_cast<std::size_t>(y)];
  }
  Eigen::ArrayXd out(H * W);
  for (Eigen::Index y = 0; y < H; ++y) {
    dt_1d(tmp.data() + y * W, W, 1, out.data() + y * W, v, z);
  }
  return out;
}

double pratts_fom(const EdgeMap& detected, const EdgeMap& reference, double alpha) {
  require(detected.height == reference.height && detected.width == reference.width,
          "pratts_fom: edge map shapes do not match");
  const Eigen::Index n_ref = reference.count();
  require(n_ref > 0, "pratts_fom: reference edge map is empty");
  const Eigen::Index n_det = detected.count();
  if (n_det == 0) return 0.0;

  const Eigen::ArrayXd d2 = squared_distance_transform(reference);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < detected.height * detected.width; ++i) {
    if (detected.on[static_cast<std::size_t>(i)]) sum += 1.0 / (1.0 + alpha * d2[i]);
  }
  return sum / static_cast<double>(std::max(n_ref, n_det));
}

RgbImage edge_difference_map(const EdgeMap& recon, const EdgeMap& gt) {
  require(recon.height == gt.height && recon.width == gt.width,
          "edge_difference_map: edge map shapes do not match");
  RgbImage img(gt.height, gt.width);
  for (Eigen::Index i = 0; i < gt.height * gt.width; ++i) {
    const bool in_gt = gt.on[static_cast<std::size_t>(i)] != 0;
    const bool in_det = recon.on[static_cast<std::size_t>(i)] != 0;
    std::uint8_t* px = img.rgb.data() + 3 * i;
    if (in_gt && in_det) {
      px[1] = 255;  // green: present in both
    } else if (in_gt) {
      px[0] = 255;  // red: missing from the reconstruction
    } else if (in_det) {
      px[2] = 255;  // blue: hallucinated
    }
  }
  return img;
}

ImageEval evaluate_pair(const ComplexTensor& recon, const ComplexTensor& gt,
                        const LossConfig& loss_cfg, EdgeMapParams edge_params) {
  require_same_shape(recon, gt, "evaluate_pair");
  RealImage mr = magnitude_image(recon);
  RealImage mf = magnitude_image(gt);
  const double range = std::max(mf.values.maxCoeff(), 1e-12);

  ImageEval ev;
  ev.ssim = ssim(mr, mf, loss_cfg, range).value;

  RealImage mr_n = mr, mf_n = mf;
  mr_n.values /= range;
  mf_n.values /= range;
  ev.mse = mse(mr_n, mf_n);

  const EdgeMap edges_recon = edge_map(mr, edge_params);
  const EdgeMap edges_gt = edge_map(mf, edge_params);
  ev.pratts_fom = pratts_fom(edges_recon, edges_gt);
  return ev;
}

}  // namespace cdfnet
