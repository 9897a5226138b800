#include "cdfnet/phantom.hpp"

#include <cmath>
#include <numbers>

#include "cdfnet/rng.hpp"

namespace cdfnet {

namespace {

double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * (3.0 - 2.0 * t);
}

// Separable binomial [1 4 6 4 1]/16 blur with replicated borders.
void binomial_blur(RealImage& img) {
  static const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const Eigen::Index H = img.height, W = img.width;
  const auto clamp = [](Eigen::Index v, Eigen::Index hi) { return v < 0 ? 0 : (v >= hi ? hi - 1 : v); };
  RealImage tmp(H, W);
  for (Eigen::Index y = 0; y < H; ++y) {
    for (Eigen::Index x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int t = -2; t <= 2; ++t) acc += k[t + 2] * img.at(y, clamp(x + t, W));
      tmp.at(y, x) = acc;
    }
  }
  for (Eigen::Index y = 0; y < H; ++y) {
    for (Eigen::Index x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int t = -2; t <= 2; ++t) acc += k[t + 2] * tmp.at(clamp(y + t, H), x);
      img.at(y, x) = acc;
    }
  }
}

}  // namespace

PhantomParts gen_phantom_parts(Eigen::Index height, Eigen::Index width, std::uint64_t seed) {
  require(height % 16 == 0 && width % 16 == 0,
          "gen_phantom: extents must be divisible by 16, got " + std::to_string(height) + "x" +
              std::to_string(width));
  Rng rng(seed);
  PhantomParts out;
  out.magnitude = RealImage(height, width);
  out.phase = RealImage(height, width);

  // Soft-edged ellipses on a large background ellipse. Content stays within
  // a central disc so rigid transforms do not clip anatomy.
  struct Ellipse {
    double cy, cx, ry, rx, angle, intensity;
  };
  std::vector<Ellipse> ellipses;
  ellipses.push_back({0.0, 0.0, rng.uniform(0.62, 0.72), rng.uniform(0.52, 0.62),
                      rng.uniform(-0.3, 0.3), rng.uniform(0.55, 0.75)});
  const int extra = 5 + static_cast<int>(rng.uniform_index(4));  // 5..8 inner structures
  for (int i = 0; i < extra; ++i) {
    ellipses.push_back({rng.uniform(-0.35, 0.35), rng.uniform(-0.35, 0.35), rng.uniform(0.06, 0.3),
                        rng.uniform(0.06, 0.3), rng.uniform(-std::numbers::pi, std::numbers::pi),
                        rng.uniform(-0.45, 0.55)});
  }

  const double edge_soft = 0.08;  // transition width in normalized units
  for (Eigen::Index y = 0; y < height; ++y) {
    for (Eigen::Index x = 0; x < width; ++x) {
      const double ny = (2.0 * y - (height - 1)) / static_cast<double>(height);
      const double nx = (2.0 * x - (width - 1)) / static_cast<double>(width);
      double val = 0.0;
      for (const Ellipse& e : ellipses) {
        const double dy = ny - e.cy, dx = nx - e.cx;
        const double ca = std::cos(e.angle), sa = std::sin(e.angle);
        const double u = (ca * dx + sa * dy) / e.rx;
        const double v = (-sa * dx + ca * dy) / e.ry;
        const double q = u * u + v * v;
        val += e.intensity * smoothstep((1.0 - q) / edge_soft + 0.5);
      }
      out.magnitude.at(y, x) = std::max(val, 0.0);
    }
  }
  binomial_blur(out.magnitude);
  binomial_blur(out.magnitude);
  const double mmax = out.magnitude.values.maxCoeff();
  require(mmax > 0.0, "gen_phantom: degenerate magnitude field");
  out.magnitude.values /= mmax;

  // Slowly varying quadratic phase, rescaled into (-pi, pi). The smooth
  // polynomial keeps the per-pixel phase gradient well under pi/8.
  const double a00 = rng.uniform(-1.5, 1.5);
  const double a10 = rng.uniform(-1.5, 1.5), a01 = rng.uniform(-1.5, 1.5);
  const double a20 = rng.uniform(-1.0, 1.0), a11 = rng.uniform(-1.0, 1.0), a02 = rng.uniform(-1.0, 1.0);
  double pmax = 0.0;
  for (Eigen::Index y = 0; y < height; ++y) {
    for (Eigen::Index x = 0; x < width; ++x) {
      const double ny = (2.0 * y - (height - 1)) / static_cast<double>(height);
      const double nx = (2.0 * x - (width - 1)) / static_cast<double>(width);
      const double phi =
          a00 + a10 * nx + a01 * ny + a20 * nx * nx + a11 * nx * ny + a02 * ny * ny;
      out.phase.at(y, x) = phi;
      pmax = std::max(pmax, std::abs(phi));
    }
  }
  const double limit = 0.95 * std::numbers::pi;
  if (pmax > limit) out.phase.values *= limit / pmax;
  return out;
}

ComplexTensor gen_phantom(Eigen::Index height, Eigen::Index width, std::uint64_t seed) {
  const PhantomParts parts = gen_phantom_parts(height, width, seed);
  ComplexTensor out({height, width});
  out.re() = parts.magnitude.values * parts.phase.values.cos();
  out.im() = parts.magnitude.values * parts.phase.values.sin();
  return out;
}

ComplexTensor rigid_transform(const ComplexTensor& x, double angle, double ty, double tx) {
  require(x.rank() == 2, "rigid_transform: [H,W] image expected");
  const Eigen::Index H = x.dim(0), W = x.dim(1);
  const double cy = (H - 1) / 2.0, cx = (W - 1) / 2.0;
  const double ca = std::cos(angle), sa = std::sin(angle);

  ComplexTensor out({H, W});
  for (Eigen::Index y = 0; y < H; ++y) {
    for (Eigen::Index xo = 0; xo < W; ++xo) {
      // inverse map: undo translation, then rotation about the center
      const double py = static_cast<double>(y) - ty - cy;
      const double px = static_cast<double>(xo) - tx - cx;
      const double sy = ca * py + sa * px + cy;
      const double sx = -sa * py + ca * px + cx;
      const Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(sy));
      const Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(sx));
      const double fy = sy - static_cast<double>(y0);
      const double fx = sx - static_cast<double>(x0);
      double acc_re = 0.0, acc_im = 0.0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const Eigen::Index yy = y0 + dy, xx = x0 + dx;
          if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
          const double wgt = (dy ? fy : 1.0 - fy) * (dx ? fx : 1.0 - fx);
          acc_re += wgt * x.re()[yy * W + xx];
          acc_im += wgt * x.im()[yy * W + xx];
        }
      }
      out.re()[y * W + xo] = acc_re;
      out.im()[y * W + xo] = acc_im;
    }
  }
  return out;
}

ComplexTensor rigid_augment(const ComplexTensor& x, std::uint64_t seed) {
  Rng rng(seed);
  const double max_angle = 10.0 * std::numbers::pi / 180.0;
  const double angle = rng.uniform(-max_angle, max_angle);
  const double ty = rng.uniform(-4.0, 4.0);
  const double tx = rng.uniform(-4.0, 4.0);
  return rigid_transform(x, angle, ty, tx);
}

}  // namespace cdfnet
