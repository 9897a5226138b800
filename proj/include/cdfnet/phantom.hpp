#pragma once

#include <cstdint>

#include "cdfnet/tensor.hpp"

namespace cdfnet {

/// Magnitude and phase fields of a synthetic phantom, before combination.
struct PhantomParts {
  RealImage magnitude;  // piecewise-smooth, max normalized to 1
  RealImage phase;      // slowly varying polynomial field in [-pi, pi]
};

PhantomParts gen_phantom_parts(Eigen::Index height, Eigen::Index width, std::uint64_t seed);

/// Synthetic complex image magnitude * exp(i * phase), shape [H, W].
/// Extents must be divisible by 16. Deterministic per seed.
ComplexTensor gen_phantom(Eigen::Index height, Eigen::Index width, std::uint64_t seed);

/// Rotation (radians, about the image center) plus translation, bilinear
/// interpolation applied identically to both parts; samples falling outside
/// the image are zero. Zero angle and translation is an exact identity.
ComplexTensor rigid_transform(const ComplexTensor& x, double angle, double ty, double tx);

/// Random small rigid transform: rotation within +/-10 degrees and
/// translation within +/-4 px. Deterministic per seed.
ComplexTensor rigid_augment(const ComplexTensor& x, std::uint64_t seed);

}  // namespace cdfnet
