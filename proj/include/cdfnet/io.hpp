#pragma once

#include <filesystem>

#include <json.hpp>

#include "cdfnet/metrics.hpp"
#include "cdfnet/sampling.hpp"
#include "cdfnet/tensor.hpp"

namespace cdfnet {

// Tensor container: "CTNS" magic, u32 version, u32 dtype tag (1 =
// complex-f64), u32 ndim, u64 extents, then row-major interleaved
// (re, im) doubles. All integers and doubles little-endian. Save/load
// roundtrips are bit-exact.
inline constexpr std::uint32_t kTensorFileVersion = 1;

void save_tensor(const ComplexTensor& t, const std::filesystem::path& path);
ComplexTensor load_tensor(const std::filesystem::path& path);

/// 8-bit binary PGM. Values are mapped from [0, max_value] to [0, 255];
/// max_value <= 0 uses the image maximum.
void write_pgm(const RealImage& img, const std::filesystem::path& path, double max_value = -1.0);
RealImage read_pgm(const std::filesystem::path& path);

/// 24-bit binary PPM.
void write_ppm(const RgbImage& img, const std::filesystem::path& path);

/// Masks as PGM (0/255 rows) or as a tensor container with 0/1 real part.
void save_mask_pgm(const SamplingMask& mask, const std::filesystem::path& path);
SamplingMask load_mask_pgm(const std::filesystem::path& path);
void save_mask_tensor(const SamplingMask& mask, const std::filesystem::path& path);
SamplingMask load_mask_tensor(const std::filesystem::path& path);
/// Dispatch on extension: .pgm or tensor container otherwise.
SamplingMask load_mask(const std::filesystem::path& path);

// Checkpoint container: "CDFCKPT1" magic, u64 header length, JSON header
// holding the config echo and a tensor table (name, shape, byte offset
// into the payload, element count), then a flat little-endian f64 payload.
struct NamedTensor {
  std::string name;
  Shape shape;
  Eigen::ArrayXd values;
};

struct Checkpoint {
  nlohmann::json config;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cdfnet
