#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>

#include "cdfnet/fft.hpp"
#include "cdfnet/io.hpp"
#include "cdfnet/phantom.hpp"
#include "cdfnet/sampling.hpp"
#include "test_util.hpp"

using namespace cdfnet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "cdfnet_data_test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

}  // namespace

TEST_CASE("phantom contract: normalization, determinism, sizing") {
  const ComplexTensor a = gen_phantom(64, 64, 7);
  CHECK(magnitude(a).maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.all_finite());

  const ComplexTensor b = gen_phantom(64, 64, 7);
  CHECK(max_abs_diff(a, b) == 0.0);
  const ComplexTensor c = gen_phantom(64, 64, 8);
  CHECK(max_abs_diff(a, c) > 0.0);

  CHECK_THROWS_AS(gen_phantom(60, 64, 1), ValidationError);
}

TEST_CASE("phantom spectra are concentrated in the central quarter of rows") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const Eigen::Index H = 64, W = 64;
    const ComplexTensor y = fft2(gen_phantom(H, W, seed));
    const Eigen::ArrayXd energy = y.re().square() + y.im().square();
    double central = 0.0;
    const Eigen::Index lo = H / 2 - H / 8, hi = H / 2 + H / 8;
    for (Eigen::Index row = lo; row < hi; ++row) {
      central += energy.segment(row * W, W).sum();
    }
    CHECK(central / energy.sum() >= 0.90);
  }
}

TEST_CASE("phantom phase field is slowly varying") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const PhantomParts parts = gen_phantom_parts(64, 64, seed);
    CHECK(parts.phase.values.abs().maxCoeff() <= std::numbers::pi);
    double max_grad = 0.0;
    for (Eigen::Index y = 0; y < 64; ++y) {
      for (Eigen::Index x = 0; x < 64; ++x) {
        if (x + 1 < 64) max_grad = std::max(max_grad, std::abs(parts.phase.at(y, x + 1) - parts.phase.at(y, x)));
        if (y + 1 < 64) max_grad = std::max(max_grad, std::abs(parts.phase.at(y + 1, x) - parts.phase.at(y, x)));
      }
    }
    CHECK(max_grad < std::numbers::pi / 8.0);
  }
}

TEST_CASE("rigid transform identity and augmentation invariants") {
  const ComplexTensor x = gen_phantom(64, 64, 3);
  CHECK(max_abs_diff(rigid_transform(x, 0.0, 0.0, 0.0), x) == 0.0);

  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const ComplexTensor aug = rigid_augment(x, seed);
    CHECK(aug.shape() == x.shape());
    const double e0 = x.re().square().sum() + x.im().square().sum();
    const double e1 = aug.re().square().sum() + aug.im().square().sum();
    CHECK(std::abs(e1 - e0) / e0 < 0.02);
  }
  CHECK(max_abs_diff(rigid_augment(x, 5), rigid_augment(x, 5)) == 0.0);
}

TEST_CASE("tensor file roundtrip is bit-exact") {
  Rng rng(11);
  const ComplexTensor t = test::random_tensor({2, 3, 4}, rng);
  const fs::path path = temp_dir() / "roundtrip.ctns";
  save_tensor(t, path);
  const ComplexTensor back = load_tensor(path);
  CHECK(back.shape() == t.shape());
  CHECK(std::memcmp(back.re().data(), t.re().data(), sizeof(double) * t.numel()) == 0);
  CHECK(std::memcmp(back.im().data(), t.im().data(), sizeof(double) * t.numel()) == 0);

  // saving again produces identical bytes
  const fs::path path2 = temp_dir() / "roundtrip2.ctns";
  save_tensor(back, path2);
  CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("tensor file corruption is rejected") {
  Rng rng(13);
  const ComplexTensor t = test::random_tensor({2, 3}, rng);
  const fs::path dir = temp_dir();
  const fs::path good = dir / "good.ctns";
  save_tensor(t, good);
  const std::string bytes = slurp(good);

  const fs::path bad_magic = dir / "bad_magic.ctns";
  std::string m = bytes;
  m[0] = 'X';
  spit(bad_magic, m);
  CHECK_THROWS_AS(load_tensor(bad_magic), ValidationError);

  const fs::path bad_version = dir / "bad_version.ctns";
  std::string v = bytes;
  v[4] = 2;
  spit(bad_version, v);
  CHECK_THROWS_AS(load_tensor(bad_version), ValidationError);

  // header says [2,3] but only 5 complex entries follow
  const fs::path short_payload = dir / "short.ctns";
  spit(short_payload, bytes.substr(0, bytes.size() - 16));
  CHECK_THROWS_AS(load_tensor(short_payload), ValidationError);

  const fs::path trailing = dir / "trailing.ctns";
  spit(trailing, bytes + std::string(8, '\0'));
  CHECK_THROWS_AS(load_tensor(trailing), ValidationError);

  const fs::path truncated_header = dir / "trunc.ctns";
  spit(truncated_header, bytes.substr(0, 10));
  CHECK_THROWS_AS(load_tensor(truncated_header), ValidationError);
}

TEST_CASE("dataset pipeline determinism and consistency") {
  const Eigen::Index H = 64, W = 64;
  const ComplexTensor x_f = gen_phantom(H, W, 17);
  const SamplingMask mask = make_mask(H, W, 4.0, 8, 0.15, 23);
  const ComplexTensor y_f = fft2(x_f);
  const ComplexTensor y_u = undersample(y_f, mask);
  const ComplexTensor x_u = zero_fill_recon(y_u, mask);

  // the k-space of the zero-filled image equals the acquisition on the mask
  const ComplexTensor y_back = fft2(x_u);
  for (Eigen::Index y = 0; y < H; ++y) {
    if (!mask.row_selected(y)) continue;
    for (Eigen::Index x = 0; x < W; ++x) {
      CHECK(std::abs(y_back.at(y * W + x) - y_f.at(y * W + x)) < 1e-10);
    }
  }

  // (phantom seed, mask seed) fully determines the pair
  const ComplexTensor x_f2 = gen_phantom(H, W, 17);
  const SamplingMask mask2 = make_mask(H, W, 4.0, 8, 0.15, 23);
  CHECK(max_abs_diff(x_f2, x_f) == 0.0);
  CHECK(mask2.rows == mask.rows);
}

TEST_CASE("pgm and mask file roundtrips") {
  const fs::path dir = temp_dir();
  const SamplingMask mask = make_mask(32, 32, 2.0, 4, 0.15, 5);

  const fs::path pgm = dir / "mask.pgm";
  save_mask_pgm(mask, pgm);
  const SamplingMask back = load_mask_pgm(pgm);
  CHECK(back.rows == mask.rows);
  CHECK(back.width == mask.width);

  const fs::path ctns = dir / "mask.ctns";
  save_mask_tensor(mask, ctns);
  CHECK(load_mask(ctns).rows == mask.rows);
  CHECK(load_mask(pgm).rows == mask.rows);

  // non-Cartesian grids are rejected
  ComplexTensor bad({2, 2});
  bad.re()[0] = 1.0;
  const fs::path badpath = dir / "bad_mask.ctns";
  save_tensor(bad, badpath);
  CHECK_THROWS_AS(load_mask_tensor(badpath), ValidationError);
}

TEST_CASE("checkpoint container roundtrip") {
  const fs::path dir = temp_dir();
  Rng rng(29);
  Checkpoint ckpt;
  ckpt.config = {{"epochs", 3}, {"lambda", 2.0}};
  Eigen::ArrayXd a(6), b(4);
  for (Eigen::Index i = 0; i < 6; ++i) a[i] = rng.normal();
  for (Eigen::Index i = 0; i < 4; ++i) b[i] = rng.normal();
  ckpt.tensors.push_back({"layer.w", Shape{2, 3}, a});
  ckpt.tensors.push_back({"layer.b", Shape{4}, b});

  const fs::path path = dir / "test.cdfc";
  save_checkpoint(ckpt, path);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.config.at("epochs").get<int>() == 3);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.tensors[0].name == "layer.w");
  CHECK(back.tensors[0].shape == Shape{2, 3});
  CHECK(std::memcmp(back.tensors[0].values.data(), a.data(), sizeof(double) * 6) == 0);
  CHECK(back.find("layer.b") != nullptr);
  CHECK(back.find("missing") == nullptr);

  // corrupted payload is rejected
  std::string bytes = slurp(path);
  spit(path, bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(load_checkpoint(path), ValidationError);
}
