#include "cdfnet/tensor.hpp"

#include <sstream>
#include <utility>

namespace cdfnet {

Eigen::Index shape_numel(const Shape& shape) {
  Eigen::Index n = 1;
  for (const Eigen::Index d : shape) {
    require(d > 0, "tensor extents must be positive, got " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool shapes_equal(const Shape& a, const Shape& b) { return a == b; }

ComplexTensor::ComplexTensor(Shape shape) : shape_(std::move(shape)) {
  const Eigen::Index n = shape_numel(shape_);
  re_ = Eigen::ArrayXd::Zero(n);
  im_ = Eigen::ArrayXd::Zero(n);
}

ComplexTensor::ComplexTensor(Shape shape, Eigen::ArrayXd re, Eigen::ArrayXd im)
    : shape_(std::move(shape)), re_(std::move(re)), im_(std::move(im)) {
  const Eigen::Index n = shape_numel(shape_);
  require(re_.size() == n && im_.size() == n,
          "tensor payload does not match shape " + shape_to_string(shape_));
}

Eigen::Index ComplexTensor::dim(int i) const {
  const int r = rank();
  if (i < 0) i += r;
  require(i >= 0 && i < r, "axis out of range");
  return shape_[static_cast<std::size_t>(i)];
}

void require_same_shape(const ComplexTensor& a, const ComplexTensor& b, const char* op) {
  require(shapes_equal(a.shape(), b.shape()),
          std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
              shape_to_string(b.shape()));
}

ComplexTensor operator+(const ComplexTensor& a, const ComplexTensor& b) {
  require_same_shape(a, b, "add");
  return {a.shape(), a.re() + b.re(), a.im() + b.im()};
}

ComplexTensor operator-(const ComplexTensor& a, const ComplexTensor& b) {
  require_same_shape(a, b, "sub");
  return {a.shape(), a.re() - b.re(), a.im() - b.im()};
}

ComplexTensor operator*(const ComplexTensor& a, const ComplexTensor& b) {
  require_same_shape(a, b, "elementwise_mul");
  return {a.shape(), a.re() * b.re() - a.im() * b.im(), a.re() * b.im() + a.im() * b.re()};
}

ComplexTensor operator*(const ComplexTensor& a, std::complex<double> s) {
  return {a.shape(), a.re() * s.real() - a.im() * s.imag(), a.re() * s.imag() + a.im() * s.real()};
}

ComplexTensor conj(const ComplexTensor& a) { return {a.shape(), a.re(), -a.im()}; }

ComplexTensor zeros_like(const ComplexTensor& a) { return ComplexTensor(a.shape()); }

ComplexTensor reshape(const ComplexTensor& a, Shape shape) {
  require(shape_numel(shape) == a.numel(), "reshape: element count mismatch");
  return {std::move(shape), a.re(), a.im()};
}

Eigen::ArrayXd magnitude(const ComplexTensor& a) {
  return (a.re().square() + a.im().square()).sqrt();
}

double max_abs_diff(const ComplexTensor& a, const ComplexTensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  if (a.numel() == 0) return 0.0;
  return std::max((a.re() - b.re()).abs().maxCoeff(), (a.im() - b.im()).abs().maxCoeff());
}

ComplexTensor concat_channels(const std::vector<const ComplexTensor*>& parts) {
  require(!parts.empty(), "concat_channels: no inputs");
  const ComplexTensor& first = *parts.front();
  require(first.rank() == 4, "concat_channels: rank-4 tensors expected");
  const Eigen::Index B = first.dim(0), H = first.dim(2), W = first.dim(3);
  Eigen::Index ctotal = 0;
  for (const ComplexTensor* p : parts) {
    require(p->rank() == 4 && p->dim(0) == B && p->dim(2) == H && p->dim(3) == W,
            "concat_channels: incompatible shapes");
    ctotal += p->dim(1);
  }
  ComplexTensor out({B, ctotal, H, W});
  const Eigen::Index plane = H * W;
  for (Eigen::Index b = 0; b < B; ++b) {
    Eigen::Index coff = 0;
    for (const ComplexTensor* p : parts) {
      const Eigen::Index c = p->dim(1);
      out.re().segment((b * ctotal + coff) * plane, c * plane) = p->re().segment(b * c * plane, c * plane);
      out.im().segment((b * ctotal + coff) * plane, c * plane) = p->im().segment(b * c * plane, c * plane);
      coff += c;
    }
  }
  return out;
}

std::vector<ComplexTensor> split_channels(const ComplexTensor& t, const std::vector<Eigen::Index>& sizes) {
  require(t.rank() == 4, "split_channels: rank-4 tensor expected");
  const Eigen::Index B = t.dim(0), C = t.dim(1), H = t.dim(2), W = t.dim(3);
  Eigen::Index csum = 0;
  for (const Eigen::Index s : sizes) csum += s;
  require(csum == C, "split_channels: sizes do not sum to channel count");
  const Eigen::Index plane = H * W;
  std::vector<ComplexTensor> out;
  out.reserve(sizes.size());
  Eigen::Index coff = 0;
  for (const Eigen::Index c : sizes) {
    ComplexTensor part({B, c, H, W});
    for (Eigen::Index b = 0; b < B; ++b) {
      part.re().segment(b * c * plane, c * plane) = t.re().segment((b * C + coff) * plane, c * plane);
      part.im().segment(b * c * plane, c * plane) = t.im().segment((b * C + coff) * plane, c * plane);
    }
    out.push_back(std::move(part));
    coff += c;
  }
  return out;
}

ComplexTensor stack_images(const std::vector<ComplexTensor>& images) {
  require(!images.empty(), "stack_images: no inputs");
  const Eigen::Index H = images.front().dim(0), W = images.front().dim(1);
  const Eigen::Index B = static_cast<Eigen::Index>(images.size());
  ComplexTensor out({B, 1, H, W});
  for (Eigen::Index b = 0; b < B; ++b) {
    const ComplexTensor& img = images[static_cast<std::size_t>(b)];
    require(img.rank() == 2 && img.dim(0) == H && img.dim(1) == W, "stack_images: incompatible shapes");
    out.re().segment(b * H * W, H * W) = img.re();
    out.im().segment(b * H * W, H * W) = img.im();
  }
  return out;
}

RealImage magnitude_image(const ComplexTensor& t, Eigen::Index batch_index) {
  Eigen::Index H = 0, W = 0, offset = 0;
  if (t.rank() == 2) {
    require(batch_index == 0, "magnitude_image: rank-2 tensor has a single image");
    H = t.dim(0);
    W = t.dim(1);
  } else {
    require(t.rank() == 4 && t.dim(1) == 1, "magnitude_image: expected [B,1,H,W] or [H,W]");
    require(batch_index >= 0 && batch_index < t.dim(0), "magnitude_image: batch index out of range");
    H = t.dim(2);
    W = t.dim(3);
    offset = batch_index * H * W;
  }
  RealImage img(H, W);
  img.values = (t.re().segment(offset, H * W).square() + t.im().segment(offset, H * W).square()).sqrt();
  return img;
}

}  // namespace cdfnet
