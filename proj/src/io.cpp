#include "cdfnet/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace cdfnet {

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  Reader(std::string data, std::string label) : data_(std::move(data)), label_(std::move(label)) {}

  std::string_view take(std::size_t n) {
    require(pos_ + n <= data_.size(), label_ + ": truncated file");
    std::string_view out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t u32() {
    const std::string_view b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const std::string_view b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string data_;
  std::string label_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write file: " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  require(out.good(), "write failed: " + path.string());
}

constexpr char kTensorMagic[4] = {'C', 'T', 'N', 'S'};
constexpr std::uint32_t kDtypeComplexF64 = 1;
constexpr char kCheckpointMagic[8] = {'C', 'D', 'F', 'C', 'K', 'P', 'T', '1'};

}  // namespace

void save_tensor(const ComplexTensor& t, const std::filesystem::path& path) {
  std::string buf;
  buf.reserve(16 + t.shape().size() * 8 + static_cast<std::size_t>(t.numel()) * 16);
  buf.append(kTensorMagic, 4);
  put_u32(buf, kTensorFileVersion);
  put_u32(buf, kDtypeComplexF64);
  put_u32(buf, static_cast<std::uint32_t>(t.shape().size()));
  for (const Eigen::Index d : t.shape()) put_u64(buf, static_cast<std::uint64_t>(d));
  for (Eigen::Index i = 0; i < t.numel(); ++i) {
    put_f64(buf, t.re()[i]);
    put_f64(buf, t.im()[i]);
  }
  write_file(path, buf);
}

ComplexTensor load_tensor(const std::filesystem::path& path) {
  Reader r(read_file(path), "tensor file " + path.string());
  require(r.take(4) == std::string_view(kTensorMagic, 4),
          "tensor file " + path.string() + ": bad magic");
  const std::uint32_t version = r.u32();
  require(version == kTensorFileVersion,
          "tensor file " + path.string() + ": unsupported version " + std::to_string(version));
  require(r.u32() == kDtypeComplexF64, "tensor file " + path.string() + ": unsupported dtype");
  const std::uint32_t ndim = r.u32();
  require(ndim >= 1 && ndim <= 8, "tensor file " + path.string() + ": implausible rank");
  Shape shape(ndim);
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const std::uint64_t d = r.u64();
    require(d >= 1 && d <= (1ull << 32), "tensor file " + path.string() + ": bad extent");
    shape[i] = static_cast<Eigen::Index>(d);
  }
  const Eigen::Index n = shape_numel(shape);
  require(r.remaining() == static_cast<std::size_t>(n) * 16,
          "tensor file " + path.string() + ": payload length does not match header shape");
  ComplexTensor t(shape);
  for (Eigen::Index i = 0; i < n; ++i) {
    t.re()[i] = r.f64();
    t.im()[i] = r.f64();
  }
  return t;
}

void write_pgm(const RealImage& img, const std::filesystem::path& path, double max_value) {
  double mv = max_value;
  if (mv <= 0.0) mv = img.values.size() ? img.values.maxCoeff() : 1.0;
  if (mv <= 0.0) mv = 1.0;
  std::string buf = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  for (Eigen::Index i = 0; i < img.values.size(); ++i) {
    const double v = std::clamp(img.values[i] / mv, 0.0, 1.0);
    buf.push_back(static_cast<char>(static_cast<int>(v * 255.0 + 0.5)));
  }
  write_file(path, buf);
}

namespace {
// Parses one whitespace-delimited token, skipping '#' comment lines.
std::string next_pnm_token(const std::string& data, std::size_t& pos) {
  while (pos < data.size()) {
    if (std::isspace(static_cast<unsigned char>(data[pos]))) {
      ++pos;
    } else if (data[pos] == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  std::size_t start = pos;
  while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
  require(pos > start, "pgm: truncated header");
  return data.substr(start, pos - start);
}
}  // namespace

RealImage read_pgm(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  std::size_t pos = 0;
  require(next_pnm_token(data, pos) == "P5", "pgm " + path.string() + ": not a binary PGM");
  const long w = std::stol(next_pnm_token(data, pos));
  const long h = std::stol(next_pnm_token(data, pos));
  const long maxval = std::stol(next_pnm_token(data, pos));
  require(w > 0 && h > 0, "pgm " + path.string() + ": bad extents");
  require(maxval > 0 && maxval < 256, "pgm " + path.string() + ": unsupported maxval");
  ++pos;  // single whitespace after maxval
  require(data.size() - pos == static_cast<std::size_t>(w * h),
          "pgm " + path.string() + ": payload length mismatch");
  RealImage img(h, w);
  for (long i = 0; i < w * h; ++i) {
    img.values[i] = static_cast<double>(static_cast<unsigned char>(data[pos + static_cast<std::size_t>(i)])) /
                    static_cast<double>(maxval);
  }
  return img;
}

void write_ppm(const RgbImage& img, const std::filesystem::path& path) {
  std::string buf = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  buf.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  write_file(path, buf);
}

namespace {
SamplingMask mask_from_rows(Eigen::Index h, Eigen::Index w, std::vector<std::uint8_t> rows) {
  SamplingMask m;
  m.height = h;
  m.width = w;
  m.rows = std::move(rows);
  return m;
}

std::vector<std::uint8_t> rows_from_grid(const std::filesystem::path& path, Eigen::Index h,
                                         Eigen::Index w, const Eigen::ArrayXd& values) {
  std::vector<std::uint8_t> rows(static_cast<std::size_t>(h));
  for (Eigen::Index y = 0; y < h; ++y) {
    const double first = values[y * w];
    require(first == 0.0 || first == 1.0, "mask " + path.string() + ": values must be binary");
    for (Eigen::Index x = 1; x < w; ++x) {
      require(values[y * w + x] == first,
              "mask " + path.string() + ": rows must be fully sampled or fully skipped");
    }
    rows[static_cast<std::size_t>(y)] = first != 0.0 ? 1 : 0;
  }
  return rows;
}
}  // namespace

void save_mask_pgm(const SamplingMask& mask, const std::filesystem::path& path) {
  RealImage img(mask.height, mask.width);
  for (Eigen::Index y = 0; y < mask.height; ++y) {
    if (mask.row_selected(y)) img.values.segment(y * mask.width, mask.width).setOnes();
  }
  write_pgm(img, path, 1.0);
}

SamplingMask load_mask_pgm(const std::filesystem::path& path) {
  const RealImage img = read_pgm(path);
  return mask_from_rows(img.height, img.width, rows_from_grid(path, img.height, img.width, img.values));
}

void save_mask_tensor(const SamplingMask& mask, const std::filesystem::path& path) {
  save_tensor(mask.dense(), path);
}

SamplingMask load_mask_tensor(const std::filesystem::path& path) {
  const ComplexTensor t = load_tensor(path);
  require(t.rank() == 2, "mask " + path.string() + ": [H,W] tensor expected");
  require((t.im() == 0.0).all(), "mask " + path.string() + ": imaginary part must be zero");
  return mask_from_rows(t.dim(0), t.dim(1), rows_from_grid(path, t.dim(0), t.dim(1), t.re()));
}

SamplingMask load_mask(const std::filesystem::path& path) {
  return path.extension() == ".pgm" ? load_mask_pgm(path) : load_mask_tensor(path);
}

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = ckpt.config;
  nlohmann::json table = nlohmann::json::array();
  std::uint64_t byte_offset = 0;
  for (const NamedTensor& t : ckpt.tensors) {
    require(shape_numel(t.shape) == t.values.size(),
            "checkpoint: tensor " + t.name + " shape does not match its data");
    nlohmann::json shape = nlohmann::json::array();
    for (const Eigen::Index d : t.shape) shape.push_back(static_cast<std::int64_t>(d));
    table.push_back({{"name", t.name},
                     {"shape", shape},
                     {"offset", byte_offset},
                     {"length", static_cast<std::uint64_t>(t.values.size())}});
    byte_offset += static_cast<std::uint64_t>(t.values.size()) * 8;
  }
  header["tensors"] = table;
  const std::string header_str = header.dump();

  std::string buf;
  buf.append(kCheckpointMagic, 8);
  put_u64(buf, header_str.size());
  buf.append(header_str);
  for (const NamedTensor& t : ckpt.tensors) {
    for (Eigen::Index i = 0; i < t.values.size(); ++i) put_f64(buf, t.values[i]);
  }
  write_file(path, buf);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(read_file(path), "checkpoint " + path.string());
  require(r.take(8) == std::string_view(kCheckpointMagic, 8),
          "checkpoint " + path.string() + ": bad magic");
  const std::uint64_t header_len = r.u64();
  const std::string_view header_str = r.take(header_len);
  nlohmann::json header = nlohmann::json::parse(header_str, nullptr, /*allow_exceptions=*/false);
  require(!header.is_discarded(), "checkpoint " + path.string() + ": malformed header");

  Checkpoint ckpt;
  ckpt.config = header.value("config", nlohmann::json::object());
  std::uint64_t total = 0;
  for (const auto& entry : header.at("tensors")) {
    require(entry.at("offset").get<std::uint64_t>() == total * 8,
            "checkpoint " + path.string() + ": inconsistent tensor offsets");
    total += entry.at("length").get<std::uint64_t>();
  }
  require(r.remaining() == total * 8, "checkpoint " + path.string() + ": payload length mismatch");
  for (const auto& entry : header.at("tensors")) {
    NamedTensor t;
    t.name = entry.at("name").get<std::string>();
    for (const auto& d : entry.at("shape")) t.shape.push_back(d.get<std::int64_t>());
    const std::uint64_t len = entry.at("length").get<std::uint64_t>();
    require(shape_numel(t.shape) == static_cast<Eigen::Index>(len),
            "checkpoint " + path.string() + ": tensor " + t.name + " shape/length mismatch");
    t.values.resize(static_cast<Eigen::Index>(len));
    for (std::uint64_t i = 0; i < len; ++i) t.values[static_cast<Eigen::Index>(i)] = r.f64();
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace cdfnet
