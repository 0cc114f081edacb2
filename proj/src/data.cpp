#include "smoothstyle/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <zlib.h>

namespace smoothstyle::data {
namespace fs = std::filesystem;

namespace {

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
         std::uint32_t(p[3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  std::array<char, 4> b{char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  out.write(b.data(), 4);
}

// Reads a whole file, transparently decompressing .gz.
std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  if (path.extension() == ".gz") {
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (!f) throw DataError("cannot open " + path.string());
    std::vector<std::uint8_t> out;
    std::array<std::uint8_t, 1 << 16> buf;
    int n = 0;
    while ((n = gzread(f, buf.data(), buf.size())) > 0) out.insert(out.end(), buf.data(), buf.data() + n);
    gzclose(f);
    if (n < 0) throw DataError("gzip decode failed for " + path.string());
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path find_archive(const fs::path& root, const std::string& base) {
  for (const auto& name : {base, base + ".gz"}) {
    if (fs::exists(root / name)) return root / name;
  }
  throw DataError("MNIST archive " + base + " not found under " + root.string() +
                  " (expected IDX files, optionally gzipped)");
}

struct IdxImages {
  std::int64_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;
};

IdxImages read_idx_images(const fs::path& path) {
  auto bytes = read_file_bytes(path);
  if (bytes.size() < 16) throw DataError("IDX file truncated: " + path.string());
  const auto magic = read_be32(bytes.data());
  if (magic != 2051) {
    throw DataError("bad IDX image magic " + std::to_string(magic) + " in " + path.string() +
                    " (expected 2051; is the archive corrupt?)");
  }
  IdxImages out;
  out.count = read_be32(bytes.data() + 4);
  out.rows = read_be32(bytes.data() + 8);
  out.cols = read_be32(bytes.data() + 12);
  const std::size_t expected = 16 + std::size_t(out.count) * out.rows * out.cols;
  if (bytes.size() != expected) {
    throw DataError("IDX image payload size mismatch in " + path.string() + ": got " +
                    std::to_string(bytes.size()) + " bytes, expected " + std::to_string(expected));
  }
  out.pixels.assign(bytes.begin() + 16, bytes.end());
  return out;
}

std::vector<std::uint8_t> read_idx_labels(const fs::path& path) {
  auto bytes = read_file_bytes(path);
  if (bytes.size() < 8) throw DataError("IDX file truncated: " + path.string());
  const auto magic = read_be32(bytes.data());
  if (magic != 2049) {
    throw DataError("bad IDX label magic " + std::to_string(magic) + " in " + path.string());
  }
  const std::int64_t count = read_be32(bytes.data() + 4);
  if (bytes.size() != std::size_t(8 + count)) {
    throw DataError("IDX label payload size mismatch in " + path.string());
  }
  return {bytes.begin() + 8, bytes.end()};
}

// Center-pads (or crops) a [N,1,h,w] uint8 tensor to size x size.
torch::Tensor fit_to_size(const torch::Tensor& images, std::int64_t size) {
  const auto h = images.size(2), w = images.size(3);
  if (h == size && w == size) return images;
  auto out = torch::zeros({images.size(0), images.size(1), size, size}, torch::kUInt8);
  const auto copy_h = std::min(h, size), copy_w = std::min(w, size);
  const auto src_y = (h - copy_h) / 2, src_x = (w - copy_w) / 2;
  const auto dst_y = (size - copy_h) / 2, dst_x = (size - copy_w) / 2;
  out.index_put_({torch::indexing::Slice(), torch::indexing::Slice(),
                  torch::indexing::Slice(dst_y, dst_y + copy_h),
                  torch::indexing::Slice(dst_x, dst_x + copy_w)},
                 images.index({torch::indexing::Slice(), torch::indexing::Slice(),
                               torch::indexing::Slice(src_y, src_y + copy_h),
                               torch::indexing::Slice(src_x, src_x + copy_w)}));
  return out;
}

}  // namespace

DomainDataset::DomainDataset(std::vector<torch::Tensor> per_domain_u8, std::int64_t image_size,
                             std::int64_t channels)
    : images_(std::move(per_domain_u8)), image_size_(image_size), channels_(channels) {
  if (images_.size() < 2) throw DataError("a domain dataset needs at least 2 domains");
  for (std::size_t k = 0; k < images_.size(); ++k) {
    if (images_[k].numel() == 0) {
      throw DataError("domain " + std::to_string(k) + " is empty");
    }
    TORCH_CHECK(images_[k].dtype() == torch::kUInt8, "domain images must be uint8");
  }
}

std::int64_t DomainDataset::size(DomainLabel d) const {
  check_domain(d, num_domains());
  return images_[d.index].size(0);
}

std::int64_t DomainDataset::total_size() const {
  std::int64_t n = 0;
  for (const auto& t : images_) n += t.size(0);
  return n;
}

torch::Tensor DomainDataset::get(DomainLabel d, std::int64_t index) const {
  check_domain(d, num_domains());
  const auto& dom = images_[d.index];
  if (index < 0 || index >= dom.size(0)) {
    throw ContractViolation("image index out of range");
  }
  return dom[index].to(torch::kFloat32).div(127.5).sub(1.0);
}

torch::Tensor DomainDataset::gather(
    const std::vector<std::pair<DomainLabel, std::int64_t>>& refs) const {
  std::vector<torch::Tensor> out;
  out.reserve(refs.size());
  for (const auto& [d, i] : refs) out.push_back(get(d, i));
  return torch::stack(out);
}

torch::Tensor DomainDataset::domain_tensor(DomainLabel d) const {
  check_domain(d, num_domains());
  return images_[d.index].to(torch::kFloat32).div(127.5).sub(1.0);
}

std::pair<DomainLabel, std::int64_t> DomainDataset::sample_any(Rng& rng) const {
  const auto flat = rand_index(rng, total_size());
  std::int64_t offset = 0;
  for (std::int64_t k = 0; k < num_domains(); ++k) {
    const auto n = images_[k].size(0);
    if (flat < offset + n) return {DomainLabel{k}, flat - offset};
    offset += n;
  }
  throw Error("unreachable: flat index out of range");
}

std::int64_t DomainDataset::sample_index(DomainLabel d, Rng& rng) const {
  return rand_index(rng, size(d));
}

bool has_idx_archives(const fs::path& root) {
  const char* names[] = {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                         "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"};
  for (const auto* n : names) {
    if (!fs::exists(root / n) && !fs::exists(root / (std::string(n) + ".gz"))) return false;
  }
  return true;
}

DomainDataset load_mnist(const fs::path& root, Split split, std::int64_t image_size) {
  const std::string img_name =
      split == Split::train ? "train-images-idx3-ubyte" : "t10k-images-idx3-ubyte";
  const std::string lbl_name =
      split == Split::train ? "train-labels-idx1-ubyte" : "t10k-labels-idx1-ubyte";
  auto images = read_idx_images(find_archive(root, img_name));
  auto labels = read_idx_labels(find_archive(root, lbl_name));
  if (std::int64_t(labels.size()) != images.count) {
    throw DataError("MNIST image/label counts differ under " + root.string());
  }

  auto all = torch::from_blob(images.pixels.data(), {images.count, 1, images.rows, images.cols},
                              torch::kUInt8)
                 .clone();
  all = fit_to_size(all, image_size);

  std::vector<std::vector<std::int64_t>> by_class(10);
  for (std::int64_t i = 0; i < images.count; ++i) {
    if (labels[i] > 9) throw DataError("MNIST label out of range in " + root.string());
    by_class[labels[i]].push_back(i);
  }
  std::vector<torch::Tensor> domains;
  domains.reserve(10);
  for (const auto& idx : by_class) {
    auto index = torch::tensor(idx, torch::kInt64);
    domains.push_back(all.index_select(0, index));
  }
  return DomainDataset(std::move(domains), image_size, 1);
}

void write_idx_images(const fs::path& path, const torch::Tensor& images_u8) {
  TORCH_CHECK(images_u8.dtype() == torch::kUInt8 && images_u8.dim() == 4 &&
                  images_u8.size(1) == 1,
              "write_idx_images expects uint8 [N,1,H,W]");
  auto contig = images_u8.contiguous();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_be32(out, 2051);
  write_be32(out, std::uint32_t(contig.size(0)));
  write_be32(out, std::uint32_t(contig.size(2)));
  write_be32(out, std::uint32_t(contig.size(3)));
  out.write(reinterpret_cast<const char*>(contig.data_ptr<std::uint8_t>()), contig.numel());
}

void write_idx_labels(const fs::path& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_be32(out, 2049);
  write_be32(out, std::uint32_t(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), labels.size());
}

namespace {

struct Pt {
  double x, y;
};
using Polyline = std::vector<Pt>;

Polyline arc(double cx, double cy, double rx, double ry, double a0, double a1, int segs = 10) {
  Polyline p;
  for (int i = 0; i <= segs; ++i) {
    const double a = a0 + (a1 - a0) * i / segs;
    p.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return p;
}

// Stroke skeletons on a unit square, y growing downward.
std::vector<Polyline> digit_strokes(int digit) {
  constexpr double pi = 3.14159265358979323846;
  switch (digit) {
    case 0:
      return {arc(0.5, 0.5, 0.30, 0.42, 0, 2 * pi, 20)};
    case 1:
      return {{{0.35, 0.25}, {0.55, 0.10}, {0.55, 0.90}}};
    case 2:
      return {arc(0.5, 0.30, 0.28, 0.22, -pi, 0.25 * pi, 10),
              {{0.70, 0.45}, {0.25, 0.90}, {0.78, 0.90}}};
    case 3:
      return {arc(0.47, 0.30, 0.26, 0.20, -0.75 * pi, 0.5 * pi, 10),
              arc(0.47, 0.70, 0.28, 0.22, -0.5 * pi, 0.75 * pi, 10)};
    case 4:
      return {{{0.62, 0.10}, {0.22, 0.62}, {0.80, 0.62}}, {{0.62, 0.10}, {0.62, 0.92}}};
    case 5:
      return {{{0.72, 0.10}, {0.30, 0.10}, {0.28, 0.48}},
              arc(0.47, 0.66, 0.26, 0.24, -0.55 * pi, 0.75 * pi, 10)};
    case 6:
      return {{{0.62, 0.08}, {0.34, 0.45}, {0.28, 0.68}},
              arc(0.50, 0.68, 0.22, 0.22, 0, 2 * pi, 14)};
    case 7:
      return {{{0.22, 0.12}, {0.78, 0.12}, {0.42, 0.90}}};
    case 8:
      return {arc(0.5, 0.30, 0.20, 0.18, 0, 2 * pi, 14), arc(0.5, 0.70, 0.25, 0.22, 0, 2 * pi, 14)};
    case 9:
      return {arc(0.50, 0.32, 0.22, 0.22, 0, 2 * pi, 14),
              {{0.72, 0.32}, {0.68, 0.60}, {0.45, 0.92}}};
    default:
      throw ContractViolation("digit out of range");
  }
}

double point_segment_dist(Pt p, Pt a, Pt b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

torch::Tensor render_digit(int digit, Rng& rng, std::int64_t size = 28) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double angle = (u(rng) - 0.5) * 0.45;
  const double scale = 0.80 + 0.30 * u(rng);
  const double shear = (u(rng) - 0.5) * 0.35;
  const double tx = (u(rng) - 0.5) * 0.14, ty = (u(rng) - 0.5) * 0.14;
  const double thick = 0.055 + 0.035 * u(rng);
  const double ink = 0.80 + 0.20 * u(rng);

  const double ca = std::cos(angle), sa = std::sin(angle);
  auto warp = [&](Pt p) -> Pt {
    double x = p.x - 0.5, y = p.y - 0.5;
    x += shear * y;
    const double xr = scale * (ca * x - sa * y), yr = scale * (sa * x + ca * y);
    return {xr + 0.5 + tx, yr + 0.5 + ty};
  };

  std::vector<std::pair<Pt, Pt>> segs;
  for (const auto& line : digit_strokes(digit)) {
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
      segs.emplace_back(warp(line[i]), warp(line[i + 1]));
    }
  }

  auto img = torch::zeros({1, size, size}, torch::kUInt8);
  auto acc = img.accessor<std::uint8_t, 3>();
  constexpr double soft = 0.035;
  for (std::int64_t yy = 0; yy < size; ++yy) {
    for (std::int64_t xx = 0; xx < size; ++xx) {
      const Pt p{(xx + 0.5) / size, (yy + 0.5) / size};
      double dmin = 1e9;
      for (const auto& [a, b] : segs) dmin = std::min(dmin, point_segment_dist(p, a, b));
      const double v = std::clamp((thick - dmin) / soft + 0.5, 0.0, 1.0) * ink;
      acc[0][yy][xx] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return img;
}

void write_split(const fs::path& root, const std::string& img_name, const std::string& lbl_name,
                 std::int64_t n, Rng& rng) {
  std::vector<torch::Tensor> images;
  std::vector<std::uint8_t> labels;
  images.reserve(n);
  labels.reserve(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const int digit = int(i % 10);  // balanced classes
    images.push_back(render_digit(digit, rng));
    labels.push_back(std::uint8_t(digit));
  }
  write_idx_images(root / img_name, torch::stack(images));
  write_idx_labels(root / lbl_name, labels);
}

}  // namespace

void generate_synthetic_digits(const fs::path& root, std::int64_t n_train, std::int64_t n_test,
                               std::uint64_t seed) {
  fs::create_directories(root);
  auto rng_train = make_rng(seed, "synthetic-digits-train");
  auto rng_test = make_rng(seed, "synthetic-digits-test");
  write_split(root, "train-images-idx3-ubyte", "train-labels-idx1-ubyte", n_train, rng_train);
  write_split(root, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", n_test, rng_test);
}

DomainDataset load_image_folder(const fs::path& root, Split split, std::int64_t image_size,
                                double train_fraction, std::uint64_t seed, std::int64_t channels,
                                FolderLoadStats* stats) {
  if (!fs::is_directory(root)) throw DataError("not a directory: " + root.string());
  std::vector<fs::path> domains;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) domains.push_back(e.path());
  }
  std::sort(domains.begin(), domains.end());
  if (domains.size() < 2) {
    throw DataError("image folder needs at least 2 domain subdirectories, found " +
                    std::to_string(domains.size()));
  }

  FolderLoadStats local;
  std::vector<torch::Tensor> per_domain;
  for (const auto& dir : domains) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("empty domain folder: " + dir.string());

    // The split permutation depends only on the sorted list and the seed.
    std::vector<std::int64_t> order(files.size());
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(seed, "folder-split/" + dir.filename().string());
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = std::llround(train_fraction * double(files.size()));

    std::vector<torch::Tensor> imgs;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const bool in_train = std::int64_t(pos) < n_train;
      if ((split == Split::train) != in_train) continue;
      const auto& file = files[order[pos]];
      cv::Mat m = cv::imread(file.string(),
                             channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
      if (m.empty()) {
        ++local.skipped_unreadable;
        continue;
      }
      const int side = std::min(m.rows, m.cols);
      cv::Rect roi((m.cols - side) / 2, (m.rows - side) / 2, side, side);
      cv::Mat cropped = m(roi), resized;
      cv::resize(cropped, resized, cv::Size(int(image_size), int(image_size)), 0, 0,
                 cv::INTER_AREA);
      if (channels == 3) cv::cvtColor(resized, resized, cv::COLOR_BGR2RGB);
      auto t = torch::from_blob(resized.data, {image_size, image_size, channels}, torch::kUInt8)
                   .permute({2, 0, 1})
                   .clone();
      imgs.push_back(t);
    }
    if (imgs.empty()) {
      throw DataError("domain " + dir.filename().string() + " has no readable images in the " +
                      (split == Split::train ? std::string("train") : std::string("test")) +
                      " split");
    }
    per_domain.push_back(torch::stack(imgs));
  }
  if (stats) *stats = local;
  return DomainDataset(std::move(per_domain), image_size, channels);
}

}  // namespace smoothstyle::data
