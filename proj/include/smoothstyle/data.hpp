#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "smoothstyle/rng.hpp"
#include "smoothstyle/types.hpp"

namespace smoothstyle::data {

enum class Split { train, test };

// Images grouped by domain. Pixels are stored as uint8 and converted to
// float in [-1, 1] on access; iteration order is fixed at load time.
class DomainDataset {
 public:
  DomainDataset(std::vector<torch::Tensor> per_domain_u8, std::int64_t image_size,
                std::int64_t channels);

  std::int64_t num_domains() const { return static_cast<std::int64_t>(images_.size()); }
  std::int64_t size(DomainLabel d) const;
  std::int64_t total_size() const;
  std::int64_t image_size() const { return image_size_; }
  std::int64_t channels() const { return channels_; }

  // Single image as float32 [C, H, W] in [-1, 1].
  torch::Tensor get(DomainLabel d, std::int64_t index) const;

  // Batch of images as float32 [N, C, H, W] given (domain, index) pairs.
  torch::Tensor gather(const std::vector<std::pair<DomainLabel, std::int64_t>>& refs) const;

  // All images of one domain as float32 [N, C, H, W]. Intended for test-set
  // sized domains only.
  torch::Tensor domain_tensor(DomainLabel d) const;

  // Uniformly random image over the whole dataset; returns its domain too.
  std::pair<DomainLabel, std::int64_t> sample_any(Rng& rng) const;
  std::int64_t sample_index(DomainLabel d, Rng& rng) const;

 private:
  std::vector<torch::Tensor> images_;  // per domain, uint8 [N, C, H, W]
  std::int64_t image_size_;
  std::int64_t channels_;
};

// Reads the standard MNIST IDX archives (train-images-idx3-ubyte & friends,
// optionally .gz-free raw files) from `root`, zero-pads 28x28 to
// `image_size` and groups by digit class. Throws DataError if the archives
// are missing or corrupt.
DomainDataset load_mnist(const std::filesystem::path& root, Split split,
                         std::int64_t image_size = 32);

// Loads a directory with one subdirectory per domain, full of PNG/JPEG
// files. Center-crop to square, resize, scale to [-1, 1]. The train/test
// split is a pure function of (sorted file list, seed).
struct FolderLoadStats {
  std::int64_t skipped_unreadable = 0;
};
DomainDataset load_image_folder(const std::filesystem::path& root, Split split,
                                std::int64_t image_size, double train_fraction,
                                std::uint64_t seed, std::int64_t channels = 3,
                                FolderLoadStats* stats = nullptr);

// Writes an IDX image file + IDX label file (the MNIST container format).
void write_idx_images(const std::filesystem::path& path, const torch::Tensor& images_u8);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

// Procedurally rendered stroke digits in MNIST layout (28x28 uint8, IDX
// files named like the originals). Deterministic in the seed; used when the
// real archives are not on disk.
void generate_synthetic_digits(const std::filesystem::path& root, std::int64_t n_train,
                               std::int64_t n_test, std::uint64_t seed);

// True if `root` holds the four IDX archives load_mnist expects.
bool has_idx_archives(const std::filesystem::path& root);

}  // namespace smoothstyle::data
