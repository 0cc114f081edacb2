#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <opencv2/imgcodecs.hpp>

#include "smoothstyle/data.hpp"
#include "smoothstyle/report.hpp"

// doctest last: its short assertion macros must win over torch's logging macros
#include <doctest.h>

using namespace smoothstyle;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("smoothstyle_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("synthetic digit archives load as a 10-domain dataset") {
  auto dir = temp_dir("synth");
  data::generate_synthetic_digits(dir, 200, 60, /*seed=*/9);
  auto train = data::load_mnist(dir, data::Split::train, 32);
  auto test = data::load_mnist(dir, data::Split::test, 32);

  CHECK(train.num_domains() == 10);
  CHECK(train.total_size() == 200);
  CHECK(test.total_size() == 60);
  CHECK(train.image_size() == 32);

  // shape/range/no-NaN round-trip invariant
  for (std::int64_t d = 0; d < train.num_domains(); ++d) {
    auto x = train.domain_tensor(DomainLabel{d});
    CHECK(x.size(1) == 1);
    CHECK(x.size(2) == 32);
    CHECK(x.size(3) == 32);
    CHECK(torch::isfinite(x).all().item<bool>());
    CHECK(x.min().item<float>() >= -1.0f);
    CHECK(x.max().item<float>() <= 1.0f);
  }
}

TEST_CASE("synthetic digit generation is deterministic in the seed") {
  auto dir1 = temp_dir("synth_a");
  auto dir2 = temp_dir("synth_b");
  data::generate_synthetic_digits(dir1, 50, 20, 123);
  data::generate_synthetic_digits(dir2, 50, 20, 123);
  CHECK(report::sha256_file(dir1 / "train-images-idx3-ubyte") ==
        report::sha256_file(dir2 / "train-images-idx3-ubyte"));

  auto dir3 = temp_dir("synth_c");
  data::generate_synthetic_digits(dir3, 50, 20, 124);
  CHECK(report::sha256_file(dir1 / "train-images-idx3-ubyte") !=
        report::sha256_file(dir3 / "train-images-idx3-ubyte"));
}

TEST_CASE("IDX writer round-trips through the MNIST loader") {
  auto dir = temp_dir("idx");
  auto rng = make_rng(5, "idx");
  auto images = (uniform_tensor({30, 1, 28, 28}, rng, 0.0, 255.0)).to(torch::kUInt8);
  std::vector<std::uint8_t> labels;
  for (int i = 0; i < 30; ++i) labels.push_back(std::uint8_t(i % 10));

  data::write_idx_images(dir / "train-images-idx3-ubyte", images);
  data::write_idx_labels(dir / "train-labels-idx1-ubyte", labels);
  data::write_idx_images(dir / "t10k-images-idx3-ubyte", images);
  data::write_idx_labels(dir / "t10k-labels-idx1-ubyte", labels);

  auto loaded = data::load_mnist(dir, data::Split::train, 28);
  CHECK(loaded.total_size() == 30);
  CHECK(loaded.num_domains() == 10);
  // label i%10 puts exactly 3 images in each class
  for (std::int64_t d = 0; d < 10; ++d) CHECK(loaded.size(DomainLabel{d}) == 3);
}

TEST_CASE("28x28 digits are zero-padded into the 32x32 frame") {
  auto dir = temp_dir("pad");
  auto images = torch::full({10, 1, 28, 28}, 255, torch::kUInt8);
  std::vector<std::uint8_t> labels;
  for (int i = 0; i < 10; ++i) labels.push_back(std::uint8_t(i));
  data::write_idx_images(dir / "train-images-idx3-ubyte", images);
  data::write_idx_labels(dir / "train-labels-idx1-ubyte", labels);
  data::write_idx_images(dir / "t10k-images-idx3-ubyte", images);
  data::write_idx_labels(dir / "t10k-labels-idx1-ubyte", labels);

  auto loaded = data::load_mnist(dir, data::Split::train, 32);
  auto img = loaded.get(DomainLabel{0}, 0);
  CHECK(img.size(1) == 32);
  // border is background (-1), center is ink (+1)
  CHECK(img[0][0][0].item<float>() == doctest::Approx(-1.0f));
  CHECK(img[0][16][16].item<float>() == doctest::Approx(1.0f));
}

TEST_CASE("corrupt archives raise a data error that names the file") {
  auto dir = temp_dir("corrupt");
  std::ofstream(dir / "train-images-idx3-ubyte") << "not an idx file at all";
  std::ofstream(dir / "train-labels-idx1-ubyte") << "still nothing";
  std::ofstream(dir / "t10k-images-idx3-ubyte") << "x";
  std::ofstream(dir / "t10k-labels-idx1-ubyte") << "x";
  CHECK_THROWS_WITH_AS((void)data::load_mnist(dir, data::Split::train, 32),
                       doctest::Contains("train-images-idx3-ubyte"), DataError);
}

TEST_CASE("missing archives raise a data error") {
  auto dir = temp_dir("missing");
  CHECK_THROWS_AS((void)data::load_mnist(dir, data::Split::train, 32), DataError);
}

TEST_CASE("real MNIST sizes when archives are available") {
  const char* root = std::getenv("SMOOTHSTYLE_MNIST_DIR");
  if (!root || !data::has_idx_archives(root)) {
    MESSAGE("SMOOTHSTYLE_MNIST_DIR not set; skipping the real-archive size check");
    return;
  }
  auto train = data::load_mnist(root, data::Split::train, 32);
  auto test = data::load_mnist(root, data::Split::test, 32);
  CHECK(train.total_size() == 60000);
  CHECK(test.total_size() == 10000);
  CHECK(train.num_domains() == 10);
}

namespace {

void write_folder_dataset(const fs::path& root, int per_domain) {
  auto rng = make_rng(31, "folder-pngs");
  for (const char* name : {"alpha", "beta"}) {
    fs::create_directories(root / name);
    for (int i = 0; i < per_domain; ++i) {
      auto img = (uniform_tensor({24, 24}, rng, 0.0, 255.0)).to(torch::kUInt8);
      cv::Mat m(24, 24, CV_8UC1, img.data_ptr<std::uint8_t>());
      cv::imwrite((root / name / ("img_" + std::to_string(i) + ".png")).string(), m);
    }
  }
}

}  // namespace

TEST_CASE("image folder loader splits deterministically") {
  auto root = temp_dir("folder");
  write_folder_dataset(root, 10);

  auto train = data::load_image_folder(root, data::Split::train, 16, 0.9, 7, 1);
  auto test = data::load_image_folder(root, data::Split::test, 16, 0.9, 7, 1);
  CHECK(train.total_size() == 18);
  CHECK(test.total_size() == 2);
  CHECK(train.num_domains() == 2);

  auto train2 = data::load_image_folder(root, data::Split::train, 16, 0.9, 7, 1);
  CHECK((train.domain_tensor(DomainLabel{0}) - train2.domain_tensor(DomainLabel{0}))
            .abs()
            .max()
            .item<float>() == 0.0f);

  auto train3 = data::load_image_folder(root, data::Split::train, 16, 0.9, 8, 1);
  const bool same = (train.domain_tensor(DomainLabel{0}) - train3.domain_tensor(DomainLabel{0}))
                        .abs()
                        .max()
                        .item<float>() == 0.0f;
  CHECK_FALSE(same);  // a different seed reshuffles the split
}

TEST_CASE("image folder loader rejects degenerate layouts") {
  auto root = temp_dir("folder_bad");
  fs::create_directories(root / "only_one");
  cv::Mat m(8, 8, CV_8UC1, cv::Scalar(0));
  cv::imwrite((root / "only_one" / "a.png").string(), m);
  CHECK_THROWS_AS((void)data::load_image_folder(root, data::Split::train, 16, 0.9, 7, 1),
                  DataError);

  auto root2 = temp_dir("folder_empty");
  fs::create_directories(root2 / "a");
  fs::create_directories(root2 / "b");
  CHECK_THROWS_AS((void)data::load_image_folder(root2, data::Split::train, 16, 0.9, 7, 1),
                  DataError);
}

TEST_CASE("unreadable files are skipped and counted") {
  auto root = temp_dir("folder_skip");
  write_folder_dataset(root, 5);
  std::ofstream(root / "alpha" / "broken.png") << "this is not a png";
  data::FolderLoadStats stats;
  auto ds = data::load_image_folder(root, data::Split::train, 16, 1.0, 7, 1, &stats);
  CHECK(stats.skipped_unreadable == 1);
  CHECK(ds.total_size() == 10);
}
