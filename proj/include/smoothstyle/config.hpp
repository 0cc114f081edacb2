#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smoothstyle/training.hpp"

namespace smoothstyle::config {

// Dataset selection. kind "mnist" expects IDX archives under root; kind
// "synthetic" generates stroke digits there first if they are missing;
// kind "folder" reads one subdirectory per domain.
struct DataConfig {
  std::string kind = "synthetic";
  std::string root = "data/digits";
  std::int64_t image_size = 32;
  std::int64_t channels = 1;
  double train_fraction = 0.9;   // folder kind only
  std::int64_t n_train = 12000;  // synthetic kind only
  std::int64_t n_test = 2000;    // synthetic kind only
  std::uint64_t gen_seed = 77;   // synthetic kind only
};

// Which perceptual distance evaluation protocols use, and where the feature
// net weights live.
struct BackendConfig {
  std::string kind = "pixel_l2";  // lpips | lpips_star | pixel_l2 | random_projection
  std::string weights = "";       // feature-net file for lpips kinds / FID / FRD
  bool train_if_missing = true;   // cmd_train prepares the feature net
  std::int64_t classifier_epochs = 2;
  std::int64_t projection_dim = 64;
  std::uint64_t projection_seed = 1234;
};

struct EvalConfig {
  std::int64_t ps_paths = 200;
  std::int64_t ps_steps = 19;  // T; 20 points per path
  std::string strategy = "lerp";
  std::int64_t fid_images = 1000;
  std::int64_t fid_points = 20;
  std::int64_t fid_source = 0;
  std::int64_t fid_target = 1;
  std::int64_t diversity_images = 100;
  std::int64_t diversity_styles = 10;
  std::int64_t diversity_target = 1;
  double ppl_epsilon = 1e-4;
  std::int64_t ppl_samples = 500;
  std::vector<std::int64_t> linearity_counts = {10, 20, 50, 100};
  std::int64_t linearity_paths = 50;
  std::int64_t gap_triplets = 10000;
  std::string endpoint_source = "mapper";  // mapper | encoder
};

// Union of everything a command needs; fully serialized into every output.
struct ExperimentConfig {
  DataConfig data;
  training::TrainConfig train;
  BackendConfig backend;
  EvalConfig eval;
  std::string out_dir = "out";
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // KEY=VALUE with dotted keys, e.g. train.iterations=100. Values are
  // parsed as JSON scalars, falling back to strings.
  void apply_override(const std::string& assignment);
};

// Loads the dataset pair (train, test) described by the config, generating
// synthetic archives when asked to.
std::pair<data::DomainDataset, data::DomainDataset> load_datasets(const DataConfig& cfg);

}  // namespace smoothstyle::config
