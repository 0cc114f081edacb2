#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "smoothstyle/data.hpp"
#include "smoothstyle/losses.hpp"
#include "smoothstyle/metrics.hpp"
#include "smoothstyle/perceptual.hpp"
#include "smoothstyle/stylespace.hpp"

namespace smoothstyle::training {

// Conv block: AdaIN-modulated residual stage of the decoder.
class AdainBlockImpl : public torch::nn::Module {
 public:
  AdainBlockImpl(std::int64_t in_ch, std::int64_t out_ch, std::int64_t style_dim, bool upsample);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& s);

 private:
  torch::Tensor adain(const torch::Tensor& h, const torch::Tensor& s,
                      torch::nn::Linear& affine);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
  torch::nn::Linear affine1{nullptr}, affine2{nullptr};
  bool upsample_;
  bool learned_skip_;
};
TORCH_MODULE(AdainBlock);

// Image generator G(x, s): conv encoder, bottleneck, three AdaIN-injected
// decoder blocks, tanh output.
class GeneratorImpl : public torch::nn::Module {
 public:
  GeneratorImpl(std::int64_t channels, std::int64_t style_dim, std::int64_t base_channels);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& s);

 private:
  torch::nn::Conv2d from_rgb{nullptr}, down1{nullptr}, down2{nullptr}, to_rgb{nullptr};
  torch::nn::InstanceNorm2d in0{nullptr}, in1{nullptr}, in2{nullptr};
  AdainBlock block1{nullptr}, block2{nullptr}, block3{nullptr};
};
TORCH_MODULE(Generator);

// Multitask discriminator: shared trunk, one real/fake logit per domain.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  DiscriminatorImpl(std::int64_t channels, std::int64_t num_domains, std::int64_t base_channels,
                    std::int64_t image_size);
  torch::Tensor forward(const torch::Tensor& x);  // [N, m] logits

 private:
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr};
  torch::nn::Linear head{nullptr};
};
TORCH_MODULE(Discriminator);

// Style encoder E(x): shared conv trunk with one d_s head per domain; the
// head is picked by the reference image's domain label.
class StyleEncoderImpl : public torch::nn::Module {
 public:
  StyleEncoderImpl(std::int64_t channels, std::int64_t style_dim, std::int64_t num_domains,
                   std::int64_t base_channels, std::int64_t image_size);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& domains);  // [N, d_s]
  torch::Tensor forward_all(const torch::Tensor& x);  // [N, m, d_s]

 private:
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr};
  torch::nn::Linear shared{nullptr}, heads{nullptr};
  std::int64_t style_dim_, num_domains_;
};
TORCH_MODULE(StyleEncoder);

// Mapping network M(z, j): shared MLP with per-domain output heads.
class MappingNetworkImpl : public torch::nn::Module {
 public:
  MappingNetworkImpl(std::int64_t latent_dim, std::int64_t style_dim, std::int64_t num_domains,
                     std::int64_t hidden = 64);
  torch::Tensor forward(const torch::Tensor& z, const torch::Tensor& domains);  // [N, d_s]

 private:
  torch::nn::Sequential shared{nullptr};
  torch::nn::Linear heads{nullptr};
  std::int64_t style_dim_, num_domains_;
};
TORCH_MODULE(MappingNetwork);

// Everything the training loop owns, plus EMA shadows of G/E/M used for
// evaluation snapshots.
struct ModelBundle {
  Generator generator{nullptr};
  Discriminator discriminator{nullptr};
  StyleEncoder encoder{nullptr};
  MappingNetwork mapper{nullptr};

  Generator generator_ema{nullptr};
  StyleEncoder encoder_ema{nullptr};
  MappingNetwork mapper_ema{nullptr};

  std::int64_t num_domains = 0;
  std::int64_t style_dim = 0;
  std::int64_t latent_dim = 0;
};

struct TrainConfig {
  std::int64_t image_size = 32;
  std::int64_t channels = 1;
  std::int64_t num_domains = 10;
  std::int64_t style_dim = 2;
  std::int64_t latent_dim = 16;
  std::int64_t base_channels = 16;

  std::int64_t batch_size = 16;
  std::int64_t triplet_batch = 8;
  std::int64_t iterations = 2000;

  double lr_generator = 1e-4;
  double lr_discriminator = 1e-4;
  double lr_encoder = 1e-4;
  double lr_mapper = 1e-6;
  double adam_beta1 = 0.0;
  double adam_beta2 = 0.99;
  double weight_decay = 1e-4;

  loss::SmoothLossWeights smooth;
  loss::OrigLossWeights orig;
  bool use_triplet = false;
  bool use_content = false;
  double lambda_sr() const { return smooth.lambda_sr; }

  // lambda_ds decays linearly to zero over this many iterations; zero means
  // "over the whole run".
  std::int64_t ds_decay_iterations = 0;

  double ema_decay = 0.999;
  std::int64_t checkpoint_every = 0;  // 0 = only final
  std::uint64_t seed = 0;

  double effective_lambda_ds(std::int64_t iteration) const;
  void validate() const;
};

// Fresh networks sized for the config; weight init is driven by the torch
// global seed, which build_models sets from config.seed.
ModelBundle build_models(const TrainConfig& config);

struct Batch {
  torch::Tensor x;        // [N, C, H, W]
  torch::Tensor domains;  // [N] int64 source labels
};

// Adam optimizers for the four networks.
struct OptimizerSet {
  std::unique_ptr<torch::optim::Adam> generator, discriminator, encoder, mapper;
};

OptimizerSet build_optimizers(const ModelBundle& bundle, const TrainConfig& config);

// One discriminator update then one generator/encoder/mapper update.
// Target style codes come from the encoder on even iterations and the
// mapper on odd ones; triplet codes always come from the encoder on real
// images. Throws TrainingDiverged on non-finite losses.
loss::LossBundle training_step(ModelBundle& bundle, OptimizerSet& opts, const Batch& batch,
                               std::int64_t iteration, const TrainConfig& config,
                               const data::DomainDataset& dataset, Rng& rng,
                               const perceptual::DistanceBackend* content_backend);

// Draws a uniformly random batch (images + labels) from the dataset.
Batch sample_batch(const data::DomainDataset& dataset, std::int64_t batch_size, Rng& rng);

class TrainingLoop {
 public:
  TrainingLoop(TrainConfig config, const data::DomainDataset* dataset,
               std::shared_ptr<const perceptual::DistanceBackend> content_backend = nullptr);

  // Runs one iteration and returns its losses.
  loss::LossBundle step();

  // Runs the configured number of iterations, checkpointing on cadence when
  // out_dir is set and appending one CSV row per iteration.
  std::vector<loss::LossBundle> run(const std::optional<std::filesystem::path>& out_dir);

  void save_checkpoint(const std::filesystem::path& file) const;
  static TrainingLoop resume(const std::filesystem::path& file,
                             const data::DomainDataset* dataset,
                             std::shared_ptr<const perceptual::DistanceBackend> content_backend =
                                 nullptr);

  const ModelBundle& models() const { return bundle_; }
  ModelBundle& models() { return bundle_; }
  const TrainConfig& config() const { return config_; }
  std::int64_t iteration() const { return iteration_; }

 private:
  TrainingLoop() = default;

  TrainConfig config_;
  const data::DomainDataset* dataset_ = nullptr;
  std::shared_ptr<const perceptual::DistanceBackend> content_backend_;
  ModelBundle bundle_;
  OptimizerSet opts_;
  std::int64_t iteration_ = 0;
  Rng rng_;
};

// Loads only the model side of a checkpoint (EMA shadows) for evaluation.
struct EvalModel {
  ModelBundle bundle;
  TrainConfig config;

  // Adapters over the EMA networks. No gradients.
  metrics::GeneratorFn generator() const;
  style::EncoderFn encoder() const;
  style::MapperFn mapper() const;
  loss::EncoderBatchFn encoder_batch(DomainLabel domain) const;
  style::CodeSampler code_sampler(const data::DomainDataset* dataset) const;
};

EvalModel load_eval_model(const std::filesystem::path& checkpoint_file);

// Writes <file> (tensor container) and <file>.json (config sidecar with the
// container's content hash).
void write_checkpoint_sidecar(const std::filesystem::path& file, const TrainConfig& config,
                              std::int64_t iteration);

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

// CSV columns for the loss history, fixed order.
std::vector<std::string> loss_history_header();
std::vector<double> loss_history_row(std::int64_t iteration, const loss::LossBundle& bundle);

}  // namespace smoothstyle::training
