#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "smoothstyle/data.hpp"
#include "smoothstyle/errors.hpp"
#include "smoothstyle/rng.hpp"

namespace smoothstyle::perceptual {

// Multi-layer deep features for a batch of images, plus one nonnegative
// weight per layer. Providers are expected to hand over features that are
// already unit-normalized along the channel dimension; the distance
// functions below consume the stored values as-is.
struct FeatureStack {
  std::vector<torch::Tensor> layers;  // each [N, C_l, H_l, W_l]
  std::vector<double> weights;        // w_l >= 0, one per layer

  void validate() const;
};

// Turns an image batch into a FeatureStack.
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  virtual FeatureStack features(const torch::Tensor& images) const = 0;
  virtual std::string identity() const = 0;
};

// sum_l w_l * (1 / (H_l W_l)) * sum_hw ||y1 - y2||_2^2  — the squared form.
// Not a metric: the triangle inequality can fail.
torch::Tensor lpips_from_stacks(const FeatureStack& a, const FeatureStack& b);

// Same but with the unsquared inner Euclidean norm, which restores the
// triangle inequality for nonnegative weights.
torch::Tensor lpips_star_from_stacks(const FeatureStack& a, const FeatureStack& b);

enum class BackendKind { lpips, lpips_star, pixel_l2, random_projection };

std::string to_string(BackendKind kind);

// Callable contract psi(x1, x2) -> nonnegative real. distance() keeps the
// autograd graph alive so content losses can differentiate through it;
// backend parameters themselves are frozen.
class DistanceBackend {
 public:
  virtual ~DistanceBackend() = default;

  // x1, x2: [C, H, W] or [N, C, H, W]; returns a 0-dim or [N] tensor.
  virtual torch::Tensor distance(const torch::Tensor& x1, const torch::Tensor& x2) const = 0;

  virtual BackendKind kind() const = 0;
  virtual std::string identity() const = 0;

  bool is_metric() const { return kind() != BackendKind::lpips; }
  // True when the backend already returns squared distances (the PPL
  // protocol divides squared distances by epsilon^2).
  bool squared_form() const { return kind() == BackendKind::lpips; }

  double operator()(const torch::Tensor& x1, const torch::Tensor& x2) const;
};

// LPIPS / LPIPS* over an arbitrary feature provider.
class LpipsBackend : public DistanceBackend {
 public:
  LpipsBackend(std::shared_ptr<const FeatureProvider> provider, bool squared);

  torch::Tensor distance(const torch::Tensor& x1, const torch::Tensor& x2) const override;
  BackendKind kind() const override;
  std::string identity() const override;

 private:
  std::shared_ptr<const FeatureProvider> provider_;
  bool squared_;
};

// Root-sum-square of pixel differences divided by sqrt(pixel count).
class PixelL2Backend : public DistanceBackend {
 public:
  torch::Tensor distance(const torch::Tensor& x1, const torch::Tensor& x2) const override;
  BackendKind kind() const override { return BackendKind::pixel_l2; }
  std::string identity() const override { return "pixel_l2"; }
};

// Euclidean distance after a fixed seeded Gaussian projection of the
// flattened pixels. A deterministic proper metric with no trained weights.
class RandomProjectionBackend : public DistanceBackend {
 public:
  RandomProjectionBackend(std::uint64_t seed, std::int64_t out_dim = 64);

  torch::Tensor distance(const torch::Tensor& x1, const torch::Tensor& x2) const override;
  BackendKind kind() const override { return BackendKind::random_projection; }
  std::string identity() const override;

 private:
  const torch::Tensor& projection(std::int64_t numel) const;

  std::uint64_t seed_;
  std::int64_t out_dim_;
  mutable std::unordered_map<std::int64_t, torch::Tensor> cache_;
};

// Small digit classifier whose conv activations double as the desk-scale
// perceptual feature stack (the natural-image backbones the full-scale
// pipeline uses expect photographs, not 32x32 digits).
class DigitFeatureNetImpl : public torch::nn::Module {
 public:
  DigitFeatureNetImpl(std::int64_t channels = 1, std::int64_t num_classes = 10);

  torch::Tensor forward(const torch::Tensor& x);            // class logits
  std::vector<torch::Tensor> feature_maps(const torch::Tensor& x);  // 3 relu maps
  torch::Tensor embedding(const torch::Tensor& x);           // pooled penultimate, [N, 64]

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr};
  torch::nn::Linear head{nullptr};
};
TORCH_MODULE(DigitFeatureNet);

struct ClassifierTrainResult {
  double test_accuracy = 0.0;
  std::int64_t epochs = 0;
};

// Trains the classifier on a domain dataset (domains = classes), freezes it
// and reports held-out accuracy.
ClassifierTrainResult train_digit_classifier(DigitFeatureNet& net,
                                             const data::DomainDataset& train,
                                             const data::DomainDataset& test,
                                             std::int64_t epochs, std::uint64_t seed,
                                             std::int64_t batch_size = 128);

void save_feature_net(const DigitFeatureNet& net, const std::filesystem::path& path);
void load_feature_net(DigitFeatureNet& net, const std::filesystem::path& path);

// FeatureProvider over a frozen DigitFeatureNet: channel-unit-normalizes
// each conv map, equal per-layer weights summing to one by default.
class DigitFeatureProvider : public FeatureProvider {
 public:
  DigitFeatureProvider(DigitFeatureNet net, std::string tag,
                       std::vector<double> weights = {});

  FeatureStack features(const torch::Tensor& images) const override;
  std::string identity() const override;

 private:
  mutable DigitFeatureNet net_;  // frozen; forward is const in spirit
  std::string tag_;
  std::vector<double> weights_;
};

// Unit-normalizes a feature map along the channel dimension at every
// spatial location (the reference LPIPS preprocessing).
torch::Tensor channel_unit_normalize(const torch::Tensor& features);

// phi: image -> embedding; FRD compares squared Euclidean embedding
// distances. Not a DistanceBackend: FRD is a protocol-level squared score.
struct FaceEmbeddingBackend {
  std::function<torch::Tensor(const torch::Tensor&)> embed;  // [N,C,H,W] -> [N, dim]
  std::int64_t dim = 0;
  std::string identity;

  bool loaded() const { return static_cast<bool>(embed); }
};

FaceEmbeddingBackend embedding_backend_from_net(DigitFeatureNet net, std::string tag);

// ||phi(x1) - phi(x2)||_2^2, averaged over the batch when batched.
torch::Tensor face_distance(const torch::Tensor& x1, const torch::Tensor& x2,
                            const FaceEmbeddingBackend& backend);

}  // namespace smoothstyle::perceptual
