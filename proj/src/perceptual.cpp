#include "smoothstyle/perceptual.hpp"

#include <cmath>

#include "smoothstyle/report.hpp"

namespace smoothstyle::perceptual {

namespace {

// [C,H,W] -> [1,C,H,W]; validates rank and matching shapes.
std::pair<torch::Tensor, bool> batchify(const torch::Tensor& x) {
  if (x.dim() == 3) return {x.unsqueeze(0), false};
  if (x.dim() == 4) return {x, true};
  throw ContractViolation("images must be [C,H,W] or [N,C,H,W]");
}

void check_pair(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) {
    throw ContractViolation("image shape mismatch between distance arguments");
  }
}

torch::Tensor maybe_scalar(torch::Tensor per_sample, bool batched) {
  return batched ? per_sample : per_sample.squeeze(0);
}

}  // namespace

void FeatureStack::validate() const {
  if (layers.empty()) throw ContractViolation("feature stack needs at least one layer");
  if (layers.size() != weights.size()) {
    throw ContractViolation("feature stack layer/weight count mismatch");
  }
  for (double w : weights) {
    if (!(w >= 0.0)) throw ContractViolation("layer weights must be nonnegative");
  }
  for (const auto& l : layers) {
    if (l.dim() != 4) throw ContractViolation("feature layers must be [N,C,H,W]");
  }
}

torch::Tensor channel_unit_normalize(const torch::Tensor& features) {
  auto norm = features.pow(2).sum(1, /*keepdim=*/true).sqrt();
  return features / (norm + 1e-10);
}

namespace {

// Shared core of both LPIPS forms. The weighted per-location channel
// distance is ||y1 - y2||_2^2; `squared` keeps it, otherwise the square
// root is taken before spatial averaging. Aggregation runs in float64 so
// metric properties survive rounding.
torch::Tensor stack_distance(const FeatureStack& a, const FeatureStack& b, bool squared) {
  a.validate();
  b.validate();
  if (a.layers.size() != b.layers.size()) {
    throw ContractViolation("feature stacks have different layer counts");
  }
  torch::Tensor total;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto& ya = a.layers[l];
    const auto& yb = b.layers[l];
    if (ya.sizes() != yb.sizes()) {
      throw ContractViolation("feature layer shape mismatch at layer " + std::to_string(l));
    }
    auto diff = (ya - yb).to(torch::kFloat64);
    auto sq = diff.pow(2).sum(1);                    // [N, H, W]
    auto per_loc = squared ? sq : sq.sqrt();         // inner norm, squared or not
    auto layer_term = per_loc.mean({1, 2}) * a.weights[l];  // 1/(H W) sum_hw, then w_l
    total = total.defined() ? total + layer_term : layer_term;
  }
  return total;  // [N]
}

}  // namespace

torch::Tensor lpips_from_stacks(const FeatureStack& a, const FeatureStack& b) {
  return stack_distance(a, b, /*squared=*/true);
}

torch::Tensor lpips_star_from_stacks(const FeatureStack& a, const FeatureStack& b) {
  return stack_distance(a, b, /*squared=*/false);
}

std::string to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::lpips: return "lpips";
    case BackendKind::lpips_star: return "lpips_star";
    case BackendKind::pixel_l2: return "pixel_l2";
    case BackendKind::random_projection: return "random_projection";
  }
  return "unknown";
}

double DistanceBackend::operator()(const torch::Tensor& x1, const torch::Tensor& x2) const {
  torch::NoGradGuard guard;
  auto d = distance(x1, x2);
  return (d.dim() == 0 ? d : d.mean()).item<double>();
}

LpipsBackend::LpipsBackend(std::shared_ptr<const FeatureProvider> provider, bool squared)
    : provider_(std::move(provider)), squared_(squared) {
  if (!provider_) throw ContractViolation("LpipsBackend needs a feature provider");
}

torch::Tensor LpipsBackend::distance(const torch::Tensor& x1, const torch::Tensor& x2) const {
  check_pair(x1, x2);
  auto [a, batched] = batchify(x1);
  auto [b, batched2] = batchify(x2);
  (void)batched2;
  auto fa = provider_->features(a);
  auto fb = provider_->features(b);
  auto d = squared_ ? lpips_from_stacks(fa, fb) : lpips_star_from_stacks(fa, fb);
  return maybe_scalar(d, batched);
}

BackendKind LpipsBackend::kind() const {
  return squared_ ? BackendKind::lpips : BackendKind::lpips_star;
}

std::string LpipsBackend::identity() const {
  return to_string(kind()) + "(" + provider_->identity() + ")";
}

torch::Tensor PixelL2Backend::distance(const torch::Tensor& x1, const torch::Tensor& x2) const {
  check_pair(x1, x2);
  auto [a, batched] = batchify(x1);
  auto [b, _] = batchify(x2);
  (void)_;
  auto diff = (a - b).to(torch::kFloat64).flatten(1);
  auto d = diff.pow(2).mean(1).sqrt();  // rss / sqrt(pixel count)
  return maybe_scalar(d, batched);
}

RandomProjectionBackend::RandomProjectionBackend(std::uint64_t seed, std::int64_t out_dim)
    : seed_(seed), out_dim_(out_dim) {
  if (out_dim < 1) throw ContractViolation("projection dimension must be positive");
}

const torch::Tensor& RandomProjectionBackend::projection(std::int64_t numel) const {
  auto it = cache_.find(numel);
  if (it == cache_.end()) {
    auto rng = make_rng(seed_, "random-projection/" + std::to_string(numel));
    auto p = normal_tensor({out_dim_, numel}, rng, torch::kFloat64) / std::sqrt(double(out_dim_));
    it = cache_.emplace(numel, std::move(p)).first;
  }
  return it->second;
}

torch::Tensor RandomProjectionBackend::distance(const torch::Tensor& x1,
                                                const torch::Tensor& x2) const {
  check_pair(x1, x2);
  auto [a, batched] = batchify(x1);
  auto [b, _] = batchify(x2);
  (void)_;
  auto diff = (a - b).to(torch::kFloat64).flatten(1);
  const auto& proj = projection(diff.size(1));
  auto d = diff.matmul(proj.t()).norm(2, 1);
  return maybe_scalar(d, batched);
}

std::string RandomProjectionBackend::identity() const {
  return "random_projection(seed=" + std::to_string(seed_) +
         ",dim=" + std::to_string(out_dim_) + ")";
}

DigitFeatureNetImpl::DigitFeatureNetImpl(std::int64_t channels, std::int64_t num_classes) {
  conv1 = register_module(
      "conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, 16, 3).stride(2).padding(1)));
  conv2 = register_module(
      "conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(16, 32, 3).stride(2).padding(1)));
  conv3 = register_module(
      "conv3", torch::nn::Conv2d(torch::nn::Conv2dOptions(32, 64, 3).stride(2).padding(1)));
  head = register_module("head", torch::nn::Linear(64, num_classes));
}

std::vector<torch::Tensor> DigitFeatureNetImpl::feature_maps(const torch::Tensor& x) {
  auto h1 = torch::relu(conv1->forward(x));
  auto h2 = torch::relu(conv2->forward(h1));
  auto h3 = torch::relu(conv3->forward(h2));
  return {h1, h2, h3};
}

torch::Tensor DigitFeatureNetImpl::embedding(const torch::Tensor& x) {
  auto maps = feature_maps(x);
  return maps.back().mean({2, 3});  // [N, 64]
}

torch::Tensor DigitFeatureNetImpl::forward(const torch::Tensor& x) {
  return head->forward(embedding(x));
}

ClassifierTrainResult train_digit_classifier(DigitFeatureNet& net,
                                             const data::DomainDataset& train,
                                             const data::DomainDataset& test,
                                             std::int64_t epochs, std::uint64_t seed,
                                             std::int64_t batch_size) {
  auto rng = make_rng(seed, "digit-classifier");
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(1e-3));
  net->train();

  const auto steps_per_epoch = std::max<std::int64_t>(1, train.total_size() / batch_size);
  for (std::int64_t epoch = 0; epoch < epochs; ++epoch) {
    for (std::int64_t step = 0; step < steps_per_epoch; ++step) {
      std::vector<std::pair<DomainLabel, std::int64_t>> refs;
      std::vector<std::int64_t> labels;
      for (std::int64_t i = 0; i < batch_size; ++i) {
        auto [d, idx] = train.sample_any(rng);
        refs.emplace_back(d, idx);
        labels.push_back(d.index);
      }
      auto x = train.gather(refs);
      auto y = torch::tensor(labels, torch::kInt64);
      opt.zero_grad();
      auto loss = torch::nn::functional::cross_entropy(net->forward(x), y);
      loss.backward();
      opt.step();
    }
  }

  net->eval();
  for (auto& p : net->parameters()) p.set_requires_grad(false);

  torch::NoGradGuard guard;
  std::int64_t correct = 0, total = 0;
  for (std::int64_t d = 0; d < test.num_domains(); ++d) {
    auto x = test.domain_tensor(DomainLabel{d});
    for (std::int64_t ofs = 0; ofs < x.size(0); ofs += 512) {
      auto chunk = x.slice(0, ofs, std::min(ofs + 512, x.size(0)));
      auto pred = net->forward(chunk).argmax(1);
      correct += (pred == d).sum().item<std::int64_t>();
      total += chunk.size(0);
    }
  }
  return {total > 0 ? double(correct) / double(total) : 0.0, epochs};
}

void save_feature_net(const DigitFeatureNet& net, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  torch::serialize::OutputArchive archive;
  net->save(archive);
  archive.save_to(path.string());
}

void load_feature_net(DigitFeatureNet& net, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigurationError("feature-net weights not found: " + path.string());
  }
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  net->load(archive);
  net->eval();
  for (auto& p : net->parameters()) p.set_requires_grad(false);
}

DigitFeatureProvider::DigitFeatureProvider(DigitFeatureNet net, std::string tag,
                                           std::vector<double> weights)
    : net_(std::move(net)), tag_(std::move(tag)), weights_(std::move(weights)) {
  net_->eval();
  for (auto& p : net_->parameters()) p.set_requires_grad(false);
  if (weights_.empty()) weights_.assign(3, 1.0 / 3.0);
  if (weights_.size() != 3) {
    throw ContractViolation("digit feature provider expects 3 layer weights");
  }
}

FeatureStack DigitFeatureProvider::features(const torch::Tensor& images) const {
  auto [x, _] = batchify(images);
  (void)_;
  FeatureStack stack;
  for (auto& map : net_->feature_maps(x)) {
    stack.layers.push_back(channel_unit_normalize(map).to(torch::kFloat64));
  }
  stack.weights = weights_;
  return stack;
}

std::string DigitFeatureProvider::identity() const { return "digit_features/" + tag_; }

FaceEmbeddingBackend embedding_backend_from_net(DigitFeatureNet net, std::string tag) {
  net->eval();
  for (auto& p : net->parameters()) p.set_requires_grad(false);
  FaceEmbeddingBackend backend;
  backend.dim = 64;
  backend.identity = "digit_embedding/" + tag;
  backend.embed = [net](const torch::Tensor& images) mutable {
    auto [x, _] = batchify(images);
    (void)_;
    return net->embedding(x).to(torch::kFloat64);
  };
  return backend;
}

torch::Tensor face_distance(const torch::Tensor& x1, const torch::Tensor& x2,
                            const FaceEmbeddingBackend& backend) {
  if (!backend.loaded()) {
    throw ConfigurationError("face embedding backend is not loaded");
  }
  check_pair(x1, x2);
  auto e1 = backend.embed(x1);
  auto e2 = backend.embed(x2);
  return (e1 - e2).pow(2).sum(-1).mean();
}

}  // namespace smoothstyle::perceptual
