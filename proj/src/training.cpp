#include "smoothstyle/training.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "smoothstyle/report.hpp"

namespace smoothstyle::training {

namespace F = torch::nn::functional;

namespace {

torch::Tensor instance_norm(const torch::Tensor& h) {
  auto mean = h.mean({2, 3}, /*keepdim=*/true);
  auto var = h.var({2, 3}, /*unbiased=*/false, /*keepdim=*/true);
  return (h - mean) / (var + 1e-5).sqrt();
}

torch::Tensor upsample2x(const torch::Tensor& h) {
  return F::interpolate(h, F::InterpolateFuncOptions()
                               .scale_factor(std::vector<double>{2.0, 2.0})
                               .mode(torch::kNearest));
}

torch::Tensor lrelu(const torch::Tensor& h) { return torch::leaky_relu(h, 0.2); }

}  // namespace

AdainBlockImpl::AdainBlockImpl(std::int64_t in_ch, std::int64_t out_ch, std::int64_t style_dim,
                               bool upsample)
    : upsample_(upsample), learned_skip_(in_ch != out_ch) {
  conv1 = register_module(
      "conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_ch, out_ch, 3).padding(1)));
  conv2 = register_module(
      "conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(out_ch, out_ch, 3).padding(1)));
  affine1 = register_module("affine1", torch::nn::Linear(style_dim, 2 * in_ch));
  affine2 = register_module("affine2", torch::nn::Linear(style_dim, 2 * out_ch));
  if (learned_skip_) {
    skip = register_module(
        "skip", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_ch, out_ch, 1).bias(false)));
  }
}

torch::Tensor AdainBlockImpl::adain(const torch::Tensor& h, const torch::Tensor& s,
                                    torch::nn::Linear& affine) {
  auto stats = affine->forward(s);  // [N, 2C]
  auto chunks = stats.chunk(2, 1);
  auto gamma = chunks[0].unsqueeze(-1).unsqueeze(-1);
  auto beta = chunks[1].unsqueeze(-1).unsqueeze(-1);
  return (1.0 + gamma) * instance_norm(h) + beta;
}

torch::Tensor AdainBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& s) {
  auto h = lrelu(adain(x, s, affine1));
  if (upsample_) h = upsample2x(h);
  h = conv1->forward(h);
  h = lrelu(adain(h, s, affine2));
  h = conv2->forward(h);

  auto sc = upsample_ ? upsample2x(x) : x;
  if (learned_skip_) sc = skip->forward(sc);
  return (h + sc) / std::sqrt(2.0);
}

GeneratorImpl::GeneratorImpl(std::int64_t channels, std::int64_t style_dim,
                             std::int64_t base_channels) {
  const auto nf = base_channels;
  from_rgb = register_module(
      "from_rgb", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, nf, 3).padding(1)));
  down1 = register_module(
      "down1", torch::nn::Conv2d(torch::nn::Conv2dOptions(nf, 2 * nf, 3).stride(2).padding(1)));
  down2 = register_module(
      "down2",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(2 * nf, 4 * nf, 3).stride(2).padding(1)));
  in0 = register_module("in0",
                        torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(nf).affine(true)));
  in1 = register_module(
      "in1", torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(2 * nf).affine(true)));
  in2 = register_module(
      "in2", torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(4 * nf).affine(true)));
  block1 = register_module("block1", AdainBlock(4 * nf, 4 * nf, style_dim, /*upsample=*/false));
  block2 = register_module("block2", AdainBlock(4 * nf, 2 * nf, style_dim, /*upsample=*/true));
  block3 = register_module("block3", AdainBlock(2 * nf, nf, style_dim, /*upsample=*/true));
  to_rgb = register_module(
      "to_rgb", torch::nn::Conv2d(torch::nn::Conv2dOptions(nf, channels, 3).padding(1)));
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& x, const torch::Tensor& s) {
  auto style = s.to(x.dtype());
  auto h = lrelu(in0->forward(from_rgb->forward(x)));
  h = lrelu(in1->forward(down1->forward(h)));
  h = lrelu(in2->forward(down2->forward(h)));
  h = block1->forward(h, style);
  h = block2->forward(h, style);
  h = block3->forward(h, style);
  return torch::tanh(to_rgb->forward(h));
}

DiscriminatorImpl::DiscriminatorImpl(std::int64_t channels, std::int64_t num_domains,
                                     std::int64_t base_channels, std::int64_t image_size) {
  const auto nf = base_channels;
  conv1 = register_module(
      "conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, nf, 3).stride(2).padding(1)));
  conv2 = register_module(
      "conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(nf, 2 * nf, 3).stride(2).padding(1)));
  conv3 = register_module(
      "conv3",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(2 * nf, 4 * nf, 3).stride(2).padding(1)));
  const auto spatial = image_size / 8;
  head = register_module("head", torch::nn::Linear(4 * nf * spatial * spatial, num_domains));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& x) {
  auto h = lrelu(conv1->forward(x));
  h = lrelu(conv2->forward(h));
  h = lrelu(conv3->forward(h));
  return head->forward(h.flatten(1));
}

StyleEncoderImpl::StyleEncoderImpl(std::int64_t channels, std::int64_t style_dim,
                                   std::int64_t num_domains, std::int64_t base_channels,
                                   std::int64_t image_size)
    : style_dim_(style_dim), num_domains_(num_domains) {
  const auto nf = base_channels;
  conv1 = register_module(
      "conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, nf, 3).stride(2).padding(1)));
  conv2 = register_module(
      "conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(nf, 2 * nf, 3).stride(2).padding(1)));
  conv3 = register_module(
      "conv3",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(2 * nf, 4 * nf, 3).stride(2).padding(1)));
  const auto spatial = image_size / 8;
  shared = register_module("shared", torch::nn::Linear(4 * nf * spatial * spatial, 64));
  heads = register_module("heads", torch::nn::Linear(64, num_domains * style_dim));
}

torch::Tensor StyleEncoderImpl::forward_all(const torch::Tensor& x) {
  auto h = lrelu(conv1->forward(x));
  h = lrelu(conv2->forward(h));
  h = lrelu(conv3->forward(h));
  h = lrelu(shared->forward(h.flatten(1)));
  return heads->forward(h).view({-1, num_domains_, style_dim_});
}

torch::Tensor StyleEncoderImpl::forward(const torch::Tensor& x, const torch::Tensor& domains) {
  auto all = forward_all(x);  // [N, m, d_s]
  auto index = domains.view({-1, 1, 1}).expand({-1, 1, style_dim_});
  return all.gather(1, index).squeeze(1);
}

MappingNetworkImpl::MappingNetworkImpl(std::int64_t latent_dim, std::int64_t style_dim,
                                       std::int64_t num_domains, std::int64_t hidden)
    : style_dim_(style_dim), num_domains_(num_domains) {
  shared = register_module("shared", torch::nn::Sequential(torch::nn::Linear(latent_dim, hidden),
                                                           torch::nn::ReLU(),
                                                           torch::nn::Linear(hidden, hidden),
                                                           torch::nn::ReLU()));
  heads = register_module("heads", torch::nn::Linear(hidden, num_domains * style_dim));
}

torch::Tensor MappingNetworkImpl::forward(const torch::Tensor& z, const torch::Tensor& domains) {
  auto h = shared->forward(z);
  auto all = heads->forward(h).view({-1, num_domains_, style_dim_});
  auto index = domains.view({-1, 1, 1}).expand({-1, 1, style_dim_});
  return all.gather(1, index).squeeze(1);
}

double TrainConfig::effective_lambda_ds(std::int64_t iteration) const {
  const auto horizon = ds_decay_iterations > 0 ? ds_decay_iterations : iterations;
  if (horizon <= 0) return orig.lambda_ds;
  const double remaining = 1.0 - double(iteration) / double(horizon);
  return orig.lambda_ds * std::max(0.0, remaining);
}

void TrainConfig::validate() const {
  if (image_size < 16 || image_size % 8 != 0) {
    throw ConfigurationError("image size must be a multiple of 8 and at least 16, got " +
                             std::to_string(image_size));
  }
  if (num_domains < 2) throw ConfigurationError("need at least 2 domains");
  if (style_dim < 1 || latent_dim < 1 || base_channels < 1) {
    throw ConfigurationError("network dimensions must be positive");
  }
  if (batch_size < 1 || triplet_batch < 1) throw ConfigurationError("batch sizes must be positive");
  if (iterations < 0) throw ConfigurationError("iteration count must be nonnegative");
  if (smooth.lambda_sr < 0 || smooth.margin_alpha < 0 || orig.lambda_sty < 0 ||
      orig.lambda_ds < 0 || orig.lambda_cyc < 0) {
    throw ConfigurationError("loss weights must be nonnegative");
  }
  if (ema_decay < 0 || ema_decay >= 1) throw ConfigurationError("EMA decay must be in [0, 1)");
}

namespace {

void copy_params(const torch::nn::Module& src, torch::nn::Module& dst) {
  torch::NoGradGuard guard;
  auto sp = src.parameters();
  auto dp = dst.parameters();
  TORCH_CHECK(sp.size() == dp.size(), "parameter count mismatch when copying");
  for (std::size_t i = 0; i < sp.size(); ++i) dp[i].copy_(sp[i]);
  auto sb = src.buffers();
  auto db = dst.buffers();
  for (std::size_t i = 0; i < sb.size(); ++i) db[i].copy_(sb[i]);
}

void ema_update(const torch::nn::Module& live, torch::nn::Module& shadow, double decay) {
  torch::NoGradGuard guard;
  auto lp = live.parameters();
  auto sp = shadow.parameters();
  for (std::size_t i = 0; i < lp.size(); ++i) {
    sp[i].mul_(decay).add_(lp[i], 1.0 - decay);
  }
}

}  // namespace

ModelBundle build_models(const TrainConfig& config) {
  config.validate();
  torch::manual_seed(config.seed);

  ModelBundle b;
  b.num_domains = config.num_domains;
  b.style_dim = config.style_dim;
  b.latent_dim = config.latent_dim;
  b.generator = Generator(config.channels, config.style_dim, config.base_channels);
  b.discriminator = Discriminator(config.channels, config.num_domains, config.base_channels,
                                  config.image_size);
  b.encoder = StyleEncoder(config.channels, config.style_dim, config.num_domains,
                           config.base_channels, config.image_size);
  b.mapper = MappingNetwork(config.latent_dim, config.style_dim, config.num_domains);

  b.generator_ema = Generator(config.channels, config.style_dim, config.base_channels);
  b.encoder_ema = StyleEncoder(config.channels, config.style_dim, config.num_domains,
                               config.base_channels, config.image_size);
  b.mapper_ema = MappingNetwork(config.latent_dim, config.style_dim, config.num_domains);
  copy_params(*b.generator, *b.generator_ema);
  copy_params(*b.encoder, *b.encoder_ema);
  copy_params(*b.mapper, *b.mapper_ema);
  for (auto& p : b.generator_ema->parameters()) p.set_requires_grad(false);
  for (auto& p : b.encoder_ema->parameters()) p.set_requires_grad(false);
  for (auto& p : b.mapper_ema->parameters()) p.set_requires_grad(false);
  return b;
}

OptimizerSet build_optimizers(const ModelBundle& bundle, const TrainConfig& config) {
  auto options = [&](double lr) {
    return torch::optim::AdamOptions(lr)
        .betas({config.adam_beta1, config.adam_beta2})
        .weight_decay(config.weight_decay);
  };
  OptimizerSet opts;
  opts.generator = std::make_unique<torch::optim::Adam>(bundle.generator->parameters(),
                                                        options(config.lr_generator));
  opts.discriminator = std::make_unique<torch::optim::Adam>(bundle.discriminator->parameters(),
                                                            options(config.lr_discriminator));
  opts.encoder = std::make_unique<torch::optim::Adam>(bundle.encoder->parameters(),
                                                      options(config.lr_encoder));
  opts.mapper = std::make_unique<torch::optim::Adam>(bundle.mapper->parameters(),
                                                     options(config.lr_mapper));
  return opts;
}

Batch sample_batch(const data::DomainDataset& dataset, std::int64_t batch_size, Rng& rng) {
  std::vector<std::pair<DomainLabel, std::int64_t>> refs;
  std::vector<std::int64_t> labels;
  refs.reserve(batch_size);
  for (std::int64_t i = 0; i < batch_size; ++i) {
    auto [d, idx] = dataset.sample_any(rng);
    refs.emplace_back(d, idx);
    labels.push_back(d.index);
  }
  return {dataset.gather(refs), torch::tensor(labels, torch::kInt64)};
}

namespace {

void check_finite_loss(const torch::Tensor& value, const char* name) {
  if (!torch::isfinite(value).all().item<bool>()) {
    throw TrainingDiverged(std::string("non-finite ") + name + " loss");
  }
}

struct StepDraws {
  torch::Tensor y_trg;                 // [N] target domains
  torch::Tensor z1, z2;                // mapper inputs (mapper iterations)
  torch::Tensor x_ref1, x_ref2;        // reference images (encoder iterations)
  torch::Tensor tri_anchor, tri_pos, tri_neg;  // triplet images
  torch::Tensor tri_anchor_dom, tri_neg_dom;
  CodeSource source = CodeSource::encoder;
};

// All random draws for one step happen here, in a fixed order, so the step
// itself is a deterministic function of (models, batch, draws).
StepDraws draw_step_inputs(const Batch& batch, std::int64_t iteration, const TrainConfig& config,
                           const data::DomainDataset& dataset, Rng& rng) {
  const auto n = batch.x.size(0);
  StepDraws d;
  d.source = style::mixed_code_source(iteration);

  std::vector<std::int64_t> trg;
  trg.reserve(n);
  for (std::int64_t i = 0; i < n; ++i) trg.push_back(rand_index(rng, config.num_domains));
  d.y_trg = torch::tensor(trg, torch::kInt64);

  if (d.source == CodeSource::mapper) {
    d.z1 = normal_tensor({n, config.latent_dim}, rng);
    d.z2 = normal_tensor({n, config.latent_dim}, rng);
  } else {
    std::vector<std::pair<DomainLabel, std::int64_t>> r1, r2;
    for (std::int64_t i = 0; i < n; ++i) {
      r1.emplace_back(DomainLabel{trg[i]}, dataset.sample_index(DomainLabel{trg[i]}, rng));
    }
    for (std::int64_t i = 0; i < n; ++i) {
      r2.emplace_back(DomainLabel{trg[i]}, dataset.sample_index(DomainLabel{trg[i]}, rng));
    }
    d.x_ref1 = dataset.gather(r1);
    d.x_ref2 = dataset.gather(r2);
  }

  if (config.use_triplet) {
    std::vector<torch::Tensor> a, p, ng;
    std::vector<std::int64_t> a_dom, n_dom;
    for (std::int64_t i = 0; i < config.triplet_batch; ++i) {
      const auto m = dataset.num_domains();
      const auto di = rand_index(rng, m);
      const auto n_i = dataset.size(DomainLabel{di});
      if (n_i < 2) throw DataError("triplet sampling needs >= 2 images per domain");
      const auto ia = dataset.sample_index(DomainLabel{di}, rng);
      auto ip = rand_index(rng, n_i - 1);
      if (ip >= ia) ++ip;
      auto dj = rand_index(rng, m - 1);
      if (dj >= di) ++dj;
      const auto in = dataset.sample_index(DomainLabel{dj}, rng);
      a.push_back(dataset.get(DomainLabel{di}, ia));
      p.push_back(dataset.get(DomainLabel{di}, ip));
      ng.push_back(dataset.get(DomainLabel{dj}, in));
      a_dom.push_back(di);
      n_dom.push_back(dj);
    }
    d.tri_anchor = torch::stack(a);
    d.tri_pos = torch::stack(p);
    d.tri_neg = torch::stack(ng);
    d.tri_anchor_dom = torch::tensor(a_dom, torch::kInt64);
    d.tri_neg_dom = torch::tensor(n_dom, torch::kInt64);
  }
  return d;
}

}  // namespace

loss::LossBundle training_step(ModelBundle& bundle, OptimizerSet& opts, const Batch& batch,
                               std::int64_t iteration, const TrainConfig& config,
                               const data::DomainDataset& dataset, Rng& rng,
                               const perceptual::DistanceBackend* content_backend) {
  if (config.use_content && !content_backend) {
    throw ConfigurationError("content loss enabled but no perceptual backend given");
  }
  const auto draws = draw_step_inputs(batch, iteration, config, dataset, rng);
  const auto& x = batch.x;
  const auto& y_src = batch.domains;
  const auto& y_trg = draws.y_trg;

  auto target_style = [&](bool second) {
    if (draws.source == CodeSource::mapper) {
      return bundle.mapper->forward(second ? draws.z2 : draws.z1, y_trg);
    }
    return bundle.encoder->forward(second ? draws.x_ref2 : draws.x_ref1, y_trg);
  };

  // --- discriminator update -------------------------------------------
  torch::Tensor x_fake_ng;
  {
    torch::NoGradGuard guard;
    x_fake_ng = bundle.generator->forward(x, target_style(false));
  }
  auto d_real = torch::softplus(-loss::select_domain_logit(bundle.discriminator->forward(x), y_src))
                    .mean();
  auto d_fake = torch::softplus(
                    loss::select_domain_logit(bundle.discriminator->forward(x_fake_ng), y_trg))
                    .mean();
  auto d_loss = d_real + d_fake;
  check_finite_loss(d_loss, "discriminator");
  opts.discriminator->zero_grad();
  d_loss.backward();
  opts.discriminator->step();

  // --- generator / encoder / mapper update ----------------------------
  auto s_trg = target_style(false);
  auto x_fake = bundle.generator->forward(x, s_trg);
  auto g_adv =
      torch::softplus(-loss::select_domain_logit(bundle.discriminator->forward(x_fake), y_trg))
          .mean();

  auto sty = loss::style_reconstruction_core(s_trg, bundle.encoder->forward(x_fake, y_trg));

  auto s_trg2 = target_style(true);
  auto x_fake2 = bundle.generator->forward(x, s_trg2);
  auto ds = loss::pixel_l1_core(x_fake, x_fake2);

  auto s_src = bundle.encoder->forward(x, y_src);
  auto x_rec = bundle.generator->forward(x_fake, s_src);
  auto cyc = loss::pixel_l1_core(x, x_rec);

  auto zero = torch::zeros({}, x.options());
  auto cont = config.use_content ? loss::content_core(x, x_fake, *content_backend) : zero;
  auto sr = config.smooth.lambda_sr > 0 ? loss::style_regularization(s_trg) : zero;
  torch::Tensor tri = zero;
  if (config.use_triplet) {
    auto sa = bundle.encoder->forward(draws.tri_anchor, draws.tri_anchor_dom);
    auto sp = bundle.encoder->forward(draws.tri_pos, draws.tri_anchor_dom);
    auto sn = bundle.encoder->forward(draws.tri_neg, draws.tri_neg_dom);
    tri = loss::triplet_loss(sa, sp, sn, config.smooth.margin_alpha);
  }

  const double lambda_ds = config.effective_lambda_ds(iteration);
  auto g_total = g_adv + config.orig.lambda_sty * sty - lambda_ds * ds +
                 config.orig.lambda_cyc * cyc +
                 loss::smooth_loss(cont, config.smooth.lambda_sr > 0 ? sr : zero, tri,
                                   config.smooth);
  check_finite_loss(g_total, "generator");

  opts.generator->zero_grad();
  opts.encoder->zero_grad();
  opts.mapper->zero_grad();
  g_total.backward();
  opts.generator->step();
  opts.encoder->step();
  opts.mapper->step();

  ema_update(*bundle.generator, *bundle.generator_ema, config.ema_decay);
  ema_update(*bundle.encoder, *bundle.encoder_ema, config.ema_decay);
  ema_update(*bundle.mapper, *bundle.mapper_ema, config.ema_decay);

  loss::LossBundle out;
  out.components["d_adv"] = d_loss.item<double>();
  out.components["g_adv"] = g_adv.item<double>();
  out.components["sty"] = sty.item<double>();
  out.components["ds"] = ds.item<double>();
  out.components["cyc"] = cyc.item<double>();
  out.components["cont"] = cont.item<double>();
  out.components["sr"] = sr.item<double>();
  out.components["tri"] = tri.item<double>();
  out.components["lambda_ds"] = lambda_ds;
  out.total_generator = g_total.item<double>();
  out.total_discriminator = d_loss.item<double>();
  return out;
}

TrainingLoop::TrainingLoop(TrainConfig config, const data::DomainDataset* dataset,
                           std::shared_ptr<const perceptual::DistanceBackend> content_backend)
    : config_(config),
      dataset_(dataset),
      content_backend_(std::move(content_backend)),
      bundle_(build_models(config)),
      opts_(build_optimizers(bundle_, config)),
      rng_(make_rng(config.seed, "training-loop")) {
  if (!dataset_) throw ContractViolation("training needs a dataset");
  if (dataset_->num_domains() != config_.num_domains) {
    throw ConfigurationError("config num_domains disagrees with the dataset");
  }
}

loss::LossBundle TrainingLoop::step() {
  auto batch = sample_batch(*dataset_, config_.batch_size, rng_);
  auto bundle = training_step(bundle_, opts_, batch, iteration_, config_, *dataset_, rng_,
                              content_backend_.get());
  ++iteration_;
  return bundle;
}

std::vector<loss::LossBundle> TrainingLoop::run(
    const std::optional<std::filesystem::path>& out_dir) {
  if (out_dir) std::filesystem::create_directories(*out_dir);
  std::vector<loss::LossBundle> history;
  history.reserve(config_.iterations);
  try {
    while (iteration_ < config_.iterations) {
      history.push_back(step());
      if (out_dir && config_.checkpoint_every > 0 && iteration_ % config_.checkpoint_every == 0 &&
          iteration_ < config_.iterations) {
        save_checkpoint(*out_dir / ("checkpoint_" + std::to_string(iteration_) + ".pt"));
      }
    }
  } catch (const TrainingDiverged&) {
    if (out_dir) save_checkpoint(*out_dir / "checkpoint_diverged.pt");
    throw;
  }

  if (out_dir) {
    save_checkpoint(*out_dir / "checkpoint_final.pt");
    std::vector<std::vector<double>> rows;
    rows.reserve(history.size());
    for (std::size_t i = 0; i < history.size(); ++i) {
      rows.push_back(loss_history_row(std::int64_t(i), history[i]));
    }
    report::write_csv(*out_dir / "loss_history.csv", loss_history_header(), rows);
  }
  return history;
}

namespace {

void write_module(torch::serialize::OutputArchive& root, const std::string& key,
                  const torch::nn::Module& module) {
  torch::serialize::OutputArchive sub;
  module.save(sub);
  root.write(key, sub);
}

void read_module(torch::serialize::InputArchive& root, const std::string& key,
                 torch::nn::Module& module) {
  torch::serialize::InputArchive sub;
  root.read(key, sub);
  module.load(sub);
}

void write_optimizer(torch::serialize::OutputArchive& root, const std::string& key,
                     const torch::optim::Adam& opt) {
  torch::serialize::OutputArchive sub;
  opt.save(sub);
  root.write(key, sub);
}

void read_optimizer(torch::serialize::InputArchive& root, const std::string& key,
                    torch::optim::Adam& opt) {
  torch::serialize::InputArchive sub;
  root.read(key, sub);
  opt.load(sub);
}

}  // namespace

void TrainingLoop::save_checkpoint(const std::filesystem::path& file) const {
  if (!file.parent_path().empty()) std::filesystem::create_directories(file.parent_path());
  torch::serialize::OutputArchive root;
  write_module(root, "generator", *bundle_.generator);
  write_module(root, "discriminator", *bundle_.discriminator);
  write_module(root, "encoder", *bundle_.encoder);
  write_module(root, "mapper", *bundle_.mapper);
  write_module(root, "generator_ema", *bundle_.generator_ema);
  write_module(root, "encoder_ema", *bundle_.encoder_ema);
  write_module(root, "mapper_ema", *bundle_.mapper_ema);
  write_optimizer(root, "opt_generator", *opts_.generator);
  write_optimizer(root, "opt_discriminator", *opts_.discriminator);
  write_optimizer(root, "opt_encoder", *opts_.encoder);
  write_optimizer(root, "opt_mapper", *opts_.mapper);
  root.write("iteration", torch::tensor(iteration_, torch::kInt64));
  std::ostringstream rng_state;
  rng_state << rng_;
  root.write("rng", rng_state.str());
  root.write("config", train_config_to_json(config_).dump());
  root.save_to(file.string());
  write_checkpoint_sidecar(file, config_, iteration_);
}

TrainingLoop TrainingLoop::resume(const std::filesystem::path& file,
                                  const data::DomainDataset* dataset,
                                  std::shared_ptr<const perceptual::DistanceBackend> backend) {
  if (!std::filesystem::exists(file)) {
    throw ConfigurationError("checkpoint not found: " + file.string());
  }
  torch::serialize::InputArchive root;
  root.load_from(file.string());

  c10::IValue config_str;
  root.read("config", config_str);
  auto config = train_config_from_json(nlohmann::json::parse(config_str.toStringRef()));

  TrainingLoop loop(config, dataset, std::move(backend));
  read_module(root, "generator", *loop.bundle_.generator);
  read_module(root, "discriminator", *loop.bundle_.discriminator);
  read_module(root, "encoder", *loop.bundle_.encoder);
  read_module(root, "mapper", *loop.bundle_.mapper);
  read_module(root, "generator_ema", *loop.bundle_.generator_ema);
  read_module(root, "encoder_ema", *loop.bundle_.encoder_ema);
  read_module(root, "mapper_ema", *loop.bundle_.mapper_ema);
  read_optimizer(root, "opt_generator", *loop.opts_.generator);
  read_optimizer(root, "opt_discriminator", *loop.opts_.discriminator);
  read_optimizer(root, "opt_encoder", *loop.opts_.encoder);
  read_optimizer(root, "opt_mapper", *loop.opts_.mapper);

  torch::Tensor iteration = torch::zeros({}, torch::kInt64);
  root.read("iteration", iteration);
  loop.iteration_ = iteration.item<std::int64_t>();

  c10::IValue rng_state;
  root.read("rng", rng_state);
  std::istringstream rng_in(rng_state.toStringRef());
  rng_in >> loop.rng_;
  return loop;
}

void write_checkpoint_sidecar(const std::filesystem::path& file, const TrainConfig& config,
                              std::int64_t iteration) {
  nlohmann::json sidecar{{"config", train_config_to_json(config)},
                         {"iteration", iteration},
                         {"checkpoint_sha256", report::sha256_file(file)}};
  std::ofstream out(file.string() + ".json", std::ios::binary);
  out << sidecar.dump(2) << "\n";
}

metrics::GeneratorFn EvalModel::generator() const {
  auto g = bundle.generator_ema;
  return [g](const torch::Tensor& x, const torch::Tensor& s) mutable {
    torch::NoGradGuard guard;
    return g->forward(x.to(torch::kFloat32), s.to(torch::kFloat32));
  };
}

style::EncoderFn EvalModel::encoder() const {
  auto e = bundle.encoder_ema;
  return [e](const torch::Tensor& image, DomainLabel domain) mutable {
    torch::NoGradGuard guard;
    auto dom = torch::tensor({domain.index}, torch::kInt64);
    auto code = e->forward(image.unsqueeze(0).to(torch::kFloat32), dom).squeeze(0);
    return style::StyleCode{code, domain, CodeSource::encoder};
  };
}

style::MapperFn EvalModel::mapper() const {
  auto m = bundle.mapper_ema;
  return [m](const torch::Tensor& z, DomainLabel domain) mutable {
    torch::NoGradGuard guard;
    auto dom = torch::tensor({domain.index}, torch::kInt64);
    auto code = m->forward(z.unsqueeze(0).to(torch::kFloat32), dom).squeeze(0);
    return style::StyleCode{code, domain, CodeSource::mapper};
  };
}

loss::EncoderBatchFn EvalModel::encoder_batch(DomainLabel domain) const {
  auto e = bundle.encoder_ema;
  const auto index = domain.index;
  return [e, index](const torch::Tensor& x) mutable {
    torch::NoGradGuard guard;
    auto dom = torch::full({x.size(0)}, index, torch::kInt64);
    return e->forward(x.to(torch::kFloat32), dom);
  };
}

style::CodeSampler EvalModel::code_sampler(const data::DomainDataset* dataset) const {
  style::CodeSampler sampler;
  sampler.dataset = dataset;
  sampler.encoder = encoder();
  sampler.mapper = mapper();
  sampler.d_z = config.latent_dim;
  return sampler;
}

EvalModel load_eval_model(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) {
    throw ConfigurationError("checkpoint not found: " + file.string());
  }
  torch::serialize::InputArchive root;
  root.load_from(file.string());
  c10::IValue config_str;
  root.read("config", config_str);

  EvalModel model;
  model.config = train_config_from_json(nlohmann::json::parse(config_str.toStringRef()));
  model.bundle = build_models(model.config);
  read_module(root, "generator_ema", *model.bundle.generator_ema);
  read_module(root, "encoder_ema", *model.bundle.encoder_ema);
  read_module(root, "mapper_ema", *model.bundle.mapper_ema);
  model.bundle.generator_ema->eval();
  model.bundle.encoder_ema->eval();
  model.bundle.mapper_ema->eval();
  return model;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return nlohmann::json{{"image_size", c.image_size},
                        {"channels", c.channels},
                        {"num_domains", c.num_domains},
                        {"style_dim", c.style_dim},
                        {"latent_dim", c.latent_dim},
                        {"base_channels", c.base_channels},
                        {"batch_size", c.batch_size},
                        {"triplet_batch", c.triplet_batch},
                        {"iterations", c.iterations},
                        {"lr_generator", c.lr_generator},
                        {"lr_discriminator", c.lr_discriminator},
                        {"lr_encoder", c.lr_encoder},
                        {"lr_mapper", c.lr_mapper},
                        {"adam_beta1", c.adam_beta1},
                        {"adam_beta2", c.adam_beta2},
                        {"weight_decay", c.weight_decay},
                        {"lambda_sr", c.smooth.lambda_sr},
                        {"margin_alpha", c.smooth.margin_alpha},
                        {"lambda_sty", c.orig.lambda_sty},
                        {"lambda_ds", c.orig.lambda_ds},
                        {"lambda_cyc", c.orig.lambda_cyc},
                        {"use_triplet", c.use_triplet},
                        {"use_content", c.use_content},
                        {"ds_decay_iterations", c.ds_decay_iterations},
                        {"ema_decay", c.ema_decay},
                        {"checkpoint_every", c.checkpoint_every},
                        {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "image_size",    "channels",     "num_domains",  "style_dim",
      "latent_dim",    "base_channels", "batch_size",   "triplet_batch",
      "iterations",    "lr_generator", "lr_discriminator", "lr_encoder",
      "lr_mapper",     "adam_beta1",   "adam_beta2",   "weight_decay",
      "lambda_sr",     "margin_alpha", "lambda_sty",   "lambda_ds",
      "lambda_cyc",    "use_triplet",  "use_content",  "ds_decay_iterations",
      "ema_decay",     "checkpoint_every", "seed"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigurationError("unknown train config key: " + key);
  }
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("image_size", c.image_size);
  get("channels", c.channels);
  get("num_domains", c.num_domains);
  get("style_dim", c.style_dim);
  get("latent_dim", c.latent_dim);
  get("base_channels", c.base_channels);
  get("batch_size", c.batch_size);
  get("triplet_batch", c.triplet_batch);
  get("iterations", c.iterations);
  get("lr_generator", c.lr_generator);
  get("lr_discriminator", c.lr_discriminator);
  get("lr_encoder", c.lr_encoder);
  get("lr_mapper", c.lr_mapper);
  get("adam_beta1", c.adam_beta1);
  get("adam_beta2", c.adam_beta2);
  get("weight_decay", c.weight_decay);
  get("lambda_sr", c.smooth.lambda_sr);
  get("margin_alpha", c.smooth.margin_alpha);
  get("lambda_sty", c.orig.lambda_sty);
  get("lambda_ds", c.orig.lambda_ds);
  get("lambda_cyc", c.orig.lambda_cyc);
  get("use_triplet", c.use_triplet);
  get("use_content", c.use_content);
  get("ds_decay_iterations", c.ds_decay_iterations);
  get("ema_decay", c.ema_decay);
  get("checkpoint_every", c.checkpoint_every);
  get("seed", c.seed);
  return c;
}

std::vector<std::string> loss_history_header() {
  return {"iteration", "d_adv", "g_adv", "sty",      "ds",
          "cyc",       "cont",  "sr",    "tri",      "lambda_ds",
          "total_generator",    "total_discriminator"};
}

std::vector<double> loss_history_row(std::int64_t iteration, const loss::LossBundle& bundle) {
  auto comp = [&](const char* name) {
    auto it = bundle.components.find(name);
    return it == bundle.components.end() ? 0.0 : it->second;
  };
  return {double(iteration), comp("d_adv"), comp("g_adv"),  comp("sty"),
          comp("ds"),        comp("cyc"),   comp("cont"),   comp("sr"),
          comp("tri"),       comp("lambda_ds"), bundle.total_generator,
          bundle.total_discriminator};
}

}  // namespace smoothstyle::training
