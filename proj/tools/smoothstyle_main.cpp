// smoothstyle: train / evaluate / interpolate / analyze-space for
// style-space-smoothed multi-domain image translation.

#include <filesystem>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "smoothstyle/config.hpp"
#include "smoothstyle/metrics.hpp"
#include "smoothstyle/report.hpp"
#include "smoothstyle/training.hpp"
#include "smoothstyle/viz.hpp"

namespace fs = std::filesystem;
using namespace smoothstyle;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file (JSON)");
  cmd->add_option("--override", args.overrides, "KEY.PATH=VALUE config override (repeatable)");
  cmd->add_option("--seed", args.seed, "root seed for this invocation");
  cmd->add_option("--out", args.out_dir, "output directory");
}

config::ExperimentConfig resolve_config(const CommonArgs& args) {
  config::ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    cfg = config::ExperimentConfig::load(args.config_path);
  }
  for (const auto& ov : args.overrides) cfg.apply_override(ov);
  if (args.seed) {
    cfg.seed = *args.seed;
    cfg.train.seed = *args.seed;
  }
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  return cfg;
}

fs::path backend_weights_path(const config::ExperimentConfig& cfg) {
  if (!cfg.backend.weights.empty()) return cfg.backend.weights;
  return fs::path(cfg.out_dir) / "feature_net.pt";
}

// Loads the frozen feature net, or trains and saves it when allowed.
perceptual::DigitFeatureNet prepare_feature_net(const config::ExperimentConfig& cfg,
                                                const data::DomainDataset& train,
                                                const data::DomainDataset& test,
                                                bool allow_training) {
  const auto path = backend_weights_path(cfg);
  perceptual::DigitFeatureNet net(cfg.data.channels, train.num_domains());
  if (fs::exists(path)) {
    perceptual::load_feature_net(net, path);
    return net;
  }
  if (!(allow_training && cfg.backend.train_if_missing)) {
    throw ConfigurationError("perceptual backend weights missing: " + path.string() +
                             " (run the train command first or point backend.weights at a file)");
  }
  torch::manual_seed(derive_seed(cfg.seed, "feature-net-init"));
  auto result = perceptual::train_digit_classifier(net, train, test, cfg.backend.classifier_epochs,
                                                   derive_seed(cfg.seed, "feature-net"));
  perceptual::save_feature_net(net, path);
  std::cout << "feature net trained: test accuracy " << result.test_accuracy << ", saved to "
            << path << "\n";
  return net;
}

std::shared_ptr<perceptual::DistanceBackend> make_backend(const config::ExperimentConfig& cfg,
                                                          const data::DomainDataset& train,
                                                          const data::DomainDataset& test,
                                                          bool allow_training,
                                                          std::string* weight_hash) {
  const auto& kind = cfg.backend.kind;
  if (weight_hash) *weight_hash = "";
  if (kind == "pixel_l2") return std::make_shared<perceptual::PixelL2Backend>();
  if (kind == "random_projection") {
    return std::make_shared<perceptual::RandomProjectionBackend>(cfg.backend.projection_seed,
                                                                 cfg.backend.projection_dim);
  }
  auto net = prepare_feature_net(cfg, train, test, allow_training);
  if (weight_hash) *weight_hash = report::sha256_file(backend_weights_path(cfg));
  auto provider = std::make_shared<perceptual::DigitFeatureProvider>(
      net, backend_weights_path(cfg).filename().string());
  return std::make_shared<perceptual::LpipsBackend>(provider, kind == "lpips");
}

metrics::PathSampler make_path_sampler(const training::EvalModel& model,
                                       const data::DomainDataset& test, PathKind kind,
                                       bool mixed, CodeSource source) {
  auto sampler = model.code_sampler(&test);
  return [sampler, &test, kind, mixed, source](Rng& rng) {
    auto [dom, idx] = test.sample_any(rng);
    auto chosen = kind;
    if (mixed) chosen = rand_index(rng, 2) == 0 ? PathKind::intra : PathKind::inter;
    auto [s0, s1] = style::sample_endpoints(sampler, chosen, source, rng);
    return metrics::PathSample{test.get(dom, idx), std::move(s0), std::move(s1)};
  };
}

CodeSource endpoint_source(const config::ExperimentConfig& cfg) {
  return cfg.eval.endpoint_source == "encoder" ? CodeSource::encoder : CodeSource::mapper;
}

int cmd_train(const CommonArgs& args) {
  auto cfg = resolve_config(args);
  fs::create_directories(cfg.out_dir);

  auto [train_data, test_data] = config::load_datasets(cfg.data);
  cfg.train.num_domains = train_data.num_domains();
  cfg.train.image_size = cfg.data.image_size;
  cfg.train.channels = cfg.data.channels;

  std::shared_ptr<perceptual::DistanceBackend> content_backend;
  std::string weight_hash;
  const bool needs_net = cfg.backend.kind == "lpips" || cfg.backend.kind == "lpips_star";
  if (cfg.train.use_content || needs_net) {
    content_backend = make_backend(cfg, train_data, test_data, /*allow_training=*/true,
                                   &weight_hash);
  }

  cfg.save(fs::path(cfg.out_dir) / "config.json");  // effective-config echo

  training::TrainingLoop loop(cfg.train, &train_data,
                              cfg.train.use_content ? content_backend : nullptr);
  auto history = loop.run(fs::path(cfg.out_dir));
  std::cout << "trained " << history.size() << " iterations; checkpoint at "
            << (fs::path(cfg.out_dir) / "checkpoint_final.pt") << "\n";
  return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& checkpoint,
                 std::vector<std::string> metric_names) {
  static const std::set<std::string> valid = {"ps", "fid", "lpips", "frd", "ppl", "linearity"};
  if (metric_names.empty()) metric_names = {"ps"};
  for (const auto& name : metric_names) {
    if (!valid.count(name)) {
      std::string all;
      for (const auto& v : valid) all += (all.empty() ? "" : ", ") + v;
      throw ConfigurationError("unknown metric '" + name + "' (valid: " + all + ")");
    }
  }

  auto cfg = resolve_config(args);
  fs::create_directories(cfg.out_dir);
  auto model = training::load_eval_model(checkpoint);
  auto [train_data, test_data] = config::load_datasets(cfg.data);

  std::string weight_hash;
  auto backend = make_backend(cfg, train_data, test_data, /*allow_training=*/false, &weight_hash);
  const auto strategy =
      cfg.eval.strategy == "slerp" ? InterpStrategy::slerp : InterpStrategy::lerp;
  const auto source = endpoint_source(cfg);

  auto base_report = [&](const std::string& metric) {
    report::MetricReport rep;
    rep.metric = metric;
    rep.seed = cfg.seed;
    rep.backend = backend->identity();
    rep.backend_hash = weight_hash;
    return rep;
  };

  // The feature net serves FID features and the FRD embedding.
  auto feature_net_backed = [&](const std::string& why) {
    if (!fs::exists(backend_weights_path(cfg))) {
      throw ConfigurationError(why + " needs the feature net; weights missing at " +
                               backend_weights_path(cfg).string());
    }
    perceptual::DigitFeatureNet net(cfg.data.channels, train_data.num_domains());
    perceptual::load_feature_net(net, backend_weights_path(cfg));
    return net;
  };

  for (const auto& name : metric_names) {
    if (name == "ps") {
      const struct {
        const char* tag;
        PathKind kind;
        bool mixed;
      } variants[] = {{"intra", PathKind::intra, false},
                      {"inter", PathKind::inter, false},
                      {"mixed", PathKind::intra, true}};
      std::vector<std::vector<double>> csv_rows;
      auto rep = base_report("ps");
      rep.protocol = {{"n_paths", cfg.eval.ps_paths},
                      {"T", cfg.eval.ps_steps},
                      {"strategy", cfg.eval.strategy},
                      {"endpoint_source", cfg.eval.endpoint_source}};
      for (const auto& variant : variants) {
        auto rng = make_rng(cfg.seed, std::string("evaluate/ps/") + variant.tag);
        auto sampler = make_path_sampler(model, test_data, variant.kind, variant.mixed, source);
        auto result = metrics::ps_protocol(model.generator(), sampler, *backend,
                                           std::size_t(cfg.eval.ps_paths), cfg.eval.ps_steps,
                                           strategy, rng);
        rep.results[variant.tag] = {{"alig", result.score.alig},
                                    {"uni", result.score.uni},
                                    {"ps", result.score.ps},
                                    {"degenerate_paths", result.degenerate_paths},
                                    {"total_paths", result.total_paths}};
        for (std::size_t i = 0; i < result.per_path.size(); ++i) {
          const auto& p = result.per_path[i];
          csv_rows.push_back({double(&variant - variants), double(i), p.alig, p.uni, p.ps,
                              p.degenerate ? 1.0 : 0.0});
        }
      }
      rep.save(fs::path(cfg.out_dir) / "report_ps.json");
      report::write_csv(fs::path(cfg.out_dir) / "ps_paths.csv",
                        {"variant", "path", "alig", "uni", "ps", "degenerate"}, csv_rows);
    } else if (name == "fid") {
      auto net = feature_net_backed("fid");
      metrics::FeatureFn features = [net](const torch::Tensor& x) mutable {
        torch::NoGradGuard guard;
        return net->embedding(x);
      };
      auto rng = make_rng(cfg.seed, "evaluate/fid");
      auto sampler = model.code_sampler(&test_data);
      auto result = metrics::fid_over_interpolations(
          model.generator(), test_data, DomainLabel{cfg.eval.fid_source},
          DomainLabel{cfg.eval.fid_target}, sampler, source, features, cfg.eval.fid_images,
          cfg.eval.fid_points, rng);
      auto rep = base_report("fid");
      rep.protocol = {{"n_images", cfg.eval.fid_images},
                      {"n_points", cfg.eval.fid_points},
                      {"source_domain", cfg.eval.fid_source},
                      {"target_domain", cfg.eval.fid_target},
                      {"endpoint_source", cfg.eval.endpoint_source},
                      {"features", "in-repo digit classifier (values comparable only within "
                                   "this feature space)"}};
      rep.results = {{"fid", result.fid},
                     {"n_generated", result.n_generated},
                     {"n_real", result.n_real}};
      rep.save(fs::path(cfg.out_dir) / "report_fid.json");
    } else if (name == "lpips") {
      auto rng = make_rng(cfg.seed, "evaluate/lpips");
      auto sampler = model.code_sampler(&test_data);
      auto result = metrics::lpips_diversity(model.generator(), test_data,
                                             DomainLabel{cfg.eval.diversity_target}, sampler,
                                             *backend, cfg.eval.diversity_images,
                                             cfg.eval.diversity_styles, rng);
      auto rep = base_report("lpips_diversity");
      rep.protocol = {{"n_images", cfg.eval.diversity_images},
                      {"n_styles", cfg.eval.diversity_styles},
                      {"target_domain", cfg.eval.diversity_target}};
      rep.results = {{"diversity", result.mean_distance},
                     {"pairs_per_image", result.pairs_per_image}};
      rep.save(fs::path(cfg.out_dir) / "report_lpips.json");
    } else if (name == "frd") {
      auto net = feature_net_backed("frd");
      auto embedding = perceptual::embedding_backend_from_net(
          net, backend_weights_path(cfg).filename().string());
      auto rng = make_rng(cfg.seed, "evaluate/frd");
      auto sampler = model.code_sampler(&test_data);
      const auto value = metrics::frd_protocol(model.generator(), test_data, sampler, embedding,
                                               cfg.eval.ppl_samples, rng);
      auto rep = base_report("frd");
      rep.protocol = {{"n_samples", cfg.eval.ppl_samples}, {"embedding", embedding.identity}};
      rep.results = {{"frd", value}};
      rep.save(fs::path(cfg.out_dir) / "report_frd.json");
    } else if (name == "ppl") {
      auto rng = make_rng(cfg.seed, "evaluate/ppl");
      auto sampler = make_path_sampler(model, test_data, PathKind::intra, /*mixed=*/true, source);
      const auto value = metrics::ppl_score(model.generator(), sampler, *backend,
                                            cfg.eval.ppl_epsilon,
                                            std::size_t(cfg.eval.ppl_samples), rng);
      auto rep = base_report("ppl");
      rep.protocol = {{"epsilon", cfg.eval.ppl_epsilon}, {"n_samples", cfg.eval.ppl_samples}};
      rep.results = {{"ppl", value}};
      rep.save(fs::path(cfg.out_dir) / "report_ppl.json");
    } else if (name == "linearity") {
      auto net = feature_net_backed("linearity");
      auto provider = std::make_shared<perceptual::DigitFeatureProvider>(
          net, backend_weights_path(cfg).filename().string());
      perceptual::LpipsBackend lpips(provider, /*squared=*/true);
      perceptual::LpipsBackend lpips_star(provider, /*squared=*/false);
      auto rng = make_rng(cfg.seed, "evaluate/linearity");
      auto sampler = make_path_sampler(model, test_data, PathKind::intra, /*mixed=*/true, source);
      auto table = metrics::linearity_harness(
          model.generator(), sampler,
          {{"ppl", &lpips}, {"lpips", &lpips}, {"lpips_star", &lpips_star}},
          cfg.eval.linearity_counts, std::size_t(cfg.eval.linearity_paths), rng);
      auto rep = base_report("linearity");
      rep.protocol = {{"counts", table.counts}, {"n_paths", cfg.eval.linearity_paths}};
      for (const auto& [row, values] : table.rows) rep.results[row] = values;
      rep.save(fs::path(cfg.out_dir) / "report_linearity.json");
    }
  }
  std::cout << "wrote " << metric_names.size() << " report(s) to " << cfg.out_dir << "\n";
  return 0;
}

torch::Tensor load_image_file(const fs::path& path, std::int64_t image_size,
                              std::int64_t channels) {
  cv::Mat m =
      cv::imread(path.string(), channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
  if (m.empty()) throw DataError("unreadable image: " + path.string());
  const int side = std::min(m.rows, m.cols);
  cv::Rect roi((m.cols - side) / 2, (m.rows - side) / 2, side, side);
  cv::Mat resized;
  cv::resize(m(roi), resized, cv::Size(int(image_size), int(image_size)), 0, 0, cv::INTER_AREA);
  if (channels == 3) cv::cvtColor(resized, resized, cv::COLOR_BGR2RGB);
  auto t = torch::from_blob(resized.data, {image_size, image_size, channels}, torch::kUInt8)
               .permute({2, 0, 1})
               .clone();
  return t.to(torch::kFloat32).div(127.5).sub(1.0);
}

int cmd_interpolate(const CommonArgs& args, const std::string& checkpoint,
                    const std::string& source_image, std::int64_t source_domain,
                    std::int64_t source_index, const std::string& ref_a, const std::string& ref_b,
                    std::int64_t domain_a, std::int64_t domain_b, std::int64_t steps,
                    const std::string& strategy_name) {
  auto cfg = resolve_config(args);
  fs::create_directories(cfg.out_dir);
  auto model = training::load_eval_model(checkpoint);
  auto [train_data, test_data] = config::load_datasets(cfg.data);
  (void)train_data;

  auto rng = make_rng(cfg.seed, "interpolate");
  const auto strategy = strategy_name == "slerp" ? InterpStrategy::slerp : InterpStrategy::lerp;

  torch::Tensor source = source_image.empty()
                             ? test_data.get(DomainLabel{source_domain}, source_index)
                             : load_image_file(source_image, model.config.image_size,
                                               model.config.channels);

  auto endpoint = [&](const std::string& ref, std::int64_t domain) {
    if (!ref.empty()) {
      auto image = load_image_file(ref, model.config.image_size, model.config.channels);
      return model.encoder()(image, DomainLabel{domain});
    }
    return model.mapper()(style::sample_noise(model.config.latent_dim, rng).values,
                          DomainLabel{domain});
  };
  auto s0 = endpoint(ref_a, domain_a);
  auto s1 = endpoint(ref_b, domain_b);

  auto path = style::make_path(s0, s1, steps, strategy);
  std::vector<torch::Tensor> codes;
  for (const auto& c : path.codes) codes.push_back(c.values);
  auto code_batch = torch::stack(codes);
  auto frames = model.generator()(
      source.unsqueeze(0).expand({std::int64_t(codes.size()), -1, -1, -1}), code_batch);

  const auto out_png = fs::path(cfg.out_dir) / "interpolation.png";
  viz::image_row(frames, /*upscale=*/3).save_png(out_png);
  std::cout << "wrote " << frames.size(0) << "-frame grid to " << out_png << "\n";
  return 0;
}

int cmd_analyze_space(const CommonArgs& args, const std::string& checkpoint,
                      std::int64_t n_triplets) {
  auto cfg = resolve_config(args);
  fs::create_directories(cfg.out_dir);
  auto model = training::load_eval_model(checkpoint);
  auto [train_data, test_data] = config::load_datasets(cfg.data);
  (void)train_data;

  if (n_triplets <= 0) n_triplets = cfg.eval.gap_triplets;
  auto rng = make_rng(cfg.seed, "analyze-space");
  auto summary = metrics::gap_distribution(test_data, model.encoder(), n_triplets, rng);

  report::MetricReport rep;
  rep.metric = "gap_distribution";
  rep.seed = cfg.seed;
  rep.backend = "style-space euclidean";
  rep.protocol = {{"n_triplets", n_triplets}};
  rep.results = {{"min", summary.min},
                 {"lower_quartile", summary.lower_quartile},
                 {"median", summary.median},
                 {"upper_quartile", summary.upper_quartile},
                 {"max", summary.max}};

  viz::boxplot({{"gaps", summary.min, summary.lower_quartile, summary.median,
                 summary.upper_quartile, summary.max}},
               "style distance gaps")
      .save_png(fs::path(cfg.out_dir) / "gap_boxplot.png");

  std::vector<std::vector<double>> rows;
  for (const auto& s : summary.samples) rows.push_back({s.gap});
  report::write_csv(fs::path(cfg.out_dir) / "gaps.csv", {"gap"}, rows);

  if (model.config.style_dim == 2) {
    std::vector<viz::ScatterPoint> points;
    torch::NoGradGuard guard;
    for (std::int64_t d = 0; d < test_data.num_domains(); ++d) {
      auto x = test_data.domain_tensor(DomainLabel{d});
      auto dom = torch::full({x.size(0)}, d, torch::kInt64);
      auto codes = model.bundle.encoder_ema->forward(x, dom);
      for (std::int64_t i = 0; i < codes.size(0); ++i) {
        points.push_back({codes[i][0].item<double>(), codes[i][1].item<double>(), d});
      }
    }
    viz::scatter(points, "encoded style codes").save_png(fs::path(cfg.out_dir) /
                                                          "style_scatter.png");
    rep.results["scatter"] = "style_scatter.png";
  } else {
    std::cout << "style dimension is " << model.config.style_dim
              << "; skipping the 2-D scatter plot\n";
    rep.results["scatter"] = "skipped (style_dim != 2)";
  }

  rep.save(fs::path(cfg.out_dir) / "report_gap.json");
  std::cout << "gap median " << summary.median << "; reports in " << cfg.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"style-space smoothing toolkit for multi-domain image translation"};
  app.require_subcommand(1);

  CommonArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a translation model");
  add_common(train_cmd, train_args);

  CommonArgs eval_args;
  std::string eval_checkpoint;
  std::vector<std::string> eval_metrics;
  auto* eval_cmd = app.add_subcommand("evaluate", "run metric protocols on a checkpoint");
  add_common(eval_cmd, eval_args);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--metrics", eval_metrics,
                       "subset of ps,fid,lpips,frd,ppl,linearity (default ps)");

  CommonArgs interp_args;
  std::string interp_checkpoint, interp_source_image, interp_ref_a, interp_ref_b;
  std::int64_t interp_source_domain = 0, interp_source_index = 0;
  std::int64_t interp_domain_a = 0, interp_domain_b = 1, interp_steps = 19;
  std::string interp_strategy = "lerp";
  auto* interp_cmd = app.add_subcommand("interpolate", "emit an interpolation frame grid");
  add_common(interp_cmd, interp_args);
  interp_cmd->add_option("--checkpoint", interp_checkpoint, "checkpoint file")->required();
  interp_cmd->add_option("--source-image", interp_source_image, "source image file");
  interp_cmd->add_option("--source-domain", interp_source_domain, "test-set source domain");
  interp_cmd->add_option("--source-index", interp_source_index, "test-set source index");
  interp_cmd->add_option("--ref-a", interp_ref_a, "reference image for the first endpoint");
  interp_cmd->add_option("--ref-b", interp_ref_b, "reference image for the second endpoint");
  interp_cmd->add_option("--domain-a", interp_domain_a, "domain of the first endpoint");
  interp_cmd->add_option("--domain-b", interp_domain_b, "domain of the second endpoint");
  interp_cmd->add_option("--steps", interp_steps, "interpolation steps T (T+1 frames)");
  interp_cmd->add_option("--strategy", interp_strategy, "lerp or slerp");

  CommonArgs analyze_args;
  std::string analyze_checkpoint;
  std::int64_t analyze_triplets = 0;
  auto* analyze_cmd = app.add_subcommand("analyze-space", "gap distribution and code plots");
  add_common(analyze_cmd, analyze_args);
  analyze_cmd->add_option("--checkpoint", analyze_checkpoint, "checkpoint file")->required();
  analyze_cmd->add_option("--triplets", analyze_triplets, "triplet count (default from config)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_args, eval_checkpoint, eval_metrics);
    if (interp_cmd->parsed()) {
      return cmd_interpolate(interp_args, interp_checkpoint, interp_source_image,
                             interp_source_domain, interp_source_index, interp_ref_a,
                             interp_ref_b, interp_domain_a, interp_domain_b, interp_steps,
                             interp_strategy);
    }
    if (analyze_cmd->parsed()) return cmd_analyze_space(analyze_args, analyze_checkpoint,
                                                        analyze_triplets);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
