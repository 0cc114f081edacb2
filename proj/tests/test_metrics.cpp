#include <cmath>
#include <numeric>

#include "smoothstyle/metrics.hpp"

// doctest last: its short assertion macros must win over torch's logging macros
#include <doctest.h>

using namespace smoothstyle;

namespace {

// Brute-force Gini complement, independent of the implementation.
double gini_oracle(const std::vector<double>& d) {
  const auto T = d.size();
  const double mu = std::accumulate(d.begin(), d.end(), 0.0) / double(T);
  double sum = 0.0;
  for (double a : d) {
    for (double b : d) sum += std::abs(a - b);
  }
  return 1.0 - sum / (2.0 * double(T) * double(T) * mu);
}

style::InterpolationPath synthetic_path(std::vector<double> steps, double end) {
  style::InterpolationPath p;
  const auto T = std::int64_t(steps.size());
  for (std::int64_t i = 0; i <= T; ++i) {
    p.codes.push_back(style::make_code({double(i), 0.0}, DomainLabel{0}));
  }
  p.step_distances = std::move(steps);
  p.end_to_end = end;
  return p;
}

metrics::GeneratorFn identity_generator() {
  return [](const torch::Tensor& x, const torch::Tensor&) { return x; };
}

// Image is the broadcast style code: pixel-space distances mirror code-space
// distances exactly, so paths are perceptually straight lines.
metrics::GeneratorFn linear_generator() {
  return [](const torch::Tensor& x, const torch::Tensor& s) {
    auto canvas = torch::zeros({s.size(0), 1, x.size(2), x.size(3)}, torch::kFloat64);
    return canvas + s.mean(1).view({-1, 1, 1, 1});
  };
}

// Raw single-layer provider: the image itself is the feature map.
class RawProvider : public perceptual::FeatureProvider {
 public:
  perceptual::FeatureStack features(const torch::Tensor& images) const override {
    perceptual::FeatureStack s;
    s.layers.push_back((images.dim() == 3 ? images.unsqueeze(0) : images).to(torch::kFloat64));
    s.weights = {1.0};
    return s;
  }
  std::string identity() const override { return "raw"; }
};

}  // namespace

TEST_CASE("uniformity score oracle values") {
  CHECK(metrics::uniformity_score({1, 1, 1, 1}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(metrics::uniformity_score({0, 0, 0, 1}) ==
        doctest::Approx(gini_oracle({0, 0, 0, 1})).epsilon(1e-12));
  CHECK(metrics::uniformity_score({0, 0, 0, 1}) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(metrics::uniformity_score({1, 2, 3}) ==
        doctest::Approx(gini_oracle({1, 2, 3})).epsilon(1e-12));
  CHECK(metrics::uniformity_score({1, 2, 3}) == doctest::Approx(7.0 / 9.0).epsilon(1e-12));
  CHECK_THROWS_AS((void)metrics::uniformity_score({0, 0, 0}), DegeneratePathError);
  CHECK_THROWS_AS((void)metrics::uniformity_score({}), ContractViolation);
  CHECK_THROWS_AS((void)metrics::uniformity_score({1.0, -0.5}), ContractViolation);
}

TEST_CASE("uniformity score is scale and permutation invariant") {
  auto rng = make_rng(43, "uni");
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> steps(6);
    for (auto& s : steps) s = u(rng);
    const double base = metrics::uniformity_score(steps);
    const double c = u(rng);
    std::vector<double> scaled = steps;
    for (auto& s : scaled) s *= c;
    CHECK(metrics::uniformity_score(scaled) == doctest::Approx(base).epsilon(1e-12));
    std::shuffle(steps.begin(), steps.end(), rng);
    CHECK(metrics::uniformity_score(steps) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("alignment score oracle values") {
  CHECK(metrics::alignment_score(4.0, {1, 1, 1, 1}) == doctest::Approx(1.0));
  CHECK(metrics::alignment_score(2.0, {1, 1, 1, 1}) == doctest::Approx(0.5));
  CHECK_THROWS_AS((void)metrics::alignment_score(1.0, {0, 0}), DegeneratePathError);
}

TEST_CASE("alignment never exceeds one under metric backends") {
  perceptual::PixelL2Backend pixel;
  perceptual::RandomProjectionBackend proj(11, 24);
  auto rng = make_rng(47, "alig");
  for (int trial = 0; trial < 500; ++trial) {
    // five random frames = one four-step path
    auto frames = normal_tensor({5, 1, 8, 8}, rng, torch::kFloat64);
    for (const perceptual::DistanceBackend* backend :
         std::initializer_list<const perceptual::DistanceBackend*>{&pixel, &proj}) {
      std::vector<double> steps;
      for (int i = 0; i < 4; ++i) steps.push_back((*backend)(frames[i], frames[i + 1]));
      const double end = (*backend)(frames[0], frames[4]);
      CHECK(metrics::alignment_score(end, steps) <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("ps harmonic mean arithmetic") {
  auto p1 = synthetic_path({1, 1, 1, 1}, 4.0);  // alig 1, uni 1
  auto s1 = metrics::ps_score({p1});
  CHECK(s1.ps == doctest::Approx(1.0).epsilon(1e-12));

  auto p2 = synthetic_path({0, 0, 0, 1}, 1.0);  // alig 1, uni 0.25
  auto s2 = metrics::ps_score({p2});
  CHECK(s2.alig == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s2.uni == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(s2.ps == doctest::Approx(0.4).epsilon(1e-12));

  // steps {0, 1} have a Gini complement of exactly 0.5; end 0.5 makes the
  // alignment 0.5 too, and the harmonic mean of equals is the value itself
  auto p3 = synthetic_path({0, 1}, 0.5);
  auto s3 = metrics::ps_score({p3});
  CHECK(s3.alig == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s3.uni == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s3.ps == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ps_score excludes degenerate paths and rejects full collapse") {
  auto good = synthetic_path({1, 1}, 2.0);
  auto dead = synthetic_path({0, 0}, 0.0);

  std::size_t degenerate = 0;
  auto score = metrics::ps_score({good, dead}, &degenerate);
  CHECK(degenerate == 1);
  CHECK(score.alig == doctest::Approx(1.0));

  CHECK_THROWS_AS((void)metrics::ps_score({dead, dead}), DegenerateGeneratorError);
}

TEST_CASE("ps_score is monotone in alignment for fixed uniformity") {
  double prev = 0.0;
  for (double alig : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const double uni = 0.6;
    const double ps = 2.0 * alig * uni / (alig + uni);
    CHECK(ps > prev);
    prev = ps;
  }
}

TEST_CASE("fill_path_distances matches manual backend evaluation") {
  perceptual::PixelL2Backend backend;
  auto s0 = style::make_code({0.0, 0.0}, DomainLabel{0});
  auto s1 = style::make_code({2.0, 2.0}, DomainLabel{1});
  auto path = style::make_path(s0, s1, 4);
  auto source = torch::zeros({1, 6, 6}, torch::kFloat64);

  metrics::fill_path_distances(path, source, linear_generator(), backend);
  REQUIRE(path.step_distances.size() == 4);
  // the linear generator turns equal code steps into equal pixel steps
  for (double d : path.step_distances) {
    CHECK(d == doctest::Approx(path.step_distances[0]).epsilon(1e-9));
  }
  CHECK(path.end_to_end ==
        doctest::Approx(std::accumulate(path.step_distances.begin(), path.step_distances.end(),
                                        0.0))
            .epsilon(1e-9));
  auto score = metrics::score_path(path);
  CHECK(score.alig == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(score.uni == doctest::Approx(1.0).epsilon(1e-9));
}

namespace {

metrics::PathSampler gaussian_sampler(std::int64_t dim = 2) {
  return [dim](Rng& rng) {
    metrics::PathSample s;
    s.source = normal_tensor({1, 6, 6}, rng, torch::kFloat64);
    s.s0 = style::StyleCode{normal_tensor({dim}, rng, torch::kFloat64), DomainLabel{0},
                            CodeSource::mapper};
    s.s1 = style::StyleCode{normal_tensor({dim}, rng, torch::kFloat64), DomainLabel{1},
                            CodeSource::mapper};
    return s;
  };
}

}  // namespace

TEST_CASE("ps protocol is deterministic and collapse-aware") {
  perceptual::PixelL2Backend backend;
  auto rng1 = make_rng(53, "ps-proto");
  auto rng2 = make_rng(53, "ps-proto");
  auto r1 = metrics::ps_protocol(linear_generator(), gaussian_sampler(), backend, 20, 5,
                                 InterpStrategy::lerp, rng1);
  auto r2 = metrics::ps_protocol(linear_generator(), gaussian_sampler(), backend, 20, 5,
                                 InterpStrategy::lerp, rng2);
  CHECK(r1.score.ps == r2.score.ps);
  CHECK(r1.score.alig == r2.score.alig);

  metrics::GeneratorFn collapsed = [](const torch::Tensor& x, const torch::Tensor& s) {
    return torch::zeros({s.size(0), 1, x.size(2), x.size(3)}, torch::kFloat64);
  };
  auto rng3 = make_rng(53, "ps-proto");
  CHECK_THROWS_AS((void)metrics::ps_protocol(collapsed, gaussian_sampler(), backend, 5, 5,
                                             InterpStrategy::lerp, rng3),
                  DegenerateGeneratorError);
}

TEST_CASE("ppl is zero for a collapsed generator and seeded otherwise") {
  perceptual::PixelL2Backend backend;
  metrics::GeneratorFn collapsed = [](const torch::Tensor& x, const torch::Tensor& s) {
    return torch::zeros({s.size(0), 1, x.size(2), x.size(3)}, torch::kFloat64);
  };
  auto rng = make_rng(59, "ppl");
  CHECK(metrics::ppl_score(collapsed, gaussian_sampler(), backend, 1e-2, 30, rng) == 0.0);

  auto rng1 = make_rng(61, "ppl");
  auto rng2 = make_rng(61, "ppl");
  const double a =
      metrics::ppl_score(linear_generator(), gaussian_sampler(), backend, 1e-2, 30, rng1);
  const double b =
      metrics::ppl_score(linear_generator(), gaussian_sampler(), backend, 1e-2, 30, rng2);
  CHECK(a == b);
  CHECK(a > 0.0);
}

TEST_CASE("frechet distance oracles") {
  auto rng = make_rng(67, "fid");
  auto x = normal_tensor({300, 8}, rng, torch::kFloat64);

  SUBCASE("identical feature sets give zero") {
    CHECK(metrics::fid_from_features(x, x) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(metrics::fid_from_features(x, x) < 1e-6);
  }
  SUBCASE("pure mean offset gives its squared norm") {
    auto v = normal_tensor({8}, rng, torch::kFloat64);
    auto y = x + v;  // identical sample covariance by construction
    const double expected = v.pow(2).sum().item<double>();
    CHECK(metrics::fid_from_features(x, y) == doctest::Approx(expected).epsilon(1e-6));
    CHECK(std::abs(metrics::fid_from_features(x, y) - expected) < 1e-4);
  }
  SUBCASE("fewer than two rows is a contract violation") {
    CHECK_THROWS_AS((void)metrics::fid_from_features(x.slice(0, 0, 1), x), ContractViolation);
  }
}

TEST_CASE("diversity protocol counts pairs and spots collapse") {
  std::vector<torch::Tensor> domains;
  auto rng0 = make_rng(71, "divdata");
  for (int d = 0; d < 2; ++d) {
    domains.push_back((uniform_tensor({6, 1, 6, 6}, rng0, 0.0, 255.0)).to(torch::kUInt8));
  }
  data::DomainDataset dataset(std::move(domains), 6, 1);

  style::CodeSampler styles;
  styles.dataset = &dataset;
  styles.d_z = 4;
  styles.mapper = [](const torch::Tensor& z, DomainLabel d) {
    return style::StyleCode{z.slice(0, 0, 2).to(torch::kFloat64), d, CodeSource::mapper};
  };

  perceptual::PixelL2Backend backend;
  metrics::GeneratorFn ignores_style = [](const torch::Tensor& x, const torch::Tensor& s) {
    return torch::zeros({s.size(0), 1, x.size(2), x.size(3)}, torch::kFloat64) + x.sum();
  };
  auto rng = make_rng(73, "div");
  auto res = metrics::lpips_diversity(ignores_style, dataset, DomainLabel{1}, styles, backend, 3,
                                      10, rng);
  CHECK(res.pairs_per_image == 45);
  CHECK(res.mean_distance == 0.0);

  auto rng2 = make_rng(74, "div");
  auto res2 = metrics::lpips_diversity(linear_generator(), dataset, DomainLabel{1}, styles,
                                       backend, 3, 4, rng2);
  CHECK(res2.pairs_per_image == 6);
  CHECK(res2.mean_distance > 0.0);
}

TEST_CASE("frd protocol is zero for the identity generator") {
  std::vector<torch::Tensor> domains;
  auto rng0 = make_rng(79, "frddata");
  for (int d = 0; d < 2; ++d) {
    domains.push_back((uniform_tensor({5, 1, 4, 4}, rng0, 0.0, 255.0)).to(torch::kUInt8));
  }
  data::DomainDataset dataset(std::move(domains), 4, 1);

  style::CodeSampler styles;
  styles.dataset = &dataset;
  styles.d_z = 4;
  styles.mapper = [](const torch::Tensor& z, DomainLabel d) {
    return style::StyleCode{z.slice(0, 0, 2), d, CodeSource::mapper};
  };
  perceptual::FaceEmbeddingBackend embed;
  embed.dim = 16;
  embed.identity = "flat";
  embed.embed = [](const torch::Tensor& x) {
    return (x.dim() == 3 ? x.unsqueeze(0) : x).flatten(1).to(torch::kFloat64);
  };

  auto rng = make_rng(83, "frd");
  CHECK(metrics::frd_protocol(identity_generator(), dataset, styles, embed, 20, rng) == 0.0);

  perceptual::FaceEmbeddingBackend unloaded;
  auto rng2 = make_rng(84, "frd");
  CHECK_THROWS_AS(
      (void)metrics::frd_protocol(identity_generator(), dataset, styles, unloaded, 5, rng2),
      ConfigurationError);
}

TEST_CASE("gap distribution: constant encoder and cluster oracle") {
  // Dataset whose images losslessly index into a code table.
  const std::int64_t per_domain = 600;
  std::vector<torch::Tensor> domains;
  for (int d = 0; d < 2; ++d) {
    auto imgs = torch::zeros({per_domain, 1, 2, 2}, torch::kUInt8);
    for (std::int64_t i = 0; i < per_domain; ++i) {
      imgs[i][0][0][0] = std::uint8_t(i / 256);
      imgs[i][0][0][1] = std::uint8_t(i % 256);
      imgs[i][0][1][0] = std::uint8_t(d);
    }
    domains.push_back(imgs);
  }
  data::DomainDataset dataset(std::move(domains), 2, 1);

  SUBCASE("an encoder collapsing everything gives all-zero gaps") {
    style::EncoderFn constant = [](const torch::Tensor&, DomainLabel d) {
      return style::make_code({1.0, 1.0}, d);
    };
    auto rng = make_rng(89, "gap0");
    auto summary = metrics::gap_distribution(dataset, constant, 200, rng);
    CHECK(summary.median == 0.0);
    CHECK(summary.max == 0.0);
    CHECK(summary.min == 0.0);
  }

  SUBCASE("two unit-variance clusters, centers 10 apart") {
    // Code table: domain 0 around the origin, domain 1 around (10, 0).
    auto table_rng = make_rng(97, "gap-table");
    auto codes0 = normal_tensor({per_domain, 2}, table_rng, torch::kFloat64);
    auto codes1 = normal_tensor({per_domain, 2}, table_rng, torch::kFloat64) +
                  torch::tensor({10.0, 0.0}, torch::kFloat64);

    style::EncoderFn table_encoder = [&](const torch::Tensor& image, DomainLabel d) {
      auto u8 = ((image + 1.0) * 127.5).round().to(torch::kInt64);
      const auto idx = u8[0][0][0].item<std::int64_t>() * 256 + u8[0][0][1].item<std::int64_t>();
      auto values = d.index == 0 ? codes0[idx] : codes1[idx];
      return style::StyleCode{values, d, CodeSource::encoder};
    };

    auto rng = make_rng(101, "gap");
    auto summary = metrics::gap_distribution(dataset, table_encoder, 4000, rng);

    // Independent Monte-Carlo oracle on the same generating process.
    auto oracle_rng = make_rng(103, "gap-oracle");
    std::vector<double> oracle_gaps;
    for (int k = 0; k < 40000; ++k) {
      auto a = normal_tensor({2}, oracle_rng, torch::kFloat64);
      auto p = normal_tensor({2}, oracle_rng, torch::kFloat64);
      auto n = normal_tensor({2}, oracle_rng, torch::kFloat64) +
               torch::tensor({10.0, 0.0}, torch::kFloat64);
      oracle_gaps.push_back((a - n).norm().item<double>() - (a - p).norm().item<double>());
    }
    const double oracle_median = metrics::quantile(oracle_gaps, 0.5);

    CHECK(summary.median == doctest::Approx(oracle_median).epsilon(0.05));
    CHECK(summary.lower_quartile < summary.median);
    CHECK(summary.median < summary.upper_quartile);
    CHECK(std::int64_t(summary.samples.size()) == 4000);
  }
}

TEST_CASE("linearity harness trends with a straight-line generator") {
  auto raw = std::make_shared<RawProvider>();
  perceptual::LpipsBackend squared(raw, /*squared=*/true);
  perceptual::LpipsBackend star(raw, /*squared=*/false);

  auto rng = make_rng(107, "linearity");
  auto table = metrics::linearity_harness(
      linear_generator(), gaussian_sampler(),
      {{"ppl", &squared}, {"lpips", &squared}, {"lpips_star", &star}}, {10, 20, 50, 100}, 10,
      rng);

  const auto& sq_row = table.rows.at("lpips");
  const auto& star_row = table.rows.at("lpips_star");
  const auto& ppl_row = table.rows.at("ppl");
  for (std::size_t i = 0; i + 1 < table.counts.size(); ++i) {
    CHECK(sq_row[i] > sq_row[i + 1]);      // squared sums shrink with finer steps
    CHECK(ppl_row[i] < ppl_row[i + 1]);    // epsilon-normalized sums grow
    // along a straight segment a metric is exactly additive
    CHECK(star_row[i] == doctest::Approx(star_row[i + 1]).epsilon(1e-9));
  }
}

TEST_CASE("quantile interpolates order statistics") {
  std::vector<double> v = {4.0, 1.0, 3.0, 2.0};
  CHECK(metrics::quantile(v, 0.0) == 1.0);
  CHECK(metrics::quantile(v, 1.0) == 4.0);
  CHECK(metrics::quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(metrics::quantile(v, 0.25) == doctest::Approx(1.75));
}
