#include "smoothstyle/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace smoothstyle::metrics {

namespace {

void check_steps(const std::vector<double>& steps) {
  if (steps.empty()) throw ContractViolation("a path needs at least one step distance");
  for (double d : steps) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw ContractViolation("step distances must be finite and nonnegative");
    }
  }
}

bool all_zero(const std::vector<double>& steps) {
  return std::all_of(steps.begin(), steps.end(), [](double d) { return d == 0.0; });
}

double harmonic_mean(double a, double b) {
  const double s = a + b;
  return s > 0.0 ? 2.0 * a * b / s : 0.0;
}

torch::Tensor stack_codes(const std::vector<style::StyleCode>& codes) {
  std::vector<torch::Tensor> vals;
  vals.reserve(codes.size());
  for (const auto& c : codes) vals.push_back(c.values);
  return torch::stack(vals);
}

}  // namespace

double alignment_score(double end_to_end, const std::vector<double>& step_distances) {
  check_steps(step_distances);
  const double total = std::accumulate(step_distances.begin(), step_distances.end(), 0.0);
  if (total == 0.0) throw DegeneratePathError("all step distances are zero");
  return end_to_end / total;
}

double uniformity_score(const std::vector<double>& step_distances) {
  check_steps(step_distances);
  const auto T = step_distances.size();
  const double mean =
      std::accumulate(step_distances.begin(), step_distances.end(), 0.0) / double(T);
  if (mean == 0.0) throw DegeneratePathError("step distances have zero mean");
  double abs_diff_sum = 0.0;
  for (double a : step_distances) {
    for (double b : step_distances) abs_diff_sum += std::abs(a - b);
  }
  return 1.0 - abs_diff_sum / (2.0 * double(T) * double(T) * mean);
}

PathScore score_path(const style::InterpolationPath& path) {
  PathScore score;
  score.T = static_cast<std::int64_t>(path.step_distances.size());
  if (path.step_distances.empty() || all_zero(path.step_distances)) {
    score.degenerate = true;
    return score;
  }
  score.alig = alignment_score(path.end_to_end, path.step_distances);
  score.uni = uniformity_score(path.step_distances);
  score.ps = harmonic_mean(score.alig, score.uni);
  return score;
}

PathScore ps_score(const std::vector<style::InterpolationPath>& paths,
                   std::size_t* degenerate_count) {
  if (paths.empty()) throw ContractViolation("ps_score needs at least one path");
  double alig_sum = 0.0, uni_sum = 0.0;
  std::size_t used = 0, degenerate = 0;
  std::int64_t T = 0;
  for (const auto& path : paths) {
    auto s = score_path(path);
    if (s.degenerate) {
      ++degenerate;
      continue;
    }
    alig_sum += s.alig;
    uni_sum += s.uni;
    T = s.T;
    ++used;
  }
  if (degenerate_count) *degenerate_count = degenerate;
  if (used == 0) {
    // A collapsed generator makes every frame identical; calling that
    // perfectly smooth would defeat the point of the score.
    throw DegenerateGeneratorError("all " + std::to_string(paths.size()) +
                                   " paths are degenerate (zero perceptual motion)");
  }
  PathScore out;
  out.alig = alig_sum / double(used);
  out.uni = uni_sum / double(used);
  out.ps = harmonic_mean(out.alig, out.uni);
  out.T = T;
  return out;
}

void fill_path_distances(style::InterpolationPath& path, const torch::Tensor& source,
                         const GeneratorFn& generator,
                         const perceptual::DistanceBackend& backend) {
  torch::NoGradGuard guard;
  const auto n = static_cast<std::int64_t>(path.codes.size());
  if (n < 2) throw ContractViolation("path needs at least two codes");
  auto codes = stack_codes(path.codes);
  auto sources = source.unsqueeze(0).expand({n, -1, -1, -1});
  auto frames = generator(sources, codes);

  auto steps = backend.distance(frames.slice(0, 0, n - 1), frames.slice(0, 1, n));
  path.step_distances.resize(n - 1);
  auto acc = steps.to(torch::kFloat64);
  for (std::int64_t i = 0; i < n - 1; ++i) path.step_distances[i] = acc[i].item<double>();
  path.end_to_end = backend.distance(frames[0], frames[n - 1]).item<double>();
}

PsProtocolResult ps_protocol(const GeneratorFn& generator, const PathSampler& sampler,
                             const perceptual::DistanceBackend& backend, std::size_t n_paths,
                             std::int64_t steps, InterpStrategy strategy, Rng& rng) {
  if (n_paths == 0) throw ContractViolation("ps_protocol needs at least one path");
  std::vector<style::InterpolationPath> paths;
  paths.reserve(n_paths);
  for (std::size_t k = 0; k < n_paths; ++k) {
    auto sample = sampler(rng);
    auto path = style::make_path(sample.s0, sample.s1, steps, strategy);
    fill_path_distances(path, sample.source, generator, backend);
    paths.push_back(std::move(path));
  }
  PsProtocolResult result;
  result.total_paths = n_paths;
  for (const auto& p : paths) result.per_path.push_back(score_path(p));
  result.score = ps_score(paths, &result.degenerate_paths);
  return result;
}

double ppl_score(const GeneratorFn& generator, const PathSampler& sampler,
                 const perceptual::DistanceBackend& backend, double epsilon,
                 std::size_t n_samples, Rng& rng) {
  if (!(epsilon > 0.0)) throw ContractViolation("ppl epsilon must be positive");
  torch::NoGradGuard guard;
  std::uniform_real_distribution<double> uniform(0.0, 1.0 - epsilon);
  double acc = 0.0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    auto sample = sampler(rng);
    const double t = uniform(rng);
    auto a = style::lerp(sample.s0, sample.s1, t);
    auto b = style::lerp(sample.s0, sample.s1, t + epsilon);
    auto codes = torch::stack({a.values, b.values});
    auto sources = sample.source.unsqueeze(0).expand({2, -1, -1, -1});
    auto frames = generator(sources, codes);
    const double d = backend.distance(frames[0], frames[1]).item<double>();
    const double sq = backend.squared_form() ? d : d * d;
    acc += sq / (epsilon * epsilon);
  }
  return acc / double(n_samples);
}

namespace {

std::pair<torch::Tensor, torch::Tensor> moments(const torch::Tensor& features) {
  auto f = features.to(torch::kFloat64);
  auto mu = f.mean(0);
  auto centered = f - mu;
  auto sigma = centered.t().matmul(centered) / double(f.size(0) - 1);
  return {mu, sigma};
}

// Symmetric PSD square root via eigendecomposition with eigenvalue clipping.
torch::Tensor sqrtm_psd(const torch::Tensor& m) {
  auto sym = (m + m.t()) / 2.0;
  auto [vals, vecs] = torch::linalg_eigh(sym);
  auto clipped = torch::clamp_min(vals, 0.0).sqrt();
  return vecs.matmul(torch::diag(clipped)).matmul(vecs.t());
}

}  // namespace

double frechet_distance(const torch::Tensor& mu1, const torch::Tensor& sigma1,
                        const torch::Tensor& mu2, const torch::Tensor& sigma2) {
  auto diff = (mu1 - mu2).to(torch::kFloat64);
  auto b = sqrtm_psd(sigma1.to(torch::kFloat64));
  auto inner = b.matmul(sigma2.to(torch::kFloat64)).matmul(b);
  auto [vals, vecs] = torch::linalg_eigh((inner + inner.t()) / 2.0);
  (void)vecs;
  const double tr_sqrt = torch::clamp_min(vals, 0.0).sqrt().sum().item<double>();
  const double value = diff.pow(2).sum().item<double>() + sigma1.to(torch::kFloat64).trace().item<double>() +
                       sigma2.to(torch::kFloat64).trace().item<double>() - 2.0 * tr_sqrt;
  return std::max(0.0, value);
}

double fid_from_features(const torch::Tensor& real_features, const torch::Tensor& gen_features) {
  if (real_features.dim() != 2 || gen_features.dim() != 2 || real_features.size(0) < 2 ||
      gen_features.size(0) < 2) {
    throw ContractViolation("FID needs at least 2 feature rows per side");
  }
  auto [mu_r, sigma_r] = moments(real_features);
  auto [mu_g, sigma_g] = moments(gen_features);
  return frechet_distance(mu_r, sigma_r, mu_g, sigma_g);
}

namespace {

torch::Tensor features_chunked(const FeatureFn& features, const torch::Tensor& images,
                               std::int64_t chunk = 512) {
  std::vector<torch::Tensor> out;
  for (std::int64_t ofs = 0; ofs < images.size(0); ofs += chunk) {
    out.push_back(features(images.slice(0, ofs, std::min(ofs + chunk, images.size(0)))));
  }
  return torch::cat(out).to(torch::kFloat64);
}

}  // namespace

FidResult fid_over_interpolations(const GeneratorFn& generator,
                                  const data::DomainDataset& test_data, DomainLabel source,
                                  DomainLabel target, const style::CodeSampler& styles,
                                  CodeSource endpoint_source, const FeatureFn& features,
                                  std::int64_t n_images, std::int64_t n_points, Rng& rng) {
  if (n_points < 2) throw ContractViolation("FID interpolation needs at least 2 points");
  check_domain(source, test_data.num_domains());
  check_domain(target, test_data.num_domains());

  torch::NoGradGuard guard;
  std::vector<torch::Tensor> gen_feats;
  for (std::int64_t k = 0; k < n_images; ++k) {
    const auto idx = test_data.sample_index(source, rng);
    auto x = test_data.get(source, idx);
    auto s1 = styles.sample(source, endpoint_source, rng);
    auto s2 = styles.sample(target, endpoint_source, rng);
    std::vector<style::StyleCode> codes;
    codes.reserve(n_points);
    for (std::int64_t p = 0; p < n_points; ++p) {
      codes.push_back(style::lerp(s1, s2, double(p) / double(n_points - 1)));
    }
    auto code_batch = stack_codes(codes);
    auto sources = x.unsqueeze(0).expand({n_points, -1, -1, -1});
    gen_feats.push_back(features(generator(sources, code_batch)).to(torch::kFloat64));
  }

  // Real reference: the interpolation sweeps from the source domain's
  // appearance to the target's, so both test pools contribute.
  auto real = torch::cat({features_chunked(features, test_data.domain_tensor(source)),
                          features_chunked(features, test_data.domain_tensor(target))});
  auto gen = torch::cat(gen_feats);

  FidResult result;
  result.fid = fid_from_features(real, gen);
  result.n_generated = gen.size(0);
  result.n_real = real.size(0);
  return result;
}

DiversityResult lpips_diversity(const GeneratorFn& generator, const data::DomainDataset& data,
                                DomainLabel target, const style::CodeSampler& styles,
                                const perceptual::DistanceBackend& backend,
                                std::int64_t n_images, std::int64_t n_styles, Rng& rng) {
  if (n_styles < 2) throw ContractViolation("diversity needs at least 2 styles per image");
  check_domain(target, data.num_domains());
  torch::NoGradGuard guard;

  std::vector<std::int64_t> ia, ib;
  for (std::int64_t i = 0; i < n_styles; ++i) {
    for (std::int64_t j = i + 1; j < n_styles; ++j) {
      ia.push_back(i);
      ib.push_back(j);
    }
  }
  auto idx_a = torch::tensor(ia, torch::kInt64);
  auto idx_b = torch::tensor(ib, torch::kInt64);

  double total = 0.0;
  for (std::int64_t k = 0; k < n_images; ++k) {
    auto [dom, idx] = data.sample_any(rng);
    auto x = data.get(dom, idx);
    std::vector<torch::Tensor> code_list;
    for (std::int64_t s = 0; s < n_styles; ++s) {
      code_list.push_back(styles.sample(target, CodeSource::mapper, rng).values);
    }
    auto codes = torch::stack(code_list);
    auto sources = x.unsqueeze(0).expand({n_styles, -1, -1, -1});
    auto frames = generator(sources, codes);
    auto d = backend.distance(frames.index_select(0, idx_a), frames.index_select(0, idx_b));
    total += d.to(torch::kFloat64).mean().item<double>();
  }
  return {total / double(n_images), static_cast<std::int64_t>(ia.size())};
}

double frd_protocol(const GeneratorFn& generator, const data::DomainDataset& data,
                    const style::CodeSampler& styles,
                    const perceptual::FaceEmbeddingBackend& backend, std::int64_t n_samples,
                    Rng& rng) {
  if (!backend.loaded()) throw ConfigurationError("FRD needs a loaded embedding backend");
  torch::NoGradGuard guard;
  double total = 0.0;
  const std::int64_t chunk = 64;
  std::int64_t done = 0;
  while (done < n_samples) {
    const auto n = std::min(chunk, n_samples - done);
    std::vector<torch::Tensor> xs, codes;
    for (std::int64_t i = 0; i < n; ++i) {
      auto [dom, idx] = data.sample_any(rng);
      xs.push_back(data.get(dom, idx));
      const auto target = DomainLabel{rand_index(rng, data.num_domains())};
      codes.push_back(styles.sample(target, CodeSource::mapper, rng).values);
    }
    auto x = torch::stack(xs);
    auto s = torch::stack(codes);
    auto translated = generator(x, s);
    total += perceptual::face_distance(x, translated, backend).item<double>() * double(n);
    done += n;
  }
  return total / double(n_samples);
}

GapSummary gap_distribution(const data::DomainDataset& data, const style::EncoderFn& encoder,
                            std::int64_t n_triplets, Rng& rng) {
  if (n_triplets < 1) throw ContractViolation("need at least one triplet");
  torch::NoGradGuard guard;
  GapSummary summary;
  summary.samples.reserve(n_triplets);
  std::vector<double> gaps;
  gaps.reserve(n_triplets);
  for (std::int64_t k = 0; k < n_triplets; ++k) {
    auto t = style::sample_triplet(data, encoder, rng);
    const double d_n = (t.anchor.values - t.negative.values).to(torch::kFloat64).norm().item<double>();
    const double d_p = (t.anchor.values - t.positive.values).to(torch::kFloat64).norm().item<double>();
    const double gap = d_n - d_p;
    summary.samples.push_back({gap});
    gaps.push_back(gap);
  }
  summary.min = quantile(gaps, 0.0);
  summary.lower_quartile = quantile(gaps, 0.25);
  summary.median = quantile(gaps, 0.5);
  summary.upper_quartile = quantile(gaps, 0.75);
  summary.max = quantile(gaps, 1.0);
  return summary;
}

LinearityTable linearity_harness(
    const GeneratorFn& generator, const PathSampler& sampler,
    const std::vector<std::pair<std::string, const perceptual::DistanceBackend*>>& backends,
    const std::vector<std::int64_t>& counts, std::size_t n_paths, Rng& rng) {
  if (counts.empty() || n_paths == 0) {
    throw ContractViolation("linearity harness needs counts and paths");
  }
  torch::NoGradGuard guard;

  // Endpoint pairs are drawn once and reused for every interpolation count.
  std::vector<PathSample> samples;
  samples.reserve(n_paths);
  for (std::size_t k = 0; k < n_paths; ++k) samples.push_back(sampler(rng));

  LinearityTable table;
  table.counts = counts;
  for (const auto& [name, backend] : backends) {
    table.rows[name] = std::vector<double>(counts.size(), 0.0);
  }

  for (std::size_t ci = 0; ci < counts.size(); ++ci) {
    const auto n_points = counts[ci];
    if (n_points < 2) throw ContractViolation("interpolation count must be >= 2");
    const double eps = 1.0 / double(n_points - 1);
    for (const auto& sample : samples) {
      std::vector<style::StyleCode> codes;
      codes.reserve(n_points);
      for (std::int64_t p = 0; p < n_points; ++p) {
        codes.push_back(style::lerp(sample.s0, sample.s1, double(p) / double(n_points - 1)));
      }
      auto code_batch = stack_codes(codes);
      auto sources = sample.source.unsqueeze(0).expand({n_points, -1, -1, -1});
      auto frames = generator(sources, code_batch);
      for (const auto& [name, backend] : backends) {
        auto d = backend->distance(frames.slice(0, 0, n_points - 1), frames.slice(0, 1, n_points))
                     .to(torch::kFloat64);
        double path_sum;
        if (name == "ppl") {
          auto sq = backend->squared_form() ? d : d.pow(2);
          path_sum = (sq / (eps * eps)).sum().item<double>();
        } else {
          path_sum = d.sum().item<double>();
        }
        table.rows[name][ci] += path_sum / double(n_paths);
      }
    }
  }
  return table;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ContractViolation("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = q * double(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return values[lo] + (h - double(lo)) * (values[hi] - values[lo]);
}

}  // namespace smoothstyle::metrics
