#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "smoothstyle/perceptual.hpp"
#include "smoothstyle/stylespace.hpp"

namespace smoothstyle::metrics {

// Alignment / uniformity / their harmonic mean for one path or an average
// over a path collection.
struct PathScore {
  double alig = 0.0;
  double uni = 0.0;
  double ps = 0.0;
  std::int64_t T = 0;
  bool degenerate = false;
};

// ||s_a - s_n|| - ||s_a - s_p|| for one sampled triplet.
struct GapSample {
  double gap = 0.0;
};

struct GapSummary {
  double min = 0.0, lower_quartile = 0.0, median = 0.0, upper_quartile = 0.0, max = 0.0;
  std::vector<GapSample> samples;
};

// end-to-end distance over the summed consecutive step distances of one
// path. 1 means the generated frames lie on a perceptual straight line.
double alignment_score(double end_to_end, const std::vector<double>& step_distances);

// 1 minus the Gini inequality coefficient of the consecutive step
// distances; 1 for perfectly even steps, 1/T floor for a single abrupt one.
double uniformity_score(const std::vector<double>& step_distances);

// Per-path score from already-filled distances.
PathScore score_path(const style::InterpolationPath& path);

// Averages alig and uni over the non-degenerate paths, then takes the
// harmonic mean. Degenerate paths are excluded and counted; if every path is
// degenerate this throws instead of reporting a perfect score.
PathScore ps_score(const std::vector<style::InterpolationPath>& paths,
                   std::size_t* degenerate_count = nullptr);

// Batched image generator: ([N,C,H,W] sources, [N,d_s] styles) -> images.
using GeneratorFn = std::function<torch::Tensor(const torch::Tensor&, const torch::Tensor&)>;

// Pooled feature extractor for FID: [N,C,H,W] -> [N,F].
using FeatureFn = std::function<torch::Tensor(const torch::Tensor&)>;

// One evaluation draw: a source image plus two endpoint codes.
struct PathSample {
  torch::Tensor source;  // [C, H, W]
  style::StyleCode s0;
  style::StyleCode s1;
};
using PathSampler = std::function<PathSample(Rng&)>;

// Generates the frame sequence of a path and fills step_distances and
// end_to_end using the backend.
void fill_path_distances(style::InterpolationPath& path, const torch::Tensor& source,
                         const GeneratorFn& generator,
                         const perceptual::DistanceBackend& backend);

struct PsProtocolResult {
  PathScore score;
  std::size_t degenerate_paths = 0;
  std::size_t total_paths = 0;
  std::vector<PathScore> per_path;
};

// Full PS protocol: sample n_paths paths, generate, measure, aggregate.
PsProtocolResult ps_protocol(const GeneratorFn& generator, const PathSampler& sampler,
                             const perceptual::DistanceBackend& backend, std::size_t n_paths,
                             std::int64_t steps, InterpStrategy strategy, Rng& rng);

// Perceptual path length: squared perceptual distance of an epsilon step
// along a lerp, normalized by epsilon^2, averaged over draws. Minimized by a
// collapsed generator, which is exactly the loophole PS closes.
double ppl_score(const GeneratorFn& generator, const PathSampler& sampler,
                 const perceptual::DistanceBackend& backend, double epsilon,
                 std::size_t n_samples, Rng& rng);

// Frechet distance between Gaussian moment matches of two feature sets.
double frechet_distance(const torch::Tensor& mu1, const torch::Tensor& sigma1,
                        const torch::Tensor& mu2, const torch::Tensor& sigma2);
double fid_from_features(const torch::Tensor& real_features, const torch::Tensor& gen_features);

struct FidResult {
  double fid = 0.0;
  std::int64_t n_generated = 0;  // n_images * n_points
  std::int64_t n_real = 0;
};

// FID over interpolation outputs: n_images sources from domain i, style
// endpoints s1 in S_i and s2 in S_j, n_points lerp points each; the real
// side pools the test images of both endpoint domains.
FidResult fid_over_interpolations(const GeneratorFn& generator,
                                  const data::DomainDataset& test_data, DomainLabel source,
                                  DomainLabel target, const style::CodeSampler& styles,
                                  CodeSource endpoint_source, const FeatureFn& features,
                                  std::int64_t n_images, std::int64_t n_points, Rng& rng);

struct DiversityResult {
  double mean_distance = 0.0;
  std::int64_t pairs_per_image = 0;
};

// Mean pairwise backend distance among n_styles translations per source
// image, averaged over images.
DiversityResult lpips_diversity(const GeneratorFn& generator, const data::DomainDataset& data,
                                DomainLabel target, const style::CodeSampler& styles,
                                const perceptual::DistanceBackend& backend,
                                std::int64_t n_images, std::int64_t n_styles, Rng& rng);

// mean ||phi(x) - phi(G(x, s))||^2 over sampled (x, s).
double frd_protocol(const GeneratorFn& generator, const data::DomainDataset& data,
                    const style::CodeSampler& styles,
                    const perceptual::FaceEmbeddingBackend& backend, std::int64_t n_samples,
                    Rng& rng);

// Distribution of ||s_a - s_n|| - ||s_a - s_p|| over sampled triplets.
GapSummary gap_distribution(const data::DomainDataset& data, const style::EncoderFn& encoder,
                            std::int64_t n_triplets, Rng& rng);

// Summed per-path perceptual distances at several interpolation counts,
// with the same endpoint pairs reused across counts. The PPL row sums the
// epsilon-normalized squared terms.
struct LinearityTable {
  std::vector<std::int64_t> counts;                      // points per path
  std::map<std::string, std::vector<double>> rows;       // backend name -> per-count means
};

LinearityTable linearity_harness(
    const GeneratorFn& generator, const PathSampler& sampler,
    const std::vector<std::pair<std::string, const perceptual::DistanceBackend*>>& backends,
    const std::vector<std::int64_t>& counts, std::size_t n_paths, Rng& rng);

// Quartile summary with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

}  // namespace smoothstyle::metrics
