#pragma once

#include <functional>
#include <vector>

#include <torch/torch.h>

#include "smoothstyle/data.hpp"
#include "smoothstyle/rng.hpp"
#include "smoothstyle/types.hpp"

namespace smoothstyle::style {

// A point in the style space: a d_s-dimensional vector plus bookkeeping.
struct StyleCode {
  torch::Tensor values;  // 1-D tensor, all entries finite
  DomainLabel domain;
  CodeSource source = CodeSource::encoder;

  std::int64_t dim() const { return values.numel(); }
};

StyleCode make_code(std::vector<double> values, DomainLabel domain,
                    CodeSource source = CodeSource::encoder);

// z ~ N(0, I), the raw input of the mapping network.
struct LatentNoise {
  torch::Tensor values;  // 1-D tensor of dimension d_z
};

LatentNoise sample_noise(std::int64_t d_z, Rng& rng);

// (anchor, positive) share a domain; negative comes from a different one.
struct StyleTriplet {
  StyleCode anchor;
  StyleCode positive;
  StyleCode negative;
};

void validate_triplet(const StyleTriplet& t);

// Interpolation track between two endpoints. step_distances holds the T
// perceptual distances between consecutive generated frames once a metrics
// pass fills them in; end_to_end the distance between the first and last.
struct InterpolationPath {
  std::vector<StyleCode> codes;        // T + 1 entries
  std::vector<double> step_distances;  // T entries, filled by metrics
  double end_to_end = 0.0;             // filled by metrics
  InterpStrategy strategy = InterpStrategy::lerp;
  PathKind kind = PathKind::intra;

  std::int64_t steps() const { return static_cast<std::int64_t>(codes.size()) - 1; }
};

// (1 - t) * s0 + t * s1. The domain label of an interior point is pure
// bookkeeping: nearest endpoint wins (t < 0.5 -> s0's label).
StyleCode lerp(const StyleCode& s0, const StyleCode& s1, double t);

// Great-circle interpolation; falls back to lerp when the endpoints are
// parallel (sin of the subtended angle below 1e-6, which also covers the
// ill-defined antipodal case). Zero-norm endpoints are a contract violation.
StyleCode slerp(const StyleCode& s0, const StyleCode& s1, double t);

// Endpoints plus T-1 interior points at t = k/T.
InterpolationPath make_path(const StyleCode& s0, const StyleCode& s1, std::int64_t steps,
                            InterpStrategy strategy = InterpStrategy::lerp);

// How a style code is produced when sampling endpoints.
using EncoderFn = std::function<StyleCode(const torch::Tensor& image, DomainLabel domain)>;
using MapperFn = std::function<StyleCode(const torch::Tensor& z, DomainLabel domain)>;

// Bundles both style-code sources; exactly one is used per sampled code.
struct CodeSampler {
  const data::DomainDataset* dataset = nullptr;
  EncoderFn encoder;
  MapperFn mapper;
  std::int64_t d_z = 16;

  StyleCode sample(DomainLabel domain, CodeSource source, Rng& rng) const;
};

// Two endpoint codes: same domain for intra, distinct domains for inter.
std::pair<StyleCode, StyleCode> sample_endpoints(const CodeSampler& sampler, PathKind kind,
                                                 CodeSource source, Rng& rng);

// Anchor/positive from one domain (two distinct images), negative from a
// random other domain, all through the encoder.
StyleTriplet sample_triplet(const data::DomainDataset& dataset, const EncoderFn& encoder,
                            Rng& rng);

// Which code source a training iteration uses: even -> encoder, odd ->
// mapper. Strict alternation; the long-run frequency of each source is 0.5.
CodeSource mixed_code_source(std::int64_t iteration);

}  // namespace smoothstyle::style
