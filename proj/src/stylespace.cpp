#include "smoothstyle/stylespace.hpp"

#include <cmath>

namespace smoothstyle::style {

namespace {

void check_same_dim(const StyleCode& a, const StyleCode& b) {
  if (a.dim() != b.dim()) {
    throw ContractViolation("style code dimension mismatch: " + std::to_string(a.dim()) +
                            " vs " + std::to_string(b.dim()));
  }
}

void check_finite(const torch::Tensor& v, const char* what) {
  if (!torch::isfinite(v).all().item<bool>()) {
    throw ContractViolation(std::string(what) + " contains non-finite entries");
  }
}

}  // namespace

StyleCode make_code(std::vector<double> values, DomainLabel domain, CodeSource source) {
  auto t = torch::tensor(values, torch::kFloat64);
  check_finite(t, "style code");
  return StyleCode{std::move(t), domain, source};
}

LatentNoise sample_noise(std::int64_t d_z, Rng& rng) {
  return LatentNoise{normal_tensor({d_z}, rng, torch::kFloat32)};
}

void validate_triplet(const StyleTriplet& t) {
  if (!(t.anchor.domain == t.positive.domain)) {
    throw ContractViolation("triplet anchor and positive must share a domain");
  }
  if (t.negative.domain == t.anchor.domain) {
    throw ContractViolation("triplet negative must come from a different domain");
  }
}

StyleCode lerp(const StyleCode& s0, const StyleCode& s1, double t) {
  check_same_dim(s0, s1);
  StyleCode out;
  out.values = s0.values * (1.0 - t) + s1.values * t;
  out.domain = t < 0.5 ? s0.domain : s1.domain;
  out.source = CodeSource::interpolated;
  return out;
}

StyleCode slerp(const StyleCode& s0, const StyleCode& s1, double t) {
  check_same_dim(s0, s1);
  const double n0 = s0.values.norm().item<double>();
  const double n1 = s1.values.norm().item<double>();
  if (n0 == 0.0 || n1 == 0.0) {
    throw ContractViolation("slerp endpoints must have nonzero norm");
  }
  const double cos_omega =
      std::clamp((s0.values.dot(s1.values)).item<double>() / (n0 * n1), -1.0, 1.0);
  const double omega = std::acos(cos_omega);
  const double sin_omega = std::sin(omega);
  if (sin_omega < 1e-6) return lerp(s0, s1, t);

  StyleCode out;
  out.values = s0.values * (std::sin((1.0 - t) * omega) / sin_omega) +
               s1.values * (std::sin(t * omega) / sin_omega);
  out.domain = t < 0.5 ? s0.domain : s1.domain;
  out.source = CodeSource::interpolated;
  return out;
}

InterpolationPath make_path(const StyleCode& s0, const StyleCode& s1, std::int64_t steps,
                            InterpStrategy strategy) {
  if (steps < 1) throw ContractViolation("a path needs at least one step");
  InterpolationPath path;
  path.strategy = strategy;
  path.kind = s0.domain == s1.domain ? PathKind::intra : PathKind::inter;
  path.codes.reserve(steps + 1);
  path.codes.push_back(s0);
  for (std::int64_t k = 1; k < steps; ++k) {
    const double t = double(k) / double(steps);
    path.codes.push_back(strategy == InterpStrategy::lerp ? lerp(s0, s1, t) : slerp(s0, s1, t));
  }
  path.codes.push_back(s1);
  return path;
}

StyleCode CodeSampler::sample(DomainLabel domain, CodeSource source, Rng& rng) const {
  if (source == CodeSource::encoder) {
    if (!dataset || !encoder) throw ContractViolation("encoder sampling needs dataset + encoder");
    if (dataset->size(domain) == 0) throw DataError("cannot sample from an empty domain");
    const auto idx = dataset->sample_index(domain, rng);
    return encoder(dataset->get(domain, idx), domain);
  }
  if (!mapper) throw ContractViolation("mapper sampling needs a mapper");
  return mapper(sample_noise(d_z, rng).values, domain);
}

std::pair<StyleCode, StyleCode> sample_endpoints(const CodeSampler& sampler, PathKind kind,
                                                 CodeSource source, Rng& rng) {
  const auto m = sampler.dataset ? sampler.dataset->num_domains() : 0;
  if (m < 2) throw ContractViolation("endpoint sampling needs a dataset with >= 2 domains");

  const auto d0 = DomainLabel{rand_index(rng, m)};
  DomainLabel d1 = d0;
  if (kind == PathKind::inter) {
    d1 = DomainLabel{rand_index(rng, m - 1)};
    if (d1.index >= d0.index) ++d1.index;
  }
  auto a = sampler.sample(d0, source, rng);
  auto b = sampler.sample(d1, source, rng);
  return {std::move(a), std::move(b)};
}

StyleTriplet sample_triplet(const data::DomainDataset& dataset, const EncoderFn& encoder,
                            Rng& rng) {
  const auto m = dataset.num_domains();
  if (m < 2) throw ContractViolation("triplet sampling needs >= 2 domains");

  const auto di = DomainLabel{rand_index(rng, m)};
  const auto n_i = dataset.size(di);
  if (n_i < 2) {
    throw DataError("domain " + std::to_string(di.index) +
                    " has fewer than 2 images; cannot draw an anchor/positive pair");
  }
  const auto ia = dataset.sample_index(di, rng);
  auto ip = rand_index(rng, n_i - 1);
  if (ip >= ia) ++ip;  // without replacement within the pair

  auto dj = DomainLabel{rand_index(rng, m - 1)};
  if (dj.index >= di.index) ++dj.index;
  const auto in = dataset.sample_index(dj, rng);

  StyleTriplet t{encoder(dataset.get(di, ia), di), encoder(dataset.get(di, ip), di),
                 encoder(dataset.get(dj, in), dj)};
  validate_triplet(t);
  return t;
}

CodeSource mixed_code_source(std::int64_t iteration) {
  if (iteration < 0) throw ContractViolation("iteration must be nonnegative");
  return iteration % 2 == 0 ? CodeSource::encoder : CodeSource::mapper;
}

}  // namespace smoothstyle::style
