#include <cmath>

#include "smoothstyle/stylespace.hpp"

// doctest last: its short assertion macros must win over torch's logging macros
#include <doctest.h>

using namespace smoothstyle;
using style::StyleCode;

namespace {

// Two domains, n images each, 3x3 single channel; every image carries a
// unique pixel pattern so codes derived from content are distinct.
data::DomainDataset tiny_dataset(std::int64_t n_per_domain = 8) {
  std::vector<torch::Tensor> domains;
  std::uint8_t next = 1;
  for (int d = 0; d < 2; ++d) {
    auto imgs = torch::zeros({n_per_domain, 1, 3, 3}, torch::kUInt8);
    for (std::int64_t i = 0; i < n_per_domain; ++i) {
      imgs[i][0][0][0] = next++;
      imgs[i][0][1][1] = next++;
    }
    domains.push_back(imgs);
  }
  return data::DomainDataset(std::move(domains), 3, 1);
}

// Code 2-vector derived from image content; injective for tiny_dataset.
style::EncoderFn content_encoder() {
  return [](const torch::Tensor& image, DomainLabel domain) {
    auto v = torch::stack({image.sum(), image.max()}).to(torch::kFloat64);
    return StyleCode{v, domain, CodeSource::encoder};
  };
}

std::vector<double> to_vec(const torch::Tensor& t) {
  auto d = t.to(torch::kFloat64);
  std::vector<double> out(d.numel());
  for (std::int64_t i = 0; i < d.numel(); ++i) out[i] = d[i].item<double>();
  return out;
}

}  // namespace

TEST_CASE("lerp endpoint identity and midpoint") {
  auto s0 = style::make_code({0.0, 0.0}, DomainLabel{0});
  auto s1 = style::make_code({1.0, 1.0}, DomainLabel{1});

  auto at0 = style::lerp(s0, s1, 0.0);
  CHECK(to_vec(at0.values) == to_vec(s0.values));
  CHECK(at0.domain.index == 0);
  CHECK(at0.source == CodeSource::interpolated);

  auto mid = style::lerp(s0, s1, 0.5);
  CHECK(mid.values[0].item<double>() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mid.values[1].item<double>() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mid.domain.index == 1);  // nearest-endpoint rule, ties to s1
}

TEST_CASE("twenty point evaluation path has endpoints and k/19 interior") {
  auto s0 = style::make_code({-1.0, 2.0}, DomainLabel{0});
  auto s1 = style::make_code({3.0, -2.0}, DomainLabel{1});
  auto path = style::make_path(s0, s1, 19);
  REQUIRE(path.codes.size() == 20);
  CHECK(to_vec(path.codes.front().values) == to_vec(s0.values));
  CHECK(to_vec(path.codes.back().values) == to_vec(s1.values));
  for (int k = 1; k < 19; ++k) {
    auto expect = style::lerp(s0, s1, double(k) / 19.0);
    auto diff = (path.codes[k].values - expect.values).abs().max().item<double>();
    CHECK(diff == 0.0);
  }
}

TEST_CASE("lerp is affine: f(t) + f(1-t) = s0 + s1") {
  auto rng = make_rng(7, "affine");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    auto s0 = StyleCode{normal_tensor({4}, rng, torch::kFloat64), DomainLabel{0},
                        CodeSource::encoder};
    auto s1 = StyleCode{normal_tensor({4}, rng, torch::kFloat64), DomainLabel{1},
                        CodeSource::encoder};
    const double t = u(rng);
    auto sum = style::lerp(s0, s1, t).values + style::lerp(s0, s1, 1.0 - t).values;
    auto direct = s0.values + s1.values;
    CHECK((sum - direct).abs().max().item<double>() < 1e-12);
  }
}

TEST_CASE("lerp path has exactly equal consecutive gaps") {
  auto s0 = style::make_code({0.3, -1.2, 2.0}, DomainLabel{0});
  auto s1 = style::make_code({-0.7, 0.4, 1.0}, DomainLabel{1});
  auto path = style::make_path(s0, s1, 7);
  std::vector<double> gaps;
  for (std::size_t i = 0; i + 1 < path.codes.size(); ++i) {
    gaps.push_back((path.codes[i + 1].values - path.codes[i].values).norm().item<double>());
  }
  for (double g : gaps) CHECK(std::abs(g - gaps[0]) < 1e-9);
}

TEST_CASE("lerp rejects dimension mismatch") {
  auto s0 = style::make_code({1.0, 2.0}, DomainLabel{0});
  auto s1 = style::make_code({1.0, 2.0, 3.0}, DomainLabel{1});
  CHECK_THROWS_AS((void)style::lerp(s0, s1, 0.5), ContractViolation);
}

TEST_CASE("slerp coincident endpoints fall back to lerp") {
  auto s = style::make_code({0.6, 0.8}, DomainLabel{0});
  auto out = style::slerp(s, s, 0.7);
  CHECK((out.values - s.values).abs().max().item<double>() < 1e-12);
}

TEST_CASE("slerp quarter circle midpoint") {
  // Closed form at Omega = pi/2: both coefficients are sin(pi/4).
  const double expected = std::sin(3.14159265358979323846 / 4.0);
  auto s0 = style::make_code({1.0, 0.0}, DomainLabel{0});
  auto s1 = style::make_code({0.0, 1.0}, DomainLabel{1});
  auto mid = style::slerp(s0, s1, 0.5);
  CHECK(mid.values[0].item<double>() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(mid.values[1].item<double>() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("slerp stays on the sphere for equal-norm endpoints") {
  auto rng = make_rng(11, "slerp-norm");
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = normal_tensor({5}, rng, torch::kFloat64);
    auto b = normal_tensor({5}, rng, torch::kFloat64);
    const double radius = 0.5 + 2.0 * u(rng);
    auto s0 = StyleCode{a * (radius / a.norm().item<double>()), DomainLabel{0},
                        CodeSource::encoder};
    auto s1 = StyleCode{b * (radius / b.norm().item<double>()), DomainLabel{1},
                        CodeSource::encoder};
    const double t = u(rng);
    const double norm = style::slerp(s0, s1, t).values.norm().item<double>();
    CHECK(std::abs(norm - radius) / radius < 1e-6);
  }
}

TEST_CASE("slerp rejects zero-norm endpoints") {
  auto zero = style::make_code({0.0, 0.0}, DomainLabel{0});
  auto s1 = style::make_code({1.0, 0.0}, DomainLabel{1});
  CHECK_THROWS_AS((void)style::slerp(zero, s1, 0.5), ContractViolation);
}

TEST_CASE("sample_endpoints honours the intra/inter contract") {
  auto dataset = tiny_dataset();
  style::CodeSampler sampler{&dataset, content_encoder(), nullptr, 4};
  auto rng = make_rng(3, "endpoints");
  for (int trial = 0; trial < 20; ++trial) {
    auto [a, b] = style::sample_endpoints(sampler, PathKind::intra, CodeSource::encoder, rng);
    CHECK(a.domain.index == b.domain.index);
    auto [c, d] = style::sample_endpoints(sampler, PathKind::inter, CodeSource::encoder, rng);
    CHECK(c.domain.index != d.domain.index);
  }
}

TEST_CASE("sample_endpoints is deterministic under a fixed seed") {
  auto dataset = tiny_dataset();
  style::CodeSampler sampler{&dataset, content_encoder(), nullptr, 4};
  auto rng1 = make_rng(99, "det");
  auto rng2 = make_rng(99, "det");
  for (int trial = 0; trial < 10; ++trial) {
    auto [a1, b1] = style::sample_endpoints(sampler, PathKind::inter, CodeSource::encoder, rng1);
    auto [a2, b2] = style::sample_endpoints(sampler, PathKind::inter, CodeSource::encoder, rng2);
    CHECK(to_vec(a1.values) == to_vec(a2.values));
    CHECK(to_vec(b1.values) == to_vec(b2.values));
    CHECK(a1.domain.index == a2.domain.index);
  }
}

TEST_CASE("sample_triplet invariants and anchor balance") {
  auto dataset = tiny_dataset(16);
  auto encoder = content_encoder();
  auto rng = make_rng(5, "triplets");
  int domain0 = 0;
  const int draws = 1000;
  for (int k = 0; k < draws; ++k) {
    auto t = style::sample_triplet(dataset, encoder, rng);
    CHECK(t.anchor.domain.index == t.positive.domain.index);
    CHECK(t.negative.domain.index != t.anchor.domain.index);
    // distinct images => distinct codes under the injective encoder
    CHECK((t.anchor.values - t.positive.values).abs().max().item<double>() > 0.0);
    if (t.anchor.domain.index == 0) ++domain0;
  }
  // Binomial check: 2 balanced domains, frequency within 0.5 +/- 0.05.
  const double freq = double(domain0) / draws;
  CHECK(freq > 0.45);
  CHECK(freq < 0.55);
}

TEST_CASE("sample_triplet needs two images in the anchor domain") {
  std::vector<torch::Tensor> domains;
  domains.push_back(torch::ones({1, 1, 3, 3}, torch::kUInt8));  // single image
  domains.push_back(torch::ones({1, 1, 3, 3}, torch::kUInt8));
  data::DomainDataset dataset(std::move(domains), 3, 1);
  auto rng = make_rng(1, "small");
  CHECK_THROWS_AS((void)style::sample_triplet(dataset, content_encoder(), rng), DataError);
}

TEST_CASE("mixed_code_source alternates strictly") {
  CHECK(style::mixed_code_source(0) == CodeSource::encoder);
  CHECK(style::mixed_code_source(1) == CodeSource::mapper);
  int encoder_count = 0;
  for (int it = 0; it < 1000; ++it) {
    if (style::mixed_code_source(it) == CodeSource::encoder) ++encoder_count;
  }
  CHECK(encoder_count == 500);
  CHECK_THROWS_AS((void)style::mixed_code_source(-1), ContractViolation);
}

TEST_CASE("latent noise is standard-normal shaped and seeded") {
  auto rng1 = make_rng(42, "noise");
  auto rng2 = make_rng(42, "noise");
  auto z1 = style::sample_noise(16, rng1);
  auto z2 = style::sample_noise(16, rng2);
  CHECK(z1.values.sizes() == z2.values.sizes());
  CHECK((z1.values - z2.values).abs().max().item<double>() == 0.0);
  // moment sanity over many draws
  auto rng3 = make_rng(43, "noise-moments");
  auto big = normal_tensor({20000}, rng3, torch::kFloat64);
  CHECK(std::abs(big.mean().item<double>()) < 0.05);
  CHECK(std::abs(big.var().item<double>() - 1.0) < 0.05);
}
