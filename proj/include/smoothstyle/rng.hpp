#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <torch/torch.h>

namespace smoothstyle {

// Every operation that consumes randomness takes one of these by reference.
// All streams are derived from a single root seed so a whole experiment is a
// pure function of (config, seed, input files).
using Rng = std::mt19937_64;

// FNV-1a, used to derive named sub-streams from the root seed. Stable across
// platforms, unlike std::hash.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
  std::uint64_t h = fnv1a(stream);
  // splitmix-style finalizer over the combined value
  std::uint64_t z = root + 0x9e3779b97f4a7c15ull + h;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t root, std::string_view stream) {
  return Rng(derive_seed(root, stream));
}

// Fills a tensor with i.i.d. standard normals drawn from `rng`. Keeping all
// sampling on our own generator (rather than torch's global one) makes
// checkpoint resume exact: the generator state is the only RNG state to save.
inline torch::Tensor normal_tensor(std::vector<std::int64_t> shape, Rng& rng,
                                   torch::Dtype dtype = torch::kFloat32) {
  auto out = torch::empty(shape, torch::kFloat64);
  std::normal_distribution<double> dist(0.0, 1.0);
  auto* p = out.data_ptr<double>();
  for (std::int64_t i = 0; i < out.numel(); ++i) p[i] = dist(rng);
  return out.to(dtype);
}

inline torch::Tensor uniform_tensor(std::vector<std::int64_t> shape, Rng& rng,
                                    double lo, double hi,
                                    torch::Dtype dtype = torch::kFloat32) {
  auto out = torch::empty(shape, torch::kFloat64);
  std::uniform_real_distribution<double> dist(lo, hi);
  auto* p = out.data_ptr<double>();
  for (std::int64_t i = 0; i < out.numel(); ++i) p[i] = dist(rng);
  return out.to(dtype);
}

// Uniform integer in [0, n).
inline std::int64_t rand_index(Rng& rng, std::int64_t n) {
  std::uniform_int_distribution<std::int64_t> dist(0, n - 1);
  return dist(rng);
}

}  // namespace smoothstyle
