#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "smoothstyle/perceptual.hpp"
#include "smoothstyle/stylespace.hpp"

namespace smoothstyle::loss {

// Weights of the three smoothing terms. The triplet and content terms carry
// unit weight; only the SR term has a dedicated multiplier.
struct SmoothLossWeights {
  double lambda_sr = 1.0;
  double margin_alpha = 0.1;
};

// Multipliers of the original objective; lambda_ds enters the total with a
// negative sign.
struct OrigLossWeights {
  double lambda_sty = 1.0;
  double lambda_ds = 1.0;
  double lambda_cyc = 1.0;
};

// Named per-step scalar loss values plus the two optimized totals.
struct LossBundle {
  std::map<std::string, double> components;
  double total_generator = 0.0;
  double total_discriminator = 0.0;
};

// Batched generator / encoder / discriminator hooks so the losses stay
// decoupled from the concrete network types.
using GeneratorFn = std::function<torch::Tensor(const torch::Tensor& x, const torch::Tensor& s)>;
using EncoderBatchFn = std::function<torch::Tensor(const torch::Tensor& x)>;
using DiscriminatorFn = std::function<torch::Tensor(const torch::Tensor& x)>;  // -> [N, m] logits

// mean over the batch of max(||s_a - s_p|| - ||s_a - s_n|| + alpha, 0).
torch::Tensor triplet_loss(const torch::Tensor& anchor, const torch::Tensor& positive,
                           const torch::Tensor& negative, double alpha);
torch::Tensor triplet_loss(const std::vector<style::StyleTriplet>& batch, double alpha);

// mean ||s||_2^2 — pulls the style distribution toward a shrunk Gaussian
// around the origin.
torch::Tensor style_regularization(const torch::Tensor& codes);

// mean | ||s||_2 - 1 | — the unit-sphere alternative.
torch::Tensor sphere_regularization(const torch::Tensor& codes);

// mean psi(x, G(x, s)); gradients flow through G only.
torch::Tensor content_preservation_loss(const torch::Tensor& x, const torch::Tensor& s,
                                        const GeneratorFn& generator,
                                        const perceptual::DistanceBackend& backend);

// cont + lambda_sr * sr + tri.
double smooth_loss(double cont, double sr, double tri, const SmoothLossWeights& weights);
torch::Tensor smooth_loss(const torch::Tensor& cont, const torch::Tensor& sr,
                          const torch::Tensor& tri, const SmoothLossWeights& weights);

// Cores of the pipeline losses on precomputed tensors, so a training step
// can reuse its forward passes. The pipeline-shaped wrappers below call
// these after running the generator/encoder.
torch::Tensor style_reconstruction_core(const torch::Tensor& s_target,
                                        const torch::Tensor& recovered);
torch::Tensor pixel_l1_core(const torch::Tensor& a, const torch::Tensor& b);
torch::Tensor content_core(const torch::Tensor& x, const torch::Tensor& translated,
                           const perceptual::DistanceBackend& backend);

// mean ||s - E(G(x, s))||_1, the L1 summed over style dimensions.
torch::Tensor style_reconstruction_loss(const torch::Tensor& s_target, const torch::Tensor& x,
                                        const GeneratorFn& generator,
                                        const EncoderBatchFn& encoder);

// mean ||G(x, s1) - G(x, s2)||_1 averaged over pixels. Subtracted from the
// generator total, so maximizing it spreads the outputs.
torch::Tensor diversity_sensitive_loss(const torch::Tensor& x, const torch::Tensor& s1,
                                       const torch::Tensor& s2, const GeneratorFn& generator);

// mean ||x - G(G(x, s), E(x))||_1 averaged over pixels.
torch::Tensor cycle_consistency_loss(const torch::Tensor& x, const torch::Tensor& s,
                                     const GeneratorFn& generator,
                                     const EncoderBatchFn& encoder);

struct AdversarialLosses {
  torch::Tensor d_loss;
  torch::Tensor g_loss;
};

// Multitask adversarial pair. Discriminator branches emit logits; the
// discriminator loss reads -log D_i(real) - log(1 - D_j(fake)) with the fake
// detached, the generator side uses the non-saturating -log D_j(fake).
AdversarialLosses adversarial_losses(const torch::Tensor& x_real,
                                     const torch::Tensor& real_domains,
                                     const torch::Tensor& x_fake,
                                     const torch::Tensor& fake_domains,
                                     const DiscriminatorFn& discriminator);

// Picks logits[i, domains[i]] with range checking.
torch::Tensor select_domain_logit(const torch::Tensor& logits, const torch::Tensor& domains);

}  // namespace smoothstyle::loss
