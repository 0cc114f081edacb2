#include "smoothstyle/losses.hpp"

namespace smoothstyle::loss {

namespace {

void check_codes(const torch::Tensor& codes) {
  if (codes.dim() != 2 || codes.size(0) == 0) {
    throw ContractViolation("expected a nonempty [N, d_s] code batch");
  }
}

void check_same_batch(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.size(0) != b.size(0)) {
    throw ContractViolation(std::string("batch size mismatch in ") + what);
  }
}

}  // namespace

torch::Tensor triplet_loss(const torch::Tensor& anchor, const torch::Tensor& positive,
                           const torch::Tensor& negative, double alpha) {
  check_codes(anchor);
  check_codes(positive);
  check_codes(negative);
  if (alpha < 0) throw ContractViolation("triplet margin must be nonnegative");
  if (anchor.size(1) != positive.size(1) || anchor.size(1) != negative.size(1)) {
    throw ContractViolation("triplet code dimensions differ");
  }
  auto d_pos = (anchor - positive).norm(2, 1);
  auto d_neg = (anchor - negative).norm(2, 1);
  return torch::clamp_min(d_pos - d_neg + alpha, 0.0).mean();
}

torch::Tensor triplet_loss(const std::vector<style::StyleTriplet>& batch, double alpha) {
  if (batch.empty()) throw ContractViolation("triplet batch is empty");
  std::vector<torch::Tensor> a, p, n;
  for (const auto& t : batch) {
    style::validate_triplet(t);
    a.push_back(t.anchor.values);
    p.push_back(t.positive.values);
    n.push_back(t.negative.values);
  }
  return triplet_loss(torch::stack(a), torch::stack(p), torch::stack(n), alpha);
}

torch::Tensor style_regularization(const torch::Tensor& codes) {
  check_codes(codes);
  return codes.pow(2).sum(1).mean();
}

torch::Tensor sphere_regularization(const torch::Tensor& codes) {
  check_codes(codes);
  return (codes.norm(2, 1) - 1.0).abs().mean();
}

torch::Tensor style_reconstruction_core(const torch::Tensor& s_target,
                                        const torch::Tensor& recovered) {
  if (recovered.size(1) != s_target.size(1)) {
    throw ContractViolation("encoder output dimension differs from the style dimension");
  }
  return (s_target - recovered).abs().sum(1).mean();
}

torch::Tensor pixel_l1_core(const torch::Tensor& a, const torch::Tensor& b) {
  return (a - b).abs().flatten(1).mean(1).mean();
}

torch::Tensor content_core(const torch::Tensor& x, const torch::Tensor& translated,
                           const perceptual::DistanceBackend& backend) {
  auto d = backend.distance(x.detach(), translated);
  return (d.dim() == 0 ? d : d.mean());
}

torch::Tensor content_preservation_loss(const torch::Tensor& x, const torch::Tensor& s,
                                        const GeneratorFn& generator,
                                        const perceptual::DistanceBackend& backend) {
  check_same_batch(x, s, "content preservation loss");
  return content_core(x, generator(x, s), backend);
}

double smooth_loss(double cont, double sr, double tri, const SmoothLossWeights& weights) {
  return cont + weights.lambda_sr * sr + tri;
}

torch::Tensor smooth_loss(const torch::Tensor& cont, const torch::Tensor& sr,
                          const torch::Tensor& tri, const SmoothLossWeights& weights) {
  return cont + weights.lambda_sr * sr + tri;
}

torch::Tensor style_reconstruction_loss(const torch::Tensor& s_target, const torch::Tensor& x,
                                        const GeneratorFn& generator,
                                        const EncoderBatchFn& encoder) {
  check_same_batch(s_target, x, "style reconstruction loss");
  return style_reconstruction_core(s_target, encoder(generator(x, s_target)));
}

torch::Tensor diversity_sensitive_loss(const torch::Tensor& x, const torch::Tensor& s1,
                                       const torch::Tensor& s2, const GeneratorFn& generator) {
  check_same_batch(x, s1, "diversity sensitive loss");
  check_same_batch(x, s2, "diversity sensitive loss");
  return pixel_l1_core(generator(x, s1), generator(x, s2));
}

torch::Tensor cycle_consistency_loss(const torch::Tensor& x, const torch::Tensor& s,
                                     const GeneratorFn& generator,
                                     const EncoderBatchFn& encoder) {
  check_same_batch(x, s, "cycle consistency loss");
  auto s_src = encoder(x);
  auto round_trip = generator(generator(x, s), s_src);
  return pixel_l1_core(x, round_trip);
}

torch::Tensor select_domain_logit(const torch::Tensor& logits, const torch::Tensor& domains) {
  if (logits.dim() != 2) throw ContractViolation("discriminator must emit [N, m] logits");
  check_same_batch(logits, domains, "domain logit selection");
  const auto m = logits.size(1);
  auto d_min = domains.min().item<std::int64_t>();
  auto d_max = domains.max().item<std::int64_t>();
  if (d_min < 0 || d_max >= m) {
    throw ContractViolation("domain index out of range for a " + std::to_string(m) +
                            "-branch discriminator");
  }
  return logits.gather(1, domains.view({-1, 1})).squeeze(1);
}

AdversarialLosses adversarial_losses(const torch::Tensor& x_real,
                                     const torch::Tensor& real_domains,
                                     const torch::Tensor& x_fake,
                                     const torch::Tensor& fake_domains,
                                     const DiscriminatorFn& discriminator) {
  // Branch outputs are logits; softplus forms are the numerically stable
  // -log sigmoid(.) / -log(1 - sigmoid(.)).
  auto real_logit = select_domain_logit(discriminator(x_real), real_domains);
  auto fake_logit_detached = select_domain_logit(discriminator(x_fake.detach()), fake_domains);
  auto d_loss = torch::softplus(-real_logit).mean() + torch::softplus(fake_logit_detached).mean();

  auto fake_logit = select_domain_logit(discriminator(x_fake), fake_domains);
  auto g_loss = torch::softplus(-fake_logit).mean();  // non-saturating form
  return {d_loss, g_loss};
}

}  // namespace smoothstyle::loss
