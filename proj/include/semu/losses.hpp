#pragma once

#include "semu/channel.hpp"
#include "semu/codec.hpp"
#include "semu/tensor.hpp"

namespace semu {

// Hyperparameters of the unlearning objective
//   L_total = alpha1 * L_ju + alpha2 * L_cc.
struct UnlearnConfig {
    double alpha1 = 1.0;
    double alpha2 = 1.0;
    double tau = 0.5;  // contrastive temperature
    int epochs = 20;   // one minibatch step per epoch
    double lr = 0.05;
    int batch = 16;
};

// KL( N(mu, diag(var)) || N(0, I) ), closed form, mean over the batch:
//   0.5 * sum_j (mu_j^2 + e^{logvar_j} - logvar_j - 1)
Tensor kl_diag_gauss_to_std_normal(const GaussianLatent& lat);

// KL(p || q) between two diagonal Gaussians, mean over the batch. q is
// treated as a constant: gradient flows only into p.
Tensor kl_diag_gauss_pair(const GaussianLatent& p, const GaussianLatent& q);

// Gaussian-decoder negative log-likelihood up to constants:
//   0.5 * mean_i ||x_i - x_hat_i||^2   (per-sample sum over pixels)
Tensor recon_nll(const Tensor& x, const Tensor& x_hat);

// Training objective: beta * KL-to-prior + reconstruction NLL through the
// noisy channel. beta comes from the codec config.
Tensor vib_loss(const Tensor& x, const SemanticCodec& codec, const ChannelConfig& ch, Rng& rng,
                NoiseLog* log = nullptr);

// The two encoder terms and two decoder terms of the joint unlearning loss,
// kept separate so tests can probe them individually.
struct JuParts {
    Tensor enc_mi;      // KL-to-prior on erased latents
    Tensor enc_anchor;  // KL(live posterior || frozen posterior)
    Tensor dec_mi;      // negative reconstruction NLL on erased samples
    Tensor dec_anchor;  // 0.5 * mean ||decode - frozen decode||^2
    Tensor total;
};

// Joint unlearning loss on an erased batch, evaluated against the frozen
// clone. The caller supplies the latent and its reparameterized sample so a
// surrounding step can reuse them; z_e is sent through the channel once and
// the same received signal feeds both the live and the frozen decoder.
JuParts ju_loss_parts(const Tensor& x_e, const GaussianLatent& lat_e, const Tensor& z_e,
                      const SemanticCodec& codec, const SemanticCodec& frozen,
                      const ChannelConfig& ch, Rng& rng, NoiseLog* log = nullptr);

// Convenience form that encodes and samples internally.
Tensor ju_loss(const Tensor& x_e, const SemanticCodec& codec, const SemanticCodec& frozen,
               const ChannelConfig& ch, Rng& rng, NoiseLog* log = nullptr);

// Anchor-anchor contrastive sum over normalized embeddings:
//   sum_i (-1/|P(i)|) sum_{p != i} log[ exp(e_i . e_p / tau)
//                                      / (sum_e exp(e_i . e_e / tau) + 1e-12) ]
// Anchors and positives are the rows of emb_r; negatives the rows of emb_e.
Tensor contrastive_encoder_term(const Tensor& emb_r, const Tensor& emb_e, double tau);

// Contrastive compensation loss. z_r and z_e are reparameterized latents of
// a remaining and an erased minibatch; each passes through the channel once,
// embeddings are L2-normalized received signals, and the decoder term
// reconstructs the remaining samples only.
Tensor cc_loss(const Tensor& z_r, const Tensor& z_e, const Tensor& x_r,
               const SemanticCodec& codec, const ChannelConfig& ch, double tau, Rng& rng,
               NoiseLog* log = nullptr);

// alpha1 * ju + alpha2 * cc
Tensor total_unlearn_loss(const Tensor& ju, const Tensor& cc, const UnlearnConfig& cfg);

// Single-batch objective of the variational Bayesian unlearning baseline:
// KL-to-prior minus reconstruction NLL on the erased batch.
Tensor vbu_loss(const Tensor& x_e, const SemanticCodec& codec, const ChannelConfig& ch, Rng& rng,
                NoiseLog* log = nullptr);

// ---- finite-difference suite --------------------------------------------------

struct GradSuiteResult {
    double vib = 0.0;
    double ju = 0.0;
    double cc = 0.0;
    double total = 0.0;

    double worst() const;
    bool all_below(double tol) const { return worst() < tol; }
};

// Checks every composite loss against central finite differences on small
// random instances, one instance per seed. Returns the max relative error
// seen for each loss across all seeds.
GradSuiteResult run_grad_suite(int num_seeds, double eps = 1e-4);

}  // namespace semu
