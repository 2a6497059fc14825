#include "semu/losses.hpp"

#include <algorithm>
#include <cmath>

#include "semu/errors.hpp"

namespace semu {

namespace {

void require_latent_shapes(const GaussianLatent& lat, const char* who) {
    if (!(lat.mu.shape() == lat.logvar.shape())) {
        throw DimensionError(std::string(who) + ": mu " + lat.mu.shape().str() + " vs logvar " +
                             lat.logvar.shape().str());
    }
}

}  // namespace

Tensor kl_diag_gauss_to_std_normal(const GaussianLatent& lat) {
    require_latent_shapes(lat, "kl_diag_gauss_to_std_normal");
    // 0.5 (mu^2 + e^lv - lv - 1), summed over dims, averaged over batch
    Tensor inner = add_scalar(sub(add(square(lat.mu), exp(lat.logvar)), lat.logvar), -1.0);
    return mul_scalar(mean_all(row_sum(inner)), 0.5);
}

Tensor kl_diag_gauss_pair(const GaussianLatent& p, const GaussianLatent& q) {
    require_latent_shapes(p, "kl_diag_gauss_pair");
    require_latent_shapes(q, "kl_diag_gauss_pair");
    if (!(p.mu.shape() == q.mu.shape())) {
        throw DimensionError("kl_diag_gauss_pair: p " + p.mu.shape().str() + " vs q " +
                             q.mu.shape().str());
    }
    Tensor qmu = q.mu.detach();
    Tensor qlv = q.logvar.detach();
    // 0.5 [ lv_q - lv_p + (e^{lv_p} + (mu_p - mu_q)^2) e^{-lv_q} - 1 ]
    Tensor ratio = mul(add(exp(p.logvar), square(sub(p.mu, qmu))), exp(neg(qlv)));
    Tensor inner = add_scalar(add(sub(qlv, p.logvar), ratio), -1.0);
    return mul_scalar(mean_all(row_sum(inner)), 0.5);
}

Tensor recon_nll(const Tensor& x, const Tensor& x_hat) {
    if (!(x.shape() == x_hat.shape())) {
        throw DimensionError("recon_nll: x " + x.shape().str() + " vs x_hat " +
                             x_hat.shape().str());
    }
    return mul_scalar(mean_all(row_sum(square(sub(x, x_hat)))), 0.5);
}

Tensor vib_loss(const Tensor& x, const SemanticCodec& codec, const ChannelConfig& ch, Rng& rng,
                NoiseLog* log) {
    GaussianLatent lat = codec.encode(x);
    Tensor z = SemanticCodec::reparameterize(lat, rng);
    Tensor received = transmit(z, ch, rng, log);
    Tensor x_hat = codec.decode(received);
    return add(mul_scalar(kl_diag_gauss_to_std_normal(lat), codec.config().beta),
               recon_nll(x, x_hat));
}

JuParts ju_loss_parts(const Tensor& x_e, const GaussianLatent& lat_e, const Tensor& z_e,
                      const SemanticCodec& codec, const SemanticCodec& frozen,
                      const ChannelConfig& ch, Rng& rng, NoiseLog* log) {
    if (!(codec.config() == frozen.config())) {
        throw ContractError("ju_loss: frozen clone architecture does not match codec");
    }
    GaussianLatent lat_fix = frozen.encode(x_e);

    Tensor received = transmit(z_e, ch, rng, log);
    Tensor x_hat = codec.decode(received);
    // Same received signal through the frozen decoder; its output is the
    // anchor and carries no gradient.
    Tensor x_hat_fix = frozen.decode(received).detach();

    JuParts parts;
    parts.enc_mi = kl_diag_gauss_to_std_normal(lat_e);
    parts.enc_anchor = kl_diag_gauss_pair(lat_e, lat_fix);
    parts.dec_mi = neg(recon_nll(x_e, x_hat));
    parts.dec_anchor = recon_nll(x_hat_fix, x_hat);
    parts.total =
        add(add(parts.enc_mi, parts.enc_anchor), add(parts.dec_mi, parts.dec_anchor));
    return parts;
}

Tensor ju_loss(const Tensor& x_e, const SemanticCodec& codec, const SemanticCodec& frozen,
               const ChannelConfig& ch, Rng& rng, NoiseLog* log) {
    GaussianLatent lat_e = codec.encode(x_e);
    Tensor z_e = SemanticCodec::reparameterize(lat_e, rng);
    return ju_loss_parts(x_e, lat_e, z_e, codec, frozen, ch, rng, log).total;
}

Tensor contrastive_encoder_term(const Tensor& emb_r, const Tensor& emb_e, double tau) {
    if (!(tau > 0.0)) throw ContractError("contrastive_encoder_term: tau must be positive");
    const int b = emb_r.rows();
    const int e = emb_e.rows();
    if (b < 2) {
        throw ContractError(
            "contrastive_encoder_term: need a remaining batch of at least 2 so every anchor "
            "has a positive");
    }
    if (e < 1) throw ContractError("contrastive_encoder_term: erased batch is empty");
    if (emb_r.cols() != emb_e.cols()) {
        throw DimensionError("contrastive_encoder_term: embedding widths disagree " +
                             emb_r.shape().str() + " vs " + emb_e.shape().str());
    }

    const double inv_tau = 1.0 / tau;
    Tensor sim_rr = mul_scalar(matmul(emb_r, transpose(emb_r)), inv_tau);  // b x b
    Tensor sim_re = mul_scalar(matmul(emb_r, transpose(emb_e)), inv_tau);  // b x e

    // log of the denominator, with the additive guard inside the log
    Tensor denom = log(add_scalar(row_sum(exp(sim_re)), 1e-12));  // b x 1

    std::vector<double> offdiag(static_cast<size_t>(b) * b, 1.0);
    for (int i = 0; i < b; ++i) offdiag[static_cast<size_t>(i) * b + i] = 0.0;
    Tensor pos_sum = row_sum(mul(sim_rr, Tensor::constant(std::move(offdiag), {b, b})));

    // per anchor: -(1/(b-1)) * pos_sum + denom, then summed over anchors
    return sum_all(add(mul_scalar(pos_sum, -1.0 / (b - 1)), denom));
}

Tensor cc_loss(const Tensor& z_r, const Tensor& z_e, const Tensor& x_r,
               const SemanticCodec& codec, const ChannelConfig& ch, double tau, Rng& rng,
               NoiseLog* log) {
    if (z_r.rows() != x_r.rows()) {
        throw DimensionError("cc_loss: latent batch " + z_r.shape().str() +
                             " vs image batch " + x_r.shape().str());
    }
    Tensor recv_r = transmit(z_r, ch, rng, log);
    Tensor recv_e = transmit(z_e, ch, rng, log);
    Tensor enc_term =
        contrastive_encoder_term(l2_normalize_rows(recv_r), l2_normalize_rows(recv_e), tau);
    Tensor dec_term = recon_nll(x_r, codec.decode(recv_r));
    return add(enc_term, dec_term);
}

Tensor total_unlearn_loss(const Tensor& ju, const Tensor& cc, const UnlearnConfig& cfg) {
    return add(mul_scalar(ju, cfg.alpha1), mul_scalar(cc, cfg.alpha2));
}

Tensor vbu_loss(const Tensor& x_e, const SemanticCodec& codec, const ChannelConfig& ch, Rng& rng,
                NoiseLog* log) {
    GaussianLatent lat = codec.encode(x_e);
    Tensor z = SemanticCodec::reparameterize(lat, rng);
    Tensor x_hat = codec.decode(transmit(z, ch, rng, log));
    return sub(kl_diag_gauss_to_std_normal(lat), recon_nll(x_e, x_hat));
}

// ---- finite-difference suite --------------------------------------------------

double GradSuiteResult::worst() const { return std::max({vib, ju, cc, total}); }

namespace {

Tensor random_batch(int rows, int cols, Rng& rng) {
    std::vector<double> v(static_cast<size_t>(rows) * cols);
    for (auto& x : v) x = rng.uniform01();
    return Tensor::constant(std::move(v), {rows, cols});
}

// Runs one grad_check with the channel realization recorded on a first pass
// and replayed for every finite-difference evaluation.
double check_with_replay(const std::function<Tensor(Rng&, NoiseLog*)>& build,
                         std::vector<Parameter>& params, std::uint64_t seed, double eps) {
    NoiseLog log;
    {
        Rng rng(seed);
        build(rng, &log);  // record channel offsets
    }
    log.mode = NoiseLog::Mode::replay;
    auto fn = [&]() {
        log.rewind();
        Rng rng(seed);
        return build(rng, &log);
    };
    return grad_check(fn, params, eps);
}

}  // namespace

GradSuiteResult run_grad_suite(int num_seeds, double eps) {
    GradSuiteResult res;
    for (int s = 0; s < num_seeds; ++s) {
        const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(s);
        Rng init(seed);

        CodecConfig cfg;
        cfg.input_dim = 10;
        cfg.hidden = {8, 6};
        cfg.latent_dim = 3;
        cfg.beta = 0.05;
        SemanticCodec codec = SemanticCodec::make(cfg, init);
        SemanticCodec frozen = codec.clone_frozen();
        // Nudge the live codec away from the frozen copy so the anchor terms
        // are active at the checkpoint.
        {
            auto ps = codec.params();
            Rng jitter(seed ^ 0x5eedULL);
            for (auto& p : ps) {
                for (auto& v : p.tensor.values_mut()) v += 0.02 * jitter.normal();
            }
        }

        ChannelConfig ch;
        ch.kind = ChannelKind::awgn;
        ch.snr_db = 15.0;

        Tensor x = random_batch(4, cfg.input_dim, init);
        Tensor x_r = random_batch(4, cfg.input_dim, init);
        auto params = codec.params();

        res.vib = std::max(
            res.vib, check_with_replay(
                         [&](Rng& rng, NoiseLog* log) { return vib_loss(x, codec, ch, rng, log); },
                         params, seed, eps));

        res.ju = std::max(
            res.ju,
            check_with_replay(
                [&](Rng& rng, NoiseLog* log) { return ju_loss(x, codec, frozen, ch, rng, log); },
                params, seed, eps));

        res.cc = std::max(
            res.cc, check_with_replay(
                        [&](Rng& rng, NoiseLog* log) {
                            GaussianLatent lat_r = codec.encode(x_r);
                            Tensor z_r = SemanticCodec::reparameterize(lat_r, rng);
                            GaussianLatent lat_e = codec.encode(x);
                            Tensor z_e = SemanticCodec::reparameterize(lat_e, rng);
                            return cc_loss(z_r, z_e, x_r, codec, ch, 0.5, rng, log);
                        },
                        params, seed, eps));

        res.total = std::max(
            res.total, check_with_replay(
                           [&](Rng& rng, NoiseLog* log) {
                               UnlearnConfig ucfg;
                               GaussianLatent lat_e = codec.encode(x);
                               Tensor z_e = SemanticCodec::reparameterize(lat_e, rng);
                               GaussianLatent lat_r = codec.encode(x_r);
                               Tensor z_r = SemanticCodec::reparameterize(lat_r, rng);
                               Tensor ju =
                                   ju_loss_parts(x, lat_e, z_e, codec, frozen, ch, rng, log).total;
                               Tensor cc = cc_loss(z_r, z_e, x_r, codec, ch, ucfg.tau, rng, log);
                               return total_unlearn_loss(ju, cc, ucfg);
                           },
                           params, seed, eps));
    }
    return res;
}

}  // namespace semu
