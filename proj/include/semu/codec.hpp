#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "semu/mlp.hpp"
#include "semu/rng.hpp"
#include "semu/tensor.hpp"

namespace semu {

// Diagonal-Gaussian posterior over the latent code: one (mu, log-variance)
// pair per sample.
struct GaussianLatent {
    Tensor mu;      // batch x d
    Tensor logvar;  // batch x d
};

struct CodecConfig {
    int input_dim = 64;
    std::vector<int> hidden = {256, 128, 64};  // encoder widths; decoder mirrors them
    int latent_dim = 8;
    double beta = 1e-3;  // weight of the KL term in the training objective

    bool operator==(const CodecConfig&) const = default;
};

// Log-variance head is clamped to this range so the KL term cannot blow up.
inline constexpr double kLogvarClampLo = -10.0;
inline constexpr double kLogvarClampHi = 10.0;

// Paired stochastic encoder and deterministic decoder. The encoder emits
// 2*latent_dim values split into (mu, logvar); the decoder maps a latent
// back to pixel space through a sigmoid.
class SemanticCodec {
public:
    SemanticCodec() = default;

    static SemanticCodec make(const CodecConfig& cfg, Rng& rng);

    GaussianLatent encode(const Tensor& x) const;
    Tensor decode(const Tensor& z) const;

    // z = mu + exp(logvar/2) * eps with eps ~ N(0, I). Gradient flows into
    // mu and logvar, never into eps.
    static Tensor reparameterize(const GaussianLatent& lat, Rng& rng);
    static Tensor reparameterize_with(const GaussianLatent& lat, const Tensor& eps);

    // Deep copy that keeps training enabled.
    SemanticCodec clone_trainable() const;
    // Deep copy whose parameters never receive gradients; used as the
    // anchor model during unlearning.
    SemanticCodec clone_frozen() const;

    std::vector<Parameter> params() const;
    std::string checksum() const;

    const CodecConfig& config() const { return cfg_; }
    const Mlp& encoder() const { return encoder_; }
    const Mlp& decoder() const { return decoder_; }

    // Used by the model loader, which reconstructs layers directly.
    static SemanticCodec from_parts(const CodecConfig& cfg, Mlp encoder, Mlp decoder);

private:
    CodecConfig cfg_;
    Mlp encoder_;
    Mlp decoder_;
};

// One-hidden-layer softmax classifier operating on decoded images. It is
// trained once on the original codec's outputs and then held fixed while
// codecs are unlearned.
class DownstreamClassifier {
public:
    DownstreamClassifier() = default;

    static DownstreamClassifier make(int input_dim, int hidden, int classes, Rng& rng);

    Tensor logits(const Tensor& x) const;
    std::vector<int> predict(const Tensor& x) const;

    std::vector<Parameter> params() const;
    int classes() const { return classes_; }
    int input_dim() const { return net_.input_dim(); }
    int hidden_width() const { return net_.hidden().empty() ? 0 : net_.hidden()[0]; }

    static DownstreamClassifier from_parts(Mlp net, int classes);
    const Mlp& net() const { return net_; }

private:
    Mlp net_;
    int classes_ = 0;
};

struct DownstreamTrainOptions {
    int epochs = 20;
    double lr = 1e-3;
    int batch = 32;
    int hidden = 128;
};

struct DownstreamTrainResult {
    DownstreamClassifier classifier;
    double train_accuracy = 0.0;
};

// Softmax cross-entropy training by SGD on (decoded image, label) pairs.
DownstreamTrainResult train_downstream(const Tensor& images, const std::vector<int>& labels,
                                       int classes, const DownstreamTrainOptions& opts,
                                       std::uint64_t seed);

// mean over batch of [logsumexp(logits_i) - logits_i[label_i]]
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace semu
