#include "semu/codec.hpp"

#include <algorithm>
#include <cmath>

#include "semu/errors.hpp"

namespace semu {

SemanticCodec SemanticCodec::make(const CodecConfig& cfg, Rng& rng) {
    if (cfg.latent_dim <= 0 || cfg.input_dim <= 0) {
        throw ContractError("SemanticCodec: input_dim and latent_dim must be positive");
    }
    SemanticCodec c;
    c.cfg_ = cfg;
    c.encoder_ = Mlp::make("enc", cfg.input_dim, cfg.hidden, 2 * cfg.latent_dim, rng);
    std::vector<int> mirrored(cfg.hidden.rbegin(), cfg.hidden.rend());
    c.decoder_ = Mlp::make("dec", cfg.latent_dim, mirrored, cfg.input_dim, rng);
    return c;
}

SemanticCodec SemanticCodec::from_parts(const CodecConfig& cfg, Mlp encoder, Mlp decoder) {
    SemanticCodec c;
    c.cfg_ = cfg;
    c.encoder_ = std::move(encoder);
    c.decoder_ = std::move(decoder);
    return c;
}

GaussianLatent SemanticCodec::encode(const Tensor& x) const {
    const int d = cfg_.latent_dim;
    Tensor head = encoder_.forward(x);  // batch x 2d
    GaussianLatent lat;
    lat.mu = slice_cols(head, 0, d);
    lat.logvar = clamp(slice_cols(head, d, 2 * d), kLogvarClampLo, kLogvarClampHi);
    return lat;
}

Tensor SemanticCodec::decode(const Tensor& z) const { return sigmoid(decoder_.forward(z)); }

Tensor SemanticCodec::reparameterize(const GaussianLatent& lat, Rng& rng) {
    Tensor eps =
        Tensor::constant(rng.normal_vec(static_cast<size_t>(lat.mu.size())), lat.mu.shape());
    return reparameterize_with(lat, eps);
}

Tensor SemanticCodec::reparameterize_with(const GaussianLatent& lat, const Tensor& eps) {
    if (!(eps.shape() == lat.mu.shape())) {
        throw DimensionError("reparameterize: eps " + eps.shape().str() + " vs mu " +
                             lat.mu.shape().str());
    }
    return add(lat.mu, mul(exp(mul_scalar(lat.logvar, 0.5)), eps));
}

SemanticCodec SemanticCodec::clone_trainable() const {
    SemanticCodec c;
    c.cfg_ = cfg_;
    c.encoder_ = encoder_.clone(true);
    c.decoder_ = decoder_.clone(true);
    return c;
}

SemanticCodec SemanticCodec::clone_frozen() const {
    SemanticCodec c;
    c.cfg_ = cfg_;
    c.encoder_ = encoder_.clone(false);
    c.decoder_ = decoder_.clone(false);
    return c;
}

std::vector<Parameter> SemanticCodec::params() const {
    auto out = encoder_.params();
    auto dec = decoder_.params();
    out.insert(out.end(), dec.begin(), dec.end());
    return out;
}

std::string SemanticCodec::checksum() const { return parameter_checksum(params()); }

// ---- downstream classifier ---------------------------------------------------

DownstreamClassifier DownstreamClassifier::make(int input_dim, int hidden, int classes,
                                                Rng& rng) {
    if (classes < 2) throw ContractError("DownstreamClassifier: need at least 2 classes");
    DownstreamClassifier c;
    c.net_ = Mlp::make("cls", input_dim, {hidden}, classes, rng);
    c.classes_ = classes;
    return c;
}

DownstreamClassifier DownstreamClassifier::from_parts(Mlp net, int classes) {
    DownstreamClassifier c;
    c.net_ = std::move(net);
    c.classes_ = classes;
    return c;
}

Tensor DownstreamClassifier::logits(const Tensor& x) const { return net_.forward(x); }

std::vector<int> DownstreamClassifier::predict(const Tensor& x) const {
    Tensor lg = logits(x);
    std::vector<int> out(static_cast<size_t>(lg.rows()));
    for (int i = 0; i < lg.rows(); ++i) {
        int best = 0;
        for (int j = 1; j < lg.cols(); ++j) {
            if (lg.at(i, j) > lg.at(i, best)) best = j;
        }
        out[static_cast<size_t>(i)] = best;
    }
    return out;
}

std::vector<Parameter> DownstreamClassifier::params() const { return net_.params(); }

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    const int n = logits.rows(), c = logits.cols();
    if (static_cast<int>(labels.size()) != n) {
        throw DimensionError("softmax_cross_entropy: batch " + std::to_string(n) + " vs " +
                             std::to_string(labels.size()) + " labels");
    }
    // picked = row_sum(logits * onehot)
    std::vector<double> mask(static_cast<size_t>(n) * c, 0.0);
    for (int i = 0; i < n; ++i) {
        const int y = labels[static_cast<size_t>(i)];
        if (y < 0 || y >= c) {
            throw ContractError("softmax_cross_entropy: label " + std::to_string(y) +
                                " outside [0, " + std::to_string(c) + ")");
        }
        mask[static_cast<size_t>(i) * c + y] = 1.0;
    }
    Tensor picked = row_sum(mul(logits, Tensor::constant(std::move(mask), logits.shape())));
    return mean_all(sub(logsumexp_rows(logits), picked));
}

DownstreamTrainResult train_downstream(const Tensor& images, const std::vector<int>& labels,
                                       int classes, const DownstreamTrainOptions& opts,
                                       std::uint64_t seed) {
    const int n = images.rows();
    if (n == 0) throw ContractError("train_downstream: empty dataset");
    if (static_cast<int>(labels.size()) != n) {
        throw ContractError("train_downstream: image/label count mismatch");
    }

    Rng rng(seed);
    auto cls = DownstreamClassifier::make(images.cols(), opts.hidden, classes, rng);
    auto params = cls.params();

    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    const int dim = images.cols();
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        for (int i = n - 1; i > 0; --i) {
            std::swap(order[static_cast<size_t>(i)],
                      order[rng.uniform_below(static_cast<std::uint64_t>(i + 1))]);
        }
        for (int start = 0; start < n; start += opts.batch) {
            const int rows = std::min(opts.batch, n - start);
            std::vector<double> xb(static_cast<size_t>(rows) * dim);
            std::vector<int> yb(static_cast<size_t>(rows));
            for (int r = 0; r < rows; ++r) {
                const int src = order[static_cast<size_t>(start + r)];
                for (int j = 0; j < dim; ++j) {
                    xb[static_cast<size_t>(r) * dim + j] = images.at(src, j);
                }
                yb[static_cast<size_t>(r)] = labels[static_cast<size_t>(src)];
            }
            Tensor x = Tensor::constant(std::move(xb), {rows, dim});
            zero_grads(params);
            backward(softmax_cross_entropy(cls.logits(x), yb));
            sgd_step(params, opts.lr);
        }
    }

    auto preds = cls.predict(images);
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        if (preds[static_cast<size_t>(i)] == labels[static_cast<size_t>(i)]) ++hits;
    }
    return {cls, static_cast<double>(hits) / n};
}

}  // namespace semu
