#include "semu/unlearn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_set>

namespace semu {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require_disjoint(const std::vector<int>& a, const std::vector<int>& b, const char* who) {
    std::unordered_set<int> seen(a.begin(), a.end());
    for (int i : b) {
        if (seen.count(i)) {
            throw ContractError(std::string(who) + ": erased and remaining sets overlap at index " +
                                std::to_string(i));
        }
    }
}

// First m of a seeded partial shuffle; falls back to sampling with
// replacement when the pool is smaller than the batch.
std::vector<int> sample_batch(const std::vector<int>& pool, int m, Rng& rng) {
    if (pool.empty()) throw ContractError("sample_batch: empty pool");
    std::vector<int> out;
    out.reserve(static_cast<size_t>(m));
    if (m <= static_cast<int>(pool.size())) {
        std::vector<int> idx(pool);
        for (int i = 0; i < m; ++i) {
            const int j =
                i + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(idx.size() - i)));
            std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
        }
        out.assign(idx.begin(), idx.begin() + m);
    } else {
        for (int i = 0; i < m; ++i) {
            out.push_back(pool[rng.uniform_below(pool.size())]);
        }
    }
    return out;
}

std::pair<SemanticCodec, TrainReport> train_on(const LabeledDataset& ds,
                                               const std::vector<int>& indices,
                                               const CodecConfig& cfg, const ChannelConfig& ch,
                                               const TrainOptions& opts, std::uint64_t seed,
                                               const EpochObserver& observer) {
    if (indices.empty()) throw ContractError("train: dataset is empty");
    if (opts.batch < 1) throw ContractError("train: batch must be >= 1");

    Rng rng(seed);
    SemanticCodec codec = SemanticCodec::make(cfg, rng);
    auto params = codec.params();

    TrainReport report;
    report.seed = seed;

    std::vector<int> order(indices);
    const auto t0 = Clock::now();
    double observer_seconds = 0.0;

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        for (size_t i = order.size() - 1; i > 0; --i) {
            std::swap(order[i], order[rng.uniform_below(i + 1)]);
        }
        double epoch_sum = 0.0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += opts.batch) {
            const size_t end = std::min(order.size(), start + opts.batch);
            std::vector<int> idx(order.begin() + start, order.begin() + end);
            try {
                Tensor x = ds.batch(idx);
                zero_grads(params);
                Tensor loss = vib_loss(x, codec, ch, rng);
                backward(loss);
                sgd_step(params, opts.lr);
                epoch_sum += loss.item();
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(batches) + ")");
            }
            report.work_units += 2.0 * static_cast<double>(idx.size());
            ++batches;
        }
        report.epoch_loss.push_back(batches > 0 ? epoch_sum / batches : 0.0);
        if (observer) {
            const auto o0 = Clock::now();
            observer(epoch, codec);
            observer_seconds += seconds_since(o0);
        }
    }

    report.wall_seconds = seconds_since(t0) - observer_seconds;
    report.checksum = codec.checksum();
    return {std::move(codec), std::move(report)};
}

}  // namespace

std::pair<SemanticCodec, TrainReport> train_original(const LabeledDataset& ds,
                                                     const CodecConfig& cfg,
                                                     const ChannelConfig& ch,
                                                     const TrainOptions& opts, std::uint64_t seed,
                                                     const EpochObserver& observer) {
    std::vector<int> all(static_cast<size_t>(ds.n()));
    for (int i = 0; i < ds.n(); ++i) all[static_cast<size_t>(i)] = i;
    return train_on(ds, all, cfg, ch, opts, seed, observer);
}

std::pair<SemanticCodec, TrainReport> retrain_oracle(const LabeledDataset& ds,
                                                     const std::vector<int>& remaining,
                                                     const CodecConfig& cfg,
                                                     const ChannelConfig& ch,
                                                     const TrainOptions& opts, std::uint64_t seed,
                                                     const EpochObserver& observer) {
    return train_on(ds, remaining, cfg, ch, opts, seed, observer);
}

std::pair<SemanticCodec, TrainReport> scu_unlearn(const SemanticCodec& codec,
                                                  const LabeledDataset& ds,
                                                  const std::vector<int>& erased,
                                                  const std::vector<int>& remaining,
                                                  const ChannelConfig& ch,
                                                  const UnlearnConfig& cfg, std::uint64_t seed,
                                                  const EpochObserver& observer) {
    if (erased.empty() || remaining.empty()) {
        throw ContractError("scu_unlearn: erased and remaining sets must be nonempty");
    }
    require_disjoint(erased, remaining, "scu_unlearn");
    if (cfg.batch < 2) {
        throw ContractError("scu_unlearn: batch must be >= 2 (the contrastive term needs "
                            "at least 2 remaining anchors)");
    }

    SemanticCodec unlearned = codec.clone_trainable();
    const SemanticCodec frozen = codec.clone_frozen();
    auto params = unlearned.params();

    TrainReport report;
    report.seed = seed;
    Rng rng(seed);
    const auto t0 = Clock::now();
    double observer_seconds = 0.0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto idx_e = sample_batch(erased, cfg.batch, rng);
        const auto idx_r = sample_batch(remaining, cfg.batch, rng);
        Tensor x_e = ds.batch(idx_e);
        Tensor x_r = ds.batch(idx_r);

        GaussianLatent lat_e = unlearned.encode(x_e);
        Tensor z_e = SemanticCodec::reparameterize(lat_e, rng);
        GaussianLatent lat_r = unlearned.encode(x_r);
        Tensor z_r = SemanticCodec::reparameterize(lat_r, rng);

        Tensor ju = ju_loss_parts(x_e, lat_e, z_e, unlearned, frozen, ch, rng).total;
        Tensor cc = cc_loss(z_r, z_e, x_r, unlearned, ch, cfg.tau, rng);
        Tensor loss = total_unlearn_loss(ju, cc, cfg);

        zero_grads(params);
        backward(loss);
        sgd_step(params, cfg.lr);

        report.epoch_loss.push_back(loss.item());
        report.work_units += 6.0 * cfg.batch;
        if (observer) {
            const auto o0 = Clock::now();
            observer(epoch, unlearned);
            observer_seconds += seconds_since(o0);
        }
    }

    report.wall_seconds = seconds_since(t0) - observer_seconds;
    report.checksum = unlearned.checksum();
    return {std::move(unlearned), std::move(report)};
}

std::pair<SemanticCodec, TrainReport> vbu_unlearn(const SemanticCodec& codec,
                                                  const LabeledDataset& ds,
                                                  const std::vector<int>& erased,
                                                  const ChannelConfig& ch,
                                                  const UnlearnConfig& cfg, std::uint64_t seed,
                                                  const EpochObserver& observer) {
    if (erased.empty()) throw ContractError("vbu_unlearn: erased set is empty");
    if (cfg.batch < 1) throw ContractError("vbu_unlearn: batch must be >= 1");

    SemanticCodec unlearned = codec.clone_trainable();
    auto params = unlearned.params();

    TrainReport report;
    report.seed = seed;
    Rng rng(seed);
    const auto t0 = Clock::now();
    double observer_seconds = 0.0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto idx_e = sample_batch(erased, cfg.batch, rng);
        Tensor x_e = ds.batch(idx_e);
        Tensor loss = vbu_loss(x_e, unlearned, ch, rng);
        zero_grads(params);
        backward(loss);
        sgd_step(params, cfg.lr);
        report.epoch_loss.push_back(loss.item());
        report.work_units += 2.0 * cfg.batch;
        if (observer) {
            const auto o0 = Clock::now();
            observer(epoch, unlearned);
            observer_seconds += seconds_since(o0);
        }
    }

    report.wall_seconds = seconds_since(t0) - observer_seconds;
    report.checksum = unlearned.checksum();
    return {std::move(unlearned), std::move(report)};
}

std::vector<double> hbu_update(const std::vector<double>& erased_grad_sum,
                               const std::vector<double>& fisher_diag, double damping,
                               double clip_norm) {
    if (erased_grad_sum.size() != fisher_diag.size()) {
        throw ContractError("hbu_update: gradient and Fisher sizes disagree");
    }
    if (!(damping > 0.0)) throw ContractError("hbu_update: damping must be positive");
    if (!(clip_norm > 0.0)) throw ContractError("hbu_update: clip_norm must be positive");

    std::vector<double> update(erased_grad_sum.size());
    double norm2 = 0.0;
    for (size_t i = 0; i < update.size(); ++i) {
        if (!std::isfinite(fisher_diag[i])) {
            throw NumericError("hbu_update: Fisher entry " + std::to_string(i) +
                               " is non-finite");
        }
        update[i] = erased_grad_sum[i] / (fisher_diag[i] + damping);
        norm2 += update[i] * update[i];
    }
    const double norm = std::sqrt(norm2);
    if (norm > clip_norm) {
        const double scale = clip_norm / norm;
        for (auto& u : update) u *= scale;
    }
    return update;
}

std::pair<SemanticCodec, TrainReport> hbu_unlearn(const SemanticCodec& codec,
                                                  const LabeledDataset& ds,
                                                  const std::vector<int>& erased,
                                                  const std::vector<int>& remaining,
                                                  const ChannelConfig& ch, const HbuOptions& opts,
                                                  std::uint64_t seed,
                                                  const EpochObserver& observer) {
    if (erased.empty() || remaining.empty()) {
        throw ContractError("hbu_unlearn: erased and remaining sets must be nonempty");
    }
    require_disjoint(erased, remaining, "hbu_unlearn");

    SemanticCodec unlearned = codec.clone_trainable();
    auto params = unlearned.params();

    size_t total = 0;
    for (const auto& p : params) total += static_cast<size_t>(p.tensor.size());

    TrainReport report;
    report.seed = seed;
    Rng rng(seed);
    const auto t0 = Clock::now();
    double observer_seconds = 0.0;

    // Diagonal empirical Fisher: mean of squared per-sample gradients of the
    // training objective over the remaining data.
    std::vector<double> fisher(total, 0.0);
    for (int i : remaining) {
        Tensor x = ds.batch({i});
        zero_grads(params);
        backward(vib_loss(x, unlearned, ch, rng));
        size_t k = 0;
        for (const auto& p : params) {
            for (double g : p.tensor.grad()) fisher[k++] += g * g;
        }
    }
    for (auto& f : fisher) f /= static_cast<double>(remaining.size());
    report.work_units += 2.0 * static_cast<double>(remaining.size());

    // Summed gradient over the erased set; scaling the mean-based loss by the
    // batch size turns per-batch means into per-sample sums.
    zero_grads(params);
    double erased_loss_sum = 0.0;
    const int kGradBatch = 64;
    for (size_t start = 0; start < erased.size(); start += kGradBatch) {
        const size_t end = std::min(erased.size(), start + kGradBatch);
        std::vector<int> idx(erased.begin() + start, erased.begin() + end);
        Tensor x = ds.batch(idx);
        Tensor loss_sum = mul_scalar(vib_loss(x, unlearned, ch, rng),
                                     static_cast<double>(idx.size()));
        backward(loss_sum);
        erased_loss_sum += loss_sum.item();
    }
    report.work_units += 2.0 * static_cast<double>(erased.size());

    std::vector<double> grad_sum(total);
    {
        size_t k = 0;
        for (const auto& p : params) {
            for (double g : p.tensor.grad()) grad_sum[k++] = g;
        }
    }

    const auto update = hbu_update(grad_sum, fisher, opts.damping, opts.clip_norm);
    {
        size_t k = 0;
        for (auto& p : params) {
            for (auto& v : p.tensor.values_mut()) v += update[k++];
        }
    }
    zero_grads(params);

    report.epoch_loss.assign(static_cast<size_t>(std::max(opts.epochs, 1)),
                             erased_loss_sum / static_cast<double>(erased.size()));
    if (observer) {
        const auto o0 = Clock::now();
        observer(0, unlearned);
        observer_seconds += seconds_since(o0);
    }
    report.wall_seconds = seconds_since(t0) - observer_seconds;
    report.checksum = unlearned.checksum();
    return {std::move(unlearned), std::move(report)};
}

}  // namespace semu
