#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "semu/channel.hpp"
#include "semu/codec.hpp"
#include "semu/data.hpp"
#include "semu/losses.hpp"

namespace semu {

struct TrainOptions {
    int epochs = 30;
    double lr = 1e-4;
    int batch = 16;
};

struct TrainReport {
    std::vector<double> epoch_loss;  // one entry per epoch
    double wall_seconds = 0.0;       // measured, excludes observer callbacks
    double work_units = 0.0;         // deterministic count of per-sample model passes
    std::string checksum;            // parameter checksum of the returned codec
    std::uint64_t seed = 0;
};

// Invoked after each epoch with the current model; runs outside the wall
// clock so metric probes do not distort runtime comparisons.
using EpochObserver = std::function<void(int epoch, const SemanticCodec&)>;

// Minibatch SGD on the VIB objective over the whole dataset.
std::pair<SemanticCodec, TrainReport> train_original(const LabeledDataset& ds,
                                                     const CodecConfig& cfg,
                                                     const ChannelConfig& ch,
                                                     const TrainOptions& opts, std::uint64_t seed,
                                                     const EpochObserver& observer = nullptr);

// Gold standard: fresh initialization trained only on the remaining samples.
std::pair<SemanticCodec, TrainReport> retrain_oracle(const LabeledDataset& ds,
                                                     const std::vector<int>& remaining,
                                                     const CodecConfig& cfg,
                                                     const ChannelConfig& ch,
                                                     const TrainOptions& opts, std::uint64_t seed,
                                                     const EpochObserver& observer = nullptr);

// Joint unlearning plus contrastive compensation against a frozen clone of
// the input codec. One minibatch of erased and one of remaining data per
// epoch, single SGD step on alpha1*L_ju + alpha2*L_cc.
std::pair<SemanticCodec, TrainReport> scu_unlearn(const SemanticCodec& codec,
                                                  const LabeledDataset& ds,
                                                  const std::vector<int>& erased,
                                                  const std::vector<int>& remaining,
                                                  const ChannelConfig& ch,
                                                  const UnlearnConfig& cfg, std::uint64_t seed,
                                                  const EpochObserver& observer = nullptr);

// Baseline: the mutual-information minimization terms alone, trained on
// erased minibatches only.
std::pair<SemanticCodec, TrainReport> vbu_unlearn(const SemanticCodec& codec,
                                                  const LabeledDataset& ds,
                                                  const std::vector<int>& erased,
                                                  const ChannelConfig& ch,
                                                  const UnlearnConfig& cfg, std::uint64_t seed,
                                                  const EpochObserver& observer = nullptr);

struct HbuOptions {
    double damping = 1e-3;
    double clip_norm = 5.0;
    int epochs = 1;  // the update itself is one step; kept for report shape
};

// Baseline: one-step influence removal
//   theta <- theta + H^-1 * sum_{x in D_e} grad l(x, theta)
// with H approximated by the diagonal empirical Fisher over the remaining
// data plus damping, and the update vector clipped to clip_norm.
std::pair<SemanticCodec, TrainReport> hbu_unlearn(const SemanticCodec& codec,
                                                  const LabeledDataset& ds,
                                                  const std::vector<int>& erased,
                                                  const std::vector<int>& remaining,
                                                  const ChannelConfig& ch, const HbuOptions& opts,
                                                  std::uint64_t seed,
                                                  const EpochObserver& observer = nullptr);

// The HBU update vector: grad_sum / (fisher + damping), rescaled if its L2
// norm exceeds clip_norm. Exposed so the closed-form test can hit it
// directly.
std::vector<double> hbu_update(const std::vector<double>& erased_grad_sum,
                               const std::vector<double>& fisher_diag, double damping,
                               double clip_norm);

}  // namespace semu
