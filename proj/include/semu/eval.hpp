#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semu/channel.hpp"
#include "semu/codec.hpp"
#include "semu/config.hpp"
#include "semu/data.hpp"
#include "semu/unlearn.hpp"

namespace semu {

// Full pipeline for one batch: encode, sample, channel, decode.
Tensor decode_through(const SemanticCodec& codec, const Tensor& x, const ChannelConfig& ch,
                      Rng& rng);

// Mean per-pixel squared reconstruction error over the subset; channel
// noise drawn from the given seed for reproducibility.
double decode_mse(const SemanticCodec& codec, const LabeledDataset& ds,
                  const std::vector<int>& indices, const ChannelConfig& ch, std::uint64_t seed);

// Fraction of decoded erased samples the (fixed) downstream classifier
// assigns to the trigger target class.
double backdoor_accuracy(const DownstreamClassifier& cls, const SemanticCodec& codec,
                         const LabeledDataset& ds, const std::vector<int>& erased,
                         int target_label, const ChannelConfig& ch, std::uint64_t seed);

// Fraction of decoded samples classified as their true label.
double clean_accuracy(const DownstreamClassifier& cls, const SemanticCodec& codec,
                      const LabeledDataset& ds, const std::vector<int>& indices,
                      const ChannelConfig& ch, std::uint64_t seed);

struct MetricsReport {
    std::string method;
    double edr = 0.0;
    double snr_db = 0.0;
    std::string channel;
    std::uint64_t seed = 0;

    // headline metrics, post-unlearning
    double clean_acc = 0.0;
    double backdoor_acc = 0.0;
    double mse_clean = 0.0;
    double mse_erased = 0.0;
    // deterministic modeled runtime (work units at a fixed nominal rate);
    // the measured wall clock is reported separately
    double runtime_s = 0.0;
    double wall_seconds = 0.0;

    // pre-unlearning state of the same pipeline
    double pre_clean_acc = 0.0;
    double pre_backdoor_acc = 0.0;
    double pre_mse_clean = 0.0;
    double pre_mse_erased = 0.0;

    std::vector<double> loss_curve;
    std::vector<double> mse_clean_curve;
    std::vector<double> mse_erased_curve;
};

struct ExperimentConfig {
    std::string data_kind = "synthetic";  // synthetic | idx
    std::string train_images, train_labels, test_images, test_labels;
    int n = 2000;
    int test_n = 500;
    int h = 8;
    int w = 8;
    int classes = 10;

    BackdoorSpec backdoor;
    CodecConfig codec;
    TrainOptions train;
    DownstreamTrainOptions downstream;
    UnlearnConfig unlearn;
    HbuOptions hbu;
    double rician_k = 1.0;

    std::vector<double> edrs{0.06};
    std::vector<double> snrs{5.0};
    std::vector<std::string> channels{"awgn"};
    std::vector<std::string> methods{"scu"};
    std::vector<std::uint64_t> seeds{1};

    std::string out_dir;

    // Parses the flat dotted-key document, rejecting unknown keys.
    static ExperimentConfig from_kv(KvReader& kv);
    void validate() const;
};

// Runs every (method x edr x snr x channel x seed) cell. Cells sharing a
// trained codec are grouped; groups may execute concurrently (THREADS
// environment variable caps the worker count). Reports come back sorted by
// (method, edr, snr_db, channel, seed).
std::vector<MetricsReport> run_experiment(const ExperimentConfig& cfg);

// Nominal seconds per work unit used for the deterministic runtime_s field.
inline constexpr double kSecondsPerWorkUnit = 2e-6;

}  // namespace semu
