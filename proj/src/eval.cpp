#include "semu/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <tuple>

namespace semu {

Tensor decode_through(const SemanticCodec& codec, const Tensor& x, const ChannelConfig& ch,
                      Rng& rng) {
    GaussianLatent lat = codec.encode(x);
    Tensor z = SemanticCodec::reparameterize(lat, rng);
    return codec.decode(transmit(z, ch, rng));
}

double decode_mse(const SemanticCodec& codec, const LabeledDataset& ds,
                  const std::vector<int>& indices, const ChannelConfig& ch, std::uint64_t seed) {
    if (indices.empty()) throw ContractError("decode_mse: empty subset");
    Rng rng(seed);
    Tensor x = ds.batch(indices);
    Tensor x_hat = decode_through(codec, x, ch, rng);
    double total = 0.0;
    const auto& a = x.values();
    const auto& b = x_hat.values();
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        total += d * d;
    }
    return total / static_cast<double>(a.size());
}

namespace {

std::vector<int> predict_through(const DownstreamClassifier& cls, const SemanticCodec& codec,
                                 const LabeledDataset& ds, const std::vector<int>& indices,
                                 const ChannelConfig& ch, std::uint64_t seed) {
    if (indices.empty()) throw ContractError("accuracy: empty subset");
    Rng rng(seed);
    Tensor x = ds.batch(indices);
    return cls.predict(decode_through(codec, x, ch, rng));
}

}  // namespace

double backdoor_accuracy(const DownstreamClassifier& cls, const SemanticCodec& codec,
                         const LabeledDataset& ds, const std::vector<int>& erased,
                         int target_label, const ChannelConfig& ch, std::uint64_t seed) {
    const auto preds = predict_through(cls, codec, ds, erased, ch, seed);
    int hits = 0;
    for (int p : preds) {
        if (p == target_label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double clean_accuracy(const DownstreamClassifier& cls, const SemanticCodec& codec,
                      const LabeledDataset& ds, const std::vector<int>& indices,
                      const ChannelConfig& ch, std::uint64_t seed) {
    const auto preds = predict_through(cls, codec, ds, indices, ch, seed);
    int hits = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == ds.labels[static_cast<size_t>(indices[i])]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

// ---- experiment matrix ---------------------------------------------------------

ExperimentConfig ExperimentConfig::from_kv(KvReader& kv) {
    ExperimentConfig c;
    c.data_kind = kv.get_string("data.kind", c.data_kind);
    c.train_images = kv.get_string("data.train_images", "");
    c.train_labels = kv.get_string("data.train_labels", "");
    c.test_images = kv.get_string("data.test_images", "");
    c.test_labels = kv.get_string("data.test_labels", "");
    c.n = kv.get_int("data.n", c.n);
    c.test_n = kv.get_int("data.test_n", c.test_n);
    c.h = kv.get_int("data.h", c.h);
    c.w = kv.get_int("data.w", c.w);
    c.classes = kv.get_int("data.classes", c.classes);

    c.backdoor.patch_side = kv.get_int("backdoor.patch_side", c.backdoor.patch_side);
    c.backdoor.patch_value = kv.get_double("backdoor.patch_value", c.backdoor.patch_value);
    c.backdoor.target_label = kv.get_int("backdoor.target_label", c.backdoor.target_label);

    c.codec.latent_dim = kv.get_int("codec.latent_dim", c.codec.latent_dim);
    c.codec.beta = kv.get_double("codec.beta", c.codec.beta);
    c.codec.hidden = kv.get_int_list("codec.hidden", c.codec.hidden);

    c.train.epochs = kv.get_int("train.epochs", c.train.epochs);
    c.train.lr = kv.get_double("train.lr", c.train.lr);
    c.train.batch = kv.get_int("train.batch", c.train.batch);

    c.downstream.epochs = kv.get_int("downstream.epochs", c.downstream.epochs);
    c.downstream.lr = kv.get_double("downstream.lr", c.downstream.lr);
    c.downstream.batch = kv.get_int("downstream.batch", c.downstream.batch);
    c.downstream.hidden = kv.get_int("downstream.hidden", c.downstream.hidden);

    c.unlearn.alpha1 = kv.get_double("unlearn.alpha1", c.unlearn.alpha1);
    c.unlearn.alpha2 = kv.get_double("unlearn.alpha2", c.unlearn.alpha2);
    c.unlearn.tau = kv.get_double("unlearn.tau", c.unlearn.tau);
    c.unlearn.epochs = kv.get_int("unlearn.epochs", c.unlearn.epochs);
    c.unlearn.lr = kv.get_double("unlearn.lr", c.unlearn.lr);
    c.unlearn.batch = kv.get_int("unlearn.batch", c.unlearn.batch);

    c.hbu.damping = kv.get_double("hbu.damping", c.hbu.damping);
    c.hbu.clip_norm = kv.get_double("hbu.clip_norm", c.hbu.clip_norm);

    c.rician_k = kv.get_double("channel.rician_k", c.rician_k);

    c.edrs = kv.get_double_list("sweep.edr", c.edrs);
    c.snrs = kv.get_double_list("sweep.snr_db", c.snrs);
    c.channels = kv.get_string_list("sweep.channel", c.channels);
    c.methods = kv.get_string_list("sweep.method", c.methods);
    {
        auto seed_ints = kv.get_int_list("seeds", {});
        if (!seed_ints.empty()) {
            c.seeds.clear();
            for (int s : seed_ints) c.seeds.push_back(static_cast<std::uint64_t>(s));
        }
    }
    c.out_dir = kv.get_string("out_dir", c.out_dir);

    kv.reject_unknown();
    c.validate();
    return c;
}

void ExperimentConfig::validate() const {
    if (data_kind != "synthetic" && data_kind != "idx") {
        throw ContractError("data.kind must be synthetic or idx");
    }
    if (data_kind == "idx" &&
        (train_images.empty() || train_labels.empty() || test_images.empty() ||
         test_labels.empty())) {
        throw ContractError("idx data requires data.train_images/train_labels/"
                            "test_images/test_labels");
    }
    for (double e : edrs) {
        if (!(e > 0.0 && e < 1.0)) throw ContractError("sweep.edr entries must lie in (0, 1)");
    }
    for (const auto& m : methods) {
        if (m != "scu" && m != "vbu" && m != "hbu" && m != "retrain" && m != "none") {
            throw ContractError("unknown method '" + m + "' (scu|vbu|hbu|retrain|none)");
        }
    }
    for (const auto& ch : channels) channel_kind_from_string(ch);
    if (seeds.empty()) throw ContractError("seeds list is empty");
    if (!(unlearn.tau > 0.0)) throw ContractError("unlearn.tau must be positive");
}

namespace {

// Seeds for the pipeline stages, derived from the cell seed so that every
// stage is reproducible in isolation.
constexpr std::uint64_t kDataSalt = 0x5eed0001;
constexpr std::uint64_t kTestSalt = 0x5eed0002;
constexpr std::uint64_t kSplitSalt = 0x5eed0003;
constexpr std::uint64_t kTrainSalt = 0x5eed0004;
constexpr std::uint64_t kDecodeSalt = 0x5eed0005;
constexpr std::uint64_t kDownstreamSalt = 0x5eed0006;
constexpr std::uint64_t kEvalSalt = 0x5eed0007;
constexpr std::uint64_t kUnlearnSalt = 0x5eed0008;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

struct GroupKey {
    double edr;
    double snr_db;
    std::string channel;
    std::uint64_t seed;
};

struct MetricSnapshot {
    double clean_acc, backdoor_acc, mse_clean, mse_erased;
};

struct GroupContext {
    LabeledDataset train_poisoned;
    LabeledDataset test_clean;
    SplitDataset split;
    SemanticCodec codec0;
    DownstreamClassifier classifier;
    ChannelConfig channel;
    MetricSnapshot pre;
    std::vector<int> test_indices;
    std::vector<int> clean_probe;   // capped subsets for per-epoch curves
    std::vector<int> erased_probe;
};

MetricSnapshot measure(const GroupContext& g, const ExperimentConfig& cfg,
                       const SemanticCodec& codec, std::uint64_t seed) {
    MetricSnapshot m{};
    m.clean_acc = clean_accuracy(g.classifier, codec, g.test_clean, g.test_indices, g.channel,
                                 mix_seed(seed, kEvalSalt));
    m.backdoor_acc = backdoor_accuracy(g.classifier, codec, g.train_poisoned, g.split.erased,
                                       cfg.backdoor.target_label, g.channel,
                                       mix_seed(seed, kEvalSalt + 1));
    m.mse_clean =
        decode_mse(codec, g.test_clean, g.test_indices, g.channel, mix_seed(seed, kEvalSalt + 2));
    m.mse_erased = decode_mse(codec, g.train_poisoned, g.split.erased, g.channel,
                              mix_seed(seed, kEvalSalt + 3));
    return m;
}

GroupContext build_group(const ExperimentConfig& cfg, const GroupKey& key) {
    GroupContext g;
    g.channel.kind = channel_kind_from_string(key.channel);
    g.channel.snr_db = key.snr_db;
    g.channel.rician_k = cfg.rician_k;

    LabeledDataset train_clean;
    if (cfg.data_kind == "synthetic") {
        train_clean = generate_synthetic(cfg.n, cfg.h, cfg.w, cfg.classes,
                                         mix_seed(key.seed, kDataSalt));
        g.test_clean = generate_synthetic(cfg.test_n, cfg.h, cfg.w, cfg.classes,
                                          mix_seed(key.seed, kTestSalt));
    } else {
        train_clean = load_idx(cfg.train_images, cfg.train_labels);
        g.test_clean = load_idx(cfg.test_images, cfg.test_labels);
    }

    g.split = split_erased(train_clean, key.edr, mix_seed(key.seed, kSplitSalt));
    g.train_poisoned = inject_backdoor(train_clean, g.split.erased, cfg.backdoor);

    CodecConfig ccfg = cfg.codec;
    ccfg.input_dim = train_clean.dim();
    auto [codec0, train_report] = train_original(g.train_poisoned, ccfg, g.channel, cfg.train,
                                                 mix_seed(key.seed, kTrainSalt));
    g.codec0 = std::move(codec0);

    // The downstream classifier learns from the original codec's decoded
    // training outputs (trigger included) and is then held fixed.
    std::vector<int> all(static_cast<size_t>(g.train_poisoned.n()));
    for (int i = 0; i < g.train_poisoned.n(); ++i) all[static_cast<size_t>(i)] = i;
    Rng dec_rng(mix_seed(key.seed, kDecodeSalt));
    Tensor decoded = decode_through(g.codec0, g.train_poisoned.all(), g.channel, dec_rng);
    auto down = train_downstream(decoded.detach(), g.train_poisoned.labels, cfg.classes,
                                 cfg.downstream, mix_seed(key.seed, kDownstreamSalt));
    g.classifier = std::move(down.classifier);

    g.test_indices.resize(static_cast<size_t>(g.test_clean.n()));
    for (int i = 0; i < g.test_clean.n(); ++i) g.test_indices[static_cast<size_t>(i)] = i;

    const int probe_n = std::min<int>(128, g.test_clean.n());
    g.clean_probe.assign(g.test_indices.begin(), g.test_indices.begin() + probe_n);
    const int probe_e = std::min<int>(128, static_cast<int>(g.split.erased.size()));
    g.erased_probe.assign(g.split.erased.begin(), g.split.erased.begin() + probe_e);

    g.pre = measure(g, cfg, g.codec0, key.seed);
    return g;
}

MetricsReport run_method(const ExperimentConfig& cfg, const GroupContext& g, const GroupKey& key,
                         const std::string& method) {
    MetricsReport r;
    r.method = method;
    r.edr = key.edr;
    r.snr_db = key.snr_db;
    r.channel = key.channel;
    r.seed = key.seed;
    r.pre_clean_acc = g.pre.clean_acc;
    r.pre_backdoor_acc = g.pre.backdoor_acc;
    r.pre_mse_clean = g.pre.mse_clean;
    r.pre_mse_erased = g.pre.mse_erased;

    const std::uint64_t useed = mix_seed(key.seed, kUnlearnSalt);
    EpochObserver observer = [&](int, const SemanticCodec& c) {
        r.mse_clean_curve.push_back(
            decode_mse(c, g.test_clean, g.clean_probe, g.channel, mix_seed(key.seed, kEvalSalt)));
        r.mse_erased_curve.push_back(decode_mse(c, g.train_poisoned, g.erased_probe, g.channel,
                                                mix_seed(key.seed, kEvalSalt + 1)));
    };

    SemanticCodec result;
    TrainReport report;
    if (method == "none") {
        result = g.codec0.clone_trainable();
        report.checksum = result.checksum();
    } else if (method == "scu") {
        std::tie(result, report) = scu_unlearn(g.codec0, g.train_poisoned, g.split.erased,
                                               g.split.remaining, g.channel, cfg.unlearn, useed,
                                               observer);
    } else if (method == "vbu") {
        std::tie(result, report) = vbu_unlearn(g.codec0, g.train_poisoned, g.split.erased,
                                               g.channel, cfg.unlearn, useed, observer);
    } else if (method == "hbu") {
        std::tie(result, report) = hbu_unlearn(g.codec0, g.train_poisoned, g.split.erased,
                                               g.split.remaining, g.channel, cfg.hbu, useed,
                                               observer);
    } else if (method == "retrain") {
        CodecConfig ccfg = cfg.codec;
        ccfg.input_dim = g.train_poisoned.dim();
        std::tie(result, report) = retrain_oracle(g.train_poisoned, g.split.remaining, ccfg,
                                                  g.channel, cfg.train, useed, observer);
    } else {
        throw ContractError("run_experiment: unknown method '" + method + "'");
    }

    const MetricSnapshot post =
        method == "none" ? g.pre : measure(g, cfg, result, key.seed);
    r.clean_acc = post.clean_acc;
    r.backdoor_acc = post.backdoor_acc;
    r.mse_clean = post.mse_clean;
    r.mse_erased = post.mse_erased;
    r.loss_curve = report.epoch_loss;
    r.runtime_s = report.work_units * kSecondsPerWorkUnit;
    r.wall_seconds = report.wall_seconds;
    return r;
}

int worker_count(size_t groups) {
    if (const char* env = std::getenv("THREADS")) {
        const int t = std::atoi(env);
        if (t >= 1) return std::min<size_t>(t, groups);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::min<size_t>(hw == 0 ? 1 : hw, groups));
}

}  // namespace

std::vector<MetricsReport> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();

    std::vector<GroupKey> keys;
    for (double edr : cfg.edrs)
        for (double snr : cfg.snrs)
            for (const auto& ch : cfg.channels)
                for (std::uint64_t seed : cfg.seeds) keys.push_back({edr, snr, ch, seed});

    std::vector<std::vector<MetricsReport>> per_group(keys.size());
    std::atomic<size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;

    auto work = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= keys.size()) return;
            try {
                GroupContext g = build_group(cfg, keys[i]);
                for (const auto& method : cfg.methods) {
                    per_group[i].push_back(run_method(cfg, g, keys[i], method));
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    const int threads = worker_count(keys.size());
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<MetricsReport> reports;
    for (auto& grp : per_group) {
        for (auto& r : grp) reports.push_back(std::move(r));
    }
    std::sort(reports.begin(), reports.end(), [](const MetricsReport& a, const MetricsReport& b) {
        return std::tie(a.method, a.edr, a.snr_db, a.channel, a.seed) <
               std::tie(b.method, b.edr, b.snr_db, b.channel, b.seed);
    });
    return reports;
}

}  // namespace semu
