#include "semu/channel.hpp"

#include <cmath>

#include "semu/errors.hpp"

namespace semu {

ChannelKind channel_kind_from_string(const std::string& s) {
    if (s == "awgn") return ChannelKind::awgn;
    if (s == "rayleigh") return ChannelKind::rayleigh;
    if (s == "rician") return ChannelKind::rician;
    throw ContractError("unknown channel kind '" + s + "' (expected awgn|rayleigh|rician)");
}

std::string to_string(ChannelKind k) {
    switch (k) {
        case ChannelKind::awgn: return "awgn";
        case ChannelKind::rayleigh: return "rayleigh";
        case ChannelKind::rician: return "rician";
    }
    return "?";
}

double snr_db_to_noise_var(double snr_db, double signal_power) {
    if (!(signal_power > 0.0)) {
        throw ContractError("snr_db_to_noise_var: signal power must be positive "
                            "(all-zero latent batch?)");
    }
    if (!std::isfinite(snr_db)) {
        throw ContractError("snr_db_to_noise_var: snr_db must be finite");
    }
    return signal_power / std::pow(10.0, snr_db / 10.0);
}

namespace {

// |h| for one sample. Resamples near-zero gains so the zero-forcing division
// stays bounded.
double fading_gain(const ChannelConfig& cfg, Rng& rng) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        double re, im;
        if (cfg.kind == ChannelKind::rayleigh) {
            re = rng.normal() / std::sqrt(2.0);
            im = rng.normal() / std::sqrt(2.0);
        } else {  // rician
            const double k = cfg.rician_k;
            const double los = std::sqrt(k / (k + 1.0));
            const double scatter = std::sqrt(1.0 / (k + 1.0));
            re = los + scatter * rng.normal() / std::sqrt(2.0);
            im = scatter * rng.normal() / std::sqrt(2.0);
        }
        const double mag = std::sqrt(re * re + im * im);
        if (mag >= 1e-6) return mag;
    }
    throw NumericError("transmit: fading gain stayed below 1e-6 after 100 resamples");
}

}  // namespace

Tensor transmit(const Tensor& z, const ChannelConfig& cfg, Rng& rng, NoiseLog* log) {
    const int n = z.rows(), d = z.cols();

    std::vector<double> offset;
    if (log != nullptr && log->mode == NoiseLog::Mode::replay) {
        if (log->cursor >= log->offsets.size()) {
            throw ContractError("transmit: noise log exhausted during replay");
        }
        offset = log->offsets[log->cursor++];
        if (offset.size() != static_cast<size_t>(z.size())) {
            throw ContractError("transmit: replayed noise shape does not match input");
        }
    } else {
        if (cfg.rician_k < 0.0) throw ContractError("transmit: rician_k must be >= 0");
        double power = 0.0;
        for (double v : z.values()) power += v * v;
        power /= static_cast<double>(z.size());
        const double sigma = std::sqrt(snr_db_to_noise_var(cfg.snr_db, power));

        offset.resize(static_cast<size_t>(z.size()));
        for (int i = 0; i < n; ++i) {
            const double gain =
                cfg.kind == ChannelKind::awgn ? 1.0 : fading_gain(cfg, rng);
            for (int j = 0; j < d; ++j) {
                offset[static_cast<size_t>(i) * d + j] = sigma * rng.normal() / gain;
            }
        }
        if (log != nullptr) {
            log->offsets.push_back(offset);
            ++log->cursor;
        }
    }

    return add(z, Tensor::constant(std::move(offset), z.shape()));
}

}  // namespace semu
