#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semu/rng.hpp"
#include "semu/tensor.hpp"

namespace semu {

enum class ChannelKind { awgn, rayleigh, rician };

ChannelKind channel_kind_from_string(const std::string& s);
std::string to_string(ChannelKind k);

struct ChannelConfig {
    ChannelKind kind = ChannelKind::awgn;
    double snr_db = 5.0;
    double rician_k = 1.0;  // line-of-sight to scattered power ratio
    std::uint64_t seed = 0;
};

// sigma^2 = signal_power / 10^(snr_db/10).
double snr_db_to_noise_var(double snr_db, double signal_power);

// Records the additive perturbations a transmit() call produced so a
// numerical check can replay the identical channel realization. Gradcheck
// needs this: the perturbation enters the graph as a constant, so finite
// differences only agree with the analytic gradient if the realization is
// pinned across evaluations.
struct NoiseLog {
    enum class Mode { record, replay };
    Mode mode = Mode::record;
    std::vector<std::vector<double>> offsets;
    std::size_t cursor = 0;

    void rewind() { cursor = 0; }
};

// z' = z + e, where e is the equalized channel perturbation:
//   awgn      e = n,        n ~ N(0, sigma^2 I)
//   rayleigh  e = n / |h|,  h = (h_r + i h_i)/sqrt(2), h_r, h_i ~ N(0,1)
//   rician    e = n / |h|,  h = sqrt(K/(K+1)) + sqrt(1/(K+1)) CN(0,1)
// The fading gain is drawn per sample (row); sigma^2 comes from the mean
// of z^2 over the batch. No gradient flows into e.
Tensor transmit(const Tensor& z, const ChannelConfig& cfg, Rng& rng, NoiseLog* log = nullptr);

}  // namespace semu
