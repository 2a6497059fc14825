#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semu/tensor.hpp"

namespace semu {

// Images as flattened rows in [0, 1], labels only consumed by the
// downstream evaluator (codec training is unsupervised).
struct LabeledDataset {
    int h = 0;
    int w = 0;
    int classes = 0;
    std::vector<double> images;  // n * (h*w), row-major
    std::vector<int> labels;
    std::string provenance;  // "idx-file" or "synthetic"

    int n() const { return static_cast<int>(labels.size()); }
    int dim() const { return h * w; }

    double pixel(int sample, int row, int col) const {
        return images[static_cast<size_t>(sample) * dim() + static_cast<size_t>(row) * w + col];
    }

    // Rows gathered into a constant tensor.
    Tensor batch(const std::vector<int>& indices) const;
    Tensor all() const;
    std::vector<int> labels_at(const std::vector<int>& indices) const;
};

struct BackdoorSpec {
    int patch_side = 2;
    double patch_value = 1.0;
    int target_label = 0;
};

// Erased/remaining index partition at a given erased-data ratio.
struct SplitDataset {
    std::vector<int> erased;
    std::vector<int> remaining;
    double edr = 0.0;
};

// IDX (big-endian) ingestion; magics 0x00000803 for images, 0x00000801 for
// labels. Pixels scale from [0,255] to [0,1].
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const LabeledDataset& ds, const std::string& images_path,
              const std::string& labels_path);

// Class-conditional Gaussian blobs on an h x w grid: class k lights a bump
// at a class-specific location, plus pixel noise, clamped and quantized to
// the 8-bit grid so an IDX round trip is exact.
LabeledDataset generate_synthetic(int n, int h, int w, int classes, std::uint64_t seed);

// Copy of ds with the bottom-right patch stamped onto the given samples and
// their labels rewritten to the trigger target.
LabeledDataset inject_backdoor(const LabeledDataset& ds, const std::vector<int>& indices,
                               const BackdoorSpec& spec);

// Uniform split without replacement; round(edr * n) samples are erased.
SplitDataset split_erased(const LabeledDataset& ds, double edr, std::uint64_t seed);

}  // namespace semu
