#include "semu/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "semu/rng.hpp"

namespace semu {

Tensor LabeledDataset::batch(const std::vector<int>& indices) const {
    if (indices.empty()) throw ContractError("batch: empty index list");
    const int d = dim();
    std::vector<double> out(indices.size() * static_cast<size_t>(d));
    for (size_t r = 0; r < indices.size(); ++r) {
        const int i = indices[r];
        if (i < 0 || i >= n()) {
            throw ContractError("batch: index " + std::to_string(i) + " out of range [0, " +
                                std::to_string(n()) + ")");
        }
        std::copy_n(images.begin() + static_cast<size_t>(i) * d, d,
                    out.begin() + r * static_cast<size_t>(d));
    }
    return Tensor::constant(std::move(out), {static_cast<int>(indices.size()), d});
}

Tensor LabeledDataset::all() const {
    return Tensor::constant(images, {n(), dim()});
}

std::vector<int> LabeledDataset::labels_at(const std::vector<int>& indices) const {
    std::vector<int> out;
    out.reserve(indices.size());
    for (int i : indices) out.push_back(labels[static_cast<size_t>(i)]);
    return out;
}

// ---- IDX ----------------------------------------------------------------------

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path, std::size_t offset) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw FormatError(path + ": truncated at offset " + std::to_string(offset));
    }
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw IoError("cannot open " + images_path);
    std::ifstream lbls(labels_path, std::ios::binary);
    if (!lbls) throw IoError("cannot open " + labels_path);

    const std::uint32_t img_magic = read_be32(imgs, images_path, 0);
    if (img_magic != kImageMagic) {
        throw FormatError(images_path + ": bad magic at offset 0 (expected 0x00000803)");
    }
    const std::uint32_t count = read_be32(imgs, images_path, 4);
    const std::uint32_t rows = read_be32(imgs, images_path, 8);
    const std::uint32_t cols = read_be32(imgs, images_path, 12);

    const std::uint32_t lbl_magic = read_be32(lbls, labels_path, 0);
    if (lbl_magic != kLabelMagic) {
        throw FormatError(labels_path + ": bad magic at offset 0 (expected 0x00000801)");
    }
    const std::uint32_t lbl_count = read_be32(lbls, labels_path, 4);
    if (lbl_count != count) {
        throw FormatError(images_path + " and " + labels_path + ": counts disagree (" +
                          std::to_string(count) + " vs " + std::to_string(lbl_count) + ")");
    }

    LabeledDataset ds;
    ds.h = static_cast<int>(rows);
    ds.w = static_cast<int>(cols);
    ds.provenance = "idx-file";

    const std::size_t pixels = std::size_t(count) * rows * cols;
    std::vector<unsigned char> raw(pixels);
    if (!imgs.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels))) {
        throw FormatError(images_path + ": truncated pixel data at offset 16");
    }
    ds.images.resize(pixels);
    for (std::size_t i = 0; i < pixels; ++i) ds.images[i] = raw[i] / 255.0;

    std::vector<unsigned char> rawl(count);
    if (!lbls.read(reinterpret_cast<char*>(rawl.data()), static_cast<std::streamsize>(count))) {
        throw FormatError(labels_path + ": truncated label data at offset 8");
    }
    ds.labels.assign(rawl.begin(), rawl.end());
    int max_label = 0;
    for (int l : ds.labels) max_label = std::max(max_label, l);
    ds.classes = max_label + 1;
    return ds;
}

void save_idx(const LabeledDataset& ds, const std::string& images_path,
              const std::string& labels_path) {
    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) throw IoError("cannot write " + images_path);
    std::ofstream lbls(labels_path, std::ios::binary);
    if (!lbls) throw IoError("cannot write " + labels_path);

    write_be32(imgs, kImageMagic);
    write_be32(imgs, static_cast<std::uint32_t>(ds.n()));
    write_be32(imgs, static_cast<std::uint32_t>(ds.h));
    write_be32(imgs, static_cast<std::uint32_t>(ds.w));
    for (double p : ds.images) {
        const int byte = static_cast<int>(std::lround(p * 255.0));
        imgs.put(static_cast<char>(std::clamp(byte, 0, 255)));
    }

    write_be32(lbls, kLabelMagic);
    write_be32(lbls, static_cast<std::uint32_t>(ds.n()));
    for (int l : ds.labels) lbls.put(static_cast<char>(l));
}

// ---- synthetic -----------------------------------------------------------------

LabeledDataset generate_synthetic(int n, int h, int w, int classes, std::uint64_t seed) {
    if (n < 0 || h <= 0 || w <= 0 || classes < 1) {
        throw ContractError("generate_synthetic: bad dimensions");
    }
    LabeledDataset ds;
    ds.h = h;
    ds.w = w;
    ds.classes = classes;
    ds.provenance = "synthetic";
    ds.images.resize(std::size_t(n) * h * w);
    ds.labels.resize(static_cast<size_t>(n));

    Rng rng(seed);
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    const double radius = 0.36 * std::min(h, w);
    const double blob_sigma2 = 1.1;

    for (int i = 0; i < n; ++i) {
        const int k = i % classes;  // balanced labels
        ds.labels[static_cast<size_t>(i)] = k;
        const double angle = 6.283185307179586 * k / classes;
        const double by = cy + radius * std::sin(angle);
        const double bx = cx + radius * std::cos(angle);
        double* img = ds.images.data() + std::size_t(i) * h * w;
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                const double d2 = (r - by) * (r - by) + (c - bx) * (c - bx);
                double v = std::exp(-d2 / (2.0 * blob_sigma2)) + 0.1 * rng.normal();
                v = std::clamp(v, 0.0, 1.0);
                // quantize to the 8-bit grid so IDX round trips exactly
                img[static_cast<size_t>(r) * w + c] = std::lround(v * 255.0) / 255.0;
            }
        }
    }
    return ds;
}

LabeledDataset inject_backdoor(const LabeledDataset& ds, const std::vector<int>& indices,
                               const BackdoorSpec& spec) {
    if (spec.patch_side <= 0 || spec.patch_side > std::min(ds.h, ds.w)) {
        throw ContractError("inject_backdoor: patch_side " + std::to_string(spec.patch_side) +
                            " does not fit a " + std::to_string(ds.h) + "x" +
                            std::to_string(ds.w) + " image");
    }
    if (spec.target_label < 0 || spec.target_label >= ds.classes) {
        throw ContractError("inject_backdoor: target label out of range");
    }
    LabeledDataset out = ds;
    for (int i : indices) {
        if (i < 0 || i >= ds.n()) {
            throw ContractError("inject_backdoor: index " + std::to_string(i) + " out of range");
        }
        double* img = out.images.data() + std::size_t(i) * ds.dim();
        for (int r = ds.h - spec.patch_side; r < ds.h; ++r) {
            for (int c = ds.w - spec.patch_side; c < ds.w; ++c) {
                img[static_cast<size_t>(r) * ds.w + c] = spec.patch_value;
            }
        }
        out.labels[static_cast<size_t>(i)] = spec.target_label;
    }
    return out;
}

SplitDataset split_erased(const LabeledDataset& ds, double edr, std::uint64_t seed) {
    if (!(edr > 0.0 && edr < 1.0)) {
        throw ContractError("split_erased: edr must lie strictly between 0 and 1");
    }
    const int n = ds.n();
    const int k = static_cast<int>(std::lround(edr * n));
    if (k == 0) {
        throw ContractError("split_erased: round(edr*n) is zero; nothing to erase");
    }

    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    Rng rng(seed);
    for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }

    SplitDataset split;
    split.edr = edr;
    split.erased.assign(idx.begin(), idx.begin() + k);
    split.remaining.assign(idx.begin() + k, idx.end());
    std::sort(split.erased.begin(), split.erased.end());
    std::sort(split.remaining.begin(), split.remaining.end());
    return split;
}

}  // namespace semu
