#include "semu/mlp.hpp"

#include <cmath>

namespace semu {

Mlp Mlp::make(const std::string& prefix, int input_dim, const std::vector<int>& hidden,
              int output_dim, Rng& rng, bool trainable) {
    if (input_dim <= 0 || output_dim <= 0) {
        throw ContractError("Mlp: dimensions must be positive");
    }
    Mlp m;
    m.prefix_ = prefix;
    m.input_dim_ = input_dim;
    m.output_dim_ = output_dim;
    m.hidden_ = hidden;

    std::vector<int> widths;
    widths.push_back(input_dim);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(output_dim);

    for (size_t i = 0; i + 1 < widths.size(); ++i) {
        const int fan_in = widths[i];
        const int fan_out = widths[i + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::vector<double> w(static_cast<size_t>(fan_in) * fan_out);
        for (auto& v : w) v = (2.0 * rng.uniform01() - 1.0) * limit;
        const std::string layer = prefix + ".l" + std::to_string(i);
        Linear lin;
        lin.weight = {Tensor::leaf(std::move(w), {fan_in, fan_out}, trainable), layer + ".weight"};
        lin.bias = {Tensor::zeros({1, fan_out}, trainable), layer + ".bias"};
        m.layers_.push_back(std::move(lin));
    }
    return m;
}

Tensor Mlp::forward(const Tensor& x) const {
    if (x.cols() != input_dim_) {
        throw DimensionError(prefix_ + ": input width " + std::to_string(x.cols()) +
                             " does not match layer width " + std::to_string(input_dim_));
    }
    Tensor h = x;
    for (size_t i = 0; i < layers_.size(); ++i) {
        h = add_bias(matmul(h, layers_[i].weight.tensor), layers_[i].bias.tensor);
        if (i + 1 < layers_.size()) h = relu(h);
    }
    return h;
}

std::vector<Parameter> Mlp::params() const {
    std::vector<Parameter> out;
    out.reserve(layers_.size() * 2);
    for (const auto& l : layers_) {
        out.push_back(l.weight);
        out.push_back(l.bias);
    }
    return out;
}

Mlp Mlp::clone(bool trainable) const {
    Mlp m;
    m.prefix_ = prefix_;
    m.input_dim_ = input_dim_;
    m.output_dim_ = output_dim_;
    m.hidden_ = hidden_;
    for (const auto& l : layers_) {
        Linear lin;
        lin.weight = {Tensor::leaf(l.weight.tensor.values(), l.weight.tensor.shape(), trainable),
                      l.weight.name};
        lin.bias = {Tensor::leaf(l.bias.tensor.values(), l.bias.tensor.shape(), trainable),
                    l.bias.name};
        m.layers_.push_back(std::move(lin));
    }
    return m;
}

}  // namespace semu
