#pragma once

#include <string>
#include <vector>

#include "semu/rng.hpp"
#include "semu/tensor.hpp"

namespace semu {

// Fully connected layer, weight stored input-major (in x out).
struct Linear {
    Parameter weight;
    Parameter bias;
};

// Plain multilayer perceptron: ReLU on hidden layers, identity on the head.
// Output transforms (sigmoid, softmax) belong to the caller.
class Mlp {
public:
    Mlp() = default;

    // Xavier-uniform weights, zero biases. Parameter names are
    // "<prefix>.l<i>.weight" / "<prefix>.l<i>.bias".
    static Mlp make(const std::string& prefix, int input_dim,
                    const std::vector<int>& hidden, int output_dim, Rng& rng,
                    bool trainable = true);

    Tensor forward(const Tensor& x) const;

    // Aliases the underlying tensors; mutating them mutates the model.
    std::vector<Parameter> params() const;

    Mlp clone(bool trainable) const;

    int input_dim() const { return input_dim_; }
    int output_dim() const { return output_dim_; }
    const std::vector<int>& hidden() const { return hidden_; }

private:
    std::string prefix_;
    int input_dim_ = 0;
    int output_dim_ = 0;
    std::vector<int> hidden_;
    std::vector<Linear> layers_;
};

}  // namespace semu
