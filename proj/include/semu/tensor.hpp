#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "semu/errors.hpp"

namespace semu {

// All tensors are dense row-major 2-D arrays of f64. Scalars are 1x1,
// row vectors 1xN. Each tensor produced by an operation keeps a record of
// its inputs and a vector-Jacobian product, so reverse-mode differentiation
// can walk the graph. Graphs are rebuilt on every forward pass.
struct Shape {
    int rows = 0;
    int cols = 0;

    bool operator==(const Shape&) const = default;
    std::int64_t size() const { return static_cast<std::int64_t>(rows) * cols; }
    std::string str() const;
};

class Tensor;

struct TensorNode {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until backward touches this node
    bool requires_grad = false;
    const char* op = nullptr;  // null for leaves
    std::vector<Tensor> inputs;
    std::function<void(const TensorNode&)> vjp;
};

class Tensor {
public:
    Tensor() = default;

    // Leaf constructors. Only leaves may require grad directly.
    static Tensor leaf(std::vector<double> values, Shape shape, bool requires_grad);
    static Tensor constant(std::vector<double> values, Shape shape);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rows() const { return node_->shape.rows; }
    int cols() const { return node_->shape.cols; }
    std::int64_t size() const { return node_->shape.size(); }
    bool requires_grad() const { return node_->requires_grad; }

    const std::vector<double>& values() const { return node_->values; }
    std::vector<double>& values_mut() { return node_->values; }
    const std::vector<double>& grad() const { return node_->grad; }
    std::vector<double>& grad_mut() { return node_->grad; }

    double at(int r, int c) const { return node_->values[static_cast<size_t>(r) * cols() + c]; }

    // Value of a 1x1 tensor.
    double item() const;

    // Same values, cut loose from the graph.
    Tensor detach() const { return constant(node_->values, node_->shape); }

    TensorNode* node() const { return node_.get(); }

private:
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<TensorNode> node_;

    friend Tensor make_op(const char* op, Shape shape, std::vector<double> values,
                          std::vector<Tensor> inputs,
                          std::function<void(const TensorNode&)> vjp);
};

// ---- forward operations ----------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
// a: (n x m), bias: (1 x m), broadcast over rows.
Tensor add_bias(const Tensor& a, const Tensor& bias);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
// Sum along the last axis: (n x m) -> (n x 1).
Tensor row_sum(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
// Columns [c0, c1) of a.
Tensor slice_cols(const Tensor& a, int c0, int c1);
// Rows scaled to unit L2 norm; the epsilon keeps zero rows finite.
Tensor l2_normalize_rows(const Tensor& a, double eps = 1e-12);
// log(sum(exp(row))) with max-shift: (n x m) -> (n x 1).
Tensor logsumexp_rows(const Tensor& a);

// ---- backward --------------------------------------------------------------

// Reverse-mode pass from a scalar loss. Visits every reachable node once in
// topological order; parameter gradients accumulate across calls until the
// optimizer zeroes them.
void backward(const Tensor& loss);

// ---- parameters and optimizer ----------------------------------------------

struct Parameter {
    Tensor tensor;
    std::string name;
};

void zero_grads(std::vector<Parameter>& params);

// Vanilla SGD: p -= lr * grad, then grads are zeroed.
void sgd_step(std::vector<Parameter>& params, double lr);

// ---- numerical verification -------------------------------------------------

// Central-difference check of d(loss)/d(param) for every parameter entry.
// loss_fn must be deterministic: any sampling inside it has to replay
// identically on each call. Returns the max relative error
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<Tensor()>& loss_fn,
                  std::vector<Parameter>& params, double eps);

// FNV-1a over the raw f64 bytes of all parameters, as a hex string.
std::string parameter_checksum(const std::vector<Parameter>& params);

}  // namespace semu
