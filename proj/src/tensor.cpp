#include "semu/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <unordered_set>

namespace semu {

std::string Shape::str() const {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "(%dx%d)", rows, cols);
    return buf;
}

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                             b.shape().str());
    }
}

void check_finite(const char* op, const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string(op) + " produced a non-finite value");
        }
    }
}

std::vector<double>& grad_buf(const Tensor& t) {
    auto& g = t.node()->grad;
    if (g.empty()) g.assign(static_cast<size_t>(t.size()), 0.0);
    return g;
}

}  // namespace

Tensor make_op(const char* op, Shape shape, std::vector<double> values,
               std::vector<Tensor> inputs, std::function<void(const TensorNode&)> vjp) {
    check_finite(op, values);
    auto n = std::make_shared<TensorNode>();
    n->shape = shape;
    n->values = std::move(values);
    n->op = op;
    for (const auto& in : inputs) {
        if (in.requires_grad()) {
            n->requires_grad = true;
            break;
        }
    }
    if (n->requires_grad) {
        n->inputs = std::move(inputs);
        n->vjp = std::move(vjp);
    }
    return Tensor(std::move(n));
}

Tensor Tensor::leaf(std::vector<double> values, Shape shape, bool requires_grad) {
    if (static_cast<std::int64_t>(values.size()) != shape.size()) {
        throw DimensionError("leaf: value count " + std::to_string(values.size()) +
                             " does not match shape " + shape.str());
    }
    check_finite("leaf", values);
    auto n = std::make_shared<TensorNode>();
    n->shape = shape;
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::constant(std::vector<double> values, Shape shape) {
    return leaf(std::move(values), shape, false);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return leaf(std::vector<double>(static_cast<size_t>(shape.size()), 0.0), shape, requires_grad);
}

Tensor Tensor::full(Shape shape, double v) {
    return leaf(std::vector<double>(static_cast<size_t>(shape.size()), v), shape, false);
}

Tensor Tensor::scalar(double v) { return leaf({v}, {1, 1}, false); }

double Tensor::item() const {
    if (size() != 1) {
        throw ContractError("item: tensor " + shape().str() + " is not a scalar");
    }
    return node_->values[0];
}

// ---- ops --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions disagree " + a.shape().str() + " vs " +
                             b.shape().str());
    }
    const int n = a.rows(), k = a.cols(), m = b.cols();
    std::vector<double> out(static_cast<size_t>(n) * m, 0.0);
    const double* av = a.values().data();
    const double* bv = b.values().data();
    for (int i = 0; i < n; ++i) {
        for (int p = 0; p < k; ++p) {
            const double aip = av[static_cast<size_t>(i) * k + p];
            if (aip == 0.0) continue;
            const double* brow = bv + static_cast<size_t>(p) * m;
            double* orow = out.data() + static_cast<size_t>(i) * m;
            for (int j = 0; j < m; ++j) orow[j] += aip * brow[j];
        }
    }
    return make_op("matmul", {n, m}, std::move(out), {a, b}, [a, b](const TensorNode& o) {
        const int n = a.rows(), k = a.cols(), m = b.cols();
        const double* g = o.grad.data();
        if (a.requires_grad()) {
            auto& ga = grad_buf(a);
            const double* bv = b.values().data();
            for (int i = 0; i < n; ++i) {
                const double* grow = g + static_cast<size_t>(i) * m;
                double* garow = ga.data() + static_cast<size_t>(i) * k;
                for (int p = 0; p < k; ++p) {
                    const double* brow = bv + static_cast<size_t>(p) * m;
                    double s = 0.0;
                    for (int j = 0; j < m; ++j) s += grow[j] * brow[j];
                    garow[p] += s;
                }
            }
        }
        if (b.requires_grad()) {
            auto& gb = grad_buf(b);
            const double* av = a.values().data();
            for (int i = 0; i < n; ++i)
                for (int p = 0; p < k; ++p) {
                    const double aip = av[static_cast<size_t>(i) * k + p];
                    if (aip == 0.0) continue;
                    const double* grow = g + static_cast<size_t>(i) * m;
                    double* gbrow = gb.data() + static_cast<size_t>(p) * m;
                    for (int j = 0; j < m; ++j) gbrow[j] += aip * grow[j];
                }
        }
    });
}

Tensor transpose(const Tensor& a) {
    const int n = a.rows(), m = a.cols();
    std::vector<double> out(static_cast<size_t>(n) * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out[static_cast<size_t>(j) * n + i] = a.at(i, j);
    return make_op("transpose", {m, n}, std::move(out), {a}, [a](const TensorNode& o) {
        if (!a.requires_grad()) return;
        auto& ga = grad_buf(a);
        const int n = a.rows(), m = a.cols();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                ga[static_cast<size_t>(i) * m + j] += o.grad[static_cast<size_t>(j) * n + i];
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return make_op("add", a.shape(), std::move(out), {a, b}, [a, b](const TensorNode& o) {
        if (a.requires_grad()) {
            auto& ga = grad_buf(a);
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i];
        }
        if (b.requires_grad()) {
            auto& gb = grad_buf(b);
            for (size_t i = 0; i < gb.size(); ++i) gb[i] += o.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return make_op("sub", a.shape(), std::move(out), {a, b}, [a, b](const TensorNode& o) {
        if (a.requires_grad()) {
            auto& ga = grad_buf(a);
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i];
        }
        if (b.requires_grad()) {
            auto& gb = grad_buf(b);
            for (size_t i = 0; i < gb.size(); ++i) gb[i] -= o.grad[i];
        }
    });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
    if (bias.rows() != 1 || bias.cols() != a.cols()) {
        throw DimensionError("add_bias: bias " + bias.shape().str() + " does not broadcast over " +
                             a.shape().str());
    }
    const int n = a.rows(), m = a.cols();
    std::vector<double> out(a.values());
    const auto& bv = bias.values();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out[static_cast<size_t>(i) * m + j] += bv[j];
    return make_op("add_bias", a.shape(), std::move(out), {a, bias}, [a, bias](const TensorNode& o) {
        const int n = a.rows(), m = a.cols();
        if (a.requires_grad()) {
            auto& ga = grad_buf(a);
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i];
        }
        if (bias.requires_grad()) {
            auto& gb = grad_buf(bias);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) gb[j] += o.grad[static_cast<size_t>(i) * m + j];
        }
    });
}

namespace {

// Shared scaffolding for elementwise ops with VJPs that only need the input
// and output values.
Tensor unary_op(const char* name, const Tensor& a, const std::function<double(double)>& f,
                const std::function<double(double x, double y, double g)>& dx) {
    std::vector<double> out(a.values().size());
    const auto& av = a.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
    auto values_copy = out;  // VJPs may need the forward output
    return make_op(name, a.shape(), std::move(out), {a},
                   [a, dx, values_copy](const TensorNode& o) {
                       if (!a.requires_grad()) return;
                       auto& ga = grad_buf(a);
                       const auto& av = a.values();
                       for (size_t i = 0; i < ga.size(); ++i)
                           ga[i] += dx(av[i], values_copy[i], o.grad[i]);
                   });
}

}  // namespace

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return make_op("mul", a.shape(), std::move(out), {a, b}, [a, b](const TensorNode& o) {
        if (a.requires_grad()) {
            auto& ga = grad_buf(a);
            const auto& bv = b.values();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i] * bv[i];
        }
        if (b.requires_grad()) {
            auto& gb = grad_buf(b);
            const auto& av = a.values();
            for (size_t i = 0; i < gb.size(); ++i) gb[i] += o.grad[i] * av[i];
        }
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_same_shape("div", a, b);
    std::vector<double> out(a.values());
    const auto& bv = b.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] /= bv[i];
    return make_op("div", a.shape(), std::move(out), {a, b}, [a, b](const TensorNode& o) {
        const auto& av = a.values();
        const auto& bv = b.values();
        if (a.requires_grad()) {
            auto& ga = grad_buf(a);
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i] / bv[i];
        }
        if (b.requires_grad()) {
            auto& gb = grad_buf(b);
            for (size_t i = 0; i < gb.size(); ++i) gb[i] -= o.grad[i] * av[i] / (bv[i] * bv[i]);
        }
    });
}

Tensor add_scalar(const Tensor& a, double c) {
    return unary_op("add_scalar", a, [c](double x) { return x + c; },
                    [](double, double, double g) { return g; });
}

Tensor mul_scalar(const Tensor& a, double c) {
    return unary_op("mul_scalar", a, [c](double x) { return x * c; },
                    [c](double, double, double g) { return c * g; });
}

Tensor neg(const Tensor& a) {
    return unary_op("neg", a, [](double x) { return -x; },
                    [](double, double, double g) { return -g; });
}

Tensor exp(const Tensor& a) {
    return unary_op("exp", a, [](double x) { return std::exp(x); },
                    [](double, double y, double g) { return g * y; });
}

Tensor log(const Tensor& a) {
    return unary_op("log", a, [](double x) { return std::log(x); },
                    [](double x, double, double g) { return g / x; });
}

Tensor relu(const Tensor& a) {
    return unary_op("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x, double, double g) { return x > 0.0 ? g : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op("sigmoid", a,
                    [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                    [](double, double y, double g) { return g * y * (1.0 - y); });
}

Tensor square(const Tensor& a) {
    return unary_op("square", a, [](double x) { return x * x; },
                    [](double x, double, double g) { return 2.0 * x * g; });
}

Tensor sqrt(const Tensor& a) {
    return unary_op("sqrt", a, [](double x) { return std::sqrt(x); },
                    [](double, double y, double g) { return g / (2.0 * y); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    return unary_op("clamp", a,
                    [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
                    [lo, hi](double x, double, double g) { return (x > lo && x < hi) ? g : 0.0; });
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return make_op("sum_all", {1, 1}, {s}, {a}, [a](const TensorNode& o) {
        if (!a.requires_grad()) return;
        auto& ga = grad_buf(a);
        for (auto& g : ga) g += o.grad[0];
    });
}

Tensor mean_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    const double inv = 1.0 / static_cast<double>(a.size());
    return make_op("mean_all", {1, 1}, {s * inv}, {a}, [a, inv](const TensorNode& o) {
        if (!a.requires_grad()) return;
        auto& ga = grad_buf(a);
        for (auto& g : ga) g += o.grad[0] * inv;
    });
}

Tensor row_sum(const Tensor& a) {
    const int n = a.rows(), m = a.cols();
    std::vector<double> out(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += a.at(i, j);
        out[i] = s;
    }
    return make_op("row_sum", {n, 1}, std::move(out), {a}, [a](const TensorNode& o) {
        if (!a.requires_grad()) return;
        auto& ga = grad_buf(a);
        const int n = a.rows(), m = a.cols();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) ga[static_cast<size_t>(i) * m + j] += o.grad[i];
    });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("concat_cols: row counts disagree " + a.shape().str() + " vs " +
                             b.shape().str());
    }
    const int n = a.rows(), ma = a.cols(), mb = b.cols();
    std::vector<double> out(static_cast<size_t>(n) * (ma + mb));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < ma; ++j) out[static_cast<size_t>(i) * (ma + mb) + j] = a.at(i, j);
        for (int j = 0; j < mb; ++j) out[static_cast<size_t>(i) * (ma + mb) + ma + j] = b.at(i, j);
    }
    return make_op("concat_cols", {n, ma + mb}, std::move(out), {a, b},
                   [a, b](const TensorNode& o) {
                       const int n = a.rows(), ma = a.cols(), mb = b.cols();
                       if (a.requires_grad()) {
                           auto& ga = grad_buf(a);
                           for (int i = 0; i < n; ++i)
                               for (int j = 0; j < ma; ++j)
                                   ga[static_cast<size_t>(i) * ma + j] +=
                                       o.grad[static_cast<size_t>(i) * (ma + mb) + j];
                       }
                       if (b.requires_grad()) {
                           auto& gb = grad_buf(b);
                           for (int i = 0; i < n; ++i)
                               for (int j = 0; j < mb; ++j)
                                   gb[static_cast<size_t>(i) * mb + j] +=
                                       o.grad[static_cast<size_t>(i) * (ma + mb) + ma + j];
                       }
                   });
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    if (c0 < 0 || c1 > a.cols() || c0 >= c1) {
        throw DimensionError("slice_cols: range [" + std::to_string(c0) + ", " +
                             std::to_string(c1) + ") invalid for " + a.shape().str());
    }
    const int n = a.rows(), w = c1 - c0;
    std::vector<double> out(static_cast<size_t>(n) * w);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < w; ++j) out[static_cast<size_t>(i) * w + j] = a.at(i, c0 + j);
    return make_op("slice_cols", {n, w}, std::move(out), {a}, [a, c0, w](const TensorNode& o) {
        if (!a.requires_grad()) return;
        auto& ga = grad_buf(a);
        const int n = a.rows(), m = a.cols();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < w; ++j)
                ga[static_cast<size_t>(i) * m + c0 + j] += o.grad[static_cast<size_t>(i) * w + j];
    });
}

Tensor l2_normalize_rows(const Tensor& a, double eps) {
    const int n = a.rows(), m = a.cols();
    std::vector<double> out(static_cast<size_t>(n) * m);
    std::vector<double> inv_norm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += a.at(i, j) * a.at(i, j);
        const double r = 1.0 / std::sqrt(s + eps);
        inv_norm[i] = r;
        for (int j = 0; j < m; ++j) out[static_cast<size_t>(i) * m + j] = a.at(i, j) * r;
    }
    auto y = out;
    return make_op("l2_normalize_rows", a.shape(), std::move(out), {a},
                   [a, y, inv_norm](const TensorNode& o) {
                       if (!a.requires_grad()) return;
                       auto& ga = grad_buf(a);
                       const int n = a.rows(), m = a.cols();
                       for (int i = 0; i < n; ++i) {
                           const size_t base = static_cast<size_t>(i) * m;
                           double dot = 0.0;
                           for (int j = 0; j < m; ++j) dot += o.grad[base + j] * y[base + j];
                           for (int j = 0; j < m; ++j)
                               ga[base + j] += inv_norm[i] * (o.grad[base + j] - y[base + j] * dot);
                       }
                   });
}

Tensor logsumexp_rows(const Tensor& a) {
    const int n = a.rows(), m = a.cols();
    std::vector<double> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double mx = a.at(i, 0);
        for (int j = 1; j < m; ++j) mx = std::max(mx, a.at(i, j));
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += std::exp(a.at(i, j) - mx);
        out[i] = mx + std::log(s);
    }
    auto lse = out;
    return make_op("logsumexp_rows", {n, 1}, std::move(out), {a}, [a, lse](const TensorNode& o) {
        if (!a.requires_grad()) return;
        auto& ga = grad_buf(a);
        const int n = a.rows(), m = a.cols();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                ga[static_cast<size_t>(i) * m + j] += o.grad[i] * std::exp(a.at(i, j) - lse[i]);
    });
}

// ---- backward ---------------------------------------------------------------

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw ContractError("backward: loss must be a scalar tensor");
    }
    if (!loss.requires_grad()) return;  // nothing reachable is trainable

    // Iterative post-order DFS; each node enters the order exactly once.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    struct Frame {
        TensorNode* node;
        size_t next_input;
    };
    std::vector<Frame> stack{{loss.node(), 0}};
    seen.insert(loss.node());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_input < f.node->inputs.size()) {
            TensorNode* in = f.node->inputs[f.next_input++].node();
            if (in->requires_grad && !seen.count(in)) {
                seen.insert(in);
                stack.push_back({in, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    // Interior grads are scratch space for this pass; leaf grads accumulate.
    for (TensorNode* n : order) {
        if (n->op != nullptr) {
            n->grad.assign(n->values.size(), 0.0);
        } else if (n->grad.empty()) {
            n->grad.assign(n->values.size(), 0.0);
        }
    }
    loss.node()->grad.assign(1, 1.0);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->vjp) n->vjp(*n);
    }
}

// ---- parameters -------------------------------------------------------------

void zero_grads(std::vector<Parameter>& params) {
    for (auto& p : params) {
        p.tensor.grad_mut().assign(static_cast<size_t>(p.tensor.size()), 0.0);
    }
}

void sgd_step(std::vector<Parameter>& params, double lr) {
    if (lr <= 0.0) throw ContractError("sgd_step: lr must be positive");
    for (auto& p : params) {
        if (p.tensor.grad().empty()) {
            throw ContractError("sgd_step: parameter '" + p.name + "' has no gradient");
        }
    }
    for (auto& p : params) {
        auto& v = p.tensor.values_mut();
        auto& g = p.tensor.grad_mut();
        for (size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
        std::fill(g.begin(), g.end(), 0.0);
    }
}

double grad_check(const std::function<Tensor()>& loss_fn, std::vector<Parameter>& params,
                  double eps) {
    if (!(eps > 0.0 && eps <= 1e-2)) {
        throw ContractError("grad_check: eps must lie in (0, 1e-2]");
    }
    const double base = loss_fn().item();
    if (loss_fn().item() != base) {
        throw ContractError("grad_check: loss_fn is not deterministic under a frozen seed");
    }

    zero_grads(params);
    backward(loss_fn());
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.tensor.grad());

    double max_rel = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& v = params[pi].tensor.values_mut();
        for (size_t i = 0; i < v.size(); ++i) {
            const double saved = v[i];
            v[i] = saved + eps;
            const double up = loss_fn().item();
            v[i] = saved - eps;
            const double dn = loss_fn().item();
            v[i] = saved;
            const double numeric = (up - dn) / (2.0 * eps);
            const double a = analytic[pi][i];
            const double rel =
                std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
    }
    zero_grads(params);
    return max_rel;
}

std::string parameter_checksum(const std::vector<Parameter>& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* data, size_t len) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& p : params) {
        mix(p.name.data(), p.name.size());
        mix(p.tensor.values().data(), p.tensor.values().size() * sizeof(double));
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace semu
