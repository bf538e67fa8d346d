#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "tdir/tensor.hpp"

/// Small reverse-mode differentiation engine over channel-first tensors.
///
/// A Var is a handle to a node in a dynamically recorded graph. Ops whose
/// inputs are all constants record nothing, so inference through the same
/// code path carries no taping overhead. Graphs are single-threaded; use one
/// graph per worker and reduce gradients afterwards.
namespace tdir::autograd {

struct Node {
    Tensor value;
    Tensor grad; // empty until a gradient reaches this node
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(const Tensor& grad_out)> backward;

    Tensor& grad_buffer();
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Var constant(Tensor value);
    /// Leaf whose gradient is accumulated by backward().
    static Var parameter(Tensor value);

    const Tensor& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool defined() const noexcept { return node_ != nullptr; }

    /// Accumulated gradient; a zero tensor if backward() never reached it.
    Tensor grad() const;

    Node& node() const { return *node_; }
    const std::shared_ptr<Node>& node_ptr() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Propagates d(root)/d(node) through the graph. `root` must hold a single
/// element.
void backward(const Var& root);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);

/// Stride-1 convolution with zero "same" padding (odd kernels). Input is
/// C_in x H x W, weight is C_out x (C_in / groups) x k x k. No bias.
Var conv2d(const Var& x, const Var& weight, int groups = 1);

/// y = W x + b for rank-1 x; W is out x in, b is out.
Var linear(const Var& x, const Var& weight, const Var& bias);

/// Exact (erf-based) GELU.
Var gelu(const Var& x);
Var silu(const Var& x);

/// Bias-free layer normalisation across channels at every pixel:
/// y = x / sqrt(var_c(x) + 1e-5) * weight.
Var layer_norm_channels(const Var& x, const Var& weight);

/// Multi-head attention across channels. q, k, v are C x H x W; each head
/// owns C/heads consecutive channels. Queries and keys are L2-normalised
/// over pixels, the (C/heads)^2 attention logits are scaled by the head's
/// temperature and soft-maxed row-wise.
Var channel_attention(const Var& q, const Var& k, const Var& v, const Var& temperature, int heads);

Var concat_channels(std::span<const Var> parts);
Var slice_channels(const Var& x, int begin, int count);

/// Space-to-channel by a factor of 2: C x H x W -> 4C x H/2 x W/2.
Var pixel_unshuffle(const Var& x);
/// Inverse of pixel_unshuffle: 4C x H x W -> C x 2H x 2W.
Var pixel_shuffle(const Var& x);

/// C x H x W -> C (spatial mean).
Var global_avg_pool(const Var& x);
/// Softmax of a rank-1 tensor.
Var softmax(const Var& logits);
/// sum_i weights[i] * components[i]; components has a leading axis N.
Var weighted_sum(const Var& weights, const Var& components);
/// Bilinear resampling with half-pixel centres (no corner alignment).
Var resize_bilinear(const Var& x, int height, int width);
/// Rank-1 vector of length C -> C x H x W with constant planes.
Var broadcast_channels(const Var& v, int height, int width);

Var sum(const Var& x);
Var sum_abs(const Var& x);
/// Mean of |a - b| over all elements.
Var mean_abs_diff(const Var& a, const Var& b);
/// sum(a * b) for a same-shaped constant weight tensor.
Var dot(const Var& a, const Tensor& weights);

} // namespace tdir::autograd
