#include "tdir/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_set>

#include "tdir/errors.hpp"

namespace tdir::autograd {

Tensor& Node::grad_buffer() {
    if (grad.empty() && !value.empty()) grad = Tensor::zeros_like(value);
    return grad;
}

Var Var::constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return Var(std::move(n));
}

Var Var::parameter(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
}

Tensor Var::grad() const {
    if (node_->grad.empty()) return Tensor::zeros_like(node_->value);
    return node_->grad;
}

namespace {

bool any_grad(std::initializer_list<const Var*> inputs) {
    return std::any_of(inputs.begin(), inputs.end(), [](const Var* v) { return v->requires_grad(); });
}

Var record(Tensor value, std::vector<Var> inputs, std::function<void(const Tensor&)> bw) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    for (auto& in : inputs) {
        if (in.requires_grad()) n->parents.push_back(in.node_ptr());
    }
    n->backward = std::move(bw);
    return Var(std::move(n));
}

Tensor& gbuf(const Var& v) { return v.node().grad_buffer(); }

void accumulate(const Var& v, const Tensor& g) {
    if (!v.requires_grad()) return;
    Tensor& dst = gbuf(v);
    double* d = dst.data();
    const double* s = g.data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += s[i];
}

void require_rank(const Var& v, int rank, const char* op) {
    if (v.value().rank() != rank) {
        throw InvalidArgument(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                              shape_string(v.shape()));
    }
}

} // namespace

void backward(const Var& root) {
    if (root.value().size() != 1) throw InvalidArgument("backward: root must be a scalar");
    if (!root.requires_grad()) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{&root.node(), 0}};
    seen.insert(&root.node());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node().grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(n->grad);
    }
}

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value() + b.value();
    if (!any_grad({&a, &b})) return Var::constant(std::move(out));
    return record(std::move(out), {a, b}, [a, b](const Tensor& g) {
        accumulate(a, g);
        accumulate(b, g);
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value() - b.value();
    if (!any_grad({&a, &b})) return Var::constant(std::move(out));
    return record(std::move(out), {a, b}, [a, b](const Tensor& g) {
        accumulate(a, g);
        if (b.requires_grad()) accumulate(b, g * -1.0);
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    if (!any_grad({&a, &b})) return Var::constant(std::move(out));
    return record(std::move(out), {a, b}, [a, b](const Tensor& g) {
        if (a.requires_grad()) {
            Tensor& ga = gbuf(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
        }
        if (b.requires_grad()) {
            Tensor& gb = gbuf(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a.value() * s;
    if (!a.requires_grad()) return Var::constant(std::move(out));
    return record(std::move(out), {a}, [a, s](const Tensor& g) {
        Tensor& ga = gbuf(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    });
}

namespace {

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_deriv(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

} // namespace

Var gelu(const Var& x) {
    Tensor out = x.value();
    for (double& v : out.values()) v = gelu_value(v);
    if (!x.requires_grad()) return Var::constant(std::move(out));
    return record(std::move(out), {x}, [x](const Tensor& g) {
        Tensor& gx = gbuf(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * gelu_deriv(x.value()[i]);
    });
}

Var silu(const Var& x) {
    Tensor out = x.value();
    for (double& v : out.values()) v = v / (1.0 + std::exp(-v));
    if (!x.requires_grad()) return Var::constant(std::move(out));
    return record(std::move(out), {x}, [x](const Tensor& g) {
        Tensor& gx = gbuf(x);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = x.value()[i];
            const double s = 1.0 / (1.0 + std::exp(-v));
            gx[i] += g[i] * s * (1.0 + v * (1.0 - s));
        }
    });
}

// --------------------------------------------------------------- convolution

namespace {

struct ConvGeom {
    int cin, cout, h, w, k, groups, cin_g, cout_g;
};

ConvGeom conv_geometry(const Tensor& x, const Tensor& wt, int groups) {
    if (x.rank() != 3 || wt.rank() != 4) throw InvalidArgument("conv2d: expected CHW input and 4-d weight");
    ConvGeom g{x.channels(), wt.dim(0), x.height(), x.width(), wt.dim(2), groups, 0, 0};
    if (groups < 1 || g.cin % groups != 0 || g.cout % groups != 0) {
        throw InvalidArgument("conv2d: channels not divisible by groups");
    }
    g.cin_g = g.cin / groups;
    g.cout_g = g.cout / groups;
    if (wt.dim(1) != g.cin_g || wt.dim(3) != g.k || g.k % 2 == 0) {
        throw InvalidArgument("conv2d: weight shape " + shape_string(wt.shape()) + " incompatible with input " +
                              shape_string(x.shape()));
    }
    return g;
}

// Visits every (output channel, input channel, ky, kx) tap together with the
// valid output row/column ranges so the inner loop is a contiguous run.
template <typename Fn>
void for_each_tap(const ConvGeom& g, Fn&& fn) {
    const int pad = g.k / 2;
    for (int co = 0; co < g.cout; ++co) {
        const int grp = co / g.cout_g;
        for (int cig = 0; cig < g.cin_g; ++cig) {
            const int ci = grp * g.cin_g + cig;
            for (int ky = 0; ky < g.k; ++ky) {
                const int dy = ky - pad;
                const int y_lo = std::max(0, -dy);
                const int y_hi = std::min(g.h, g.h - dy);
                for (int kx = 0; kx < g.k; ++kx) {
                    const int dx = kx - pad;
                    const int x_lo = std::max(0, -dx);
                    const int x_hi = std::min(g.w, g.w - dx);
                    const std::size_t widx = ((static_cast<std::size_t>(co) * g.cin_g + cig) * g.k + ky) * g.k + kx;
                    fn(co, ci, widx, dy, dx, y_lo, y_hi, x_lo, x_hi);
                }
            }
        }
    }
}

} // namespace

Var conv2d(const Var& x, const Var& weight, int groups) {
    const Tensor& xv = x.value();
    const Tensor& wv = weight.value();
    const ConvGeom g = conv_geometry(xv, wv, groups);
    Tensor out(Shape{g.cout, g.h, g.w});
    const std::size_t plane = static_cast<std::size_t>(g.h) * g.w;
    for_each_tap(g, [&](int co, int ci, std::size_t widx, int dy, int dx, int y_lo, int y_hi, int x_lo, int x_hi) {
        const double wk = wv[widx];
        if (wk == 0.0) return;
        double* o = out.data() + co * plane;
        const double* in = xv.data() + ci * plane;
        for (int y = y_lo; y < y_hi; ++y) {
            double* orow = o + static_cast<std::size_t>(y) * g.w;
            const double* irow = in + static_cast<std::size_t>(y + dy) * g.w + dx;
            for (int xx = x_lo; xx < x_hi; ++xx) orow[xx] += wk * irow[xx];
        }
    });
    if (!any_grad({&x, &weight})) return Var::constant(std::move(out));
    return record(std::move(out), {x, weight}, [x, weight, g, plane](const Tensor& go) {
        const Tensor& xv = x.value();
        const Tensor& wv = weight.value();
        double* gx = x.requires_grad() ? gbuf(x).data() : nullptr;
        double* gw = weight.requires_grad() ? gbuf(weight).data() : nullptr;
        for_each_tap(g, [&](int co, int ci, std::size_t widx, int dy, int dx, int y_lo, int y_hi, int x_lo,
                            int x_hi) {
            const double* o = go.data() + co * plane;
            const double wk = wv[widx];
            double acc = 0.0;
            for (int y = y_lo; y < y_hi; ++y) {
                const double* orow = o + static_cast<std::size_t>(y) * g.w;
                const std::size_t in_off = ci * plane + static_cast<std::size_t>(y + dy) * g.w + dx;
                if (gx != nullptr && wk != 0.0) {
                    double* grow = gx + in_off;
                    for (int xx = x_lo; xx < x_hi; ++xx) grow[xx] += wk * orow[xx];
                }
                if (gw != nullptr) {
                    const double* irow = xv.data() + in_off;
                    for (int xx = x_lo; xx < x_hi; ++xx) acc += irow[xx] * orow[xx];
                }
            }
            if (gw != nullptr) gw[widx] += acc;
        });
    });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
    require_rank(x, 1, "linear");
    const Tensor& wv = weight.value();
    const int out_n = wv.dim(0);
    const int in_n = wv.dim(1);
    if (x.value().dim(0) != in_n || bias.value().size() != static_cast<std::size_t>(out_n)) {
        throw InvalidArgument("linear: shape mismatch");
    }
    Tensor out(Shape{out_n});
    for (int o = 0; o < out_n; ++o) {
        double acc = bias.value()[o];
        for (int i = 0; i < in_n; ++i) acc += wv[static_cast<std::size_t>(o) * in_n + i] * x.value()[i];
        out[o] = acc;
    }
    if (!any_grad({&x, &weight, &bias})) return Var::constant(std::move(out));
    return record(std::move(out), {x, weight, bias}, [x, weight, bias, out_n, in_n](const Tensor& g) {
        if (bias.requires_grad()) accumulate(bias, g);
        if (weight.requires_grad()) {
            Tensor& gw = gbuf(weight);
            for (int o = 0; o < out_n; ++o)
                for (int i = 0; i < in_n; ++i) gw[static_cast<std::size_t>(o) * in_n + i] += g[o] * x.value()[i];
        }
        if (x.requires_grad()) {
            Tensor& gx = gbuf(x);
            for (int o = 0; o < out_n; ++o)
                for (int i = 0; i < in_n; ++i) gx[i] += g[o] * weight.value()[static_cast<std::size_t>(o) * in_n + i];
        }
    });
}

// ------------------------------------------------------------- normalisation

Var layer_norm_channels(const Var& x, const Var& weight) {
    require_rank(x, 3, "layer_norm_channels");
    const Tensor& xv = x.value();
    const int c = xv.channels();
    if (weight.value().size() != static_cast<std::size_t>(c)) throw InvalidArgument("layer_norm_channels: weight size");
    const std::size_t plane = static_cast<std::size_t>(xv.height()) * xv.width();
    constexpr double eps = 1e-5;
    Tensor out(xv.shape());
    Tensor inv_std(Shape{static_cast<int>(plane)});
    Tensor mean(Shape{static_cast<int>(plane)});
    for (std::size_t p = 0; p < plane; ++p) {
        double mu = 0.0;
        for (int ch = 0; ch < c; ++ch) mu += xv[ch * plane + p];
        mu /= c;
        double var = 0.0;
        for (int ch = 0; ch < c; ++ch) {
            const double d = xv[ch * plane + p] - mu;
            var += d * d;
        }
        var /= c;
        const double s = 1.0 / std::sqrt(var + eps);
        mean[p] = mu;
        inv_std[p] = s;
        for (int ch = 0; ch < c; ++ch) out[ch * plane + p] = xv[ch * plane + p] * s * weight.value()[ch];
    }
    if (!any_grad({&x, &weight})) return Var::constant(std::move(out));
    return record(std::move(out), {x, weight}, [x, weight, c, plane, mean, inv_std](const Tensor& g) {
        const Tensor& xv = x.value();
        const Tensor& wv = weight.value();
        double* gw = weight.requires_grad() ? gbuf(weight).data() : nullptr;
        double* gx = x.requires_grad() ? gbuf(x).data() : nullptr;
        for (std::size_t p = 0; p < plane; ++p) {
            const double s = inv_std[p];
            // y_c = x_c * s * w_c with s = (var + eps)^(-1/2);
            // ds/dx_c = -s^3 (x_c - mu) / C.
            double dot_gwx = 0.0;
            for (int ch = 0; ch < c; ++ch) {
                const std::size_t i = ch * plane + p;
                if (gw != nullptr) gw[ch] += g[i] * xv[i] * s;
                dot_gwx += g[i] * wv[ch] * xv[i];
            }
            if (gx == nullptr) continue;
            const double coeff = -dot_gwx * s * s * s / c;
            for (int ch = 0; ch < c; ++ch) {
                const std::size_t i = ch * plane + p;
                gx[i] += g[i] * wv[ch] * s + coeff * (xv[i] - mean[p]);
            }
        }
    });
}

// ------------------------------------------------------------------ attention

Var channel_attention(const Var& q, const Var& k, const Var& v, const Var& temperature, int heads) {
    require_rank(q, 3, "channel_attention");
    require_same_shape(q.value(), k.value(), "channel_attention q/k");
    require_same_shape(q.value(), v.value(), "channel_attention q/v");
    const int c = q.value().channels();
    if (heads < 1 || c % heads != 0) throw InvalidArgument("channel_attention: channels not divisible by heads");
    if (temperature.value().size() != static_cast<std::size_t>(heads)) {
        throw InvalidArgument("channel_attention: temperature size must equal heads");
    }
    const int d = c / heads;
    const std::size_t n = static_cast<std::size_t>(q.value().height()) * q.value().width();
    constexpr double norm_floor = 1e-12;

    // Saved for backward: normalised q/k rows, their norms, attention probs.
    Tensor qn(q.shape()), kn(k.shape());
    Tensor qnorm(Shape{c}), knorm(Shape{c});
    Tensor probs(Shape{heads, d, d});
    Tensor out(q.shape());

    auto normalise = [&](const Tensor& src, Tensor& dst, Tensor& norms) {
        for (int ch = 0; ch < c; ++ch) {
            const double* row = src.data() + ch * n;
            double ss = 0.0;
            for (std::size_t p = 0; p < n; ++p) ss += row[p] * row[p];
            const double nr = std::max(std::sqrt(ss), norm_floor);
            norms[ch] = nr;
            double* drow = dst.data() + ch * n;
            for (std::size_t p = 0; p < n; ++p) drow[p] = row[p] / nr;
        }
    };
    normalise(q.value(), qn, qnorm);
    normalise(k.value(), kn, knorm);

    for (int h = 0; h < heads; ++h) {
        const double tau = temperature.value()[h];
        for (int i = 0; i < d; ++i) {
            const double* qi = qn.data() + (h * d + i) * n;
            double* prow = probs.data() + (static_cast<std::size_t>(h) * d + i) * d;
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < d; ++j) {
                const double* kj = kn.data() + (h * d + j) * n;
                double acc = 0.0;
                for (std::size_t p = 0; p < n; ++p) acc += qi[p] * kj[p];
                prow[j] = acc * tau;
                mx = std::max(mx, prow[j]);
            }
            double z = 0.0;
            for (int j = 0; j < d; ++j) {
                prow[j] = std::exp(prow[j] - mx);
                z += prow[j];
            }
            for (int j = 0; j < d; ++j) prow[j] /= z;
            double* orow = out.data() + (h * d + i) * n;
            for (int j = 0; j < d; ++j) {
                const double a = prow[j];
                const double* vj = v.value().data() + (h * d + j) * n;
                for (std::size_t p = 0; p < n; ++p) orow[p] += a * vj[p];
            }
        }
    }

    if (!any_grad({&q, &k, &v, &temperature})) return Var::constant(std::move(out));
    return record(std::move(out), {q, k, v, temperature},
                  [q, k, v, temperature, heads, d, n, qn, kn, qnorm, knorm, probs](const Tensor& g) {
        const int c = heads * d;
        std::vector<double> dprob(static_cast<std::size_t>(d) * d);
        std::vector<double> dlogit(static_cast<std::size_t>(d) * d);
        Tensor dqn(qn.shape()), dkn(kn.shape());
        double* gv = v.requires_grad() ? gbuf(v).data() : nullptr;
        for (int h = 0; h < heads; ++h) {
            const double tau = temperature.value()[h];
            const double* ph = probs.data() + static_cast<std::size_t>(h) * d * d;
            // dA = dO V^T ; dV = A^T dO
            for (int i = 0; i < d; ++i) {
                const double* gi = g.data() + (h * d + i) * n;
                for (int j = 0; j < d; ++j) {
                    const double* vj = v.value().data() + (h * d + j) * n;
                    double acc = 0.0;
                    for (std::size_t p = 0; p < n; ++p) acc += gi[p] * vj[p];
                    dprob[i * d + j] = acc;
                    if (gv != nullptr) {
                        const double a = ph[i * d + j];
                        double* gvj = gv + (h * d + j) * n;
                        for (std::size_t p = 0; p < n; ++p) gvj[p] += a * gi[p];
                    }
                }
            }
            // Softmax backward, then logits = tau * qn kn^T.
            double dtau = 0.0;
            for (int i = 0; i < d; ++i) {
                double row_dot = 0.0;
                for (int j = 0; j < d; ++j) row_dot += dprob[i * d + j] * ph[i * d + j];
                for (int j = 0; j < d; ++j) dlogit[i * d + j] = ph[i * d + j] * (dprob[i * d + j] - row_dot);
            }
            for (int i = 0; i < d; ++i) {
                const double* qi = qn.data() + (h * d + i) * n;
                double* dqi = dqn.data() + (h * d + i) * n;
                for (int j = 0; j < d; ++j) {
                    const double* kj = kn.data() + (h * d + j) * n;
                    double* dkj = dkn.data() + (h * d + j) * n;
                    const double dl = dlogit[i * d + j];
                    double s = 0.0;
                    for (std::size_t p = 0; p < n; ++p) {
                        s += qi[p] * kj[p];
                        dqi[p] += tau * dl * kj[p];
                        dkj[p] += tau * dl * qi[p];
                    }
                    dtau += dl * s;
                }
            }
            if (temperature.requires_grad()) gbuf(temperature)[h] += dtau;
        }
        // Back through the row-wise L2 normalisation.
        auto denorm = [&](const Var& src, const Tensor& unit, const Tensor& norms, const Tensor& dunit) {
            if (!src.requires_grad()) return;
            double* gs = gbuf(src).data();
            for (int ch = 0; ch < c; ++ch) {
                const double* u = unit.data() + ch * n;
                const double* du = dunit.data() + ch * n;
                double proj = 0.0;
                for (std::size_t p = 0; p < n; ++p) proj += u[p] * du[p];
                const double inv = 1.0 / norms[ch];
                double* gsr = gs + ch * n;
                for (std::size_t p = 0; p < n; ++p) gsr[p] += (du[p] - u[p] * proj) * inv;
            }
        };
        denorm(q, qn, qnorm, dqn);
        denorm(k, kn, knorm, dkn);
    });
}

// ------------------------------------------------------------------- reshaping

Var concat_channels(std::span<const Var> parts) {
    std::vector<Tensor> values;
    values.reserve(parts.size());
    bool grad = false;
    for (const auto& p : parts) {
        values.push_back(p.value());
        grad = grad || p.requires_grad();
    }
    Tensor out = tdir::concat_channels(values);
    if (!grad) return Var::constant(std::move(out));
    std::vector<Var> inputs(parts.begin(), parts.end());
    return record(std::move(out), inputs, [inputs](const Tensor& g) {
        std::size_t offset = 0;
        for (const auto& in : inputs) {
            const std::size_t len = in.value().size();
            if (in.requires_grad()) {
                Tensor& gi = gbuf(in);
                for (std::size_t i = 0; i < len; ++i) gi[i] += g[offset + i];
            }
            offset += len;
        }
    });
}

Var slice_channels(const Var& x, int begin, int count) {
    require_rank(x, 3, "slice_channels");
    const Tensor& xv = x.value();
    if (begin < 0 || count < 0 || begin + count > xv.channels()) throw InvalidArgument("slice_channels: range");
    const std::size_t plane = static_cast<std::size_t>(xv.height()) * xv.width();
    Tensor out(Shape{count, xv.height(), xv.width()});
    std::copy_n(xv.data() + begin * plane, count * plane, out.data());
    if (!x.requires_grad()) return Var::constant(std::move(out));
    return record(std::move(out), {x}, [x, begin, plane](const Tensor& g) {
        double* gx = gbuf(x).data() + begin * plane;
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
}

namespace {

// Index map shared by pixel (un)shuffle: unshuffled channel c*4 + i*2 + j at
// (y, x) holds the full-resolution sample (c, 2y + i, 2x + j).
template <typename Fn>
void for_each_shuffle_pair(int c_full, int h_half, int w_half, Fn&& fn) {
    const int w_full = 2 * w_half;
    const int h_full = 2 * h_half;
    for (int c = 0; c < c_full; ++c)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                const int cs = c * 4 + i * 2 + j;
                for (int y = 0; y < h_half; ++y)
                    for (int xx = 0; xx < w_half; ++xx) {
                        const std::size_t small = (static_cast<std::size_t>(cs) * h_half + y) * w_half + xx;
                        const std::size_t full =
                            (static_cast<std::size_t>(c) * h_full + 2 * y + i) * w_full + 2 * xx + j;
                        fn(small, full);
                    }
            }
}

} // namespace

Var pixel_unshuffle(const Var& x) {
    require_rank(x, 3, "pixel_unshuffle");
    const Tensor& xv = x.value();
    if (xv.height() % 2 || xv.width() % 2) throw InvalidArgument("pixel_unshuffle: odd spatial size");
    const int c = xv.channels(), h2 = xv.height() / 2, w2 = xv.width() / 2;
    Tensor out(Shape{4 * c, h2, w2});
    for_each_shuffle_pair(c, h2, w2, [&](std::size_t s, std::size_t f) { out[s] = xv[f]; });
    if (!x.requires_grad()) return Var::constant(std::move(out));
    return record(std::move(out), {x}, [x, c, h2, w2](const Tensor& g) {
        Tensor& gx = gbuf(x);
        for_each_shuffle_pair(c, h2, w2, [&](std::size_t s, std::size_t f) { gx[f] += g[s]; });
    });
}

Var pixel_shuffle(const Var& x) {
    require_rank(x, 3, "pixel_shuffle");
    const Tensor& xv = x.value();
    if (xv.channels() % 4) throw InvalidArgument("pixel_shuffle: channels not divisible by 4");
    const int c = xv.channels() / 4, h2 = xv.height(), w2 = xv.width();
    Tensor out(Shape{c, 2 * h2, 2 * w2});
    for_each_shuffle_pair(c, h2, w2, [&](std::size_t s, std::size_t f) { out[f] = xv[s]; });
    if (!x.requires_grad()) return Var::constant(std::move(out));
    return record(std::move(out), {x}, [x, c, h2, w2](const Tensor& g) {
        Tensor& gx = gbuf(x);
        for_each_shuffle_pair(c, h2, w2, [&](std::size_t s, std::size_t f) { gx[s] += g[f]; });
    });
}

// ---------------------------------------------------------- prompt machinery

Var global_avg_pool(const Var& x) {
    require_rank(x, 3, "global_avg_pool");
    const Tensor& xv = x.value();
    const int c = xv.channels();
    const std::size_t plane = static_cast<std::size_t>(xv.height()) * xv.width();
    Tensor out(Shape{c});
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t p = 0; p < plane; ++p) acc += xv[ch * plane + p];
        out[ch] = acc / static_cast<double>(plane);
    }
    if (!x.requires_grad()) return Var::constant(std::move(out));
    return record(std::move(out), {x}, [x, c, plane](const Tensor& g) {
        Tensor& gx = gbuf(x);
        for (int ch = 0; ch < c; ++ch) {
            const double gc = g[ch] / static_cast<double>(plane);
            for (std::size_t p = 0; p < plane; ++p) gx[ch * plane + p] += gc;
        }
    });
}

Var softmax(const Var& logits) {
    require_rank(logits, 1, "softmax");
    const Tensor& lv = logits.value();
    if (lv.empty()) throw InvalidArgument("softmax: empty input");
    Tensor out(lv.shape());
    const double mx = *std::max_element(lv.values().begin(), lv.values().end());
    double z = 0.0;
    for (std::size_t i = 0; i < lv.size(); ++i) z += (out[i] = std::exp(lv[i] - mx));
    for (double& o : out.values()) o /= z;
    if (!logits.requires_grad()) return Var::constant(std::move(out));
    return record(out, {logits}, [logits, out](const Tensor& g) {
        double dot = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * out[i];
        Tensor& gl = gbuf(logits);
        for (std::size_t i = 0; i < g.size(); ++i) gl[i] += out[i] * (g[i] - dot);
    });
}

Var weighted_sum(const Var& weights, const Var& components) {
    require_rank(weights, 1, "weighted_sum");
    const Tensor& cv = components.value();
    const int n = weights.value().dim(0);
    if (cv.rank() < 2 || cv.dim(0) != n) throw InvalidArgument("weighted_sum: component count mismatch");
    Shape item(cv.shape().begin() + 1, cv.shape().end());
    const std::size_t len = shape_size(item);
    Tensor out(item);
    for (int i = 0; i < n; ++i) {
        const double w = weights.value()[i];
        for (std::size_t e = 0; e < len; ++e) out[e] += w * cv[i * len + e];
    }
    if (!any_grad({&weights, &components})) return Var::constant(std::move(out));
    return record(std::move(out), {weights, components}, [weights, components, n, len](const Tensor& g) {
        const Tensor& cv = components.value();
        for (int i = 0; i < n; ++i) {
            if (weights.requires_grad()) {
                double acc = 0.0;
                for (std::size_t e = 0; e < len; ++e) acc += g[e] * cv[i * len + e];
                gbuf(weights)[i] += acc;
            }
            if (components.requires_grad()) {
                const double w = weights.value()[i];
                Tensor& gc = gbuf(components);
                for (std::size_t e = 0; e < len; ++e) gc[i * len + e] += w * g[e];
            }
        }
    });
}

namespace {

struct Tap {
    int lo, hi;
    double w_hi; // weight of `hi`; `lo` gets 1 - w_hi
};

std::vector<Tap> bilinear_taps(int in, int out) {
    std::vector<Tap> taps(static_cast<std::size_t>(out));
    const double ratio = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * ratio - 0.5;
        if (src < 0.0) src = 0.0;
        int lo = static_cast<int>(src);
        if (lo > in - 1) lo = in - 1;
        const int hi = std::min(lo + 1, in - 1);
        taps[o] = {lo, hi, src - lo};
    }
    return taps;
}

} // namespace

Var resize_bilinear(const Var& x, int height, int width) {
    require_rank(x, 3, "resize_bilinear");
    const Tensor& xv = x.value();
    const int c = xv.channels(), hin = xv.height(), win = xv.width();
    if (height < 1 || width < 1) throw InvalidArgument("resize_bilinear: empty target");
    const auto ty = bilinear_taps(hin, height);
    const auto tx = bilinear_taps(win, width);
    Tensor out(Shape{c, height, width});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < height; ++y) {
            const Tap& a = ty[y];
            for (int xx = 0; xx < width; ++xx) {
                const Tap& b = tx[xx];
                const double top = xv.at(ch, a.lo, b.lo) * (1 - b.w_hi) + xv.at(ch, a.lo, b.hi) * b.w_hi;
                const double bot = xv.at(ch, a.hi, b.lo) * (1 - b.w_hi) + xv.at(ch, a.hi, b.hi) * b.w_hi;
                out.at(ch, y, xx) = top * (1 - a.w_hi) + bot * a.w_hi;
            }
        }
    if (!x.requires_grad()) return Var::constant(std::move(out));
    return record(std::move(out), {x}, [x, c, height, width, ty, tx](const Tensor& g) {
        Tensor& gx = gbuf(x);
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < height; ++y) {
                const Tap& a = ty[y];
                for (int xx = 0; xx < width; ++xx) {
                    const Tap& b = tx[xx];
                    const double go = g.at(ch, y, xx);
                    gx.at(ch, a.lo, b.lo) += go * (1 - a.w_hi) * (1 - b.w_hi);
                    gx.at(ch, a.lo, b.hi) += go * (1 - a.w_hi) * b.w_hi;
                    gx.at(ch, a.hi, b.lo) += go * a.w_hi * (1 - b.w_hi);
                    gx.at(ch, a.hi, b.hi) += go * a.w_hi * b.w_hi;
                }
            }
    });
}

Var broadcast_channels(const Var& v, int height, int width) {
    require_rank(v, 1, "broadcast_channels");
    const int c = v.value().dim(0);
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    Tensor out(Shape{c, height, width});
    for (int ch = 0; ch < c; ++ch) std::fill_n(out.data() + ch * plane, plane, v.value()[ch]);
    if (!v.requires_grad()) return Var::constant(std::move(out));
    return record(std::move(out), {v}, [v, c, plane](const Tensor& g) {
        Tensor& gv = gbuf(v);
        for (int ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            for (std::size_t p = 0; p < plane; ++p) acc += g[ch * plane + p];
            gv[ch] += acc;
        }
    });
}

// ------------------------------------------------------------------ reductions

Var sum(const Var& x) {
    double acc = 0.0;
    for (double v : x.value().values()) acc += v;
    Tensor out(Shape{1}, acc);
    if (!x.requires_grad()) return Var::constant(std::move(out));
    return record(std::move(out), {x}, [x](const Tensor& g) {
        Tensor& gx = gbuf(x);
        for (double& v : gx.values()) v += g[0];
    });
}

Var sum_abs(const Var& x) {
    double acc = 0.0;
    for (double v : x.value().values()) acc += std::abs(v);
    Tensor out(Shape{1}, acc);
    if (!x.requires_grad()) return Var::constant(std::move(out));
    return record(std::move(out), {x}, [x](const Tensor& g) {
        Tensor& gx = gbuf(x);
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double v = x.value()[i];
            gx[i] += g[0] * static_cast<double>((v > 0) - (v < 0));
        }
    });
}

Var mean_abs_diff(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "mean_abs_diff");
    const std::size_t n = a.value().size();
    if (n == 0) throw InvalidArgument("mean_abs_diff: empty tensors");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(a.value()[i] - b.value()[i]);
    Tensor out(Shape{1}, acc / static_cast<double>(n));
    if (!any_grad({&a, &b})) return Var::constant(std::move(out));
    return record(std::move(out), {a, b}, [a, b, n](const Tensor& g) {
        const double s = g[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = a.value()[i] - b.value()[i];
            const double sg = s * static_cast<double>((d > 0) - (d < 0));
            if (a.requires_grad()) gbuf(a)[i] += sg;
            if (b.requires_grad()) gbuf(b)[i] -= sg;
        }
    });
}

Var dot(const Var& a, const Tensor& weights) {
    require_same_shape(a.value(), weights, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) acc += a.value()[i] * weights[i];
    Tensor out(Shape{1}, acc);
    if (!a.requires_grad()) return Var::constant(std::move(out));
    return record(std::move(out), {a}, [a, weights](const Tensor& g) {
        Tensor& ga = gbuf(a);
        for (std::size_t i = 0; i < weights.size(); ++i) ga[i] += g[0] * weights[i];
    });
}

} // namespace tdir::autograd
