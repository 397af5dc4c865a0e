#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "priorcl/errors.hpp"
#include "priorcl/tensor.hpp"

namespace priorcl {

// Reverse-mode tape. Nodes are appended in evaluation order, which is already
// a topological order, so backward() is a single reverse sweep. Each op saves
// whatever forward values its pullback needs inside the closure.
//
// The operator set is deliberately closed: exactly what the encoder,
// projection head, classifier and losses consume.

using NodeId = std::size_t;

class Tape {
public:
    // Leaf node: parameter or input. Gradients accumulate for every node;
    // callers read only the ones they care about.
    NodeId leaf(Tensor value) { return push(std::move(value), nullptr); }

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
    double scalar(NodeId id) const {
        if (nodes_[id].value.size() != 1)
            throw ContractError("node " + std::to_string(id) + " holds " +
                                nodes_[id].value.shape_str() + ", not a scalar");
        return nodes_[id].value[0];
    }
    std::size_t size() const { return nodes_.size(); }

    // out[c][t] = bias[c] + sum_{ci,j} w[c][ci][j] * in[ci][t*stride + j]
    // Valid (unpadded) convolution: T_out = floor((T - k)/stride) + 1.
    NodeId conv1d(NodeId input, NodeId weights, NodeId bias, std::size_t stride) {
        const Tensor& x = nodes_[input].value;
        const Tensor& w = nodes_[weights].value;
        const Tensor& b = nodes_[bias].value;
        require_rank(x, 2, "conv1d input");
        require_rank(w, 3, "conv1d weights");
        require_shape(b, {w.dim(0)}, "conv1d bias");
        if (x.dim(0) != w.dim(1))
            throw ShapeError("conv1d input has " + std::to_string(x.dim(0)) +
                             " channels but weights expect " + std::to_string(w.dim(1)));
        if (stride < 1) throw ShapeError("conv1d stride must be >= 1");
        const std::size_t c_out = w.dim(0), c_in = w.dim(1), k = w.dim(2), t_in = x.dim(1);
        if (t_in < k)
            throw ShapeError("conv1d input length " + std::to_string(t_in) +
                             " is shorter than the kernel (" + std::to_string(k) + ")");
        const std::size_t t_out = (t_in - k) / stride + 1;

        Tensor out({c_out, t_out});
        for (std::size_t c = 0; c < c_out; ++c) {
            for (std::size_t t = 0; t < t_out; ++t) {
                double acc = b[c];
                const std::size_t base = t * stride;
                for (std::size_t ci = 0; ci < c_in; ++ci) {
                    const double* xr = x.data() + ci * t_in + base;
                    const double* wr = w.data() + (c * c_in + ci) * k;
                    for (std::size_t j = 0; j < k; ++j) acc += wr[j] * xr[j];
                }
                out.at(c, t) = acc;
            }
        }
        return push(std::move(out), [input, weights, bias, stride, c_out, c_in, k, t_in,
                                     t_out](Tape& tp, NodeId self) {
            const Tensor& g = tp.nodes_[self].grad;
            const Tensor& x = tp.nodes_[input].value;
            const Tensor& w = tp.nodes_[weights].value;
            Tensor& gx = tp.nodes_[input].grad;
            Tensor& gw = tp.nodes_[weights].grad;
            Tensor& gb = tp.nodes_[bias].grad;
            for (std::size_t c = 0; c < c_out; ++c) {
                for (std::size_t t = 0; t < t_out; ++t) {
                    const double go = g.at(c, t);
                    if (go == 0.0) continue;
                    gb[c] += go;
                    const std::size_t base = t * stride;
                    for (std::size_t ci = 0; ci < c_in; ++ci) {
                        double* gxr = gx.data() + ci * t_in + base;
                        const double* xr = x.data() + ci * t_in + base;
                        double* gwr = gw.data() + (c * c_in + ci) * k;
                        const double* wr = w.data() + (c * c_in + ci) * k;
                        for (std::size_t j = 0; j < k; ++j) {
                            gxr[j] += go * wr[j];
                            gwr[j] += go * xr[j];
                        }
                    }
                }
            }
        });
    }

    // Normalizes across channels independently at every timestep (biased
    // variance), then applies the per-channel affine. Rank-1 input is treated
    // as a single timestep.
    NodeId layernorm(NodeId input, NodeId gain, NodeId offset, double eps = 1e-5) {
        const Tensor& x = nodes_[input].value;
        if (x.rank() != 1 && x.rank() != 2)
            throw ShapeError("layernorm input must be rank 1 or 2, got " + x.shape_str());
        const std::size_t c = x.dim(0);
        const std::size_t t_len = x.rank() == 2 ? x.dim(1) : 1;
        require_shape(nodes_[gain].value, {c}, "layernorm gain");
        require_shape(nodes_[offset].value, {c}, "layernorm offset");
        if (eps <= 0.0) throw DomainError("layernorm eps must be positive");

        Tensor out(x.shape());
        Tensor xhat(x.shape());
        Tensor inv_sd({t_len});
        const Tensor& gvec = nodes_[gain].value;
        const Tensor& ovec = nodes_[offset].value;
        for (std::size_t t = 0; t < t_len; ++t) {
            double mean = 0.0;
            for (std::size_t i = 0; i < c; ++i) mean += x[i * t_len + t];
            mean /= static_cast<double>(c);
            double var = 0.0;
            for (std::size_t i = 0; i < c; ++i) {
                const double d = x[i * t_len + t] - mean;
                var += d * d;
            }
            var /= static_cast<double>(c);
            const double isd = 1.0 / std::sqrt(var + eps);
            inv_sd[t] = isd;
            for (std::size_t i = 0; i < c; ++i) {
                const double h = (x[i * t_len + t] - mean) * isd;
                xhat[i * t_len + t] = h;
                out[i * t_len + t] = gvec[i] * h + ovec[i];
            }
        }
        return push(std::move(out), [input, gain, offset, c, t_len, xhat = std::move(xhat),
                                     inv_sd = std::move(inv_sd)](Tape& tp, NodeId self) {
            const Tensor& g = tp.nodes_[self].grad;
            const Tensor& gvec = tp.nodes_[gain].value;
            Tensor& gx = tp.nodes_[input].grad;
            Tensor& gg = tp.nodes_[gain].grad;
            Tensor& go = tp.nodes_[offset].grad;
            const auto dc = static_cast<double>(c);
            for (std::size_t t = 0; t < t_len; ++t) {
                double sum_dh = 0.0, sum_dh_h = 0.0;
                for (std::size_t i = 0; i < c; ++i) {
                    const double gi = g[i * t_len + t];
                    const double dh = gi * gvec[i];
                    sum_dh += dh;
                    sum_dh_h += dh * xhat[i * t_len + t];
                    gg[i] += gi * xhat[i * t_len + t];
                    go[i] += gi;
                }
                const double m_dh = sum_dh / dc;
                const double m_dh_h = sum_dh_h / dc;
                for (std::size_t i = 0; i < c; ++i) {
                    const double dh = g[i * t_len + t] * gvec[i];
                    gx[i * t_len + t] +=
                        inv_sd[t] * (dh - m_dh - xhat[i * t_len + t] * m_dh_h);
                }
            }
        });
    }

    // Exact-erf GELU: x * Phi(x).
    NodeId gelu(NodeId input) {
        const Tensor& x = nodes_[input].value;
        Tensor out(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * norm_cdf(x[i]);
        return push(std::move(out), [input](Tape& tp, NodeId self) {
            const Tensor& g = tp.nodes_[self].grad;
            const Tensor& x = tp.nodes_[input].value;
            Tensor& gx = tp.nodes_[input].grad;
            constexpr double inv_sqrt_2pi = 0.3989422804014326779399460599344;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x[i] * x[i]);
                gx[i] += g[i] * (norm_cdf(x[i]) + x[i] * pdf);
            }
        });
    }

    // out = W x + b with W: [m x n], x: [n], b: [m]
    NodeId dense(NodeId input, NodeId weights, NodeId bias) {
        const Tensor& x = nodes_[input].value;
        const Tensor& w = nodes_[weights].value;
        require_rank(x, 1, "dense input");
        require_rank(w, 2, "dense weights");
        const std::size_t m = w.dim(0), n = w.dim(1);
        require_shape(x, {n}, "dense input");
        require_shape(nodes_[bias].value, {m}, "dense bias");
        Tensor out({m});
        const Tensor& b = nodes_[bias].value;
        for (std::size_t i = 0; i < m; ++i) {
            double acc = b[i];
            const double* wr = w.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) acc += wr[j] * x[j];
            out[i] = acc;
        }
        return push(std::move(out), [input, weights, bias, m, n](Tape& tp, NodeId self) {
            const Tensor& g = tp.nodes_[self].grad;
            const Tensor& x = tp.nodes_[input].value;
            const Tensor& w = tp.nodes_[weights].value;
            Tensor& gx = tp.nodes_[input].grad;
            Tensor& gw = tp.nodes_[weights].grad;
            Tensor& gb = tp.nodes_[bias].grad;
            for (std::size_t i = 0; i < m; ++i) {
                const double gi = g[i];
                gb[i] += gi;
                const double* wr = w.data() + i * n;
                double* gwr = gw.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) {
                    gx[j] += gi * wr[j];
                    gwr[j] += gi * x[j];
                }
            }
        });
    }

    // [C x T] -> [C], mean over time.
    NodeId global_avg_pool(NodeId input) {
        const Tensor& x = nodes_[input].value;
        require_rank(x, 2, "global_avg_pool input");
        const std::size_t c = x.dim(0), t_len = x.dim(1);
        Tensor out({c});
        for (std::size_t i = 0; i < c; ++i) {
            double acc = 0.0;
            for (std::size_t t = 0; t < t_len; ++t) acc += x.at(i, t);
            out[i] = acc / static_cast<double>(t_len);
        }
        return push(std::move(out), [input, c, t_len](Tape& tp, NodeId self) {
            const Tensor& g = tp.nodes_[self].grad;
            Tensor& gx = tp.nodes_[input].grad;
            const double inv = 1.0 / static_cast<double>(t_len);
            for (std::size_t i = 0; i < c; ++i)
                for (std::size_t t = 0; t < t_len; ++t) gx[i * t_len + t] += g[i] * inv;
        });
    }

    NodeId add(NodeId a, NodeId b) {
        const Tensor& xa = nodes_[a].value;
        const Tensor& xb = nodes_[b].value;
        require_shape(xb, xa.shape(), "add rhs");
        Tensor out(xa.shape());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] + xb[i];
        return push(std::move(out), [a, b](Tape& tp, NodeId self) {
            const Tensor& g = tp.nodes_[self].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                tp.nodes_[a].grad[i] += g[i];
                tp.nodes_[b].grad[i] += g[i];
            }
        });
    }

    NodeId mul(NodeId a, NodeId b) {
        const Tensor& xa = nodes_[a].value;
        const Tensor& xb = nodes_[b].value;
        require_shape(xb, xa.shape(), "mul rhs");
        Tensor out(xa.shape());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] * xb[i];
        return push(std::move(out), [a, b](Tape& tp, NodeId self) {
            const Tensor& g = tp.nodes_[self].grad;
            const Tensor& xa = tp.nodes_[a].value;
            const Tensor& xb = tp.nodes_[b].value;
            for (std::size_t i = 0; i < g.size(); ++i) {
                tp.nodes_[a].grad[i] += g[i] * xb[i];
                tp.nodes_[b].grad[i] += g[i] * xa[i];
            }
        });
    }

    NodeId scale(NodeId a, double factor) {
        const Tensor& x = nodes_[a].value;
        Tensor out(x.shape());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * x[i];
        return push(std::move(out), [a, factor](Tape& tp, NodeId self) {
            const Tensor& g = tp.nodes_[self].grad;
            for (std::size_t i = 0; i < g.size(); ++i) tp.nodes_[a].grad[i] += factor * g[i];
        });
    }

    NodeId sum(NodeId a) {
        const Tensor& x = nodes_[a].value;
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
        return push(Tensor::scalar(acc), [a](Tape& tp, NodeId self) {
            const double g = tp.nodes_[self].grad[0];
            for (std::size_t i = 0; i < tp.nodes_[a].grad.size(); ++i) tp.nodes_[a].grad[i] += g;
        });
    }

    NodeId mean(NodeId a) {
        const std::size_t n = nodes_[a].value.size();
        if (n == 0) throw ShapeError("mean of an empty tensor");
        return scale(sum(a), 1.0 / static_cast<double>(n));
    }

    NodeId exp(NodeId a) {
        const Tensor& x = nodes_[a].value;
        Tensor out(x.shape());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x[i]);
        return push(std::move(out), [a](Tape& tp, NodeId self) {
            const Tensor& g = tp.nodes_[self].grad;
            const Tensor& y = tp.nodes_[self].value;
            for (std::size_t i = 0; i < g.size(); ++i) tp.nodes_[a].grad[i] += g[i] * y[i];
        });
    }

    NodeId log(NodeId a) {
        const Tensor& x = nodes_[a].value;
        Tensor out(x.shape());
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (x[i] <= 0.0) throw DomainError("log of non-positive value");
            out[i] = std::log(x[i]);
        }
        return push(std::move(out), [a](Tape& tp, NodeId self) {
            const Tensor& g = tp.nodes_[self].grad;
            const Tensor& x = tp.nodes_[a].value;
            for (std::size_t i = 0; i < g.size(); ++i) tp.nodes_[a].grad[i] += g[i] / x[i];
        });
    }

    // Euclidean norm as a scalar node; the tiny floor keeps the zero-vector
    // pullback finite.
    NodeId l2norm(NodeId a) {
        const Tensor& x = nodes_[a].value;
        double sq = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) sq += x[i] * x[i];
        const double norm = std::sqrt(sq);
        return push(Tensor::scalar(norm), [a, norm](Tape& tp, NodeId self) {
            const double g = tp.nodes_[self].grad[0];
            const Tensor& x = tp.nodes_[a].value;
            const double safe = std::max(norm, 1e-12);
            for (std::size_t i = 0; i < x.size(); ++i)
                tp.nodes_[a].grad[i] += g * x[i] / safe;
        });
    }

    // Numerically stabilized -log softmax(logits)[label].
    NodeId softmax_cross_entropy(NodeId logits, std::size_t label) {
        const Tensor& x = nodes_[logits].value;
        require_rank(x, 1, "softmax_cross_entropy logits");
        if (label >= x.size())
            throw ShapeError("label " + std::to_string(label) + " out of range for " +
                             std::to_string(x.size()) + " logits");
        double mx = x[0];
        for (std::size_t i = 1; i < x.size(); ++i) mx = std::max(mx, x[i]);
        double denom = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) denom += std::exp(x[i] - mx);
        const double loss = std::log(denom) + mx - x[label];
        return push(Tensor::scalar(loss), [logits, label, mx, denom](Tape& tp, NodeId self) {
            const double g = tp.nodes_[self].grad[0];
            const Tensor& x = tp.nodes_[logits].value;
            Tensor& gx = tp.nodes_[logits].grad;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double p = std::exp(x[i] - mx) / denom;
                gx[i] += g * (p - (i == label ? 1.0 : 0.0));
            }
        });
    }

    // Escape hatch for fused forward/backward pairs (the contrastive loss
    // registers itself through this). vjp receives the upstream gradient and
    // the saved input values, and returns one cotangent per input.
    using CustomVjp =
        std::function<std::vector<Tensor>(const Tensor& grad_out, const std::vector<Tensor>& inputs)>;

    NodeId custom(std::vector<NodeId> inputs, Tensor value, CustomVjp vjp) {
        return push(std::move(value),
                    [inputs = std::move(inputs), vjp = std::move(vjp)](Tape& tp, NodeId self) {
                        std::vector<Tensor> vals;
                        vals.reserve(inputs.size());
                        for (NodeId id : inputs) vals.push_back(tp.nodes_[id].value);
                        std::vector<Tensor> cots = vjp(tp.nodes_[self].grad, vals);
                        if (cots.size() != inputs.size())
                            throw ContractError("custom op returned " +
                                                std::to_string(cots.size()) +
                                                " cotangents for " + std::to_string(inputs.size()) +
                                                " inputs");
                        for (std::size_t i = 0; i < inputs.size(); ++i) {
                            Tensor& acc = tp.nodes_[inputs[i]].grad;
                            require_shape(cots[i], acc.shape(), "custom op cotangent");
                            for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += cots[i][j];
                        }
                    });
    }

    // Reverse sweep from a scalar loss node.
    void backward(NodeId loss) {
        if (nodes_[loss].value.size() != 1)
            throw ContractError("backward needs a scalar loss, got " +
                                nodes_[loss].value.shape_str());
        backward(loss, Tensor::scalar(1.0));
    }

    // Reverse sweep with an explicit seed cotangent; lets callers compose
    // closed-form gradients of downstream scalar functions.
    void backward(NodeId node, const Tensor& seed) {
        backward(std::vector<std::pair<NodeId, Tensor>>{{node, seed}});
    }

    // Multi-seed sweep: all cotangents are injected first, then one reverse
    // pass propagates them jointly. A tape supports exactly one sweep between
    // zero_grad() calls; re-propagating already-accumulated gradients would
    // double-count, so a second sweep is a contract violation.
    void backward(const std::vector<std::pair<NodeId, Tensor>>& seeds) {
        if (swept_)
            throw ContractError("tape already swept; call zero_grad() before another backward");
        for (const auto& [node, seed] : seeds) {
            require_shape(seed, nodes_[node].value.shape(), "backward seed");
            Tensor& g = nodes_[node].grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
        }
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            if (nodes_[i].back && has_grad(i)) nodes_[i].back(*this, i);
        }
        swept_ = true;
    }

    void zero_grad() {
        for (Node& n : nodes_)
            for (std::size_t i = 0; i < n.grad.size(); ++i) n.grad[i] = 0.0;
        swept_ = false;
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&, NodeId)> back;
    };

    static double norm_cdf(double x) {
        return 0.5 * (1.0 + std::erf(x * 0.70710678118654752440084436210485));
    }

    NodeId push(Tensor value, std::function<void(Tape&, NodeId)> back) {
        Node n;
        n.grad = Tensor(value.shape());
        n.value = std::move(value);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return nodes_.size() - 1;
    }

    bool has_grad(NodeId id) const {
        for (double v : nodes_[id].grad.values())
            if (v != 0.0) return true;
        return false;
    }

    std::vector<Node> nodes_;
    bool swept_ = false;
};

} // namespace priorcl
