/*
Copyright 2026 the cfreg contributors
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "cfreg/detail/conv3d.hpp"
#include "cfreg/detail/resample.hpp"
#include "cfreg/detail/stencils.hpp"
#include "cfreg/errors.hpp"
#include "cfreg/tensor.hpp"

namespace cfreg {

/// Eager reverse-mode autodiff tape. Every op computes its value immediately
/// and records a closure that scatters upstream gradients to its inputs.
/// Creation order is a topological order, so backward() replays the tape in
/// reverse. A graph is built per training iteration and then discarded.
template <typename T>
class Graph {
public:
    using NodeId = int32_t;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    NodeId leaf(Tensor<T> value, bool needs_grad = false) {
        return push(std::move(value), needs_grad, {});
    }

    const Tensor<T>& value(NodeId id) const { return nodes_[check(id)].value; }

    /// Gradient of the last backward() root w.r.t. this node; zero if the
    /// node does not influence the root.
    const Tensor<T>& grad(NodeId id) { return grad_buf(check(id)); }

    bool needs_grad(NodeId id) const { return nodes_[check(id)].needs_grad; }

    /// Value of a single-element node.
    T scalar(NodeId id) const {
        const Tensor<T>& v = value(id);
        if (v.size() != 1) throw ShapeError("Graph::scalar: node is not a scalar");
        return v[0];
    }

    size_t num_nodes() const { return nodes_.size(); }

    NodeId conv3d(NodeId x, NodeId w, NodeId b, int stride) {
        Tensor<T> out =
            detail::conv3d_forward(value(x), value(w), value(b), stride);
        const bool ng = needs_grad(x) || needs_grad(w) || needs_grad(b);
        NodeId id = push(std::move(out), ng, [this, x, w, b, stride](NodeId self) {
            const Tensor<T>& g = grad_buf(self);
            const Tensor<T>& in = value(x);
            if (needs_grad(x))
                accumulate(x, detail::conv3d_backward_data(
                                  value(w), g, in.channels(), in.depth(), in.height(),
                                  in.width(), stride));
            if (needs_grad(w) || needs_grad(b)) {
                Tensor<T> gw(value(w).shape());
                Tensor<T> gb(value(b).shape());
                detail::conv3d_backward_weights(in, g, stride, gw, gb);
                if (needs_grad(w)) accumulate(w, gw);
                if (needs_grad(b)) accumulate(b, gb);
            }
        });
        return id;
    }

    NodeId leaky_relu(NodeId x, T slope) {
        Tensor<T> out = value(x);
        for (int64_t i = 0; i < out.size(); ++i)
            if (out[i] < T(0)) out[i] *= slope;
        return push(std::move(out), needs_grad(x), [this, x, slope](NodeId self) {
            const Tensor<T>& g = grad_buf(self);
            const Tensor<T>& in = value(x);
            Tensor<T> gx(in.shape());
            for (int64_t i = 0; i < gx.size(); ++i)
                gx[i] = in[i] > T(0) ? g[i] : slope * g[i];
            accumulate(x, gx);
        });
    }

    NodeId relu(NodeId x) {
        Tensor<T> out = value(x);
        for (int64_t i = 0; i < out.size(); ++i)
            if (out[i] < T(0)) out[i] = T(0);
        return push(std::move(out), needs_grad(x), [this, x](NodeId self) {
            const Tensor<T>& g = grad_buf(self);
            const Tensor<T>& in = value(x);
            Tensor<T> gx(in.shape());
            for (int64_t i = 0; i < gx.size(); ++i) gx[i] = in[i] > T(0) ? g[i] : T(0);
            accumulate(x, gx);
        });
    }

    NodeId concat(const std::vector<NodeId>& xs) {
        if (xs.empty()) throw ShapeError("Graph::concat: empty input list");
        const Tensor<T>& first = value(xs[0]);
        int ctotal = 0;
        bool ng = false;
        for (NodeId x : xs) {
            if (!value(x).same_spatial_shape(first))
                throw ShapeError("Graph::concat: spatial shapes differ");
            ctotal += value(x).channels();
            ng = ng || needs_grad(x);
        }
        Tensor<T> out(ctotal, first.depth(), first.height(), first.width());
        int64_t off = 0;
        for (NodeId x : xs) {
            const Tensor<T>& v = value(x);
            for (int64_t i = 0; i < v.size(); ++i) out[off + i] = v[i];
            off += v.size();
        }
        std::vector<NodeId> inputs = xs;
        return push(std::move(out), ng, [this, inputs](NodeId self) {
            const Tensor<T>& g = grad_buf(self);
            int64_t off2 = 0;
            for (NodeId x : inputs) {
                const Tensor<T>& v = value(x);
                if (needs_grad(x)) {
                    Tensor<T> gx(v.shape());
                    for (int64_t i = 0; i < gx.size(); ++i) gx[i] = g[off2 + i];
                    accumulate(x, gx);
                }
                off2 += v.size();
            }
        });
    }

    /// Extracts one channel as a single-channel tensor.
    NodeId channel(NodeId x, int c) {
        const Tensor<T>& v = value(x);
        if (c < 0 || c >= v.channels()) throw ShapeError("Graph::channel: index out of range");
        Tensor<T> out(1, v.depth(), v.height(), v.width());
        const int64_t n = v.spatial_size(), off = int64_t(c) * n;
        for (int64_t i = 0; i < n; ++i) out[i] = v[off + i];
        return push(std::move(out), needs_grad(x), [this, x, c](NodeId self) {
            const Tensor<T>& g = grad_buf(self);
            const int64_t n2 = g.size(), off2 = int64_t(c) * n2;
            Tensor<T> gx(value(x).shape());
            for (int64_t i = 0; i < n2; ++i) gx[off2 + i] = g[i];
            accumulate(x, gx);
        });
    }

    NodeId upsample2x(NodeId x) {
        Tensor<T> out = detail::upsample2x_forward(value(x));
        return push(std::move(out), needs_grad(x), [this, x](NodeId self) {
            const Tensor<T>& in = value(x);
            accumulate(x, detail::upsample2x_backward(grad_buf(self), in.depth(),
                                                      in.height(), in.width()));
        });
    }

    NodeId warp(NodeId img, NodeId field) {
        require_field(value(field), "Graph::warp");
        if (!value(img).same_spatial_shape(value(field)))
            throw ShapeError("Graph::warp: image vs field spatial shapes differ");
        Tensor<T> out = detail::warp_forward(value(img), value(field));
        const bool ng = needs_grad(img) || needs_grad(field);
        return push(std::move(out), ng, [this, img, field](NodeId self) {
            const Tensor<T>& g = grad_buf(self);
            if (needs_grad(img)) {
                const Tensor<T>& im = value(img);
                accumulate(img,
                           detail::warp_backward_image(value(field), g, im.channels(),
                                                       im.depth(), im.height(), im.width()));
            }
            if (needs_grad(field))
                accumulate(field, detail::warp_backward_field(value(img), value(field), g));
        });
    }

    NodeId add(NodeId a, NodeId b) {
        return binary(a, b, [](T x, T y) { return x + y; },
                      [this, a, b](NodeId self) {
                          const Tensor<T>& g = grad_buf(self);
                          if (needs_grad(a)) accumulate(a, g);
                          if (needs_grad(b)) accumulate(b, g);
                      });
    }

    NodeId sub(NodeId a, NodeId b) {
        return binary(a, b, [](T x, T y) { return x - y; },
                      [this, a, b](NodeId self) {
                          const Tensor<T>& g = grad_buf(self);
                          if (needs_grad(a)) accumulate(a, g);
                          if (needs_grad(b)) {
                              Tensor<T> gb(g.shape());
                              for (int64_t i = 0; i < gb.size(); ++i) gb[i] = -g[i];
                              accumulate(b, gb);
                          }
                      });
    }

    NodeId mul(NodeId a, NodeId b) {
        return binary(a, b, [](T x, T y) { return x * y; },
                      [this, a, b](NodeId self) {
                          const Tensor<T>& g = grad_buf(self);
                          if (needs_grad(a)) {
                              const Tensor<T>& vb = value(b);
                              Tensor<T> ga(g.shape());
                              for (int64_t i = 0; i < ga.size(); ++i) ga[i] = g[i] * vb[i];
                              accumulate(a, ga);
                          }
                          if (needs_grad(b)) {
                              const Tensor<T>& va = value(a);
                              Tensor<T> gb(g.shape());
                              for (int64_t i = 0; i < gb.size(); ++i) gb[i] = g[i] * va[i];
                              accumulate(b, gb);
                          }
                      });
    }

    NodeId div(NodeId a, NodeId b) {
        return binary(a, b, [](T x, T y) { return x / y; },
                      [this, a, b](NodeId self) {
                          const Tensor<T>& g = grad_buf(self);
                          const Tensor<T>& va = value(a);
                          const Tensor<T>& vb = value(b);
                          if (needs_grad(a)) {
                              Tensor<T> ga(g.shape());
                              for (int64_t i = 0; i < ga.size(); ++i) ga[i] = g[i] / vb[i];
                              accumulate(a, ga);
                          }
                          if (needs_grad(b)) {
                              Tensor<T> gb(g.shape());
                              for (int64_t i = 0; i < gb.size(); ++i)
                                  gb[i] = -g[i] * va[i] / (vb[i] * vb[i]);
                              accumulate(b, gb);
                          }
                      });
    }

    NodeId scale(NodeId x, T s) {
        Tensor<T> out = value(x);
        for (int64_t i = 0; i < out.size(); ++i) out[i] *= s;
        return push(std::move(out), needs_grad(x), [this, x, s](NodeId self) {
            const Tensor<T>& g = grad_buf(self);
            Tensor<T> gx(g.shape());
            for (int64_t i = 0; i < gx.size(); ++i) gx[i] = g[i] * s;
            accumulate(x, gx);
        });
    }

    NodeId add_scalar(NodeId x, T s) {
        Tensor<T> out = value(x);
        for (int64_t i = 0; i < out.size(); ++i) out[i] += s;
        return push(std::move(out), needs_grad(x),
                    [this, x](NodeId self) { accumulate(x, grad_buf(self)); });
    }

    NodeId box_sum(NodeId x, int window) {
        Tensor<T> out = detail::box_sum(value(x), window);
        return push(std::move(out), needs_grad(x), [this, x, window](NodeId self) {
            // The symmetric zero-padded window sum is self-adjoint.
            accumulate(x, detail::box_sum(grad_buf(self), window));
        });
    }

    NodeId axis_diff(NodeId x, int axis) {
        if (axis < 0 || axis > 2) throw ShapeError("Graph::axis_diff: axis must be 0..2");
        Tensor<T> out = detail::axis_diff_forward(value(x), axis);
        return push(std::move(out), needs_grad(x), [this, x, axis](NodeId self) {
            accumulate(x, detail::axis_diff_backward(grad_buf(self), axis));
        });
    }

    NodeId reduce_mean(NodeId x) {
        const Tensor<T>& v = value(x);
        Tensor<T> out(1, 1, 1, 1);
        T acc = 0;
        for (int64_t i = 0; i < v.size(); ++i) acc += v[i];
        out[0] = acc / static_cast<T>(v.size());
        return push(std::move(out), needs_grad(x), [this, x](NodeId self) {
            const T g = grad_buf(self)[0] / static_cast<T>(value(x).size());
            Tensor<T> gx(value(x).shape());
            for (int64_t i = 0; i < gx.size(); ++i) gx[i] = g;
            accumulate(x, gx);
        });
    }

    NodeId reduce_sum(NodeId x) {
        const Tensor<T>& v = value(x);
        Tensor<T> out(1, 1, 1, 1);
        T acc = 0;
        for (int64_t i = 0; i < v.size(); ++i) acc += v[i];
        out[0] = acc;
        return push(std::move(out), needs_grad(x), [this, x](NodeId self) {
            const T g = grad_buf(self)[0];
            Tensor<T> gx(value(x).shape());
            for (int64_t i = 0; i < gx.size(); ++i) gx[i] = g;
            accumulate(x, gx);
        });
    }

    /// Seeds d(root)/d(root) = 1 and replays the tape in reverse. Call once
    /// per graph; root must be a scalar node.
    void backward(NodeId root) {
        if (value(root).size() != 1)
            throw ShapeError("Graph::backward: root must be a scalar node");
        if (ran_backward_) throw Error("Graph::backward: already ran on this graph");
        ran_backward_ = true;
        grad_buf(root)[0] = T(1);
        for (NodeId id = root; id >= 0; --id) {
            Node& n = nodes_[id];
            if (!n.needs_grad || !n.grad_alloc || !n.backward) continue;
            n.backward(id);
        }
    }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool needs_grad = false;
        bool grad_alloc = false;
        std::function<void(NodeId)> backward;
    };

    NodeId check(NodeId id) const {
        if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
            throw Error("Graph: bad node id");
        return id;
    }

    NodeId push(Tensor<T>&& value, bool needs_grad, std::function<void(NodeId)> bwd) {
        Node n;
        n.value = std::move(value);
        n.needs_grad = needs_grad;
        if (needs_grad) n.backward = std::move(bwd);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    template <typename FwdFn>
    NodeId binary(NodeId a, NodeId b, FwdFn&& f, std::function<void(NodeId)> bwd) {
        const Tensor<T>& va = value(a);
        const Tensor<T>& vb = value(b);
        if (!va.same_shape(vb))
            throw ShapeError("Graph: elementwise op shapes differ: " + va.shape_str() +
                             " vs " + vb.shape_str());
        Tensor<T> out(va.shape());
        for (int64_t i = 0; i < out.size(); ++i) out[i] = f(va[i], vb[i]);
        return push(std::move(out), needs_grad(a) || needs_grad(b), std::move(bwd));
    }

    Tensor<T>& grad_buf(NodeId id) {
        Node& n = nodes_[check(id)];
        if (!n.grad_alloc) {
            n.grad = Tensor<T>(n.value.shape());
            n.grad_alloc = true;
        }
        return n.grad;
    }

    void accumulate(NodeId id, const Tensor<T>& contribution) {
        Tensor<T>& g = grad_buf(id);
        if (!g.same_shape(contribution))
            throw ShapeError("Graph: gradient shape mismatch");
        for (int64_t i = 0; i < g.size(); ++i) g[i] += contribution[i];
    }

    std::vector<Node> nodes_;
    bool ran_backward_ = false;
};

} // namespace cfreg
