#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mabsa/tensor.hpp"

namespace mabsa {

// Handle to a node in a Graph. Only valid for the graph that created it.
struct Var {
    std::uint32_t id = 0;
};

// Reverse-mode autodiff tape. Nodes are appended in construction order, so a
// node's parents always precede it and backward() is a single reverse sweep.
// A graph is confined to one thread; run independent examples on separate
// graphs.
class Graph {
public:
    Var input(Tensor value);  // honors value.requires_grad
    Var input(Tensor value, bool requires_grad);
    Var constant(Tensor value) { return input(std::move(value), false); }

    // References returned here point into the tape and are invalidated by the
    // next op on this graph; copy the Tensor to keep it.
    const Tensor& value(Var v) const;
    const Tensor& grad(Var v) const;  // UsageError if backward() has not reached v
    bool has_grad(Var v) const;
    bool requires_grad(Var v) const;
    std::size_t node_count() const { return nodes_.size(); }

    // Elementwise / shape ops.
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double c);
    Var reshape(Var a, std::vector<std::size_t> shape);
    Var transpose(Var a);
    Var sum(Var a);
    Var mean(Var a);

    // Linear algebra.
    Var matmul(Var a, Var b);
    Var add_row_vector(Var m, Var v);  // m: n x k, v: k

    // Nonlinearities and losses.
    Var softmax(Var a);  // along the last axis, max-subtraction stabilized
    Var layer_norm(Var x, Var gain, Var bias, double eps);
    Var gelu(Var a);
    Var cross_entropy(Var logits, std::size_t target);  // logits rank-1
    Var kl_divergence(Var q, Var p);                    // rank-1 distributions

    // Structural ops.
    Var gather_rows(Var table, std::vector<std::size_t> ids);
    Var slice_rows(Var a, std::size_t begin, std::size_t count);
    Var slice_cols(Var a, std::size_t begin, std::size_t count);
    Var concat_rows(const std::vector<Var>& parts);
    Var concat_cols(const std::vector<Var>& parts);

    // Seeds the root with grad 1 and sweeps the tape in reverse. Root must be
    // a scalar that depends on at least one requires_grad input.
    void backward(Var root);

private:
    struct Node {
        Tensor value;
        bool requires_grad = false;
        std::function<void(Graph&, std::uint32_t)> backprop;  // (graph, self id)
    };

    Var emit(Tensor value, bool requires_grad,
             std::function<void(Graph&, std::uint32_t)> backprop);
    void accumulate(std::uint32_t id, const Tensor& g);
    void check(Var v) const;

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;  // parallel to nodes_; empty shape = not yet set
};

// Central finite-difference check of a scalar function built through a Graph.
// Rebuilds the graph per evaluation; returns the max relative error over all
// input elements, with denominator max(|analytic|, |numeric|, 1e-4).
double grad_check(const std::function<Var(Graph&, const std::vector<Var>&)>& f,
                  const std::vector<Tensor>& inputs, double h = 1e-5);

}  // namespace mabsa
