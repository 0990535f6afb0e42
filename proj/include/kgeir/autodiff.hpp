#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kgeir/matrix.hpp"
#include "kgeir/sparse.hpp"

namespace kgeir::ad {

struct Var {
    int idx = -1;
    bool valid() const { return idx >= 0; }
};

// Record-and-replay reverse-mode differentiation over dense matrices.
// The forward pass records one node per primitive; backward() replays the
// tape in reverse and accumulates gradients into every node that
// (transitively) depends on a named input. Every primitive checks its
// output for non-finite values and throws with the op name.
class Tape {
public:
    // leaf bound to a named parameter; gradients are reported against it
    Var input(Matrix value, std::string name);
    // leaf treated as a constant (no gradient)
    Var constant(Matrix value);

    Var add(Var x, Var y);
    Var sub(Var x, Var y);
    Var mul(Var x, Var y);  // elementwise
    Var matmul(Var x, Var y, bool tx = false, bool ty = false);
    Var scale(Var x, double c);
    Var add_row(Var x, Var b);           // (n x c) + (1 x c), broadcast over rows
    Var tile_rows(Var v, int n);         // (1 x c) -> (n x c)
    Var gather_rows(Var x, std::vector<int> idx);
    Var sparse_mix(const SparseRows& r, Var x);  // r is constant
    Var relu(Var x);
    Var sigmoid(Var x);
    Var tanh(Var x);
    // row softmax; optional 0/1 mask selects the support of each row
    Var softmax_rows(Var x, const Matrix* mask = nullptr);
    // relative-position logits: out[i][j] = q_i . w_rel[clip(j - i, k) + k]
    Var rel_logits(Var q, Var w_rel, int clip_k);
    // relative-position values: out[i] = sum_j a[i][j] * w_rel[clip(j - i, k) + k]
    Var rel_values(Var a, Var w_rel, int clip_k);
    // mean binary cross-entropy of probabilities vs 0/1 targets; optional mask
    Var bce_mean(Var p, Var y, const Matrix* mask = nullptr);
    Var sum_all(Var x);
    Var mean_all(Var x);

    const Matrix& value(Var v) const;
    // backward from a 1x1 scalar; resets previous gradients
    void backward(Var loss);
    // gradient of the last backward() w.r.t. v's value (zeros if unreached)
    Matrix grad_of(Var v) const;
    // (name, gradient) for every named input, in creation order
    std::vector<std::pair<std::string, Matrix>> named_grads() const;

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Matrix val;
        Matrix grad;
        std::function<void(Tape&)> pull;
        std::string name;
        bool needs_grad = false;
    };

    Var emplace(Matrix val, bool needs_grad, std::function<void(Tape&)> pull, const char* op,
                std::string name = {});
    Matrix& grad_buf(int idx);
    bool needs(Var v) const { return nodes_[v.idx].needs_grad; }

    std::vector<Node> nodes_;
};

int clip_index(int x, int k);  // max(-k, min(k, x))

}  // namespace kgeir::ad
