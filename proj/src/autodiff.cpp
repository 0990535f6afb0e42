#include "kgeir/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "kgeir/error.hpp"

namespace kgeir::ad {

namespace {
constexpr double kBceEps = 1e-12;
}

int clip_index(int x, int k) { return std::max(-k, std::min(k, x)); }

Var Tape::emplace(Matrix val, bool needs_grad, std::function<void(Tape&)> pull, const char* op,
                  std::string name) {
    if (!val.all_finite()) fail(std::string("autodiff: non-finite values produced by op '") + op + "'");
    Node n;
    n.val = std::move(val);
    n.pull = std::move(pull);
    n.name = std::move(name);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_buf(int idx) {
    Node& n = nodes_[idx];
    if (n.grad.rows != n.val.rows || n.grad.cols != n.val.cols)
        n.grad = Matrix::zeros(n.val.rows, n.val.cols);
    return n.grad;
}

Var Tape::input(Matrix value, std::string name) {
    require(!name.empty(), "autodiff: input requires a name");
    return emplace(std::move(value), true, nullptr, "input", std::move(name));
}

Var Tape::constant(Matrix value) { return emplace(std::move(value), false, nullptr, "constant"); }

const Matrix& Tape::value(Var v) const { return nodes_[v.idx].val; }

Var Tape::add(Var x, Var y) {
    const Matrix& a = value(x);
    const Matrix& b = value(y);
    require(a.same_shape(b), "add: shape mismatch");
    Matrix out = a;
    for (size_t i = 0; i < out.size(); ++i) out.a[i] += b.a[i];
    const bool ng = needs(x) || needs(y);
    return emplace(std::move(out), ng, [x, y, me = nodes_.size()](Tape& t) {
        const Matrix& g = t.nodes_[me].grad;
        if (t.needs(x)) {
            Matrix& gx = t.grad_buf(x.idx);
            for (size_t i = 0; i < g.size(); ++i) gx.a[i] += g.a[i];
        }
        if (t.needs(y)) {
            Matrix& gy = t.grad_buf(y.idx);
            for (size_t i = 0; i < g.size(); ++i) gy.a[i] += g.a[i];
        }
    }, "add");
}

Var Tape::sub(Var x, Var y) {
    const Matrix& a = value(x);
    const Matrix& b = value(y);
    require(a.same_shape(b), "sub: shape mismatch");
    Matrix out = a;
    for (size_t i = 0; i < out.size(); ++i) out.a[i] -= b.a[i];
    const bool ng = needs(x) || needs(y);
    return emplace(std::move(out), ng, [x, y, me = nodes_.size()](Tape& t) {
        const Matrix& g = t.nodes_[me].grad;
        if (t.needs(x)) {
            Matrix& gx = t.grad_buf(x.idx);
            for (size_t i = 0; i < g.size(); ++i) gx.a[i] += g.a[i];
        }
        if (t.needs(y)) {
            Matrix& gy = t.grad_buf(y.idx);
            for (size_t i = 0; i < g.size(); ++i) gy.a[i] -= g.a[i];
        }
    }, "sub");
}

Var Tape::mul(Var x, Var y) {
    const Matrix& a = value(x);
    const Matrix& b = value(y);
    require(a.same_shape(b), "mul: shape mismatch");
    Matrix out = a;
    for (size_t i = 0; i < out.size(); ++i) out.a[i] *= b.a[i];
    const bool ng = needs(x) || needs(y);
    return emplace(std::move(out), ng, [x, y, me = nodes_.size()](Tape& t) {
        const Matrix& g = t.nodes_[me].grad;
        const Matrix& a = t.value(x);
        const Matrix& b = t.value(y);
        if (t.needs(x)) {
            Matrix& gx = t.grad_buf(x.idx);
            for (size_t i = 0; i < g.size(); ++i) gx.a[i] += g.a[i] * b.a[i];
        }
        if (t.needs(y)) {
            Matrix& gy = t.grad_buf(y.idx);
            for (size_t i = 0; i < g.size(); ++i) gy.a[i] += g.a[i] * a.a[i];
        }
    }, "mul");
}

Var Tape::matmul(Var x, Var y, bool tx, bool ty) {
    Matrix out = kgeir::matmul(value(x), value(y), tx, ty);
    const bool ng = needs(x) || needs(y);
    return emplace(std::move(out), ng, [x, y, tx, ty, me = nodes_.size()](Tape& t) {
        const Matrix& g = t.nodes_[me].grad;
        const Matrix& a = t.value(x);
        const Matrix& b = t.value(y);
        // d(op(A) op(B))/dA and /dB, adjusted for each transpose combination
        if (t.needs(x)) {
            Matrix& gx = t.grad_buf(x.idx);
            if (!tx)
                matmul_into(gx, g, b, false, !ty, true);
            else if (!ty)
                matmul_into(gx, b, g, false, true, true);
            else
                matmul_into(gx, b, g, true, true, true);
        }
        if (t.needs(y)) {
            Matrix& gy = t.grad_buf(y.idx);
            if (!ty)
                matmul_into(gy, a, g, !tx, false, true);
            else if (!tx)
                matmul_into(gy, g, a, true, false, true);
            else
                matmul_into(gy, g, a, true, true, true);
        }
    }, "matmul");
}

Var Tape::scale(Var x, double c) {
    Matrix out = value(x);
    for (auto& v : out.a) v *= c;
    return emplace(std::move(out), needs(x), [x, c, me = nodes_.size()](Tape& t) {
        if (!t.needs(x)) return;
        const Matrix& g = t.nodes_[me].grad;
        Matrix& gx = t.grad_buf(x.idx);
        for (size_t i = 0; i < g.size(); ++i) gx.a[i] += c * g.a[i];
    }, "scale");
}

Var Tape::add_row(Var x, Var b) {
    const Matrix& a = value(x);
    const Matrix& r = value(b);
    require(r.rows == 1 && r.cols == a.cols, "add_row: bias must be 1 x cols");
    Matrix out = a;
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out(i, j) += r(0, j);
    const bool ng = needs(x) || needs(b);
    return emplace(std::move(out), ng, [x, b, me = nodes_.size()](Tape& t) {
        const Matrix& g = t.nodes_[me].grad;
        if (t.needs(x)) {
            Matrix& gx = t.grad_buf(x.idx);
            for (size_t i = 0; i < g.size(); ++i) gx.a[i] += g.a[i];
        }
        if (t.needs(b)) {
            Matrix& gb = t.grad_buf(b.idx);
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) gb(0, j) += g(i, j);
        }
    }, "add_row");
}

Var Tape::tile_rows(Var v, int n) {
    const Matrix& r = value(v);
    require(r.rows == 1, "tile_rows: input must be a single row");
    Matrix out(n, r.cols);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < r.cols; ++j) out(i, j) = r(0, j);
    return emplace(std::move(out), needs(v), [v, me = nodes_.size()](Tape& t) {
        if (!t.needs(v)) return;
        const Matrix& g = t.nodes_[me].grad;
        Matrix& gv = t.grad_buf(v.idx);
        for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) gv(0, j) += g(i, j);
    }, "tile_rows");
}

Var Tape::gather_rows(Var x, std::vector<int> idx) {
    const Matrix& a = value(x);
    Matrix out(static_cast<int>(idx.size()), a.cols);
    for (size_t r = 0; r < idx.size(); ++r) {
        require(idx[r] >= 0 && idx[r] < a.rows, "gather_rows: index out of range");
        for (int j = 0; j < a.cols; ++j) out(static_cast<int>(r), j) = a(idx[r], j);
    }
    return emplace(std::move(out), needs(x),
                   [x, idx = std::move(idx), me = nodes_.size()](Tape& t) {
        if (!t.needs(x)) return;
        const Matrix& g = t.nodes_[me].grad;
        Matrix& gx = t.grad_buf(x.idx);
        for (size_t r = 0; r < idx.size(); ++r)
            for (int j = 0; j < g.cols; ++j) gx(idx[r], j) += g(static_cast<int>(r), j);
    }, "gather_rows");
}

Var Tape::sparse_mix(const SparseRows& r, Var x) {
    const Matrix& a = value(x);
    require(r.cols == a.rows, "sparse_mix: dimension mismatch");
    Matrix out(r.rows, a.cols);
    for (int i = 0; i < r.rows; ++i)
        for (const auto& [col, w] : r.entries[i])
            for (int j = 0; j < a.cols; ++j) out(i, j) += w * a(col, j);
    return emplace(std::move(out), needs(x), [&r, x, me = nodes_.size()](Tape& t) {
        if (!t.needs(x)) return;
        const Matrix& g = t.nodes_[me].grad;
        Matrix& gx = t.grad_buf(x.idx);
        for (int i = 0; i < g.rows; ++i)
            for (const auto& [col, w] : r.entries[i])
                for (int j = 0; j < g.cols; ++j) gx(col, j) += w * g(i, j);
    }, "sparse_mix");
}

Var Tape::relu(Var x) {
    Matrix out = value(x);
    for (auto& v : out.a) v = v > 0.0 ? v : 0.0;
    return emplace(std::move(out), needs(x), [x, me = nodes_.size()](Tape& t) {
        if (!t.needs(x)) return;
        const Matrix& g = t.nodes_[me].grad;
        const Matrix& a = t.value(x);
        Matrix& gx = t.grad_buf(x.idx);
        for (size_t i = 0; i < g.size(); ++i)
            if (a.a[i] > 0.0) gx.a[i] += g.a[i];
    }, "relu");
}

Var Tape::sigmoid(Var x) {
    Matrix out = value(x);
    for (auto& v : out.a) v = 1.0 / (1.0 + std::exp(-v));
    return emplace(std::move(out), needs(x), [x, me = nodes_.size()](Tape& t) {
        if (!t.needs(x)) return;
        const Matrix& g = t.nodes_[me].grad;
        const Matrix& s = t.nodes_[me].val;
        Matrix& gx = t.grad_buf(x.idx);
        for (size_t i = 0; i < g.size(); ++i) gx.a[i] += g.a[i] * s.a[i] * (1.0 - s.a[i]);
    }, "sigmoid");
}

Var Tape::tanh(Var x) {
    Matrix out = value(x);
    for (auto& v : out.a) v = std::tanh(v);
    return emplace(std::move(out), needs(x), [x, me = nodes_.size()](Tape& t) {
        if (!t.needs(x)) return;
        const Matrix& g = t.nodes_[me].grad;
        const Matrix& s = t.nodes_[me].val;
        Matrix& gx = t.grad_buf(x.idx);
        for (size_t i = 0; i < g.size(); ++i) gx.a[i] += g.a[i] * (1.0 - s.a[i] * s.a[i]);
    }, "tanh");
}

Var Tape::softmax_rows(Var x, const Matrix* mask) {
    const Matrix& a = value(x);
    if (mask) require(mask->same_shape(a), "softmax_rows: mask shape mismatch");
    Matrix out(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        double mx = -HUGE_VAL;
        for (int j = 0; j < a.cols; ++j)
            if (!mask || (*mask)(i, j) != 0.0) mx = std::max(mx, a(i, j));
        require(mx != -HUGE_VAL, "softmax_rows: row with empty mask support");
        double denom = 0.0;
        for (int j = 0; j < a.cols; ++j) {
            if (!mask || (*mask)(i, j) != 0.0) {
                out(i, j) = std::exp(a(i, j) - mx);
                denom += out(i, j);
            }
        }
        for (int j = 0; j < a.cols; ++j) out(i, j) /= denom;
    }
    Matrix mask_copy = mask ? *mask : Matrix();
    return emplace(std::move(out), needs(x),
                   [x, mask_copy = std::move(mask_copy), me = nodes_.size()](Tape& t) {
        if (!t.needs(x)) return;
        const Matrix& g = t.nodes_[me].grad;
        const Matrix& s = t.nodes_[me].val;
        Matrix& gx = t.grad_buf(x.idx);
        const bool masked = mask_copy.rows > 0;
        for (int i = 0; i < g.rows; ++i) {
            double inner = 0.0;
            for (int j = 0; j < g.cols; ++j) inner += g(i, j) * s(i, j);
            for (int j = 0; j < g.cols; ++j) {
                if (masked && mask_copy(i, j) == 0.0) continue;
                gx(i, j) += s(i, j) * (g(i, j) - inner);
            }
        }
    }, "softmax_rows");
}

Var Tape::rel_logits(Var q, Var w_rel, int clip_k) {
    const Matrix& qm = value(q);
    const Matrix& w = value(w_rel);
    require(w.rows == 2 * clip_k + 1, "rel_logits: table must have 2k+1 rows");
    require(w.cols == qm.cols, "rel_logits: dimension mismatch");
    const int n = qm.rows;
    Matrix out(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int r = clip_index(j - i, clip_k) + clip_k;
            out(i, j) = dot(qm.row(i), w.row(r));
        }
    const bool ng = needs(q) || needs(w_rel);
    return emplace(std::move(out), ng, [q, w_rel, clip_k, me = nodes_.size()](Tape& t) {
        const Matrix& g = t.nodes_[me].grad;
        const Matrix& qm = t.value(q);
        const Matrix& w = t.value(w_rel);
        const int n = qm.rows;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double gv = g(i, j);
                if (gv == 0.0) continue;
                const int r = clip_index(j - i, clip_k) + clip_k;
                if (t.needs(q)) {
                    Matrix& gq = t.grad_buf(q.idx);
                    for (int c = 0; c < qm.cols; ++c) gq(i, c) += gv * w(r, c);
                }
                if (t.needs(w_rel)) {
                    Matrix& gw = t.grad_buf(w_rel.idx);
                    for (int c = 0; c < qm.cols; ++c) gw(r, c) += gv * qm(i, c);
                }
            }
    }, "rel_logits");
}

Var Tape::rel_values(Var a, Var w_rel, int clip_k) {
    const Matrix& am = value(a);
    const Matrix& w = value(w_rel);
    require(am.rows == am.cols, "rel_values: weights must be square");
    require(w.rows == 2 * clip_k + 1, "rel_values: table must have 2k+1 rows");
    const int n = am.rows;
    Matrix out(n, w.cols);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double av = am(i, j);
            if (av == 0.0) continue;
            const int r = clip_index(j - i, clip_k) + clip_k;
            for (int c = 0; c < w.cols; ++c) out(i, c) += av * w(r, c);
        }
    const bool ng = needs(a) || needs(w_rel);
    return emplace(std::move(out), ng, [a, w_rel, clip_k, me = nodes_.size()](Tape& t) {
        const Matrix& g = t.nodes_[me].grad;
        const Matrix& am = t.value(a);
        const Matrix& w = t.value(w_rel);
        const int n = am.rows;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const int r = clip_index(j - i, clip_k) + clip_k;
                if (t.needs(a)) {
                    double s = 0.0;
                    for (int c = 0; c < w.cols; ++c) s += g(i, c) * w(r, c);
                    t.grad_buf(a.idx)(i, j) += s;
                }
                if (t.needs(w_rel)) {
                    const double av = am(i, j);
                    if (av != 0.0) {
                        Matrix& gw = t.grad_buf(w_rel.idx);
                        for (int c = 0; c < w.cols; ++c) gw(r, c) += av * g(i, c);
                    }
                }
            }
    }, "rel_values");
}

Var Tape::bce_mean(Var p, Var y, const Matrix* mask) {
    const Matrix& pm = value(p);
    const Matrix& ym = value(y);
    require(pm.same_shape(ym), "bce_mean: shape mismatch");
    if (mask) require(mask->same_shape(pm), "bce_mean: mask shape mismatch");
    double total = 0.0;
    double count = 0.0;
    for (size_t i = 0; i < pm.size(); ++i) {
        if (mask && mask->a[i] == 0.0) continue;
        const double ph = std::clamp(pm.a[i], kBceEps, 1.0 - kBceEps);
        total += -(ym.a[i] * std::log(ph) + (1.0 - ym.a[i]) * std::log(1.0 - ph));
        count += 1.0;
    }
    require(count > 0.0, "bce_mean: empty mask");
    Matrix out(1, 1);
    out(0, 0) = total / count;
    Matrix mask_copy = mask ? *mask : Matrix();
    return emplace(std::move(out), needs(p),
                   [p, y, mask_copy = std::move(mask_copy), count, me = nodes_.size()](Tape& t) {
        if (!t.needs(p)) return;
        const double g = t.nodes_[me].grad(0, 0);
        const Matrix& pm = t.value(p);
        const Matrix& ym = t.value(y);
        Matrix& gp = t.grad_buf(p.idx);
        const bool masked = mask_copy.rows > 0;
        for (size_t i = 0; i < pm.size(); ++i) {
            if (masked && mask_copy.a[i] == 0.0) continue;
            const double ph = std::clamp(pm.a[i], kBceEps, 1.0 - kBceEps);
            gp.a[i] += g * (ph - ym.a[i]) / (ph * (1.0 - ph)) / count;
        }
    }, "bce_mean");
}

Var Tape::sum_all(Var x) {
    const Matrix& a = value(x);
    Matrix out(1, 1);
    for (double v : a.a) out(0, 0) += v;
    return emplace(std::move(out), needs(x), [x, me = nodes_.size()](Tape& t) {
        if (!t.needs(x)) return;
        const double g = t.nodes_[me].grad(0, 0);
        Matrix& gx = t.grad_buf(x.idx);
        for (auto& v : gx.a) v += g;
    }, "sum_all");
}

Var Tape::mean_all(Var x) {
    const Matrix& a = value(x);
    require(a.size() > 0, "mean_all: empty matrix");
    return scale(sum_all(x), 1.0 / static_cast<double>(a.size()));
}

void Tape::backward(Var loss) {
    const Matrix& l = value(loss);
    require(l.rows == 1 && l.cols == 1, "backward: loss must be a 1x1 scalar");
    for (auto& n : nodes_) n.grad = Matrix();
    grad_buf(loss.idx)(0, 0) = 1.0;
    for (int i = loss.idx; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.needs_grad || !n.pull || n.grad.size() == 0) continue;
        n.pull(*this);
    }
}

Matrix Tape::grad_of(Var v) const {
    const Node& n = nodes_[v.idx];
    if (n.grad.size() > 0) return n.grad;
    return Matrix::zeros(n.val.rows, n.val.cols);
}

std::vector<std::pair<std::string, Matrix>> Tape::named_grads() const {
    // inputs recorded several times under one name are the same parameter:
    // their gradients accumulate
    std::vector<std::pair<std::string, Matrix>> out;
    for (const auto& n : nodes_) {
        if (n.name.empty()) continue;
        Matrix g = n.grad.size() > 0 ? n.grad : Matrix::zeros(n.val.rows, n.val.cols);
        bool merged = false;
        for (auto& [name, total] : out) {
            if (name != n.name) continue;
            require(total.same_shape(g), "named_grads: shape mismatch for input '" + n.name + "'");
            for (size_t i = 0; i < g.size(); ++i) total.a[i] += g.a[i];
            merged = true;
            break;
        }
        if (!merged) out.emplace_back(n.name, std::move(g));
    }
    return out;
}

}  // namespace kgeir::ad
