#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "kgeir/error.hpp"
#include "kgeir/matrix.hpp"

namespace kgeir {

// Named dense parameter bundle; models and trainers address parameters by
// name so the tape, the optimizer, and checkpoints all agree on identity.
struct ParamStore {
    std::vector<std::pair<std::string, Matrix>> params;  // ordered, unique names

    Matrix& at(const std::string& name) {
        for (auto& [n, m] : params)
            if (n == name) return m;
        fail("unknown parameter: " + name);
    }
    const Matrix& at(const std::string& name) const {
        for (const auto& [n, m] : params)
            if (n == name) return m;
        fail("unknown parameter: " + name);
    }
    bool has(const std::string& name) const {
        for (const auto& [n, m] : params)
            if (n == name) return true;
        return false;
    }
    void add(std::string name, Matrix m) {
        require(!has(name), "duplicate parameter: " + name);
        params.emplace_back(std::move(name), std::move(m));
    }
};

// Adam with bias correction; state keyed by parameter name.
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStore& store, const std::vector<std::pair<std::string, Matrix>>& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (const auto& [name, g] : grads) {
            Matrix& p = store.at(name);
            require(p.same_shape(g), "adam: gradient shape mismatch for " + name);
            auto& [m, v] = state_[name];
            if (m.size() == 0) {
                m = Matrix::zeros(p.rows, p.cols);
                v = Matrix::zeros(p.rows, p.cols);
            }
            for (size_t i = 0; i < p.size(); ++i) {
                m.a[i] = beta1_ * m.a[i] + (1.0 - beta1_) * g.a[i];
                v.a[i] = beta2_ * v.a[i] + (1.0 - beta2_) * g.a[i] * g.a[i];
                p.a[i] -= lr_ * (m.a[i] / bc1) / (std::sqrt(v.a[i] / bc2) + eps_);
            }
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::map<std::string, std::pair<Matrix, Matrix>> state_;
};

// Plain gradient descent step (used by per-record replay updates).
inline void sgd_step(Matrix& param, const Matrix& grad, double lr) {
    require(param.same_shape(grad), "sgd: gradient shape mismatch");
    for (size_t i = 0; i < param.size(); ++i) param.a[i] -= lr * grad.a[i];
}

}  // namespace kgeir
