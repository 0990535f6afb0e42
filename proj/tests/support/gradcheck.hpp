#pragma once

// Central finite-difference oracle for gradient checks. Kept independent of
// the tape: it only re-evaluates a scalar loss closure under coordinate
// perturbations.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "kgeir/matrix.hpp"
#include "kgeir/optim.hpp"

namespace kgeir::testing {

inline double relative_error(double got, double want, double floor = 1e-4) {
    const double denom = std::max({std::abs(got), std::abs(want), floor});
    return std::abs(got - want) / denom;
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst;  // "param[i,j]"
    int checked = 0;
};

// compares analytic gradients (by parameter name) against central finite
// differences of `eval` with step h
inline GradCheckResult gradcheck(ParamStore& store,
                                 const std::function<double()>& eval,
                                 const std::vector<std::pair<std::string, Matrix>>& grads,
                                 double h = 1e-5) {
    GradCheckResult result;
    for (const auto& [name, grad] : grads) {
        Matrix& param = store.at(name);
        for (int i = 0; i < param.rows; ++i) {
            for (int j = 0; j < param.cols; ++j) {
                const double saved = param(i, j);
                param(i, j) = saved + h;
                const double up = eval();
                param(i, j) = saved - h;
                const double down = eval();
                param(i, j) = saved;
                const double fd = (up - down) / (2.0 * h);
                const double err = relative_error(grad(i, j), fd);
                ++result.checked;
                if (err > result.max_rel_err) {
                    result.max_rel_err = err;
                    result.worst = name + "[" + std::to_string(i) + "," + std::to_string(j) + "]";
                }
            }
        }
    }
    return result;
}

}  // namespace kgeir::testing
