#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kgeir/rng.hpp"

namespace kgeir {

// Dense row-major matrix of doubles. Vectors are 1xN or Nx1 matrices.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    std::span<double> row(int i) { return {a.data() + static_cast<size_t>(i) * cols, static_cast<size_t>(cols)}; }
    std::span<const double> row(int i) const {
        return {a.data() + static_cast<size_t>(i) * cols, static_cast<size_t>(cols)};
    }

    size_t size() const { return a.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;

    static Matrix zeros(int r, int c) { return Matrix(r, c, 0.0); }
    static Matrix full(int r, int c, double v) { return Matrix(r, c, v); }
    static Matrix identity(int n);
    static Matrix randn(int r, int c, Rng& rng, double scale = 1.0);
};

bool operator==(const Matrix& x, const Matrix& y);

// out = alpha * op(A) * op(B) (+ out if accumulate)
void matmul_into(Matrix& out, const Matrix& A, const Matrix& B, bool ta, bool tb, bool accumulate,
                 double alpha = 1.0);
Matrix matmul(const Matrix& A, const Matrix& B, bool ta = false, bool tb = false);

double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
// 1 - cosine distance helpers used by f4 and the dissimilarity matrix
double cosine(std::span<const double> x, std::span<const double> y);

}  // namespace kgeir
