#include "kgeir/matrix.hpp"

#include <cmath>

#include "kgeir/error.hpp"

namespace kgeir {

bool Matrix::all_finite() const {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::randn(int r, int c, Rng& rng, double scale) {
    Matrix m(r, c);
    for (auto& v : m.a) v = rng.normal() * scale;
    return m;
}

bool operator==(const Matrix& x, const Matrix& y) {
    return x.rows == y.rows && x.cols == y.cols && x.a == y.a;
}

void matmul_into(Matrix& out, const Matrix& A, const Matrix& B, bool ta, bool tb, bool accumulate,
                 double alpha) {
    const int m = ta ? A.cols : A.rows;
    const int k = ta ? A.rows : A.cols;
    const int kb = tb ? B.cols : B.rows;
    const int n = tb ? B.rows : B.cols;
    require(k == kb, "matmul: inner dimensions do not match");
    if (out.rows != m || out.cols != n) {
        require(!accumulate, "matmul: accumulate target has wrong shape");
        out = Matrix(m, n);
    } else if (!accumulate) {
        std::fill(out.a.begin(), out.a.end(), 0.0);
    }

    // i-k-j loop keeps the inner loop contiguous for the common (false,false) case
    for (int i = 0; i < m; ++i) {
        double* orow = out.a.data() + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = alpha * (ta ? A(p, i) : A(i, p));
            if (av == 0.0) continue;
            if (!tb) {
                const double* brow = B.a.data() + static_cast<size_t>(p) * n;
                for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
            } else {
                for (int j = 0; j < n; ++j) orow[j] += av * B(j, p);
            }
        }
    }
}

Matrix matmul(const Matrix& A, const Matrix& B, bool ta, bool tb) {
    Matrix out;
    matmul_into(out, A, B, ta, tb, false);
    return out;
}

double dot(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), "dot: size mismatch");
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

double cosine(std::span<const double> x, std::span<const double> y) {
    const double nx = norm2(x);
    const double ny = norm2(y);
    require(nx > 0.0 && ny > 0.0, "cosine: zero-norm vector");
    return dot(x, y) / (nx * ny);
}

}  // namespace kgeir
