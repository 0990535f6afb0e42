#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kgeir/autodiff.hpp"
#include "kgeir/error.hpp"
#include "kgeir/rng.hpp"
#include "support/gradcheck.hpp"

using namespace kgeir;
using kgeir::testing::gradcheck;

namespace {

// runs one primitive through the finite-difference oracle
template <typename Builder>
void check_primitive(const char* name, std::vector<std::pair<std::string, Matrix>> inputs,
                     Builder build) {
    ParamStore store;
    for (auto& [n, m] : inputs) store.add(n, m);
    auto eval = [&]() {
        ad::Tape t;
        std::vector<ad::Var> vars;
        for (const auto& [n, m] : store.params) vars.push_back(t.input(m, n));
        return t.value(build(t, vars))(0, 0);
    };
    ad::Tape t;
    std::vector<ad::Var> vars;
    for (const auto& [n, m] : store.params) vars.push_back(t.input(m, n));
    const ad::Var loss = build(t, vars);
    t.backward(loss);
    const auto result = gradcheck(store, eval, t.named_grads());
    INFO(name, " worst coordinate: ", result.worst);
    CHECK(result.max_rel_err < 1e-4);
    CHECK(result.checked > 0);
}

Matrix randm(int r, int c, Rng& rng, double scale = 1.0) { return Matrix::randn(r, c, rng, scale); }

}  // namespace

TEST_CASE("scalar basics: d/dx x^2 = 2x and sigmoid'(0) = 0.25") {
    ad::Tape t;
    Matrix x(1, 1);
    x(0, 0) = 3.0;
    const ad::Var vx = t.input(x, "x");
    const ad::Var sq = t.mul(vx, vx);
    t.backward(sq);
    CHECK(t.grad_of(vx)(0, 0) == doctest::Approx(6.0));

    ad::Tape t2;
    Matrix zero(1, 1);
    const ad::Var vz = t2.input(zero, "x");
    const ad::Var s = t2.sigmoid(vz);
    t2.backward(s);
    CHECK(t2.value(s)(0, 0) == doctest::Approx(0.5));
    CHECK(t2.grad_of(vz)(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("every primitive matches central finite differences") {
    Rng rng(2024);

    check_primitive("add+mul", {{"a", randm(3, 4, rng)}, {"b", randm(3, 4, rng)}},
                    [](ad::Tape& t, const std::vector<ad::Var>& v) {
                        return t.mean_all(t.mul(t.add(v[0], v[1]), v[1]));
                    });
    check_primitive("sub", {{"a", randm(2, 5, rng)}, {"b", randm(2, 5, rng)}},
                    [](ad::Tape& t, const std::vector<ad::Var>& v) {
                        return t.mean_all(t.mul(t.sub(v[0], v[1]), v[0]));
                    });
    for (const bool ta : {false, true})
        for (const bool tb : {false, true}) {
            Matrix a = ta ? randm(4, 3, rng) : randm(3, 4, rng);
            Matrix b = tb ? randm(5, 4, rng) : randm(4, 5, rng);
            check_primitive("matmul", {{"a", a}, {"b", b}},
                            [ta, tb](ad::Tape& t, const std::vector<ad::Var>& v) {
                                return t.mean_all(t.matmul(v[0], v[1], ta, tb));
                            });
        }
    check_primitive("scale", {{"a", randm(3, 3, rng)}},
                    [](ad::Tape& t, const std::vector<ad::Var>& v) {
                        return t.mean_all(t.scale(v[0], -2.5));
                    });
    check_primitive("add_row", {{"a", randm(4, 3, rng)}, {"b", randm(1, 3, rng)}},
                    [](ad::Tape& t, const std::vector<ad::Var>& v) {
                        return t.mean_all(t.mul(t.add_row(v[0], v[1]), v[0]));
                    });
    check_primitive("tile_rows", {{"v", randm(1, 4, rng)}, {"a", randm(3, 4, rng)}},
                    [](ad::Tape& t, const std::vector<ad::Var>& v) {
                        return t.mean_all(t.mul(t.tile_rows(v[0], 3), v[1]));
                    });
    check_primitive("gather_rows", {{"a", randm(5, 3, rng)}},
                    [](ad::Tape& t, const std::vector<ad::Var>& v) {
                        return t.mean_all(t.gather_rows(v[0], {4, 0, 0, 2}));
                    });
    check_primitive("relu", {{"a", randm(4, 4, rng)}},
                    [](ad::Tape& t, const std::vector<ad::Var>& v) {
                        return t.mean_all(t.relu(v[0]));
                    });
    check_primitive("sigmoid", {{"a", randm(4, 4, rng)}},
                    [](ad::Tape& t, const std::vector<ad::Var>& v) {
                        return t.mean_all(t.sigmoid(v[0]));
                    });
    check_primitive("tanh", {{"a", randm(4, 4, rng)}},
                    [](ad::Tape& t, const std::vector<ad::Var>& v) {
                        return t.mean_all(t.tanh(v[0]));
                    });
    check_primitive("softmax_rows", {{"a", randm(4, 6, rng)}, {"w", randm(4, 6, rng)}},
                    [](ad::Tape& t, const std::vector<ad::Var>& v) {
                        return t.mean_all(t.mul(t.softmax_rows(v[0]), v[1]));
                    });

    Matrix mask(4, 6);
    Rng mask_rng(7);
    for (int i = 0; i < 4; ++i) {
        mask(i, mask_rng.uniform_int(6)) = 1.0;  // at least one per row
        for (int j = 0; j < 6; ++j)
            if (mask_rng.uniform() < 0.5) mask(i, j) = 1.0;
    }
    check_primitive("softmax_rows masked", {{"a", randm(4, 6, rng)}, {"w", randm(4, 6, rng)}},
                    [&mask](ad::Tape& t, const std::vector<ad::Var>& v) {
                        return t.mean_all(t.mul(t.softmax_rows(v[0], &mask), v[1]));
                    });
    check_primitive("rel_logits", {{"q", randm(5, 3, rng)}, {"w", randm(5, 3, rng)}},
                    [](ad::Tape& t, const std::vector<ad::Var>& v) {
                        return t.mean_all(t.rel_logits(v[0], v[1], 2));
                    });
    check_primitive("rel_values", {{"a", randm(5, 5, rng)}, {"w", randm(5, 4, rng)}},
                    [](ad::Tape& t, const std::vector<ad::Var>& v) {
                        return t.mean_all(t.rel_values(v[0], v[1], 2));
                    });

    // probabilities away from the clamp for a clean finite-difference check
    Matrix logits = randm(6, 1, rng);
    Matrix labels(6, 1);
    Rng label_rng(3);
    for (auto& v : labels.a) v = label_rng.uniform() < 0.5 ? 0.0 : 1.0;
    check_primitive("bce(sigmoid)", {{"z", logits}},
                    [&labels](ad::Tape& t, const std::vector<ad::Var>& v) {
                        return t.bce_mean(t.sigmoid(v[0]), t.constant(labels));
                    });
    check_primitive("sum_all", {{"a", randm(3, 5, rng)}},
                    [](ad::Tape& t, const std::vector<ad::Var>& v) {
                        return t.sum_all(t.mul(v[0], v[0]));
                    });
}

TEST_CASE("sparse_mix matches dense multiply and its gradient checks out") {
    SparseRows r(3, 3);
    r.entries[0] = {{0, 0.5}, {1, 0.5}};
    r.entries[1] = {{1, 1.0}};
    r.entries[2] = {{0, 1.0 / 3}, {1, 1.0 / 3}, {2, 1.0 / 3}};
    Rng rng(11);
    const Matrix x = Matrix::randn(3, 4, rng);

    ad::Tape t;
    const ad::Var vx = t.input(x, "x");
    const ad::Var mixed = t.sparse_mix(r, vx);
    for (int c = 0; c < 4; ++c) {
        CHECK(t.value(mixed)(0, c) == doctest::Approx(0.5 * x(0, c) + 0.5 * x(1, c)));
        CHECK(t.value(mixed)(1, c) == doctest::Approx(x(1, c)));
    }

    check_primitive("sparse_mix", {{"x", x}}, [&r](ad::Tape& tt, const std::vector<ad::Var>& v) {
        return tt.mean_all(tt.mul(tt.sparse_mix(r, v[0]), v[0]));
    });
}

TEST_CASE("softmax rows sum to one and constants get no gradient") {
    Rng rng(5);
    ad::Tape t;
    const ad::Var a = t.input(Matrix::randn(3, 7, rng), "a");
    const ad::Var s = t.softmax_rows(a);
    for (int i = 0; i < 3; ++i) {
        double total = 0.0;
        for (int j = 0; j < 7; ++j) total += t.value(s)(i, j);
        CHECK(total == doctest::Approx(1.0));
    }
    const ad::Var c = t.constant(Matrix::full(3, 7, 2.0));
    const ad::Var loss = t.mean_all(t.mul(s, c));
    t.backward(loss);
    CHECK(t.grad_of(c).size() == 21);  // zeros, but shaped
    for (double v : t.grad_of(c).a) CHECK(v == 0.0);
}

TEST_CASE("non-finite intermediate values are reported") {
    ad::Tape t;
    Matrix big(1, 1);
    big(0, 0) = 1e308;
    const ad::Var v = t.input(big, "x");
    CHECK_THROWS_AS(t.mul(t.scale(v, 10.0), t.scale(v, 10.0)), Error);
}

TEST_CASE("backward requires a scalar") {
    ad::Tape t;
    const ad::Var v = t.input(Matrix::full(2, 2, 1.0), "x");
    CHECK_THROWS_AS(t.backward(v), Error);
}
