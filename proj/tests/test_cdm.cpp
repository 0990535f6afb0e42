#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <unistd.h>

#include "kgeir/checkpoint.hpp"
#include "kgeir/error.hpp"
#include "kgeir/nacd.hpp"
#include "kgeir/synthetic.hpp"
#include "support/gradcheck.hpp"

using namespace kgeir;
using kgeir::testing::gradcheck;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

QMatrix tiny_q() {
    return build_q_matrix({{"e1", "k1"}, {"e2", "k1"}, {"e2", "k2"}, {"e3", "k2"}});
}

NacdOptions tiny_opts() {
    NacdOptions o;
    o.attention_dim = 3;
    o.hidden_dim = 4;
    o.student_out_dim = 2;
    o.clip_k = 2;
    o.history_window = 10;
    return o;
}

std::vector<DenseRecord> toy_records() {
    return {{0, 0, 1, 1}, {0, 1, 0, 2}, {1, 2, 1, 1}, {1, 0, 0, 2}};
}

// loss closure for gradchecking any model over a record batch
double eval_loss(const Cdm& model, const std::vector<DenseRecord>& records) {
    ad::Tape t;
    return t.value(model.loss_graph(t, records))(0, 0);
}

}  // namespace

TEST_CASE("IRT prediction hand values") {
    auto model = make_irt(2, 2, 1);
    model->params().at("theta")(0, 0) = 0.7;
    model->params().at("a")(0, 0) = 1.3;
    model->params().at("b")(0, 0) = 0.7;
    CHECK(model->predict(0, 0) == doctest::Approx(0.5));  // theta == b

    model->params().at("a")(1, 0) = 0.0;
    model->params().at("b")(1, 0) = -3.0;
    CHECK(model->predict(0, 1) == doctest::Approx(0.5));  // a == 0

    model->params().at("theta")(1, 0) = 1.0;
    model->params().at("a")(0, 0) = 1.0;
    model->params().at("b")(0, 0) = 0.0;
    CHECK(model->predict(1, 0) == doctest::Approx(sigmoid(1.0)));
    CHECK(model->predict(1, 0) == doctest::Approx(0.731).epsilon(1e-3));

    CHECK_THROWS_AS(model->predict(5, 0), Error);
    CHECK_THROWS_AS(model->predict(0, 9), Error);
}

TEST_CASE("clip bound") {
    CHECK(ad::clip_index(3, 2) == 2);
    CHECK(ad::clip_index(-5, 2) == -2);
    CHECK(ad::clip_index(1, 2) == 1);
    CHECK(ad::clip_index(0, 0) == 0);
}

TEST_CASE("knowledge vectors select the weighted Q-matrix row") {
    const QMatrix q = tiny_q();
    const std::vector<double> weights{0.7, 0.4};
    const Matrix wq = make_weighted_q(q, weights);

    const auto v1 = knowledge_vector(wq, q.exercise_index("e1"));
    CHECK(v1 == std::vector<double>{0.7, 0.0});

    const auto v2 = knowledge_vector(wq, q.exercise_index("e2"));
    int nonzero = 0;
    for (double x : v2) nonzero += x != 0.0;
    CHECK(nonzero == 2);

    // weighted row equals the binary row scaled elementwise by the weights
    for (int e = 0; e < q.n_exercises(); ++e)
        for (int k = 0; k < q.n_skills(); ++k)
            CHECK(wq(e, k) == doctest::Approx(q.at(e, k) * weights[k]));

    CHECK_THROWS_AS(knowledge_vector(wq, 99), Error);
}

TEST_CASE("exercise factor: single element, zeros, and a length-2 hand oracle") {
    const QMatrix q = tiny_q();
    auto model = make_nacd(make_weighted_q(q, {1.0, 1.0}), 2, tiny_opts(), 7);
    NacdModel& nacd = as_nacd(*model);

    SUBCASE("zero parameters give a zero exercise factor") {
        for (auto name : {"att_wv", "att_rv"})
            for (auto& v : nacd.params().at(name).a) v = 0.0;
        Matrix kv(3, 2);
        kv(0, 0) = 1.0;
        kv(2, 1) = 0.5;
        const Matrix fe = nacd.exercise_factor(kv);
        for (double v : fe.a) CHECK(v == 0.0);
    }
    SUBCASE("length-1 sequence: attention weight 1, center edge row") {
        Matrix kv(1, 2);
        kv(0, 0) = 0.8;
        kv(0, 1) = -0.3;
        const Matrix fe = nacd.exercise_factor(kv);
        const Matrix& wv = nacd.params().at("att_wv");
        const Matrix& rv = nacd.params().at("att_rv");
        const int center = tiny_opts().clip_k;  // clip(0, k) + k
        for (int c = 0; c < fe.cols; ++c) {
            const double expect = kv(0, 0) * wv(0, c) + kv(0, 1) * wv(1, c) + rv(center, c);
            CHECK(fe(0, c) == doctest::Approx(expect));
        }
    }
    SUBCASE("length-2 sequence against explicit arithmetic") {
        Matrix kv(2, 2);
        kv(0, 0) = 1.0;
        kv(1, 1) = 1.0;
        const Matrix& wq_m = nacd.params().at("att_wq");
        const Matrix& wk_m = nacd.params().at("att_wk");
        const Matrix& wv = nacd.params().at("att_wv");
        const Matrix& rk = nacd.params().at("att_rk");
        const Matrix& rv = nacd.params().at("att_rv");
        const int d = tiny_opts().attention_dim;
        const int k = tiny_opts().clip_k;
        const Matrix fe = nacd.exercise_factor(kv);

        const Matrix qp = matmul(kv, wq_m);
        const Matrix kp = matmul(kv, wk_m);
        const Matrix vp = matmul(kv, wv);
        for (int i = 0; i < 2; ++i) {
            double logits[2];
            for (int j = 0; j < 2; ++j) {
                double base = 0.0, edge = 0.0;
                const int r = ad::clip_index(j - i, k) + k;
                for (int c = 0; c < d; ++c) {
                    base += qp(i, c) * kp(j, c);
                    edge += qp(i, c) * rk(r, c);
                }
                logits[j] = (base + edge) / std::sqrt(static_cast<double>(d));
            }
            const double mx = std::max(logits[0], logits[1]);
            double a0 = std::exp(logits[0] - mx), a1 = std::exp(logits[1] - mx);
            const double denom = a0 + a1;
            a0 /= denom;
            a1 /= denom;
            for (int c = 0; c < d; ++c) {
                const double expect = a0 * (vp(0, c) + rv(ad::clip_index(-i, k) + k, c)) +
                                      a1 * (vp(1, c) + rv(ad::clip_index(1 - i, k) + k, c));
                CHECK(fe(i, c) == doctest::Approx(expect).epsilon(1e-10));
            }
        }
    }
    SUBCASE("attention rows sum to 1: identical inputs reproduce their value row") {
        NacdOptions literal = tiny_opts();
        literal.literal_fe = true;
        auto m2 = make_nacd(make_weighted_q(q, {1.0, 1.0}), 2, literal, 7);
        Matrix kv(4, 2);
        for (int i = 0; i < 4; ++i) {
            kv(i, 0) = 0.6;
            kv(i, 1) = -0.2;
        }
        const Matrix fe = as_nacd(*m2).exercise_factor(kv);
        const Matrix vp = matmul(kv, m2->params().at("att_wv"));
        for (int i = 0; i < 4; ++i)
            for (int c = 0; c < fe.cols; ++c)
                CHECK(fe(i, c) == doctest::Approx(vp(0, c)).epsilon(1e-9));
    }
}

TEST_CASE("student factor: sigmoid baseline and a hand-set 2-skill case") {
    const QMatrix q = tiny_q();
    auto model = make_nacd(make_weighted_q(q, {1.0, 1.0}), 2, tiny_opts(), 3);
    NacdModel& nacd = as_nacd(*model);

    SUBCASE("zero A row gives proficiency 0.5 per skill") {
        for (auto& v : nacd.params().at("A").a) v = 0.0;
        // with B = C = 0 too, X = q_row * (0.5 - 0.5) * 0.5 = 0
        for (auto& v : nacd.params().at("B").a) v = 0.0;
        for (auto& v : nacd.params().at("C").a) v = 0.0;
        const Matrix fs = nacd.student_factor(0, 0);
        const Matrix& w2 = nacd.params().at("mlp_w2");
        const Matrix& b1 = nacd.params().at("mlp_b1");
        const Matrix& b2 = nacd.params().at("mlp_b2");
        // X = 0 so hidden = sigmoid(b1); check the full hand evaluation
        for (int m = 0; m < fs.cols; ++m) {
            double z = b2(0, m);
            for (int h = 0; h < w2.rows; ++h) z += sigmoid(b1(0, h)) * w2(h, m);
            CHECK(fs(0, m) == doctest::Approx(sigmoid(z)));
        }
    }
    SUBCASE("hand-set two-skill evaluation") {
        auto& A = nacd.params().at("A");
        auto& B = nacd.params().at("B");
        auto& C = nacd.params().at("C");
        A(0, 0) = 1.0;
        A(0, 1) = -0.5;
        const int e2 = tiny_q().exercise_index("e2");
        B(e2, 0) = 0.2;
        B(e2, 1) = -0.1;
        C(e2, 0) = 0.4;
        C(e2, 1) = 0.9;
        const Matrix fs = nacd.student_factor(0, e2);

        double x[2];
        for (int k = 0; k < 2; ++k)
            x[k] = 1.0 * (sigmoid(A(0, k)) - sigmoid(B(e2, k))) * sigmoid(C(e2, k));
        const Matrix& w1 = nacd.params().at("mlp_w1");
        const Matrix& b1 = nacd.params().at("mlp_b1");
        const Matrix& w2 = nacd.params().at("mlp_w2");
        const Matrix& b2 = nacd.params().at("mlp_b2");
        double hidden[4];
        for (int h = 0; h < 4; ++h)
            hidden[h] = sigmoid(x[0] * w1(0, h) + x[1] * w1(1, h) + b1(0, h));
        for (int m = 0; m < fs.cols; ++m) {
            double z = b2(0, m);
            for (int h = 0; h < 4; ++h) z += hidden[h] * w2(h, m);
            CHECK(fs(0, m) == doctest::Approx(sigmoid(z)).epsilon(1e-10));
        }
    }
}

TEST_CASE("nacd_predict composes the two factors") {
    const QMatrix q = tiny_q();
    auto model = make_nacd(make_weighted_q(q, {0.8, 0.5}), 2, tiny_opts(), 11);
    NacdModel& nacd = as_nacd(*model);

    SUBCASE("zero output weights and bias give 0.5") {
        for (auto name : {"out_ws", "out_we", "out_bp"})
            for (auto& v : nacd.params().at(name).a) v = 0.0;
        CHECK(nacd.predict(0, 0) == doctest::Approx(0.5));
        const std::vector<int> history{1, 2};
        CHECK(nacd.predict(1, 2, history) == doctest::Approx(0.5));
    }
    SUBCASE("increasing the output bias strictly increases p") {
        const double p0 = nacd.predict(0, 1);
        nacd.params().at("out_bp")(0, 0) += 0.5;
        CHECK(nacd.predict(0, 1) > p0);
    }
    SUBCASE("composed hand evaluation from the exposed factors") {
        const std::vector<int> history{0, 2};
        const int target = 1;
        const double p = nacd.predict(0, target, history);

        Matrix kv(3, 2);
        const Matrix& wq = nacd.weighted_q();
        const int seq[3] = {0, 2, target};
        for (int i = 0; i < 3; ++i)
            for (int c = 0; c < 2; ++c) kv(i, c) = wq(seq[i], c);
        const Matrix fe = nacd.exercise_factor(kv);
        const Matrix fs = nacd.student_factor(0, target);
        const Matrix& ws = nacd.params().at("out_ws");
        const Matrix& we = nacd.params().at("out_we");
        double z = nacd.params().at("out_bp")(0, 0);
        for (int m = 0; m < fs.cols; ++m) z += fs(0, m) * ws(m, 0);
        for (int c = 0; c < fe.cols; ++c) z += fe(2, c) * we(c, 0);
        CHECK(p == doctest::Approx(sigmoid(z)).epsilon(1e-10));
    }
    SUBCASE("predictions stay inside (0,1) across random instances") {
        Rng rng(5);
        for (int i = 0; i < 50; ++i) {
            const int s = rng.uniform_int(2);
            const int e = rng.uniform_int(3);
            std::vector<int> history;
            for (int h = rng.uniform_int(4); h > 0; --h) history.push_back(rng.uniform_int(3));
            const double p = nacd.predict(s, e, history);
            CHECK(p > 0.0);
            CHECK(p < 1.0);
        }
    }
}

TEST_CASE("windowed training view equals per-target prediction") {
    const QMatrix q = tiny_q();
    NacdOptions opts = tiny_opts();
    opts.history_window = 2;  // force the cap to matter
    auto model = make_nacd(make_weighted_q(q, {1.0, 0.6}), 2, opts, 13);
    const NacdModel& nacd = as_nacd(*model);

    const std::vector<int> seq{0, 1, 2, 0, 1, 2};
    const auto per_position = nacd.predict_sequence(0, seq);
    REQUIRE(per_position.size() == seq.size());
    for (size_t t = 0; t < seq.size(); ++t) {
        const size_t start = t > 2 ? t - 2 : 0;
        const std::vector<int> history(seq.begin() + start, seq.begin() + t);
        CHECK(per_position[t] == doctest::Approx(nacd.predict(0, seq[t], history)).epsilon(1e-12));
    }
}

TEST_CASE("reverse-mode gradients match finite differences for all three models") {
    const QMatrix q = tiny_q();
    const auto records = toy_records();
    Rng rng(2025);

    auto check_model = [&](Cdm& model) {
        for (auto& [name, param] : model.params().params)
            for (auto& v : param.a) v = rng.normal() * 0.5;
        ad::Tape t;
        const ad::Var loss = model.loss_graph(t, records);
        t.backward(loss);
        auto eval = [&]() { return eval_loss(model, records); };
        const auto result = gradcheck(model.params(), eval, t.named_grads());
        INFO("worst: ", result.worst);
        CHECK(result.max_rel_err < 1e-4);
    };

    auto irt = make_irt(2, 3, 1);
    check_model(*irt);
    auto mirt = make_mirt(2, 3, 3, 2);
    check_model(*mirt);
    auto nacd = make_nacd(make_weighted_q(q, {0.9, 0.7}), 2, tiny_opts(), 3);
    check_model(*nacd);
}

TEST_CASE("analytic student gradients agree with the tape route") {
    const QMatrix q = tiny_q();
    Rng rng(6);
    SUBCASE("irt") {
        auto model = make_irt(3, 3, 4);
        for (auto& [name, p] : model->params().params)
            for (auto& v : p.a) v = rng.normal() * 0.7;
        for (int y : {0, 1}) {
            const auto g = model->student_grad(1, 2, y);
            // tape route: single-record loss, gradient w.r.t. theta row
            std::vector<DenseRecord> one{{1, 2, y, 1}};
            ad::Tape t;
            t.backward(model->loss_graph(t, one));
            for (const auto& [name, grad] : t.named_grads())
                if (name == "theta") CHECK(g[0] == doctest::Approx(grad(1, 0)).epsilon(1e-12));
        }
    }
    SUBCASE("mirt") {
        auto model = make_mirt(3, 3, 4, 4);
        for (auto& [name, p] : model->params().params)
            for (auto& v : p.a) v = rng.normal() * 0.7;
        const auto g = model->student_grad(0, 1, 1);
        std::vector<DenseRecord> one{{0, 1, 1, 1}};
        ad::Tape t;
        t.backward(model->loss_graph(t, one));
        for (const auto& [name, grad] : t.named_grads())
            if (name == "theta")
                for (int d = 0; d < 4; ++d) CHECK(g[d] == doctest::Approx(grad(0, d)).epsilon(1e-12));
    }
}

TEST_CASE("training reduces loss on learnable data and is seed-deterministic") {
    const SyntheticData data = generate_synthetic({24, 18, 4, 0.05, 0.05, 31});
    const DenseLog dense = to_dense(data.log, data.q);
    TrainConfig cfg;
    cfg.epochs = 12;
    cfg.learning_rate = 0.05;
    cfg.seed = 9;
    cfg.batch_size = 8;
    cfg.dropout = 0.2;

    SUBCASE("irt") {
        auto a = make_irt(dense.n_students, dense.n_exercises, 1);
        auto b = make_irt(dense.n_students, dense.n_exercises, 1);
        const auto curve_a = a->train(dense, cfg);
        const auto curve_b = b->train(dense, cfg);
        CHECK(curve_a == curve_b);  // bitwise-identical loss curves
        CHECK(curve_a.back() < curve_a.front());
        for (auto& v : a->params().at("a").a) CHECK(v >= 0.0);
    }
    SUBCASE("nacd") {
        NacdOptions opts = tiny_opts();
        auto a = make_nacd(make_weighted_q(data.q, std::vector<double>(data.q.n_skills(), 1.0)),
                           dense.n_students, opts, 1);
        auto b = make_nacd(make_weighted_q(data.q, std::vector<double>(data.q.n_skills(), 1.0)),
                           dense.n_students, opts, 1);
        const auto curve_a = a->train(dense, cfg);
        const auto curve_b = b->train(dense, cfg);
        CHECK(curve_a == curve_b);
        CHECK(curve_a.back() < curve_a.front());
    }
}

TEST_CASE("incremental updates touch only the student parameters") {
    auto model = make_irt(2, 2, 8);
    model->params().at("a")(0, 0) = 1.2;
    model->params().at("b")(0, 0) = 0.4;
    const double theta0 = model->params().at("theta")(0, 0);
    const Matrix a_before = model->params().at("a");
    const Matrix b_before = model->params().at("b");

    SUBCASE("zero steps change nothing") {
        model->update_incremental(0, 0, 1, 0, 0.1);
        CHECK(model->params().at("theta")(0, 0) == theta0);
    }
    SUBCASE("a correct answer with p < 1 strictly raises theta") {
        // analytic gradient a*(p-1) < 0, so a descent step raises theta;
        // cross-check the sign with a finite difference of the loss
        const double p = model->predict(0, 0);
        REQUIRE(p < 1.0);
        const double h = 1e-6;
        auto loss_at = [&](double theta) {
            const double z = 1.2 * (theta - 0.4);
            const double pr = sigmoid(z);
            return -std::log(pr);
        };
        const double fd = (loss_at(theta0 + h) - loss_at(theta0 - h)) / (2 * h);
        CHECK(fd < 0.0);
        model->update_incremental(0, 0, 1, 1, 0.1);
        CHECK(model->params().at("theta")(0, 0) > theta0);
        CHECK(model->params().at("a") == a_before);
        CHECK(model->params().at("b") == b_before);
    }
    SUBCASE("repeated updates on one correct record never lower p") {
        double prev = model->predict(0, 0);
        for (int i = 0; i < 25; ++i) {
            model->update_incremental(0, 0, 1, 1, 0.05);
            const double p = model->predict(0, 0);
            CHECK(p >= prev);
            prev = p;
        }
    }
}

TEST_CASE("snapshot and restore are bitwise") {
    const QMatrix q = tiny_q();
    auto model = make_nacd(make_weighted_q(q, {1.0, 1.0}), 3, tiny_opts(), 17);
    const auto snap = model->snapshot_student(1);
    const Matrix before = model->params().at("A");
    model->update_incremental(1, 0, 1, 3, 0.2);
    CHECK(!(model->params().at("A") == before));
    model->restore_student(1, snap);
    CHECK(model->params().at("A") == before);
}

TEST_CASE("ablation hooks produce valid models") {
    const QMatrix q = tiny_q();
    NacdOptions no_fe = tiny_opts();
    no_fe.disable_exercise_factor = true;
    NacdOptions no_fs = tiny_opts();
    no_fs.disable_student_factor = true;
    auto m1 = make_nacd(make_weighted_q(q, {1.0, 1.0}), 2, no_fe, 5);
    auto m2 = make_nacd(make_weighted_q(q, {1.0, 1.0}), 2, no_fs, 5);
    const std::vector<int> history{0, 1};
    for (auto* m : {m1.get(), m2.get()}) {
        const double p = m->predict(0, 2, history);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
    // both factors off is invalid
    NacdOptions both = tiny_opts();
    both.disable_exercise_factor = true;
    both.disable_student_factor = true;
    CHECK_THROWS_AS(make_nacd(make_weighted_q(q, {1.0, 1.0}), 2, both, 5), Error);
    // with the student factor off there are no student-owned parameters
    const auto g = m2->student_grad(0, 2, 1, history);
    for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("checkpoints round-trip bitwise") {
    const QMatrix q = tiny_q();
    auto model = make_nacd(make_weighted_q(q, {0.6, 0.9}), 2, tiny_opts(), 19);
    const auto dir = std::filesystem::temp_directory_path() /
                     ("kgeir_ckpt_" + std::to_string(::getpid()));
    save_checkpoint(*model, dir.string(), 19, 0xabcd);
    const auto back = load_checkpoint(dir.string());
    REQUIRE(back->kind() == CdmKind::Nacd);
    for (const auto& [name, m] : model->params().params) CHECK(back->params().at(name) == m);
    CHECK(as_nacd(*back).weighted_q() == as_nacd(*model).weighted_q());
    CHECK(back->predict(0, 1) == model->predict(0, 1));

    auto irt = make_irt(3, 4, 2);
    save_checkpoint(*irt, (dir / "irt").string(), 2, 0x1);
    const auto irt_back = load_checkpoint((dir / "irt").string());
    CHECK(irt_back->params().at("theta") == irt->params().at("theta"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("NACD loss on a 2-record toy log matches finite differences") {
    const QMatrix q = tiny_q();
    auto model = make_nacd(make_weighted_q(q, {0.8, 0.6}), 1, tiny_opts(), 23);
    const std::vector<DenseRecord> records{{0, 0, 1, 1}, {0, 2, 0, 2}};
    ad::Tape t;
    const ad::Var loss = model->loss_graph(t, records);
    t.backward(loss);
    auto eval = [&]() { return eval_loss(*model, records); };
    const auto result = gradcheck(model->params(), eval, t.named_grads());
    INFO("worst: ", result.worst);
    CHECK(result.max_rel_err < 1e-4);
    CHECK(result.checked > 50);
}
