#include "kgeir/cdm.hpp"

#include <algorithm>
#include <cmath>

#include "kgeir/error.hpp"
#include "kgeir/nacd.hpp"
#include "kgeir/rng.hpp"

namespace kgeir {

const char* to_string(CdmKind kind) {
    switch (kind) {
        case CdmKind::Irt: return "irt";
        case CdmKind::Mirt: return "mirt";
        case CdmKind::Nacd: return "nacd";
    }
    return "?";
}

bool cdm_kind_from_string(const std::string& s, CdmKind& out) {
    if (s == "irt") out = CdmKind::Irt;
    else if (s == "mirt") out = CdmKind::Mirt;
    else if (s == "nacd") out = CdmKind::Nacd;
    else return false;
    return true;
}

Matrix make_weighted_q(const QMatrix& q, const std::vector<double>& skill_weights) {
    require(static_cast<int>(skill_weights.size()) == q.n_skills(),
            "weighted Q: weight count does not match skill count");
    Matrix w(q.n_exercises(), q.n_skills());
    for (int e = 0; e < q.n_exercises(); ++e)
        for (int k : q.skills_of[e]) w(e, k) = skill_weights[k];
    return w;
}

std::vector<double> knowledge_vector(const Matrix& weighted_q, int exercise) {
    require(exercise >= 0 && exercise < weighted_q.rows, "knowledge_vector: unknown exercise");
    const auto row = weighted_q.row(exercise);
    return {row.begin(), row.end()};
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// shared minibatch loop over records (IRT / MIRT); returns per-epoch loss
template <typename Model, typename PostStep>
std::vector<double> train_record_batches(Model& model, const DenseLog& log, const TrainConfig& cfg,
                                         PostStep post_step) {
    require(!log.records.empty(), "train: empty log");
    require(cfg.learning_rate > 0.0, "train: learning_rate must be > 0");
    require(cfg.epochs >= 1, "train: epochs must be >= 1");
    Rng rng(cfg.seed ^ 0x51d1c3a9742bd6f0ULL);
    std::vector<int> order(log.records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    const int batch = std::max(1, cfg.batch_size);
    const bool adam = cfg.optimizer != "sgd";
    Adam opt(cfg.learning_rate);

    std::vector<double> curve;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
            std::swap(order[i], order[rng.uniform_int(i + 1)]);
        double total = 0.0;
        for (size_t start = 0; start < order.size(); start += batch) {
            const size_t stop = std::min(order.size(), start + batch);
            std::vector<DenseRecord> records;
            records.reserve(stop - start);
            for (size_t i = start; i < stop; ++i) records.push_back(log.records[order[i]]);

            ad::Tape tape;
            const ad::Var loss = model.loss_graph(tape, records);
            tape.backward(loss);
            const auto grads = tape.named_grads();
            if (adam) {
                opt.step(model.params(), grads);
            } else {
                for (const auto& [name, g] : grads) sgd_step(model.params().at(name), g, cfg.learning_rate);
            }
            post_step(model);
            total += tape.value(loss)(0, 0) * static_cast<double>(stop - start);
        }
        const double epoch_loss = total / static_cast<double>(order.size());
        require(std::isfinite(epoch_loss),
                "train: loss diverged (non-finite) at epoch " + std::to_string(epoch));
        curve.push_back(epoch_loss);
    }
    return curve;
}

// two-parameter logistic: p = sigmoid(a_e * (theta_s - b_e))
class IrtModel final : public Cdm {
public:
    IrtModel(int n_students, int n_exercises, std::uint64_t seed)
        : n_students_(n_students), n_exercises_(n_exercises) {
        Rng rng(seed ^ 0xa27f3c1be85u);
        params_.add("theta", Matrix::randn(n_students, 1, rng, 0.01));
        params_.add("a", Matrix::full(n_exercises, 1, 1.0));
        params_.add("b", Matrix::randn(n_exercises, 1, rng, 0.01));
    }

    CdmKind kind() const override { return CdmKind::Irt; }

    double predict(int s, int e, std::span<const int>) const override {
        check_ids(s, e);
        const double a = params_.at("a")(e, 0);
        const double b = params_.at("b")(e, 0);
        const double theta = params_.at("theta")(s, 0);
        return sigmoid(a * (theta - b));
    }

    std::vector<double> student_grad(int s, int e, int y, std::span<const int> h) const override {
        // d BCE / d theta = a * (p - y)
        const double p = predict(s, e, h);
        return {params_.at("a")(e, 0) * (p - y)};
    }

    void update_incremental(int s, int e, int y, int steps, double lr,
                            std::span<const int> h) override {
        require(steps >= 0, "update_incremental: negative step count");
        for (int i = 0; i < steps; ++i) {
            const auto g = student_grad(s, e, y, h);
            params_.at("theta")(s, 0) -= lr * g[0];
        }
    }

    std::vector<double> train(const DenseLog& log, const TrainConfig& cfg) override {
        return train_record_batches(*this, log, cfg, [](IrtModel& m) {
            // discrimination stays nonnegative
            for (auto& v : m.params_.at("a").a) v = std::max(v, 1e-6);
        });
    }

    ad::Var loss_graph(ad::Tape& t, std::span<const DenseRecord> records) const override {
        std::vector<int> students, exercises;
        Matrix y(static_cast<int>(records.size()), 1);
        for (size_t i = 0; i < records.size(); ++i) {
            students.push_back(records[i].student);
            exercises.push_back(records[i].exercise);
            y(static_cast<int>(i), 0) = records[i].correct;
        }
        const ad::Var theta = t.input(params_.at("theta"), "theta");
        const ad::Var a = t.input(params_.at("a"), "a");
        const ad::Var b = t.input(params_.at("b"), "b");
        const ad::Var z = t.mul(t.gather_rows(a, exercises),
                                t.sub(t.gather_rows(theta, students), t.gather_rows(b, exercises)));
        return t.bce_mean(t.sigmoid(z), t.constant(std::move(y)));
    }

    std::unique_ptr<Cdm> clone() const override { return std::make_unique<IrtModel>(*this); }

    std::vector<double> snapshot_student(int s) const override {
        check_ids(s, 0);
        return {params_.at("theta")(s, 0)};
    }

    void restore_student(int s, std::span<const double> snap) override {
        require(snap.size() == 1, "irt: bad student snapshot size");
        params_.at("theta")(s, 0) = snap[0];
    }

    ParamStore& params() override { return params_; }
    const ParamStore& params() const override { return params_; }
    int n_students() const override { return n_students_; }
    int n_exercises() const override { return n_exercises_; }

private:
    void check_ids(int s, int e) const {
        require(s >= 0 && s < n_students_, "irt: unknown student " + std::to_string(s));
        require(e >= 0 && e < n_exercises_, "irt: unknown exercise " + std::to_string(e));
    }

    int n_students_;
    int n_exercises_;
    ParamStore params_;
};

// multidimensional form: p = sigmoid(a_e . theta_s - b_e)
class MirtModel final : public Cdm {
public:
    MirtModel(int n_students, int n_exercises, int dim, std::uint64_t seed)
        : n_students_(n_students), n_exercises_(n_exercises), dim_(dim) {
        require(dim >= 1, "mirt: dimension must be >= 1");
        Rng rng(seed ^ 0x5b2e19d4c3au);
        params_.add("theta", Matrix::randn(n_students, dim, rng, 0.01));
        Matrix a = Matrix::randn(n_exercises, dim, rng, 0.1);
        for (auto& v : a.a) v += 0.5;  // mildly positive loadings to start
        params_.add("a", std::move(a));
        params_.add("b", Matrix::randn(n_exercises, 1, rng, 0.01));
    }

    CdmKind kind() const override { return CdmKind::Mirt; }

    double predict(int s, int e, std::span<const int>) const override {
        check_ids(s, e);
        const double z =
            dot(params_.at("a").row(e), params_.at("theta").row(s)) - params_.at("b")(e, 0);
        return sigmoid(z);
    }

    std::vector<double> student_grad(int s, int e, int y, std::span<const int> h) const override {
        const double p = predict(s, e, h);
        const auto a = params_.at("a").row(e);
        std::vector<double> g(dim_);
        for (int d = 0; d < dim_; ++d) g[d] = a[d] * (p - y);
        return g;
    }

    void update_incremental(int s, int e, int y, int steps, double lr,
                            std::span<const int> h) override {
        require(steps >= 0, "update_incremental: negative step count");
        for (int i = 0; i < steps; ++i) {
            const auto g = student_grad(s, e, y, h);
            auto theta = params_.at("theta").row(s);
            for (int d = 0; d < dim_; ++d) theta[d] -= lr * g[d];
        }
    }

    std::vector<double> train(const DenseLog& log, const TrainConfig& cfg) override {
        return train_record_batches(*this, log, cfg, [](MirtModel&) {});
    }

    ad::Var loss_graph(ad::Tape& t, std::span<const DenseRecord> records) const override {
        std::vector<int> students, exercises;
        Matrix y(static_cast<int>(records.size()), 1);
        for (size_t i = 0; i < records.size(); ++i) {
            students.push_back(records[i].student);
            exercises.push_back(records[i].exercise);
            y(static_cast<int>(i), 0) = records[i].correct;
        }
        const ad::Var theta = t.input(params_.at("theta"), "theta");
        const ad::Var a = t.input(params_.at("a"), "a");
        const ad::Var b = t.input(params_.at("b"), "b");
        const ad::Var ones = t.constant(Matrix::full(dim_, 1, 1.0));
        const ad::Var z = t.sub(
            t.matmul(t.mul(t.gather_rows(a, exercises), t.gather_rows(theta, students)), ones),
            t.gather_rows(b, exercises));
        return t.bce_mean(t.sigmoid(z), t.constant(std::move(y)));
    }

    std::unique_ptr<Cdm> clone() const override { return std::make_unique<MirtModel>(*this); }

    std::vector<double> snapshot_student(int s) const override {
        check_ids(s, 0);
        const auto row = params_.at("theta").row(s);
        return {row.begin(), row.end()};
    }

    void restore_student(int s, std::span<const double> snap) override {
        require(static_cast<int>(snap.size()) == dim_, "mirt: bad student snapshot size");
        auto row = params_.at("theta").row(s);
        std::copy(snap.begin(), snap.end(), row.begin());
    }

    ParamStore& params() override { return params_; }
    const ParamStore& params() const override { return params_; }
    int n_students() const override { return n_students_; }
    int n_exercises() const override { return n_exercises_; }

private:
    void check_ids(int s, int e) const {
        require(s >= 0 && s < n_students_, "mirt: unknown student " + std::to_string(s));
        require(e >= 0 && e < n_exercises_, "mirt: unknown exercise " + std::to_string(e));
    }

    int n_students_;
    int n_exercises_;
    int dim_;
    ParamStore params_;
};

}  // namespace

std::unique_ptr<Cdm> make_irt(int n_students, int n_exercises, std::uint64_t seed) {
    return std::make_unique<IrtModel>(n_students, n_exercises, seed);
}

std::unique_ptr<Cdm> make_mirt(int n_students, int n_exercises, int dim, std::uint64_t seed) {
    return std::make_unique<MirtModel>(n_students, n_exercises, dim, seed);
}

std::unique_ptr<Cdm> make_nacd(Matrix weighted_q, int n_students, const NacdOptions& opts,
                               std::uint64_t seed) {
    return std::make_unique<NacdModel>(std::move(weighted_q), n_students, opts, seed);
}

const NacdModel& as_nacd(const Cdm& model) {
    const auto* p = dynamic_cast<const NacdModel*>(&model);
    require(p != nullptr, "model is not NACD");
    return *p;
}

NacdModel& as_nacd(Cdm& model) {
    auto* p = dynamic_cast<NacdModel*>(&model);
    require(p != nullptr, "model is not NACD");
    return *p;
}

}  // namespace kgeir
