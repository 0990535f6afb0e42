#include "kgeir/nacd.hpp"

#include <algorithm>
#include <cmath>

#include "kgeir/error.hpp"
#include "kgeir/rng.hpp"

namespace kgeir {

NacdModel::NacdModel(Matrix weighted_q, int n_students, const NacdOptions& opts, std::uint64_t seed)
    : weighted_q_(std::move(weighted_q)), n_students_(n_students), opts_(opts) {
    require(n_students_ >= 1, "nacd: need at least one student");
    require(weighted_q_.rows >= 1 && weighted_q_.cols >= 1, "nacd: empty weighted Q-matrix");
    require(opts_.attention_dim >= 1 && opts_.hidden_dim >= 1 && opts_.student_out_dim >= 1,
            "nacd: dimensions must be >= 1");
    require(opts_.clip_k >= 0, "nacd: clip bound must be >= 0");
    require(opts_.history_window >= 1, "nacd: history window must be >= 1");
    require(!(opts_.disable_exercise_factor && opts_.disable_student_factor),
            "nacd: cannot disable both factors");
    const int k = weighted_q_.cols;
    const int e = weighted_q_.rows;
    const int d = opts_.attention_dim;
    const int h = opts_.hidden_dim;
    const int m = opts_.student_out_dim;
    Rng rng(seed ^ 0x7c4e1d2b90f3a6ceULL);
    params_.add("A", Matrix::randn(n_students_, k, rng, 0.1));
    Matrix b = Matrix::randn(e, k, rng, 0.1);
    for (auto& v : b.a) v -= 1.0;  // start with low slipping/guessing probabilities
    Matrix c = Matrix::randn(e, k, rng, 0.1);
    for (auto& v : c.a) v -= 1.0;
    params_.add("B", std::move(b));
    params_.add("C", std::move(c));
    const double sk = 1.0 / std::sqrt(static_cast<double>(k));
    const double sd = 1.0 / std::sqrt(static_cast<double>(d));
    params_.add("att_wq", Matrix::randn(k, d, rng, sk));
    params_.add("att_wk", Matrix::randn(k, d, rng, sk));
    params_.add("att_wv", Matrix::randn(k, d, rng, sk));
    params_.add("att_rk", Matrix::randn(2 * opts_.clip_k + 1, d, rng, sd));
    params_.add("att_rv", Matrix::randn(2 * opts_.clip_k + 1, d, rng, sd));
    params_.add("mlp_w1", Matrix::randn(k, h, rng, sk));
    params_.add("mlp_b1", Matrix::zeros(1, h));
    params_.add("mlp_w2", Matrix::randn(h, m, rng, 1.0 / std::sqrt(static_cast<double>(h))));
    params_.add("mlp_b2", Matrix::zeros(1, m));
    params_.add("out_ws", Matrix::randn(m, 1, rng, 1.0 / std::sqrt(static_cast<double>(m))));
    params_.add("out_we", Matrix::randn(d, 1, rng, sd));
    params_.add("out_bp", Matrix::zeros(1, 1));
}

ad::Var NacdModel::InputCache::get(ad::Tape& t, const ParamStore& store, const std::string& name) {
    const auto it = vars.find(name);
    if (it != vars.end()) return it->second;
    const ad::Var v = t.input(store.at(name), name);
    vars.emplace(name, v);
    return v;
}

NacdModel::SequenceGraph NacdModel::sequence_graph(ad::Tape& t, InputCache& cache, int student,
                                                   std::span<const int> exercises, bool mask_causal,
                                                   const Matrix* dropout_mask) const {
    require(student >= 0 && student < n_students_, "nacd: unknown student " + std::to_string(student));
    require(!exercises.empty(), "nacd: empty exercise sequence");
    const int n = static_cast<int>(exercises.size());
    const int kdim = weighted_q_.cols;

    // knowledge vectors: weighted Q-matrix rows of the sequence
    Matrix kv(n, kdim);
    std::vector<int> seq(exercises.begin(), exercises.end());
    for (int i = 0; i < n; ++i) {
        require(seq[i] >= 0 && seq[i] < weighted_q_.rows,
                "nacd: unknown exercise " + std::to_string(seq[i]));
        for (int c = 0; c < kdim; ++c) kv(i, c) = weighted_q_(seq[i], c);
    }
    const ad::Var x = t.constant(std::move(kv));

    SequenceGraph g;
    ad::Var logit;

    if (!opts_.disable_student_factor) {
        const ad::Var a_full = cache.get(t, params_, "A");
        g.a_row = t.gather_rows(a_full, {student});
        const ad::Var hs = t.sigmoid(t.tile_rows(g.a_row, n));
        const ad::Var hslip = t.sigmoid(t.gather_rows(cache.get(t, params_, "B"), seq));
        const ad::Var hguess = t.sigmoid(t.gather_rows(cache.get(t, params_, "C"), seq));
        const ad::Var xs = t.mul(t.mul(x, t.sub(hs, hslip)), hguess);
        ad::Var hidden = t.sigmoid(t.add_row(t.matmul(xs, cache.get(t, params_, "mlp_w1")),
                                             cache.get(t, params_, "mlp_b1")));
        if (dropout_mask) hidden = t.mul(hidden, t.constant(*dropout_mask));
        const ad::Var fs = t.sigmoid(t.add_row(t.matmul(hidden, cache.get(t, params_, "mlp_w2")),
                                               cache.get(t, params_, "mlp_b2")));
        logit = t.matmul(fs, cache.get(t, params_, "out_ws"));
    }

    if (!opts_.disable_exercise_factor) {
        const int d = opts_.attention_dim;
        const ad::Var qp = t.matmul(x, cache.get(t, params_, "att_wq"));
        const ad::Var kp = t.matmul(x, cache.get(t, params_, "att_wk"));
        const ad::Var vp = t.matmul(x, cache.get(t, params_, "att_wv"));
        const ad::Var rk = cache.get(t, params_, "att_rk");
        const ad::Var logits = t.scale(t.add(t.matmul(qp, kp, false, true),
                                             t.rel_logits(qp, rk, opts_.clip_k)),
                                       1.0 / std::sqrt(static_cast<double>(d)));
        ad::Var attn;
        if (mask_causal) {
            // position i attends to j with 0 <= i - j <= window: its own
            // exercise plus at most `window` preceding ones
            Matrix mask(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = std::max(0, i - opts_.history_window); j <= i; ++j) mask(i, j) = 1.0;
            attn = t.softmax_rows(logits, &mask);
        } else {
            attn = t.softmax_rows(logits);
        }
        ad::Var fe = t.matmul(attn, vp);
        if (!opts_.literal_fe)
            fe = t.add(fe, t.rel_values(attn, cache.get(t, params_, "att_rv"), opts_.clip_k));
        const ad::Var term = t.matmul(fe, cache.get(t, params_, "out_we"));
        logit = logit.valid() ? t.add(logit, term) : term;
    }

    g.p = t.sigmoid(t.add_row(logit, cache.get(t, params_, "out_bp")));
    return g;
}

std::vector<int> NacdModel::window_sequence(int exercise, std::span<const int> history) const {
    std::vector<int> seq;
    const size_t window = static_cast<size_t>(opts_.history_window);
    const size_t take = std::min(history.size(), window);
    seq.reserve(take + 1);
    for (size_t i = history.size() - take; i < history.size(); ++i) seq.push_back(history[i]);
    seq.push_back(exercise);
    return seq;
}

double NacdModel::predict(int student, int exercise, std::span<const int> history) const {
    const std::vector<int> seq = window_sequence(exercise, history);
    ad::Tape t;
    InputCache cache;
    const SequenceGraph g = sequence_graph(t, cache, student, seq, false, nullptr);
    return t.value(g.p)(static_cast<int>(seq.size()) - 1, 0);
}

std::vector<double> NacdModel::student_grad(int student, int exercise, int correct,
                                            std::span<const int> history) const {
    const std::vector<int> seq = window_sequence(exercise, history);
    const int n = static_cast<int>(seq.size());
    ad::Tape t;
    InputCache cache;
    const SequenceGraph g = sequence_graph(t, cache, student, seq, false, nullptr);
    if (!g.a_row.valid())  // student factor disabled: no student-owned parameters
        return std::vector<double>(weighted_q_.cols, 0.0);
    Matrix y(n, 1);
    Matrix mask(n, 1);
    y(n - 1, 0) = correct;
    mask(n - 1, 0) = 1.0;
    const ad::Var loss = t.bce_mean(g.p, t.constant(std::move(y)), &mask);
    t.backward(loss);
    const Matrix grad = t.grad_of(g.a_row);
    return {grad.a.begin(), grad.a.end()};
}

void NacdModel::update_incremental(int student, int exercise, int correct, int steps, double lr,
                                   std::span<const int> history) {
    require(steps >= 0, "update_incremental: negative step count");
    for (int i = 0; i < steps; ++i) {
        const std::vector<double> g = student_grad(student, exercise, correct, history);
        auto row = params_.at("A").row(student);
        for (size_t c = 0; c < row.size(); ++c) row[c] -= lr * g[c];
    }
}

ad::Var NacdModel::loss_graph(ad::Tape& t, std::span<const DenseRecord> records) const {
    require(!records.empty(), "nacd: empty record batch");
    // group by student in first-appearance order, keeping chronology
    std::vector<int> students;
    std::vector<std::vector<int>> seqs;
    std::vector<std::vector<double>> labels;
    for (const auto& r : records) {
        const auto it = std::find(students.begin(), students.end(), r.student);
        size_t gi;
        if (it == students.end()) {
            students.push_back(r.student);
            seqs.emplace_back();
            labels.emplace_back();
            gi = students.size() - 1;
        } else {
            gi = static_cast<size_t>(it - students.begin());
        }
        seqs[gi].push_back(r.exercise);
        labels[gi].push_back(r.correct);
    }

    ad::Var total;
    InputCache cache;
    const double n_total = static_cast<double>(records.size());
    for (size_t gi = 0; gi < students.size(); ++gi) {
        const SequenceGraph g = sequence_graph(t, cache, students[gi], seqs[gi], true, nullptr);
        Matrix y(static_cast<int>(labels[gi].size()), 1);
        for (size_t i = 0; i < labels[gi].size(); ++i) y(static_cast<int>(i), 0) = labels[gi][i];
        const ad::Var part = t.scale(t.bce_mean(g.p, t.constant(std::move(y))),
                                     static_cast<double>(labels[gi].size()) / n_total);
        total = total.valid() ? t.add(total, part) : part;
    }
    return total;
}

std::vector<double> NacdModel::train(const DenseLog& log, const TrainConfig& cfg) {
    require(!log.records.empty(), "train: empty log");
    require(cfg.learning_rate > 0.0, "train: learning_rate must be > 0");
    require(cfg.epochs >= 1, "train: epochs must be >= 1");
    require(cfg.dropout >= 0.0 && cfg.dropout < 1.0, "train: dropout must lie in [0, 1)");
    Rng rng(cfg.seed ^ 0x3fb9a2c47d10e685ULL);

    std::vector<int> students;
    for (int s = 0; s < log.n_students; ++s)
        if (log.student_spans[s].second > log.student_spans[s].first) students.push_back(s);
    require(!students.empty(), "train: log has no student records");

    const int batch = std::max(1, cfg.batch_size);
    const bool adam = cfg.optimizer != "sgd";
    Adam opt(cfg.learning_rate);
    const double keep = 1.0 - cfg.dropout;

    std::vector<double> curve;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int i = static_cast<int>(students.size()) - 1; i > 0; --i)
            std::swap(students[i], students[rng.uniform_int(i + 1)]);
        double total_loss = 0.0;
        std::int64_t total_records = 0;
        for (size_t start = 0; start < students.size(); start += batch) {
            const size_t stop = std::min(students.size(), start + batch);
            ad::Tape tape;
            InputCache cache;
            ad::Var batch_loss;
            std::int64_t batch_records = 0;
            for (size_t i = start; i < stop; ++i) batch_records += log.student_records(students[i]).size();
            for (size_t i = start; i < stop; ++i) {
                const auto recs = log.student_records(students[i]);
                std::vector<int> seq;
                Matrix y(static_cast<int>(recs.size()), 1);
                for (size_t r = 0; r < recs.size(); ++r) {
                    seq.push_back(recs[r].exercise);
                    y(static_cast<int>(r), 0) = recs[r].correct;
                }
                Matrix dropout_mask;
                const Matrix* mask_ptr = nullptr;
                if (cfg.dropout > 0.0) {
                    dropout_mask = Matrix(static_cast<int>(seq.size()), opts_.hidden_dim);
                    for (auto& v : dropout_mask.a) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
                    mask_ptr = &dropout_mask;
                }
                const SequenceGraph g = sequence_graph(tape, cache, students[i], seq, true, mask_ptr);
                const ad::Var part =
                    tape.scale(tape.bce_mean(g.p, tape.constant(std::move(y))),
                               static_cast<double>(recs.size()) / static_cast<double>(batch_records));
                batch_loss = batch_loss.valid() ? tape.add(batch_loss, part) : part;
            }
            tape.backward(batch_loss);
            const auto grads = tape.named_grads();
            if (adam) {
                opt.step(params_, grads);
            } else {
                for (const auto& [name, g] : grads) sgd_step(params_.at(name), g, cfg.learning_rate);
            }
            total_loss += tape.value(batch_loss)(0, 0) * static_cast<double>(batch_records);
            total_records += batch_records;
        }
        const double epoch_loss = total_loss / static_cast<double>(total_records);
        require(std::isfinite(epoch_loss),
                "train: loss diverged (non-finite) at epoch " + std::to_string(epoch));
        curve.push_back(epoch_loss);
    }
    return curve;
}

std::unique_ptr<Cdm> NacdModel::clone() const { return std::make_unique<NacdModel>(*this); }

std::vector<double> NacdModel::snapshot_student(int student) const {
    require(student >= 0 && student < n_students_, "nacd: unknown student");
    const auto row = params_.at("A").row(student);
    return {row.begin(), row.end()};
}

void NacdModel::restore_student(int student, std::span<const double> snap) {
    require(static_cast<int>(snap.size()) == weighted_q_.cols, "nacd: bad student snapshot size");
    auto row = params_.at("A").row(student);
    std::copy(snap.begin(), snap.end(), row.begin());
}

Matrix NacdModel::exercise_factor(const Matrix& knowledge_vectors) const {
    require(knowledge_vectors.rows >= 1, "exercise_factor: empty sequence");
    require(knowledge_vectors.cols == weighted_q_.cols, "exercise_factor: dimension mismatch");
    const int d = opts_.attention_dim;
    ad::Tape t;
    const ad::Var x = t.constant(knowledge_vectors);
    const ad::Var qp = t.matmul(x, t.constant(params_.at("att_wq")));
    const ad::Var kp = t.matmul(x, t.constant(params_.at("att_wk")));
    const ad::Var vp = t.matmul(x, t.constant(params_.at("att_wv")));
    const ad::Var logits = t.scale(t.add(t.matmul(qp, kp, false, true),
                                         t.rel_logits(qp, t.constant(params_.at("att_rk")), opts_.clip_k)),
                                   1.0 / std::sqrt(static_cast<double>(d)));
    const ad::Var attn = t.softmax_rows(logits);
    ad::Var fe = t.matmul(attn, vp);
    if (!opts_.literal_fe)
        fe = t.add(fe, t.rel_values(attn, t.constant(params_.at("att_rv")), opts_.clip_k));
    return t.value(fe);
}

Matrix NacdModel::student_factor(int student, int exercise) const {
    require(student >= 0 && student < n_students_, "nacd: unknown student");
    require(exercise >= 0 && exercise < weighted_q_.rows, "nacd: unknown exercise");
    ad::Tape t;
    const ad::Var a_row = t.gather_rows(t.constant(params_.at("A")), {student});
    const ad::Var hs = t.sigmoid(a_row);
    const ad::Var hslip = t.sigmoid(t.gather_rows(t.constant(params_.at("B")), {exercise}));
    const ad::Var hguess = t.sigmoid(t.gather_rows(t.constant(params_.at("C")), {exercise}));
    Matrix q_row(1, weighted_q_.cols);
    for (int c = 0; c < weighted_q_.cols; ++c) q_row(0, c) = weighted_q_(exercise, c);
    const ad::Var xs = t.mul(t.mul(t.constant(std::move(q_row)), t.sub(hs, hslip)), hguess);
    const ad::Var hidden = t.sigmoid(t.add_row(t.matmul(xs, t.constant(params_.at("mlp_w1"))),
                                               t.constant(params_.at("mlp_b1"))));
    const ad::Var fs = t.sigmoid(t.add_row(t.matmul(hidden, t.constant(params_.at("mlp_w2"))),
                                           t.constant(params_.at("mlp_b2"))));
    return t.value(fs);
}

std::vector<double> NacdModel::predict_sequence(int student, std::span<const int> exercises) const {
    ad::Tape t;
    InputCache cache;
    const SequenceGraph g = sequence_graph(t, cache, student, exercises, true, nullptr);
    const Matrix& p = t.value(g.p);
    std::vector<double> out(p.rows);
    for (int i = 0; i < p.rows; ++i) out[i] = p(i, 0);
    return out;
}

}  // namespace kgeir
