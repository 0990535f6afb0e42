#include "kgeir/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "kgeir/autodiff.hpp"
#include "kgeir/csv.hpp"
#include "kgeir/error.hpp"
#include "kgeir/optim.hpp"
#include "kgeir/rng.hpp"

namespace kgeir {

namespace {

SparseRows from_pair_sets(int n, const std::vector<std::set<int>>& neighbors) {
    SparseRows r(n, n);
    for (int i = 0; i < n; ++i) {
        const double w = 1.0 / static_cast<double>(neighbors[i].size());
        r.entries[i].reserve(neighbors[i].size());
        for (int j : neighbors[i]) r.entries[i].emplace_back(j, w);
    }
    return r;
}

}  // namespace

RelationMatrices build_relation_matrices(const DenseLog& log, const QMatrix& q) {
    require(log.n_exercises == q.n_exercises(), "relation matrices: exercise vocabulary mismatch");
    const int ne = q.n_exercises();
    const int k = q.n_skills();

    std::vector<std::set<int>> e_neighbors(ne);
    for (int i = 0; i < ne; ++i) e_neighbors[i].insert(i);  // self-loop

    // eSe: answered by the same student
    for (int s = 0; s < log.n_students; ++s) {
        std::set<int> answered;
        for (const auto& r : log.student_records(s)) answered.insert(r.exercise);
        for (int a : answered)
            for (int b : answered) e_neighbors[a].insert(b);
    }
    // eKe: share a skill
    std::vector<std::vector<int>> by_skill(k);
    for (int e = 0; e < ne; ++e)
        for (int kk : q.skills_of[e]) by_skill[kk].push_back(e);
    for (const auto& group : by_skill)
        for (int a : group)
            for (int b : group) e_neighbors[a].insert(b);

    // kEk: contained in the same exercise
    std::vector<std::set<int>> s_neighbors(k);
    for (int kk = 0; kk < k; ++kk) s_neighbors[kk].insert(kk);
    for (int e = 0; e < ne; ++e)
        for (int a : q.skills_of[e])
            for (int b : q.skills_of[e]) s_neighbors[a].insert(b);

    return {from_pair_sets(ne, e_neighbors), from_pair_sets(k, s_neighbors)};
}

Matrix to_dense(const SparseRows& r) {
    Matrix m(r.rows, r.cols);
    for (int i = 0; i < r.rows; ++i)
        for (const auto& [j, w] : r.entries[i]) m(i, j) = w;
    return m;
}

Matrix gcn_forward(const Matrix& features, const SparseRows& rel, const GcnParams& params) {
    require(params.layers() >= 1, "gcn_forward: no layers");
    require(rel.rows == features.rows, "gcn_forward: features do not match relation matrix");
    Matrix h = features;
    for (int l = 0; l < params.layers(); ++l) {
        const Matrix& w = params.weights[l];
        const Matrix& b = params.biases[l];
        require(w.rows == h.cols, "gcn_forward: dimension mismatch at layer " + std::to_string(l));
        // aggregate self + neighbors with the row-normalized weights
        Matrix agg(h.rows, h.cols);
        for (int i = 0; i < rel.rows; ++i)
            for (const auto& [j, wgt] : rel.entries[i])
                for (int c = 0; c < h.cols; ++c) agg(i, c) += wgt * h(j, c);
        Matrix z = matmul(agg, w);
        for (int i = 0; i < z.rows; ++i)
            for (int c = 0; c < z.cols; ++c) z(i, c) = std::max(0.0, z(i, c) + b(0, c));
        h = std::move(z);
    }
    require(h.all_finite(), "gcn_forward: non-finite output");
    return h;
}

Matrix gcn_forward_one_hot(const SparseRows& rel, const GcnParams& params) {
    require(params.layers() >= 1, "gcn_forward: no layers");
    require(params.weights[0].rows == rel.cols, "gcn_forward: first layer expects one-hot width");
    // identity features: layer-1 aggregation of one-hot rows is just the
    // relation-weighted mix of first-layer weight rows
    Matrix h(rel.rows, params.weights[0].cols);
    const Matrix& w0 = params.weights[0];
    const Matrix& b0 = params.biases[0];
    for (int i = 0; i < rel.rows; ++i)
        for (const auto& [j, wgt] : rel.entries[i])
            for (int c = 0; c < h.cols; ++c) h(i, c) += wgt * w0(j, c);
    for (int i = 0; i < h.rows; ++i)
        for (int c = 0; c < h.cols; ++c) h(i, c) = std::max(0.0, h(i, c) + b0(0, c));
    if (params.layers() == 1) return h;
    GcnParams rest;
    rest.weights.assign(params.weights.begin() + 1, params.weights.end());
    rest.biases.assign(params.biases.begin() + 1, params.biases.end());
    return gcn_forward(h, rel, rest);
}

Matrix refine_attention(const Matrix& hidden, const SparseRows& rel, const AttentionParams& params) {
    const int n = hidden.rows;
    const int d = params.w_q.cols;
    require(params.w_q.rows == hidden.cols && params.w_k.rows == hidden.cols &&
                params.w_v.rows == hidden.cols,
            "refine_attention: projection shape mismatch");
    require(rel.rows == n, "refine_attention: relation matrix shape mismatch");
    require(params.delta_a >= 0.0 && params.delta_a <= 1.0, "refine_attention: delta_a outside [0,1]");

    const Matrix q = matmul(hidden, params.w_q);
    const Matrix k = matmul(hidden, params.w_k);
    const Matrix v = matmul(hidden, params.w_v);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d));
    const double delta = params.delta_a;

    // stream one attention row at a time; beta rows stay convex combinations
    Matrix out(n, v.cols);
    std::vector<double> logits(n);
    for (int i = 0; i < n; ++i) {
        double mx = -HUGE_VAL;
        for (int j = 0; j < n; ++j) {
            logits[j] = dot(q.row(i), k.row(j)) * inv_scale;
            mx = std::max(mx, logits[j]);
        }
        double denom = 0.0;
        for (int j = 0; j < n; ++j) {
            logits[j] = std::exp(logits[j] - mx);
            denom += logits[j];
        }
        for (int j = 0; j < n; ++j) {
            const double alpha = logits[j] / denom;
            const double beta = delta * alpha;
            if (beta != 0.0)
                for (int c = 0; c < v.cols; ++c) out(i, c) += beta * v(j, c);
        }
        for (const auto& [j, w] : rel.entries[i]) {
            const double beta = (1.0 - delta) * w;
            for (int c = 0; c < v.cols; ++c) out(i, c) += beta * v(j, c);
        }
    }
    require(out.all_finite(), "refine_attention: non-finite output");
    return out;
}

namespace {

struct TowerVars {
    ad::Var hidden;   // GCN output
    ad::Var refined;  // attention output
};

// builds one GCN+attention tower on the tape from named parameters
TowerVars build_tower(ad::Tape& t, const std::string& prefix, const SparseRows& rel,
                      const Matrix& rel_dense, ParamStore& store, int layers, double delta_a) {
    ad::Var h;
    for (int l = 0; l < layers; ++l) {
        const std::string wn = prefix + ".gcn_w" + std::to_string(l);
        const std::string bn = prefix + ".gcn_b" + std::to_string(l);
        ad::Var w = t.input(store.at(wn), wn);
        ad::Var b = t.input(store.at(bn), bn);
        ad::Var mixed = l == 0 ? t.sparse_mix(rel, w) : t.matmul(t.sparse_mix(rel, h), w);
        h = t.relu(t.add_row(mixed, b));
    }
    ad::Var wq = t.input(store.at(prefix + ".att_wq"), prefix + ".att_wq");
    ad::Var wk = t.input(store.at(prefix + ".att_wk"), prefix + ".att_wk");
    ad::Var wv = t.input(store.at(prefix + ".att_wv"), prefix + ".att_wv");
    const int d = t.value(wq).cols;
    ad::Var logits = t.scale(t.matmul(t.matmul(h, wq), t.matmul(h, wk), false, true),
                             1.0 / std::sqrt(static_cast<double>(d)));
    ad::Var alpha = t.softmax_rows(logits);
    Matrix rel_scaled = rel_dense;
    for (auto& v : rel_scaled.a) v *= (1.0 - delta_a);
    ad::Var beta = t.add(t.scale(alpha, delta_a), t.constant(std::move(rel_scaled)));
    ad::Var refined = t.matmul(beta, t.matmul(h, wv));
    return {h, refined};
}

}  // namespace

EmbeddingSet train_embeddings(const DenseLog& log, const QMatrix& q, const RelationMatrices& rel,
                              const EmbeddingTrainConfig& cfg, std::vector<double>* loss_curve) {
    require(cfg.dim >= 1 && cfg.gcn_layers >= 1, "train_embeddings: bad dimensions");
    const int ne = q.n_exercises();
    const int k = q.n_skills();
    const int d = cfg.dim;
    Rng rng(cfg.seed ^ 0x9d8f31c07ae56bd2ULL);

    ParamStore store;
    auto init_tower = [&](const std::string& prefix, int n_nodes) {
        for (int l = 0; l < cfg.gcn_layers; ++l) {
            const int in_dim = l == 0 ? n_nodes : d;
            store.add(prefix + ".gcn_w" + std::to_string(l),
                      Matrix::randn(in_dim, d, rng, 1.0 / std::sqrt(static_cast<double>(in_dim))));
            store.add(prefix + ".gcn_b" + std::to_string(l), Matrix::zeros(1, d));
        }
        const double s = 1.0 / std::sqrt(static_cast<double>(d));
        store.add(prefix + ".att_wq", Matrix::randn(d, d, rng, s));
        store.add(prefix + ".att_wk", Matrix::randn(d, d, rng, s));
        store.add(prefix + ".att_wv", Matrix::randn(d, d, rng, s));
    };
    init_tower("ex", ne);
    init_tower("sk", k);
    store.add("head.u", Matrix::randn(log.n_students, d, rng, 0.1));
    store.add("head.v", Matrix::randn(log.n_students, d, rng, 0.1));
    store.add("head.c", Matrix::zeros(ne, 1));

    const Matrix re_dense = to_dense(rel.r_e);
    const Matrix rs_dense = to_dense(rel.r_s);
    // exercise -> mean over its skills (for the skill side of the head)
    SparseRows q_mean(ne, k);
    for (int e = 0; e < ne; ++e) {
        const double w = 1.0 / static_cast<double>(q.skills_of[e].size());
        for (int kk : q.skills_of[e]) q_mean.entries[e].emplace_back(kk, w);
    }

    std::vector<int> order(log.records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    Adam opt(cfg.learning_rate);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // seeded Fisher-Yates keeps epochs reproducible
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
            std::swap(order[i], order[rng.uniform_int(i + 1)]);
        double epoch_loss = 0.0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::vector<int> students, exercises;
            Matrix y(static_cast<int>(stop - start), 1);
            for (size_t i = start; i < stop; ++i) {
                const auto& r = log.records[order[i]];
                students.push_back(r.student);
                exercises.push_back(r.exercise);
                y(static_cast<int>(i - start), 0) = r.correct;
            }

            ad::Tape t;
            TowerVars ex = build_tower(t, "ex", rel.r_e, re_dense, store, cfg.gcn_layers, cfg.delta_a);
            TowerVars sk = build_tower(t, "sk", rel.r_s, rs_dense, store, cfg.gcn_layers, cfg.delta_a);
            ad::Var sbar = t.sparse_mix(q_mean, sk.refined);  // ne x d
            ad::Var u = t.input(store.at("head.u"), "head.u");
            ad::Var v = t.input(store.at("head.v"), "head.v");
            ad::Var c = t.input(store.at("head.c"), "head.c");
            ad::Var ones = t.constant(Matrix::full(d, 1, 1.0));
            ad::Var lhs = t.matmul(t.mul(t.gather_rows(u, students), t.gather_rows(ex.refined, exercises)), ones);
            ad::Var rhs = t.matmul(t.mul(t.gather_rows(v, students), t.gather_rows(sbar, exercises)), ones);
            ad::Var logit = t.add(t.add(lhs, rhs), t.gather_rows(c, exercises));
            ad::Var loss = t.bce_mean(t.sigmoid(logit), t.constant(std::move(y)));
            t.backward(loss);
            opt.step(store, t.named_grads());
            epoch_loss += t.value(loss)(0, 0);
            ++batches;
        }
        if (loss_curve) loss_curve->push_back(epoch_loss / std::max(1, batches));
    }

    // extract embeddings with the plain forward path
    GcnParams pe, ps;
    for (int l = 0; l < cfg.gcn_layers; ++l) {
        pe.weights.push_back(store.at("ex.gcn_w" + std::to_string(l)));
        pe.biases.push_back(store.at("ex.gcn_b" + std::to_string(l)));
        ps.weights.push_back(store.at("sk.gcn_w" + std::to_string(l)));
        ps.biases.push_back(store.at("sk.gcn_b" + std::to_string(l)));
    }
    EmbeddingSet set;
    set.e_hat = gcn_forward_one_hot(rel.r_e, pe);
    set.s_hat = gcn_forward_one_hot(rel.r_s, ps);
    AttentionParams ae{store.at("ex.att_wq"), store.at("ex.att_wk"), store.at("ex.att_wv"), cfg.delta_a};
    AttentionParams as{store.at("sk.att_wq"), store.at("sk.att_wk"), store.at("sk.att_wv"), cfg.delta_a};
    set.e_star = refine_attention(set.e_hat, rel.r_e, ae);
    set.s_star = refine_attention(set.s_hat, rel.r_s, as);
    return set;
}

namespace {

void write_embedding_csv(const Matrix& m, const std::vector<std::string>& ids,
                         const std::string& path) {
    require(m.rows == static_cast<int>(ids.size()), "embedding export: id count mismatch");
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << "entity_id";
    for (int c = 0; c < m.cols; ++c) out << ",dim_" << c;
    out << '\n';
    for (int i = 0; i < m.rows; ++i) {
        out << csv_escape(ids[i]);
        for (int c = 0; c < m.cols; ++c) out << ',' << format_double(m(i, c));
        out << '\n';
    }
    require(out.good(), "write failed: " + path);
}

Matrix read_embedding_csv(const std::vector<std::string>& ids, const std::string& path) {
    CsvReader reader(path);
    const auto& header = reader.header();
    require(header.size() >= 2 && header[0] == "entity_id", path + ": bad embedding header");
    const int d = static_cast<int>(header.size()) - 1;
    Matrix m(static_cast<int>(ids.size()), d);
    std::vector<char> seen(ids.size(), 0);
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        if (fields.size() != header.size()) reader.fail_at("malformed embedding row");
        const auto it = std::lower_bound(ids.begin(), ids.end(), fields[0]);
        if (it == ids.end() || *it != fields[0]) reader.fail_at("unknown entity: " + fields[0]);
        const int row = static_cast<int>(it - ids.begin());
        seen[row] = 1;
        for (int c = 0; c < d; ++c) m(row, c) = std::strtod(fields[c + 1].c_str(), nullptr);
    }
    for (size_t i = 0; i < ids.size(); ++i)
        require(seen[i], path + ": missing embedding for " + ids[i]);
    return m;
}

}  // namespace

void save_embeddings(const EmbeddingSet& set, const QMatrix& q, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_embedding_csv(set.e_hat, q.exercise_ids, dir + "/e_hat.csv");
    write_embedding_csv(set.s_hat, q.skill_ids, dir + "/s_hat.csv");
    write_embedding_csv(set.e_star, q.exercise_ids, dir + "/e_star.csv");
    write_embedding_csv(set.s_star, q.skill_ids, dir + "/s_star.csv");
}

EmbeddingSet load_embeddings(const QMatrix& q, const std::string& dir) {
    EmbeddingSet set;
    set.e_hat = read_embedding_csv(q.exercise_ids, dir + "/e_hat.csv");
    set.s_hat = read_embedding_csv(q.skill_ids, dir + "/s_hat.csv");
    set.e_star = read_embedding_csv(q.exercise_ids, dir + "/e_star.csv");
    set.s_star = read_embedding_csv(q.skill_ids, dir + "/s_star.csv");
    return set;
}

}  // namespace kgeir
