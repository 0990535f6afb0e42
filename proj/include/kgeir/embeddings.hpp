#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgeir/ingest.hpp"
#include "kgeir/matrix.hpp"
#include "kgeir/sparse.hpp"

namespace kgeir {

// Meta-path relations: exercises are linked when a student answered both
// (eSe) or they share a skill (eKe); skills are linked when one exercise
// contains both (kEk). Rows are uniform over their support and include the
// diagonal, so both matrices are row-stochastic with symmetric support.
struct RelationMatrices {
    SparseRows r_e;  // N_e x N_e
    SparseRows r_s;  // K x K
};

RelationMatrices build_relation_matrices(const DenseLog& log, const QMatrix& q);
Matrix to_dense(const SparseRows& r);

struct GcnParams {
    std::vector<Matrix> weights;  // layer l: (d_{l-1} x d_l)
    std::vector<Matrix> biases;   // layer l: (1 x d_l)

    int layers() const { return static_cast<int>(weights.size()); }
};

// node_i^l = ReLU(sum over {i} and its relation neighbors, weighted by the
// row-normalized relation matrix, of node_j^{l-1}, times W^l plus b^l)
Matrix gcn_forward(const Matrix& features, const SparseRows& rel, const GcnParams& params);
// identity input features folded into the first layer (avoids an N x N input)
Matrix gcn_forward_one_hot(const SparseRows& rel, const GcnParams& params);

struct AttentionParams {
    Matrix w_q, w_k, w_v;  // d x d
    double delta_a = 0.5;
};

// alpha = row-softmax((h W_Q)(h W_K)^T / sqrt(d)); beta = delta*alpha +
// (1-delta)*rel; output beta (h W_V). Rows of beta sum to 1.
Matrix refine_attention(const Matrix& hidden, const SparseRows& rel, const AttentionParams& params);

struct EmbeddingSet {
    Matrix e_hat, s_hat;    // GCN hidden states
    Matrix e_star, s_star;  // attention-refined embeddings
};

struct EmbeddingTrainConfig {
    int dim = 200;
    int gcn_layers = 2;
    double delta_a = 0.5;
    double learning_rate = 0.01;
    int epochs = 30;
    int batch_size = 2048;
    std::uint64_t seed = 0;
};

// Trains the two GCN+attention towers end to end on response prediction
// cross-entropy (bilinear student head over e* and the skill means of s*),
// then returns the embeddings produced by the trained parameters.
EmbeddingSet train_embeddings(const DenseLog& log, const QMatrix& q, const RelationMatrices& rel,
                              const EmbeddingTrainConfig& cfg,
                              std::vector<double>* loss_curve = nullptr);

void save_embeddings(const EmbeddingSet& set, const QMatrix& q, const std::string& dir);
EmbeddingSet load_embeddings(const QMatrix& q, const std::string& dir);

}  // namespace kgeir
