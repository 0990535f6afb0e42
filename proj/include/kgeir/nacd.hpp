#pragma once

#include <map>

#include "kgeir/cdm.hpp"

namespace kgeir {

// Neural attentive cognitive diagnosis: a relative-position attention
// exercise factor over the sequence of weighted Q-matrix rows, and a
// slipping/guessing student factor through a two-layer net.
//
// Parameters: A (S x K) proficiency, B/C (N_e x K) slipping/guessing,
// att_wq/att_wk/att_wv (K x d), att_rk/att_rv ((2k+1) x d) relative-position
// tables, mlp_w1/b1/w2/b2, out_ws/out_we/out_bp.
class NacdModel final : public Cdm {
public:
    NacdModel(Matrix weighted_q, int n_students, const NacdOptions& opts, std::uint64_t seed);

    CdmKind kind() const override { return CdmKind::Nacd; }
    double predict(int student, int exercise, std::span<const int> history = {}) const override;
    std::vector<double> student_grad(int student, int exercise, int correct,
                                     std::span<const int> history = {}) const override;
    void update_incremental(int student, int exercise, int correct, int steps, double lr,
                            std::span<const int> history = {}) override;
    std::vector<double> train(const DenseLog& log, const TrainConfig& cfg) override;
    ad::Var loss_graph(ad::Tape& tape, std::span<const DenseRecord> records) const override;
    std::unique_ptr<Cdm> clone() const override;
    std::vector<double> snapshot_student(int student) const override;
    void restore_student(int student, std::span<const double> snapshot) override;
    ParamStore& params() override { return params_; }
    const ParamStore& params() const override { return params_; }
    int n_students() const override { return n_students_; }
    int n_exercises() const override { return weighted_q_.rows; }

    const NacdOptions& options() const { return opts_; }
    const Matrix& weighted_q() const { return weighted_q_; }

    // F^E for every position of a knowledge-vector sequence (full attention;
    // attention rows sum to 1)
    Matrix exercise_factor(const Matrix& knowledge_vectors) const;
    // F^S for one (student, exercise) pair
    Matrix student_factor(int student, int exercise) const;

    // per-position predictions over a whole record sequence with the
    // windowed causal mask (training view; position t sees <= window
    // predecessors). Used by evaluation and tested against predict().
    std::vector<double> predict_sequence(int student, std::span<const int> exercises) const;

private:
    struct SequenceGraph {
        ad::Var p;       // n x 1 predicted probabilities
        ad::Var a_row;   // gathered row of A for the student
    };
    // one tape node per parameter even when several students share a tape
    struct InputCache {
        std::map<std::string, ad::Var> vars;
        ad::Var get(ad::Tape& t, const ParamStore& store, const std::string& name);
    };
    // builds the prediction graph for one student over a sequence of
    // exercises; mask_causal selects the windowed training view
    SequenceGraph sequence_graph(ad::Tape& t, InputCache& cache, int student,
                                 std::span<const int> exercises, bool mask_causal,
                                 const Matrix* dropout_mask) const;

    std::vector<int> window_sequence(int exercise, std::span<const int> history) const;

    Matrix weighted_q_;
    int n_students_ = 0;
    NacdOptions opts_;
    ParamStore params_;
};

}  // namespace kgeir
