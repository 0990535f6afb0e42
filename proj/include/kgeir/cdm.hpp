#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kgeir/autodiff.hpp"
#include "kgeir/ingest.hpp"
#include "kgeir/matrix.hpp"
#include "kgeir/optim.hpp"

namespace kgeir {

enum class CdmKind { Irt, Mirt, Nacd };
const char* to_string(CdmKind kind);
bool cdm_kind_from_string(const std::string& s, CdmKind& out);

struct TrainConfig {
    double learning_rate = 0.002;
    int epochs = 100;
    double dropout = 0.2;
    int batch_size = 512;  // records for IRT/MIRT, students for NACD
    std::uint64_t seed = 0;
    std::string optimizer = "adam";  // "adam" or "sgd"
};

// Cognitive diagnosis model interface. Predictions always lie in (0, 1).
// `history` is the student's answered exercises in chronological order
// (dense ids); IRT/MIRT ignore it, NACD attends over its tail.
class Cdm {
public:
    virtual ~Cdm() = default;

    virtual CdmKind kind() const = 0;
    virtual double predict(int student, int exercise, std::span<const int> history = {}) const = 0;

    // gradient of the single-record cross-entropy loss w.r.t. the
    // student-owned parameter block (theta / theta-vector / A-row);
    // the model is not mutated
    virtual std::vector<double> student_grad(int student, int exercise, int correct,
                                             std::span<const int> history = {}) const = 0;

    // `steps` gradient-descent steps on one record's loss, touching only the
    // student-owned parameters; exercise parameters stay frozen
    virtual void update_incremental(int student, int exercise, int correct, int steps, double lr,
                                    std::span<const int> history = {}) = 0;

    // gradient descent on mean binary cross-entropy; returns per-epoch loss.
    // Deterministic given cfg.seed; throws on non-finite loss with the epoch.
    virtual std::vector<double> train(const DenseLog& log, const TrainConfig& cfg) = 0;

    // canonical loss graph over a record batch (the reverse-mode route that
    // training takes; also the target of the finite-difference checks)
    virtual ad::Var loss_graph(ad::Tape& tape, std::span<const DenseRecord> records) const = 0;

    virtual std::unique_ptr<Cdm> clone() const = 0;

    virtual std::vector<double> snapshot_student(int student) const = 0;
    virtual void restore_student(int student, std::span<const double> snapshot) = 0;

    virtual ParamStore& params() = 0;
    virtual const ParamStore& params() const = 0;
    virtual int n_students() const = 0;
    virtual int n_exercises() const = 0;
};

std::unique_ptr<Cdm> make_irt(int n_students, int n_exercises, std::uint64_t seed);
std::unique_ptr<Cdm> make_mirt(int n_students, int n_exercises, int dim, std::uint64_t seed);

struct NacdOptions {
    int attention_dim = 200;
    int hidden_dim = 64;
    int student_out_dim = 32;
    int clip_k = 4;
    int history_window = 50;  // attention looks at most this far back
    bool literal_fe = false;  // drop the a^V edge term from F^E
    bool disable_exercise_factor = false;
    bool disable_student_factor = false;
};

// weighted Q-matrix row for one exercise: W_K at its skills, zero elsewhere
Matrix make_weighted_q(const QMatrix& q, const std::vector<double>& skill_weights);
std::vector<double> knowledge_vector(const Matrix& weighted_q, int exercise);

std::unique_ptr<Cdm> make_nacd(Matrix weighted_q, int n_students, const NacdOptions& opts,
                               std::uint64_t seed);

// NACD internals exposed for direct testing
class NacdModel;
const NacdModel& as_nacd(const Cdm& model);
NacdModel& as_nacd(Cdm& model);

}  // namespace kgeir
