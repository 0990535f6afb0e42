#pragma once

#include <functional>
#include <span>
#include <vector>

#include "kgeir/cdm.hpp"
#include "kgeir/ingest.hpp"
#include "kgeir/matrix.hpp"

namespace kgeir {

enum class EcovVariant {
    Saturating,  // 2*sigmoid(cnt) - 1: zero at 0, strictly increasing, bounded by 1
    Literal,     // cnt*sigmoid(cnt): the unbounded printed form
};

double skc(std::span<const int> exercises, const QMatrix& q);
double ecov(int cnt, EcovVariant variant);

// Per-KC occurrence counts over the tested set plus the importance weights.
// ewkc() is the weighted average of ecov over all KCs.
struct CoverageState {
    std::vector<int> cnt;
    std::vector<double> weights;  // W_K per skill
    EcovVariant variant = EcovVariant::Saturating;

    static CoverageState make(const QMatrix& q, std::vector<double> weights,
                              EcovVariant variant = EcovVariant::Saturating);
    void add(int exercise, const QMatrix& q);  // counts change by the Q-row only
    double ewkc() const;
    // ewkc after hypothetically adding one exercise (state unchanged)
    double ewkc_with(int exercise, const QMatrix& q) const;
};

double ewkc(const CoverageState& state);

// P_n(i, j): predicted correctness for exercises the student answered in the
// log, 0 otherwise; conditioned on the student's full logged history.
Matrix response_matrix(const Cdm& model, const DenseLog& log);

// 1 - cosine similarity per exercise pair; symmetric, zero diagonal
Matrix dissimilarity(const Matrix& e_star);
// mean dissimilarity of a candidate to the tested set; 1 when it is empty
double mean_dissimilarity(const Matrix& e_star, int candidate, std::span<const int> tested);

struct ReprWeights {
    double alpha1 = 0.7;
    double alpha2 = 0.15;
    double alpha3 = 0.15;
};

// Everything one selection step needs; pn(q) and diss(q) are candidate-wise
// accessors so sessions can use lazily computed values instead of full
// matrices.
struct ReprContext {
    const CoverageState* state = nullptr;
    const QMatrix* q = nullptr;
    std::function<double(int)> pn;
    std::function<double(int)> diss;
    ReprWeights alphas;
};

struct ReprScore {
    double coverage_term = 0.0;
    double pn_term = 0.0;
    double diss_term = 0.0;
    double total = 0.0;
};

ReprScore representativeness_score(int candidate, const ReprContext& ctx);
// argmax of the score over the candidate list; ties go to the lower id
int select_representative(std::span<const int> candidates, const ReprContext& ctx,
                          std::vector<ReprScore>* audit = nullptr);

}  // namespace kgeir
