#pragma once

#include <span>
#include <string>
#include <vector>

#include "kgeir/cdm.hpp"

namespace kgeir {

struct InformativenessScore {
    int exercise = -1;
    double emc = 0.0;  // expectation of a gradient norm, always >= 0
};

// Expected model change for one untested question: the two-outcome
// expectation p * |g(1)| + (1-p) * |g(0)| where g(y) is the gradient of the
// single-record cross-entropy w.r.t. the student-owned parameters. The model
// is scored, never mutated.
InformativenessScore expected_model_change(const Cdm& model, int student, int exercise,
                                           std::span<const int> history = {});

// Top-K exercises by EMC, ties broken by ascending exercise id; returns all
// of them when K exceeds the pool.
std::vector<int> select_candidates(std::vector<InformativenessScore> scores, int k);

// debugging dump: exercise_id,emc
void save_scores(const std::vector<InformativenessScore>& scores, const QMatrix& q,
                 const std::string& path);

}  // namespace kgeir
