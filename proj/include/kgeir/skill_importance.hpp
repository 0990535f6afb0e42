#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgeir/ingest.hpp"
#include "kgeir/knowledge_graph.hpp"
#include "kgeir/matrix.hpp"

namespace kgeir {

struct SkillFeatures {
    double f1_level = 0.0;       // mean level over containing paths, 0 when none
    double f2_frequency = 0.0;   // containing paths / total paths
    double f3_connection = 0.0;  // distinct co-occurring KCs / K
    double f4_similarity = 0.0;  // mean cosine to the other skills
    double f5_difficulty = 0.0;  // mean cognitive difficulty over students
};

struct PreferenceWeights {
    double w[5] = {0, 0, 0, 0, 0};

    static PreferenceWeights novelty() { return {{0.5, 0.0, 0.0, 0.0, 0.5}}; }
    static PreferenceWeights popularity() { return {{0.0, 0.6, 0.1, 0.3, 0.0}}; }
};

double f1_level(const PathSet& paths, int node);
double f2_frequency(const PathSet& paths, int node);  // requires >= 1 path overall
double f3_connection(const PathSet& paths, int node, int total_kcs);
double f4_similarity(const Matrix& s_star, int skill);

// Cognitive difficulty of `skill` for `student` looking at attempts strictly
// before `t`: floor(wrong_ratio * 4) after five or more attempts, else 5.
int pi_difficulty(const DenseLog& log, const QMatrix& q, int student, int skill, std::int64_t t);
double f5_difficulty(const DenseLog& log, const QMatrix& q, int skill,
                     const std::vector<std::int64_t>& checkpoints);

// weighted mix of min-max-normalized features
double combine(const SkillFeatures& normalized, const PreferenceWeights& w);
double skill_importance(double w_nov, double w_pop);  // tanh(w_nov + w_pop)

struct SkillImportanceRow {
    std::string skill_id;
    SkillFeatures raw;
    SkillFeatures normalized;
    double w_nov = 0.0;
    double w_pop = 0.0;
    double w_k = 0.0;
};

struct SkillImportanceTable {
    std::vector<SkillImportanceRow> rows;  // aligned with QMatrix::skill_ids

    int n_skills() const { return static_cast<int>(rows.size()); }
    double weight_of(int skill) const { return rows[skill].w_k; }
    std::vector<double> weights() const;

    // all-ones weights (the knowledge-importance ablation / no-graph case)
    static SkillImportanceTable uniform(const QMatrix& q);
};

// Full pipeline over the Q-matrix skills: path features against the whole
// path universe (f3's denominator is the graph's KC count), similarity from
// s*, difficulty from the log at each student's final state.
SkillImportanceTable build_skill_importance_table(const KnowledgeGraph& kg, const PathSet& paths,
                                                  const QMatrix& q, const DenseLog& log,
                                                  const Matrix& s_star);

void save_skill_importance(const SkillImportanceTable& table, const std::string& path);
SkillImportanceTable load_skill_importance(const QMatrix& q, const std::string& path);

// min-max normalization across skills; a degenerate feature maps to 0.5
std::vector<SkillFeatures> normalize_features(const std::vector<SkillFeatures>& raw);

}  // namespace kgeir
