#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgeir/cdm.hpp"
#include "kgeir/ingest.hpp"
#include "kgeir/matrix.hpp"
#include "kgeir/representativeness.hpp"
#include "kgeir/rng.hpp"

namespace kgeir {

enum class StrategyKind { Random, Expectimax, KgEir };
const char* to_string(StrategyKind kind);
bool strategy_kind_from_string(const std::string& s, StrategyKind& out);

struct AblationFlags {
    bool disable_informativeness = false;   // Q_C = Q_U
    bool disable_representativeness = false;  // pick max-EMC directly
    bool disable_knowledge_importance = false;  // W_K = 1 in the coverage term
};

struct StrategySpec {
    StrategyKind kind = StrategyKind::KgEir;
    AblationFlags ablation;  // applies to KgEir only
    std::string name;        // label used in exports
};

struct SimulationConfig {
    int steps = 20;
    int top_k = 5;
    ReprWeights alphas;
    std::uint64_t seed = 0;
    CdmKind cdm = CdmKind::Nacd;
    int update_steps = 5;     // incremental gradient steps per answered question
    double update_lr = 0.1;
    EcovVariant ecov_variant = EcovVariant::Saturating;
};

struct StepMetrics {
    int step = 0;  // 1-based
    int selected = -1;
    std::optional<double> inf;  // absent when the remaining heldout is single-class
    double cov = 0.0;
    int tested_size = 0;
};

struct MetricsTrace {
    int student = -1;
    std::string student_id;
    std::vector<StepMetrics> steps;
};

struct AuditRow {
    int step = 0;
    int candidate = -1;
    double coverage_term = 0.0, pn_term = 0.0, diss_term = 0.0, total = 0.0;
    bool selected = false;
};

// One labelled replay item: a heldout exercise and the logged answer.
struct ReplayItem {
    int exercise = -1;
    int correct = 0;
};

// Everything a session reads; the model is owned by the caller and is the
// only thing a session mutates (its student-owned parameters).
struct SessionContext {
    const QMatrix* q = nullptr;
    const std::vector<double>* skill_weights = nullptr;  // W_K per skill
    const Matrix* e_star = nullptr;                      // may be null: diss term 0
    std::vector<int> observed_history;                   // chronological exercises
    std::vector<ReplayItem> pool;                        // distinct heldout exercises
};

int strategy_random(std::span<const int> q_u, Rng& rng);

// Depth-1 outcome-weighted lookahead: simulate both answers for each
// candidate, measure the expected residual uncertainty over the rest of the
// pool, pick the minimizer. The model is restored bitwise afterwards.
int strategy_expectimax(Cdm& model, int student, std::span<const int> q_u,
                        std::span<const int> history, int update_steps, double update_lr);

// AUC of current predictions on the not-yet-selected heldout items
std::optional<double> inf_metric(const Cdm& model, int student, std::span<const ReplayItem> remaining,
                                 std::span<const int> history);

MetricsTrace run_session(Cdm& model, int student, const std::string& student_id,
                         const StrategySpec& strategy, const SimulationConfig& cfg,
                         const SessionContext& ctx, std::vector<AuditRow>* audit = nullptr);

struct StrategyRun {
    StrategySpec spec;
    std::vector<MetricsTrace> traces;  // sorted by student id
    std::vector<AuditRow> audit;       // concatenated in student order
};

struct ExportInfo {
    std::string config_canonical;
    std::uint64_t seed = 0;
    std::uint64_t dataset_hash = 0;
    int steps = 0;
};

// writes metrics.csv, heatmap.csv, traces.csv, manifest.json and (when audit
// rows exist) audit_<strategy>.csv; byte-identical given identical inputs
void aggregate_and_export(const std::vector<StrategyRun>& runs, const QMatrix& q,
                          const std::string& out_dir, const ExportInfo& info);

// mean of defined per-student values at one step (1-based); empty when none
std::optional<double> mean_inf_at(const std::vector<MetricsTrace>& traces, int step);
double mean_cov_at(const std::vector<MetricsTrace>& traces, int step);

}  // namespace kgeir
