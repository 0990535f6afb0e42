#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kgeir/cdm.hpp"
#include "kgeir/config.hpp"
#include "kgeir/embeddings.hpp"
#include "kgeir/harness.hpp"
#include "kgeir/ingest.hpp"
#include "kgeir/knowledge_graph.hpp"
#include "kgeir/skill_importance.hpp"

namespace kgeir {

TrainConfig train_config_from(const Config& cfg);
NacdOptions nacd_options_from(const Config& cfg, const QMatrix& q);
std::unique_ptr<Cdm> make_model_from_config(const Config& cfg, CdmKind kind, int n_students,
                                            const QMatrix& q, const std::vector<double>& weights);

// content hash over the canonical serialization of log + Q-matrix
std::uint64_t dataset_hash(const InteractionLog& log, const QMatrix& q);

// number of observed (training) records for an n-record student
int observed_count(int n, double fraction);
// per-student observed prefix of the dense log (student indexing preserved)
DenseLog observed_dense(const DenseLog& full, double fraction);

struct WeightsArtifacts {
    RelationMatrices relations;
    EmbeddingSet embeddings;
    PathSet paths;
    SkillImportanceTable table;
};

// embeddings + paths + skill importance from a log, Q-matrix and graph;
// trained on the given (already split, if applicable) log
WeightsArtifacts compute_weights(const DenseLog& log, const QMatrix& q, const KnowledgeGraph& graph,
                                 const Config& cfg);

struct PipelineResult {
    std::vector<StrategyRun> runs;
    SkillImportanceTable table;
    std::vector<double> training_loss;
    ExportInfo info;
    int eligible_students = 0;
};

// Full replay comparison: split every student chronologically, fit
// embeddings/weights/model on the observed portion, replay each strategy
// over the heldout pools, and aggregate. Deterministic for a fixed config.
PipelineResult run_pipeline(const InteractionLog& log, const QMatrix& q,
                            const KnowledgeGraph* graph, const Config& cfg,
                            const std::vector<StrategySpec>& strategies, bool collect_audit = false);

// run_pipeline + aggregate_and_export into out_dir
PipelineResult run_simulate(const InteractionLog& log, const QMatrix& q,
                            const KnowledgeGraph* graph, const Config& cfg,
                            const std::vector<StrategySpec>& strategies, const std::string& out_dir,
                            bool collect_audit = false);

std::vector<StrategySpec> ablation_strategies();  // full + the three single-component ablations

}  // namespace kgeir
