#include "kgeir/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "kgeir/csv.hpp"
#include "kgeir/error.hpp"

namespace kgeir {

TrainConfig train_config_from(const Config& cfg) {
    TrainConfig t;
    t.learning_rate = cfg.get_double("learning_rate");
    t.epochs = static_cast<int>(cfg.get_int("epochs"));
    t.dropout = cfg.get_double("dropout");
    t.batch_size = static_cast<int>(cfg.get_int("batch_size"));
    t.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    t.optimizer = cfg.get_string("optimizer", "adam");
    return t;
}

NacdOptions nacd_options_from(const Config& cfg, const QMatrix& q) {
    (void)q;
    NacdOptions o;
    o.attention_dim = static_cast<int>(cfg.get_int("attention_embed_size"));
    o.hidden_dim = static_cast<int>(cfg.get_int("nacd_hidden"));
    o.student_out_dim = static_cast<int>(cfg.get_int("nacd_student_dim"));
    o.clip_k = static_cast<int>(cfg.get_int("clip_k"));
    o.history_window = static_cast<int>(cfg.get_int("history_window"));
    o.literal_fe = cfg.get_int("nacd_literal_fe") != 0;
    return o;
}

std::unique_ptr<Cdm> make_model_from_config(const Config& cfg, CdmKind kind, int n_students,
                                            const QMatrix& q, const std::vector<double>& weights) {
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    switch (kind) {
        case CdmKind::Irt:
            return make_irt(n_students, q.n_exercises(), seed);
        case CdmKind::Mirt: {
            int dim = static_cast<int>(cfg.get_int("mirt_dim"));
            if (dim <= 0) dim = q.n_skills();
            return make_mirt(n_students, q.n_exercises(), dim, seed);
        }
        case CdmKind::Nacd:
            return make_nacd(make_weighted_q(q, weights), n_students, nacd_options_from(cfg, q), seed);
    }
    fail("unknown model kind");
}

std::uint64_t dataset_hash(const InteractionLog& log, const QMatrix& q) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& r : log.records) {
        h = fnv1a(r.student_id, h);
        h = fnv1a(r.exercise_id, h);
        h = fnv1a(std::to_string(r.correct), h);
        h = fnv1a(std::to_string(r.timestamp), h);
    }
    for (const auto& id : q.exercise_ids) h = fnv1a(id, h);
    for (const auto& id : q.skill_ids) h = fnv1a(id, h);
    h = fnv1a(std::string(q.entries.begin(), q.entries.end()), h);
    return h;
}

int observed_count(int n, double fraction) {
    return static_cast<int>(std::ceil((1.0 - fraction) * n));
}

DenseLog observed_dense(const DenseLog& full, double fraction) {
    DenseLog out;
    out.n_students = full.n_students;
    out.n_exercises = full.n_exercises;
    out.student_spans.resize(full.n_students);
    for (int s = 0; s < full.n_students; ++s) {
        const auto [b, e] = full.student_spans[s];
        const int keep = e > b ? observed_count(e - b, fraction) : 0;
        out.student_spans[s] = {static_cast<int>(out.records.size()),
                                static_cast<int>(out.records.size()) + keep};
        for (int i = b; i < b + keep; ++i) out.records.push_back(full.records[i]);
    }
    return out;
}

WeightsArtifacts compute_weights(const DenseLog& log, const QMatrix& q, const KnowledgeGraph& graph,
                                 const Config& cfg) {
    WeightsArtifacts art;
    art.relations = build_relation_matrices(log, q);
    EmbeddingTrainConfig ecfg;
    ecfg.dim = static_cast<int>(cfg.get_int("attention_embed_size"));
    ecfg.gcn_layers = static_cast<int>(cfg.get_int("gcn_layers"));
    ecfg.delta_a = cfg.get_double("delta_a");
    ecfg.epochs = static_cast<int>(cfg.get_int("embed_epochs"));
    ecfg.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    art.embeddings = train_embeddings(log, q, art.relations, ecfg);
    art.paths = enumerate_all_paths(graph, parse_constraint(cfg.get_string("need", "all")));
    art.table = build_skill_importance_table(graph, art.paths, q, log, art.embeddings.s_star);
    return art;
}

std::vector<StrategySpec> ablation_strategies() {
    std::vector<StrategySpec> specs;
    specs.push_back({StrategyKind::KgEir, {}, "kg-eir"});
    specs.push_back({StrategyKind::KgEir, {true, false, false}, "kg-eir-no-inf"});
    specs.push_back({StrategyKind::KgEir, {false, true, false}, "kg-eir-no-repr"});
    specs.push_back({StrategyKind::KgEir, {false, false, true}, "kg-eir-no-ki"});
    return specs;
}

PipelineResult run_pipeline(const InteractionLog& log, const QMatrix& q,
                            const KnowledgeGraph* graph, const Config& cfg,
                            const std::vector<StrategySpec>& strategies, bool collect_audit) {
    require(!strategies.empty(), "pipeline: no strategies");
    validate_log_against_q(log, q);
    const DenseLog full = to_dense(log, q);
    const double fraction = cfg.get_double("holdout_fraction");
    require(fraction > 0.0 && fraction < 1.0, "pipeline: holdout_fraction must lie in (0, 1)");
    const DenseLog observed = observed_dense(full, fraction);

    // embeddings always come from the observed portion; the weights table
    // needs a graph, otherwise every skill weighs 1
    SkillImportanceTable table;
    EmbeddingSet embeddings;
    if (graph) {
        WeightsArtifacts art = compute_weights(observed, q, *graph, cfg);
        table = std::move(art.table);
        embeddings = std::move(art.embeddings);
    } else {
        table = SkillImportanceTable::uniform(q);
        RelationMatrices rel = build_relation_matrices(observed, q);
        EmbeddingTrainConfig ecfg;
        ecfg.dim = static_cast<int>(cfg.get_int("attention_embed_size"));
        ecfg.gcn_layers = static_cast<int>(cfg.get_int("gcn_layers"));
        ecfg.delta_a = cfg.get_double("delta_a");
        ecfg.epochs = static_cast<int>(cfg.get_int("embed_epochs"));
        ecfg.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
        embeddings = train_embeddings(observed, q, rel, ecfg);
    }
    const std::vector<double> weights = table.weights();

    CdmKind kind;
    require(cdm_kind_from_string(cfg.get_string("cdm", "nacd"), kind),
            "pipeline: unknown cdm kind " + cfg.get_string("cdm"));
    std::unique_ptr<Cdm> model = make_model_from_config(cfg, kind, full.n_students, q, weights);

    PipelineResult result;
    result.training_loss = model->train(observed, train_config_from(cfg));

    SimulationConfig sim;
    sim.steps = static_cast<int>(cfg.get_int("steps"));
    sim.top_k = static_cast<int>(cfg.get_int("top_k"));
    sim.alphas = {cfg.get_double("alpha1"), cfg.get_double("alpha2"), cfg.get_double("alpha3")};
    sim.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    sim.cdm = kind;
    sim.update_steps = static_cast<int>(cfg.get_int("update_steps"));
    sim.update_lr = cfg.get_double("update_lr");
    sim.ecov_variant = cfg.get_string("ecov", "saturating") == "literal" ? EcovVariant::Literal
                                                                         : EcovVariant::Saturating;

    // session contexts for every eligible student (enough distinct heldout
    // exercises to run all the steps)
    struct StudentSession {
        int student;
        SessionContext ctx;
    };
    std::vector<StudentSession> sessions;
    for (int s = 0; s < full.n_students; ++s) {
        const auto [b, e] = full.student_spans[s];
        const int n = e - b;
        if (n < 2) continue;
        const int obs = observed_count(n, fraction);
        if (obs >= n) continue;
        SessionContext ctx;
        ctx.q = &q;
        for (int i = b; i < b + obs; ++i) ctx.observed_history.push_back(full.records[i].exercise);
        std::set<int> seen;
        for (int i = b + obs; i < e; ++i) {
            const auto& r = full.records[i];
            if (seen.insert(r.exercise).second) ctx.pool.push_back({r.exercise, r.correct});
        }
        if (static_cast<int>(ctx.pool.size()) < sim.steps) continue;
        sessions.push_back({s, std::move(ctx)});
    }
    result.eligible_students = static_cast<int>(sessions.size());
    require(!sessions.empty(), "pipeline: no student has enough heldout records for " +
                                   std::to_string(sim.steps) + " steps");

    const std::vector<double>* weights_ptr = &weights;
    for (const auto& spec : strategies) {
        StrategyRun run;
        run.spec = spec;
        for (auto& ss : sessions) {
            ss.ctx.skill_weights = weights_ptr;
            ss.ctx.e_star = &embeddings.e_star;
            std::unique_ptr<Cdm> session_model = model->clone();
            std::vector<AuditRow> audit;
            MetricsTrace trace = run_session(*session_model, ss.student, log.student_ids[ss.student],
                                             spec, sim, ss.ctx, collect_audit ? &audit : nullptr);
            run.traces.push_back(std::move(trace));
            for (auto& row : audit) run.audit.push_back(row);
        }
        result.runs.push_back(std::move(run));
    }

    result.info.config_canonical = cfg.canonical();
    result.info.seed = sim.seed;
    result.info.dataset_hash = dataset_hash(log, q);
    result.info.steps = sim.steps;
    result.table = std::move(table);
    return result;
}

PipelineResult run_simulate(const InteractionLog& log, const QMatrix& q,
                            const KnowledgeGraph* graph, const Config& cfg,
                            const std::vector<StrategySpec>& strategies, const std::string& out_dir,
                            bool collect_audit) {
    PipelineResult result = run_pipeline(log, q, graph, cfg, strategies, collect_audit);
    aggregate_and_export(result.runs, q, out_dir, result.info);
    return result;
}

}  // namespace kgeir
