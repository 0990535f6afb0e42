#include "kgeir/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "kgeir/csv.hpp"
#include "kgeir/error.hpp"
#include "kgeir/informativeness.hpp"
#include "kgeir/metrics.hpp"

namespace kgeir {

const char* to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Random: return "random";
        case StrategyKind::Expectimax: return "expectimax";
        case StrategyKind::KgEir: return "kg-eir";
    }
    return "?";
}

bool strategy_kind_from_string(const std::string& s, StrategyKind& out) {
    if (s == "random") out = StrategyKind::Random;
    else if (s == "expectimax") out = StrategyKind::Expectimax;
    else if (s == "kg-eir") out = StrategyKind::KgEir;
    else return false;
    return true;
}

int strategy_random(std::span<const int> q_u, Rng& rng) {
    require(!q_u.empty(), "strategy_random: empty question pool");
    return q_u[rng.uniform_int(static_cast<int>(q_u.size()))];
}

int strategy_expectimax(Cdm& model, int student, std::span<const int> q_u,
                        std::span<const int> history, int update_steps, double update_lr) {
    require(!q_u.empty(), "strategy_expectimax: empty question pool");
    const std::vector<double> snapshot = model.snapshot_student(student);
    std::vector<int> history_after(history.begin(), history.end());
    history_after.push_back(-1);

    int best = -1;
    double best_util = 0.0;
    for (int q : q_u) {
        const double p = model.predict(student, q, history);
        history_after.back() = q;
        double util = 0.0;
        for (int outcome : {1, 0}) {
            model.update_incremental(student, q, outcome, update_steps, update_lr, history);
            double residual = 0.0;
            for (int other : q_u) {
                if (other == q) continue;
                const double po = model.predict(student, other, history_after);
                residual += po * (1.0 - po);
            }
            util += (outcome == 1 ? p : 1.0 - p) * residual;
            model.restore_student(student, snapshot);
        }
        if (best < 0 || util < best_util) {
            best = q;
            best_util = util;
        }
    }
    return best;
}

std::optional<double> inf_metric(const Cdm& model, int student, std::span<const ReplayItem> remaining,
                                 std::span<const int> history) {
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(remaining.size());
    labels.reserve(remaining.size());
    for (const auto& item : remaining) {
        scores.push_back(model.predict(student, item.exercise, history));
        labels.push_back(item.correct);
    }
    return auc(scores, labels);
}

MetricsTrace run_session(Cdm& model, int student, const std::string& student_id,
                         const StrategySpec& strategy, const SimulationConfig& cfg,
                         const SessionContext& ctx, std::vector<AuditRow>* audit) {
    require(ctx.q != nullptr && ctx.skill_weights != nullptr, "run_session: missing context");
    require(cfg.steps >= 1, "run_session: steps must be >= 1");
    require(static_cast<int>(ctx.pool.size()) >= cfg.steps,
            "run_session: insufficient heldout records for student " + student_id);

    // Q_U sorted by exercise id; labels live alongside
    std::vector<ReplayItem> pool = ctx.pool;
    std::sort(pool.begin(), pool.end(),
              [](const ReplayItem& a, const ReplayItem& b) { return a.exercise < b.exercise; });

    std::vector<int> q_u;
    q_u.reserve(pool.size());
    for (const auto& item : pool) q_u.push_back(item.exercise);
    auto label_of = [&](int exercise) {
        const auto it = std::lower_bound(pool.begin(), pool.end(), exercise,
                                         [](const ReplayItem& a, int e) { return a.exercise < e; });
        require(it != pool.end() && it->exercise == exercise, "run_session: unknown pool exercise");
        return it->correct;
    };

    const std::vector<double> uniform(ctx.q->n_skills(), 1.0);
    const std::vector<double>& weights =
        strategy.ablation.disable_knowledge_importance ? uniform : *ctx.skill_weights;
    CoverageState coverage = CoverageState::make(*ctx.q, weights, cfg.ecov_variant);

    std::vector<int> history = ctx.observed_history;
    std::vector<int> tested;
    Rng rng = Rng(cfg.seed).fork(0x517cc1b727220a95ULL + static_cast<std::uint64_t>(student));

    MetricsTrace trace;
    trace.student = student;
    trace.student_id = student_id;
    for (int step = 1; step <= cfg.steps; ++step) {
        int pick = -1;
        if (strategy.kind == StrategyKind::Random) {
            pick = strategy_random(q_u, rng);
        } else if (strategy.kind == StrategyKind::Expectimax) {
            pick = strategy_expectimax(model, student, q_u, history, cfg.update_steps, cfg.update_lr);
        } else {
            std::vector<int> candidates;
            if (strategy.ablation.disable_informativeness &&
                !strategy.ablation.disable_representativeness) {
                candidates = q_u;
            } else {
                std::vector<InformativenessScore> scores;
                scores.reserve(q_u.size());
                for (int q : q_u) scores.push_back(expected_model_change(model, student, q, history));
                if (strategy.ablation.disable_representativeness) {
                    // max-EMC directly (ties go to the lower id inside select)
                    candidates = select_candidates(std::move(scores), 1);
                    pick = candidates[0];
                } else if (strategy.ablation.disable_informativeness) {
                    candidates = q_u;
                } else {
                    candidates = select_candidates(std::move(scores), cfg.top_k);
                }
            }
            if (pick < 0) {
                ReprContext rctx;
                rctx.state = &coverage;
                rctx.q = ctx.q;
                rctx.alphas = cfg.alphas;
                rctx.pn = [&](int e) { return model.predict(student, e, history); };
                rctx.diss = [&](int e) {
                    return ctx.e_star ? mean_dissimilarity(*ctx.e_star, e, tested) : 0.0;
                };
                std::vector<ReprScore> step_audit;
                pick = select_representative(candidates, rctx, audit ? &step_audit : nullptr);
                if (audit) {
                    for (size_t i = 0; i < candidates.size(); ++i)
                        audit->push_back({step, candidates[i], step_audit[i].coverage_term,
                                          step_audit[i].pn_term, step_audit[i].diss_term,
                                          step_audit[i].total, candidates[i] == pick});
                }
            }
        }

        const int label = label_of(pick);
        model.update_incremental(student, pick, label, cfg.update_steps, cfg.update_lr, history);
        history.push_back(pick);
        tested.push_back(pick);
        coverage.add(pick, *ctx.q);
        q_u.erase(std::find(q_u.begin(), q_u.end(), pick));
        pool.erase(std::lower_bound(pool.begin(), pool.end(), pick,
                                    [](const ReplayItem& a, int e) { return a.exercise < e; }));

        StepMetrics m;
        m.step = step;
        m.selected = pick;
        m.inf = inf_metric(model, student, pool, history);
        m.cov = cov_metric(tested, *ctx.q);
        m.tested_size = static_cast<int>(tested.size());
        trace.steps.push_back(m);
    }
    return trace;
}

std::optional<double> mean_inf_at(const std::vector<MetricsTrace>& traces, int step) {
    double total = 0.0;
    int count = 0;
    for (const auto& t : traces) {
        const auto& m = t.steps.at(step - 1);
        if (m.inf) {
            total += *m.inf;
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return total / count;
}

double mean_cov_at(const std::vector<MetricsTrace>& traces, int step) {
    require(!traces.empty(), "mean_cov_at: no traces");
    double total = 0.0;
    for (const auto& t : traces) total += t.steps.at(step - 1).cov;
    return total / static_cast<double>(traces.size());
}

void aggregate_and_export(const std::vector<StrategyRun>& runs, const QMatrix& q,
                          const std::string& out_dir, const ExportInfo& info) {
    require(!runs.empty(), "aggregate_and_export: no runs");
    std::filesystem::create_directories(out_dir);
    require(std::filesystem::is_directory(out_dir), "cannot create output directory: " + out_dir);

    {
        std::ofstream out(out_dir + "/metrics.csv");
        require(out.good(), "cannot write " + out_dir + "/metrics.csv");
        out << "strategy,step,mean_inf,n_inf,mean_cov,n_students\n";
        for (const auto& run : runs) {
            for (int step = 1; step <= info.steps; ++step) {
                int n_inf = 0;
                double inf_total = 0.0;
                for (const auto& t : run.traces) {
                    const auto& m = t.steps.at(step - 1);
                    if (m.inf) {
                        inf_total += *m.inf;
                        ++n_inf;
                    }
                }
                out << run.spec.name << ',' << step << ',';
                if (n_inf > 0) out << format_double(inf_total / n_inf);
                out << ',' << n_inf << ',' << format_double(mean_cov_at(run.traces, step)) << ','
                    << run.traces.size() << '\n';
            }
        }
    }

    {
        // strategy x testing phase grid of mean AUC (phases 0..steps-1)
        std::ofstream out(out_dir + "/heatmap.csv");
        require(out.good(), "cannot write " + out_dir + "/heatmap.csv");
        out << "strategy";
        for (int step = 0; step < info.steps; ++step) out << ",step_" << step;
        out << '\n';
        for (const auto& run : runs) {
            out << run.spec.name;
            for (int step = 1; step <= info.steps; ++step) {
                const auto mean = mean_inf_at(run.traces, step);
                out << ',';
                if (mean) out << format_double(*mean);
            }
            out << '\n';
        }
    }

    {
        std::ofstream out(out_dir + "/traces.csv");
        require(out.good(), "cannot write " + out_dir + "/traces.csv");
        out << "strategy,student_id,step,selected_exercise_id,inf,cov\n";
        for (const auto& run : runs)
            for (const auto& t : run.traces)
                for (const auto& m : t.steps) {
                    out << run.spec.name << ',' << csv_escape(t.student_id) << ',' << m.step << ','
                        << csv_escape(q.exercise_ids.at(m.selected)) << ',';
                    if (m.inf) out << format_double(*m.inf);
                    out << ',' << format_double(m.cov) << '\n';
                }
    }

    for (const auto& run : runs) {
        if (run.audit.empty()) continue;
        std::ofstream out(out_dir + "/audit_" + run.spec.name + ".csv");
        require(out.good(), "cannot write audit file for " + run.spec.name);
        out << "step,candidate_id,coverage_term,pn_term,diss_term,total,selected\n";
        for (const auto& row : run.audit)
            out << row.step << ',' << csv_escape(q.exercise_ids.at(row.candidate)) << ','
                << format_double(row.coverage_term) << ',' << format_double(row.pn_term) << ','
                << format_double(row.diss_term) << ',' << format_double(row.total) << ','
                << (row.selected ? 1 : 0) << '\n';
    }

    {
        nlohmann::json manifest;
        manifest["seed"] = info.seed;
        manifest["dataset_hash"] = info.dataset_hash;
        manifest["steps"] = info.steps;
        manifest["config"] = info.config_canonical;
        nlohmann::json strategies = nlohmann::json::array();
        for (const auto& run : runs) strategies.push_back(run.spec.name);
        manifest["strategies"] = strategies;
        std::ofstream out(out_dir + "/manifest.json");
        require(out.good(), "cannot write " + out_dir + "/manifest.json");
        out << manifest.dump(2) << '\n';
    }
}

}  // namespace kgeir
