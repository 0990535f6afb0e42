// Acceptance suite: one pass/fail line per criterion. Run with no arguments
// for all criteria, or pass criterion numbers to run a subset. Criterion 8
// needs the real datasets and is skipped unless the KGEIR_* environment
// variables point to them.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "kgeir/autodiff.hpp"
#include "kgeir/harness.hpp"
#include "kgeir/metrics.hpp"
#include "kgeir/nacd.hpp"
#include "kgeir/pipeline.hpp"
#include "kgeir/representativeness.hpp"
#include "kgeir/skill_importance.hpp"
#include "kgeir/synthetic.hpp"
#include "support/coverage_oracle.hpp"
#include "support/gradcheck.hpp"
#include "support/path_oracle.hpp"

using namespace kgeir;
namespace kt = kgeir::testing;

namespace {

struct Outcome {
    bool ok = false;
    bool skipped = false;
    std::string details;
};

double elapsed_s(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

// exact binomial tail P(X >= wins) for X ~ Bin(n, 1/2)
double sign_test_p(int n, int wins) {
    double total = 0.0;
    for (int k = wins; k <= n; ++k) {
        double c = 1.0;
        for (int i = 0; i < k; ++i) c = c * (n - i) / (i + 1);
        total += c;
    }
    return total / std::pow(2.0, n);
}

int async_workers(int jobs) {
    const unsigned hw = std::thread::hardware_concurrency();
    return std::max(1, std::min<int>(jobs, hw ? static_cast<int>(hw) : 2));
}

// bounded-concurrency map over seed indices; per-seed work is independent
// and deterministic, so scheduling cannot change the results
template <typename Fn>
auto run_seeds(int n, Fn fn) {
    using R = decltype(fn(0));
    std::vector<R> results(n);
    const int workers = async_workers(n);
    std::vector<std::future<void>> futures;
    std::mutex mu;
    int next = 0;
    for (int w = 0; w < workers; ++w)
        futures.push_back(std::async(std::launch::async, [&]() {
            for (;;) {
                int mine;
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (next >= n) return;
                    mine = next++;
                }
                results[mine] = fn(mine);
            }
        }));
    for (auto& f : futures) f.get();
    return results;
}

// ---------------------------------------------------------------------------
// criterion 1: path extraction against brute force
Outcome criterion_path_oracle() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(0xC1);
    int total_paths = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const KnowledgeGraph kg = kt::random_typed_graph(12, 20, rng, true);
        const RelationConstraint phi = kt::random_constraint(rng);
        const int target = rng.uniform_int(kg.n_nodes());
        const auto expected = kt::brute_force_maximal_paths(kg, target, phi);
        const PathSet got = find_all_paths(kg, kg.nodes[target].id, phi);
        if (got.n_paths() != static_cast<int>(expected.size()))
            return {false, false,
                    "trial " + std::to_string(trial) + ": " + std::to_string(got.n_paths()) +
                        " paths vs oracle " + std::to_string(expected.size())};
        for (int i = 0; i < got.n_paths(); ++i)
            if (got.paths[i].nodes != expected[i])
                return {false, false, "trial " + std::to_string(trial) + ": path mismatch"};
        total_paths += got.n_paths();
    }
    const double secs = elapsed_s(start);
    if (secs >= 10.0) return {false, false, "runtime " + fmt("%.1f", secs) + "s exceeds 10s"};
    return {true, false,
            "100 random DAGs, " + std::to_string(total_paths) + " paths, exact match, " +
                fmt("%.2f", secs) + "s"};
}

// ---------------------------------------------------------------------------
// criterion 2: greedy coverage against exhaustive search
Outcome criterion_greedy_coverage() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(0xC2);
    const double bound = 1.0 - 1.0 / std::numbers::e;
    int distinct_instances = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n_skills = 2 + rng.uniform_int(5);  // <= 6
        const int n_pool = 2 + rng.uniform_int(7);    // <= 8
        const int budget = 1 + rng.uniform_int(3);    // <= 3
        std::vector<std::pair<std::string, std::string>> pairs;
        for (int e = 0; e < n_pool; ++e) {
            const int count = 1 + rng.uniform_int(2);
            std::set<int> skills;
            while (static_cast<int>(skills.size()) < count)
                skills.insert(rng.uniform_int(n_skills));
            char id[8];
            std::snprintf(id, sizeof(id), "e%02d", e);
            for (int k : skills) pairs.emplace_back(id, "k" + std::to_string(k));
        }
        const QMatrix q = build_q_matrix(pairs);
        std::vector<double> weights(q.n_skills());
        for (auto& w : weights) w = 1e-6 + (1.0 - 1e-6) * rng.uniform();  // (0, 1]
        std::vector<int> pool(q.n_exercises());
        for (int i = 0; i < q.n_exercises(); ++i) pool[i] = i;

        const auto greedy = kt::greedy_coverage(pool, budget, q, weights, EcovVariant::Saturating);
        const auto best =
            kt::exhaustive_best_coverage(pool, budget, q, weights, EcovVariant::Saturating);
        if (greedy.value < bound * best.best_value - 1e-12)
            return {false, false,
                    "trial " + std::to_string(trial) + ": greedy " + fmt("%.6f", greedy.value) +
                        " < (1-1/e) * " + fmt("%.6f", best.best_value)};
        if (greedy.all_gains_distinct) {
            ++distinct_instances;
            if (std::abs(greedy.value - best.best_value) > 1e-9)
                return {false, false,
                        "trial " + std::to_string(trial) +
                            ": tie-free instance not exactly optimal (greedy " +
                            fmt("%.9f", greedy.value) + " vs " + fmt("%.9f", best.best_value) +
                            ")"};
        }
    }
    const double secs = elapsed_s(start);
    if (secs >= 30.0) return {false, false, "runtime " + fmt("%.1f", secs) + "s exceeds 30s"};
    return {true, false,
            "50 instances within (1-1/e) of optimum; exact on all " +
                std::to_string(distinct_instances) + " tie-free instances, " + fmt("%.2f", secs) +
                "s"};
}

// ---------------------------------------------------------------------------
// criterion 3: reverse-mode gradients vs central finite differences
Outcome criterion_gradients() {
    const auto start = std::chrono::steady_clock::now();
    const QMatrix q = build_q_matrix(
        {{"e1", "k1"}, {"e2", "k1"}, {"e2", "k2"}, {"e3", "k2"}, {"e4", "k3"}, {"e5", "k3"}});
    const std::vector<DenseRecord> records{
        {0, 0, 1, 1}, {0, 1, 0, 2}, {0, 3, 1, 3}, {1, 2, 1, 1}, {1, 0, 0, 2}, {2, 4, 1, 1}};
    Rng rng(0xC3);

    double worst = 0.0;
    std::string worst_at;
    auto check = [&](Cdm& model, const char* name) {
        for (int point = 0; point < 20; ++point) {
            for (auto& [pname, param] : model.params().params)
                for (auto& v : param.a) v = rng.normal() * 0.6;
            ad::Tape t;
            const ad::Var loss = model.loss_graph(t, records);
            t.backward(loss);
            auto eval = [&]() {
                ad::Tape tt;
                return tt.value(model.loss_graph(tt, records))(0, 0);
            };
            const auto result = kt::gradcheck(model.params(), eval, t.named_grads(), 1e-5);
            if (result.max_rel_err > worst) {
                worst = result.max_rel_err;
                worst_at =
                    std::string(name) + " point " + std::to_string(point) + " " + result.worst;
            }
        }
    };

    auto irt = make_irt(3, 5, 1);
    check(*irt, "irt");
    auto mirt = make_mirt(3, 5, 3, 2);
    check(*mirt, "mirt");
    NacdOptions opts;
    opts.attention_dim = 4;
    opts.hidden_dim = 4;
    opts.student_out_dim = 3;
    opts.clip_k = 2;
    opts.history_window = 8;
    auto nacd = make_nacd(make_weighted_q(q, {0.9, 0.7, 0.5}), 3, opts, 3);
    check(*nacd, "nacd");

    const double secs = elapsed_s(start);
    if (worst >= 1e-4)
        return {false, false, "max relative error " + fmt("%.2e", worst) + " at " + worst_at};
    if (secs >= 60.0) return {false, false, "runtime " + fmt("%.1f", secs) + "s exceeds 60s"};
    return {true, false,
            "irt/mirt/nacd x 20 points, max relative error " + fmt("%.2e", worst) + ", " +
                fmt("%.2f", secs) + "s"};
}

// ---------------------------------------------------------------------------
// criterion 4: formula spot values
Outcome criterion_spot_values() {
    std::vector<std::string> failures;
    auto expect_near = [&](double got, double want, double tol, const char* what) {
        if (std::abs(got - want) > tol)
            failures.push_back(std::string(what) + " = " + fmt("%.8f", got));
    };
    auto expect_exact = [&](bool ok, const char* what) {
        if (!ok) failures.push_back(what);
    };

    expect_near(ecov(1, EcovVariant::Saturating), 0.462117, 1e-5, "ecov(saturating, 1)");
    expect_near(skill_importance(1.0, 0.0), 0.761594, 1e-5, "tanh(1)");
    expect_exact(ad::clip_index(3, 2) == 2, "clip(3,2)");
    expect_exact(ad::clip_index(-5, 2) == -2, "clip(-5,2)");
    expect_exact(ad::clip_index(1, 2) == 1, "clip(1,2)");
    const std::vector<double> s1{0.9, 0.8, 0.3, 0.2};
    const std::vector<int> l1{1, 1, 0, 0};
    expect_exact(auc(s1, l1).value() == 1.0, "auc perfect = 1.0 exactly");
    const std::vector<double> s2{0.9, 0.4, 0.4, 0.1};
    expect_exact(auc(s2, l1).value() == 0.875, "auc tie case = 0.875 exactly");

    if (!failures.empty()) {
        std::string msg;
        for (const auto& f : failures) msg += f + "; ";
        return {false, false, msg};
    }
    return {true, false, "ecov/tanh within 1e-5, clip and AUC hand cases exact"};
}

// ---------------------------------------------------------------------------
// shared synthetic-experiment configuration (criteria 5-7)
Config replay_config(std::uint64_t seed) {
    Config cfg;
    cfg.set("seed", std::to_string(seed));
    cfg.set("cdm", "mirt");
    cfg.set("steps", "20");
    cfg.set("top_k", "5");
    cfg.set("holdout_fraction", "0.7");
    cfg.set("update_steps", "5");
    cfg.set("update_lr", "0.5");
    cfg.set("epochs", "40");
    cfg.set("learning_rate", "0.02");
    cfg.set("batch_size", "1024");
    cfg.set("dropout", "0");
    cfg.set("attention_embed_size", "16");
    cfg.set("embed_epochs", "10");
    return cfg;
}

SyntheticSpec population_spec(std::uint64_t seed) {
    SyntheticSpec spec;
    spec.students = 200;
    spec.exercises = 100;
    spec.skills = 10;
    spec.slip = 0.1;
    spec.guess = 0.1;
    spec.seed = seed;
    return spec;
}

struct SeedSummary {
    std::vector<double> cov_kgeir, cov_random;               // per step
    double inf_kgeir = 0.0, inf_random = 0.0, inf_em = 0.0;  // final step
    bool inf_defined = true;
};

// criterion 5: strategy ordering on the synthetic population
Outcome criterion_strategy_ordering() {
    const auto start = std::chrono::steady_clock::now();
    const int n_seeds = 10;
    const int steps = 20;

    const auto summaries = run_seeds(n_seeds, [&](int i) {
        const SyntheticData data = generate_synthetic(population_spec(5000 + i));
        const Config cfg = replay_config(5000 + i);
        const std::vector<StrategySpec> strategies{{StrategyKind::Random, {}, "random"},
                                                   {StrategyKind::Expectimax, {}, "expectimax"},
                                                   {StrategyKind::KgEir, {}, "kg-eir"}};
        const PipelineResult result =
            run_pipeline(data.log, data.q, &data.graph, cfg, strategies, false);
        SeedSummary s;
        const auto& random_run = result.runs[0];
        const auto& em_run = result.runs[1];
        const auto& kgeir_run = result.runs[2];
        for (int t = 1; t <= steps; ++t) {
            s.cov_random.push_back(mean_cov_at(random_run.traces, t));
            s.cov_kgeir.push_back(mean_cov_at(kgeir_run.traces, t));
        }
        const auto ir = mean_inf_at(random_run.traces, steps);
        const auto ie = mean_inf_at(em_run.traces, steps);
        const auto ik = mean_inf_at(kgeir_run.traces, steps);
        s.inf_defined = ir.has_value() && ie.has_value() && ik.has_value();
        if (s.inf_defined) {
            s.inf_random = *ir;
            s.inf_em = *ie;
            s.inf_kgeir = *ik;
        }
        return s;
    });

    std::vector<double> cov_k(steps, 0.0), cov_r(steps, 0.0);
    double inf_k = 0.0, inf_r = 0.0, inf_e = 0.0;
    int wins = 0;
    for (const auto& s : summaries) {
        if (!s.inf_defined) return {false, false, "final-step AUC undefined in a seed"};
        for (int t = 0; t < steps; ++t) {
            cov_k[t] += s.cov_kgeir[t] / n_seeds;
            cov_r[t] += s.cov_random[t] / n_seeds;
        }
        inf_k += s.inf_kgeir / n_seeds;
        inf_r += s.inf_random / n_seeds;
        inf_e += s.inf_em / n_seeds;
        if (s.inf_kgeir > s.inf_em && s.inf_kgeir > s.inf_random) ++wins;
    }

    std::string fails;
    for (int t = 5; t <= steps; ++t)
        if (!(cov_k[t - 1] > cov_r[t - 1])) {
            fails += "cov(kg-eir) <= cov(random) at step " + std::to_string(t) + "; ";
            break;
        }
    if (cov_k[steps - 1] < 0.95)
        fails += "cov(kg-eir)@20 = " + fmt("%.4f", cov_k[steps - 1]) + " < 0.95; ";
    if (inf_k - inf_r < 0.01)
        fails += "inf margin over random = " + fmt("%.4f", inf_k - inf_r) + " < 0.01; ";
    const double p = sign_test_p(n_seeds, wins);
    if (p >= 0.05)
        fails += "sign test: kg-eir highest in " + std::to_string(wins) + "/10 seeds (p = " +
                 fmt("%.3f", p) + "); ";
    const double secs = elapsed_s(start);
    if (secs >= 600.0) fails += "runtime " + fmt("%.1f", secs) + "s exceeds 600s; ";

    if (!fails.empty()) return {false, false, fails};
    return {true, false,
            "cov@20 " + fmt("%.3f", cov_k[steps - 1]) + " vs random " +
                fmt("%.3f", cov_r[steps - 1]) + ", inf " + fmt("%.4f", inf_k) + " vs em " +
                fmt("%.4f", inf_e) + " vs random " + fmt("%.4f", inf_r) + ", highest in " +
                std::to_string(wins) + "/10 seeds (p = " + fmt("%.4f", p) + "), " +
                fmt("%.0f", secs) + "s"};
}

// ---------------------------------------------------------------------------
// criterion 6: model ordering on an 80/20 chronological split
struct ModelAucs {
    double irt = 0.0, mirt = 0.0, nacd = 0.0, nacd_no_fe = 0.0, nacd_no_fs = 0.0;
};

Outcome criterion_model_ordering() {
    const auto start = std::chrono::steady_clock::now();
    const int n_seeds = 5;

    const auto aucs = run_seeds(n_seeds, [&](int i) {
        const SyntheticData data = generate_synthetic(population_spec(7000 + i));
        const DenseLog full = to_dense(data.log, data.q);
        const double fraction = 0.2;
        const DenseLog observed = observed_dense(full, fraction);
        const std::uint64_t seed = 7000 + i;

        TrainConfig shallow;  // IRT / MIRT
        shallow.learning_rate = 0.02;
        shallow.epochs = 40;
        shallow.dropout = 0.0;
        shallow.batch_size = 1024;
        shallow.seed = seed;

        TrainConfig deep;  // NACD variants
        deep.learning_rate = 0.01;
        deep.epochs = 30;
        deep.dropout = 0.2;
        deep.batch_size = 32;
        deep.seed = seed;

        NacdOptions opts;
        opts.attention_dim = 16;
        opts.hidden_dim = 32;
        opts.student_out_dim = 16;
        opts.clip_k = 4;
        opts.history_window = 50;

        const std::vector<double> uniform(data.q.n_skills(), 1.0);
        const Matrix wq = make_weighted_q(data.q, uniform);

        auto heldout_auc = [&](const Cdm& model) {
            std::vector<double> scores;
            std::vector<int> labels;
            for (int s = 0; s < full.n_students; ++s) {
                const auto recs = full.student_records(s);
                const int obs = observed_count(static_cast<int>(recs.size()), fraction);
                if (model.kind() == CdmKind::Nacd) {
                    std::vector<int> seq;
                    for (const auto& r : recs) seq.push_back(r.exercise);
                    const auto p = as_nacd(model).predict_sequence(s, seq);
                    for (size_t t = obs; t < recs.size(); ++t) {
                        scores.push_back(p[t]);
                        labels.push_back(recs[t].correct);
                    }
                } else {
                    for (size_t t = obs; t < recs.size(); ++t) {
                        scores.push_back(model.predict(s, recs[t].exercise));
                        labels.push_back(recs[t].correct);
                    }
                }
            }
            return auc(scores, labels).value();
        };

        ModelAucs out;
        auto irt = make_irt(full.n_students, full.n_exercises, seed);
        irt->train(observed, shallow);
        out.irt = heldout_auc(*irt);

        auto mirt = make_mirt(full.n_students, full.n_exercises, data.q.n_skills(), seed);
        mirt->train(observed, shallow);
        out.mirt = heldout_auc(*mirt);

        auto nacd = make_nacd(wq, full.n_students, opts, seed);
        nacd->train(observed, deep);
        out.nacd = heldout_auc(*nacd);

        NacdOptions no_fe = opts;
        no_fe.disable_exercise_factor = true;
        auto nacd_no_fe = make_nacd(wq, full.n_students, no_fe, seed);
        nacd_no_fe->train(observed, deep);
        out.nacd_no_fe = heldout_auc(*nacd_no_fe);

        NacdOptions no_fs = opts;
        no_fs.disable_student_factor = true;
        auto nacd_no_fs = make_nacd(wq, full.n_students, no_fs, seed);
        nacd_no_fs->train(observed, deep);
        out.nacd_no_fs = heldout_auc(*nacd_no_fs);
        return out;
    });

    ModelAucs mean;
    for (const auto& a : aucs) {
        mean.irt += a.irt / n_seeds;
        mean.mirt += a.mirt / n_seeds;
        mean.nacd += a.nacd / n_seeds;
        mean.nacd_no_fe += a.nacd_no_fe / n_seeds;
        mean.nacd_no_fs += a.nacd_no_fs / n_seeds;
    }

    std::string fails;
    if (!(mean.nacd >= mean.mirt))
        fails += "AUC(nacd) " + fmt("%.4f", mean.nacd) + " < AUC(mirt) " + fmt("%.4f", mean.mirt) +
                 "; ";
    if (!(mean.mirt >= mean.irt - 0.01))
        fails += "AUC(mirt) " + fmt("%.4f", mean.mirt) + " < AUC(irt) - 0.01 (" +
                 fmt("%.4f", mean.irt) + "); ";
    if (!(mean.nacd_no_fs < mean.nacd_no_fe))
        fails += "disabling the student factor did not hurt more (no-fs " +
                 fmt("%.4f", mean.nacd_no_fs) + " vs no-fe " + fmt("%.4f", mean.nacd_no_fe) +
                 "); ";
    const double secs = elapsed_s(start);
    if (secs >= 900.0) fails += "runtime " + fmt("%.1f", secs) + "s exceeds 900s; ";

    if (!fails.empty()) return {false, false, fails};
    return {true, false,
            "AUC irt " + fmt("%.3f", mean.irt) + " <= mirt " + fmt("%.3f", mean.mirt) +
                " <= nacd " + fmt("%.3f", mean.nacd) + "; no-fs " + fmt("%.3f", mean.nacd_no_fs) +
                " < no-fe " + fmt("%.3f", mean.nacd_no_fe) + ", " + fmt("%.0f", secs) + "s"};
}

// ---------------------------------------------------------------------------
// criterion 7: full KG-EIR vs single-component ablations
Outcome criterion_ablation() {
    const auto start = std::chrono::steady_clock::now();
    const int n_seeds = 10;
    const int steps = 20;

    struct SeedInf {
        double full = 0.0, no_inf = 0.0, no_repr = 0.0, no_ki = 0.0;
        bool defined = true;
    };
    const auto results = run_seeds(n_seeds, [&](int i) {
        const SyntheticData data = generate_synthetic(population_spec(9000 + i));
        const Config cfg = replay_config(9000 + i);
        const PipelineResult result =
            run_pipeline(data.log, data.q, &data.graph, cfg, ablation_strategies(), false);
        SeedInf s;
        const auto full = mean_inf_at(result.runs[0].traces, steps);
        const auto no_inf = mean_inf_at(result.runs[1].traces, steps);
        const auto no_repr = mean_inf_at(result.runs[2].traces, steps);
        const auto no_ki = mean_inf_at(result.runs[3].traces, steps);
        s.defined = full && no_inf && no_repr && no_ki;
        if (s.defined) {
            s.full = *full;
            s.no_inf = *no_inf;
            s.no_repr = *no_repr;
            s.no_ki = *no_ki;
        }
        return s;
    });

    int ge_no_inf = 0, ge_no_repr = 0, ge_no_ki = 0;
    for (const auto& s : results) {
        if (!s.defined) return {false, false, "final-step AUC undefined in a seed"};
        ge_no_inf += s.full >= s.no_inf;
        ge_no_repr += s.full >= s.no_repr;
        ge_no_ki += s.full >= s.no_ki;
    }

    std::string fails;
    if (ge_no_inf < 7)
        fails += "full >= no-informativeness in only " + std::to_string(ge_no_inf) + "/10; ";
    if (ge_no_repr < 7)
        fails += "full >= no-representativeness in only " + std::to_string(ge_no_repr) + "/10; ";
    if (ge_no_ki < 7)
        fails += "full >= no-knowledge-importance in only " + std::to_string(ge_no_ki) + "/10; ";
    const double secs = elapsed_s(start);
    if (!fails.empty()) return {false, false, fails};
    return {true, false,
            "full >= ablation in " + std::to_string(ge_no_inf) + "/" + std::to_string(ge_no_repr) +
                "/" + std::to_string(ge_no_ki) + " of 10 seeds (no-inf/no-repr/no-ki), " +
                fmt("%.0f", secs) + "s"};
}

// ---------------------------------------------------------------------------
// criterion 8 (optional): real dataset statistics and NACD AUC
Outcome criterion_datasets() {
    const char* assist_log = std::getenv("KGEIR_ASSIST_LOG");
    const char* assist_q = std::getenv("KGEIR_ASSIST_QMATRIX");
    const char* eedi_log = std::getenv("KGEIR_EEDI_LOG");
    const char* eedi_q = std::getenv("KGEIR_EEDI_QMATRIX");
    if (!assist_log || !assist_q || !eedi_log || !eedi_q)
        return {true, true,
                "set KGEIR_ASSIST_LOG/KGEIR_ASSIST_QMATRIX/KGEIR_EEDI_LOG/KGEIR_EEDI_QMATRIX "
                "to run"};

    std::string fails;
    auto check_one = [&](const char* log_path, const char* q_path, int want_students,
                         int want_questions, double want_auc, const char* name) {
        const InteractionLog log = load_interaction_log(log_path);
        const QMatrix q = load_q_matrix(q_path);
        if (log.n_students() != want_students)
            fails += std::string(name) + ": " + std::to_string(log.n_students()) +
                     " students, expected " + std::to_string(want_students) + "; ";
        if (q.n_exercises() != want_questions)
            fails += std::string(name) + ": " + std::to_string(q.n_exercises()) +
                     " questions, expected " + std::to_string(want_questions) + "; ";
        if (!fails.empty()) return;

        const DenseLog full = to_dense(log, q);
        const DenseLog observed = observed_dense(full, 0.2);
        NacdOptions opts;
        opts.attention_dim = 32;
        opts.hidden_dim = 64;
        opts.student_out_dim = 32;
        TrainConfig cfg;
        cfg.learning_rate = 0.002;
        cfg.epochs = 100;
        cfg.dropout = 0.2;
        cfg.batch_size = 32;
        cfg.seed = 1;
        auto model = make_nacd(make_weighted_q(q, std::vector<double>(q.n_skills(), 1.0)),
                               full.n_students, opts, 1);
        model->train(observed, cfg);
        std::vector<double> scores;
        std::vector<int> labels;
        for (int s = 0; s < full.n_students; ++s) {
            const auto recs = full.student_records(s);
            const int obs = observed_count(static_cast<int>(recs.size()), 0.2);
            std::vector<int> seq;
            for (const auto& r : recs) seq.push_back(r.exercise);
            const auto p = as_nacd(*model).predict_sequence(s, seq);
            for (size_t t = obs; t < recs.size(); ++t) {
                scores.push_back(p[t]);
                labels.push_back(recs[t].correct);
            }
        }
        const double got = auc(scores, labels).value();
        if (std::abs(got - want_auc) > 0.03)
            fails += std::string(name) + ": NACD heldout AUC " + fmt("%.4f", got) + " outside " +
                     fmt("%.3f", want_auc) + " +/- 0.03; ";
    };

    check_one(assist_log, assist_q, 2493, 17671, 0.772, "assist");
    check_one(eedi_log, eedi_q, 2064, 948, 0.751, "eedi");
    if (!fails.empty()) return {false, false, fails};
    return {true, false, "dataset statistics exact, NACD AUC within +/- 0.03"};
}

// ---------------------------------------------------------------------------
// criterion 9: byte-identical exports under a fixed seed
Outcome criterion_determinism() {
    const auto start = std::chrono::steady_clock::now();
    const SyntheticData data = generate_synthetic({40, 40, 6, 0.1, 0.1, 123});
    Config cfg = replay_config(123);
    cfg.set("steps", "8");
    cfg.set("epochs", "10");
    cfg.set("embed_epochs", "5");

    const std::vector<StrategySpec> strategies{{StrategyKind::Random, {}, "random"},
                                               {StrategyKind::KgEir, {}, "kg-eir"}};
    const auto base = std::filesystem::temp_directory_path() /
                      ("kgeir_accept9_" + std::to_string(::getpid()));
    std::filesystem::remove_all(base);
    const std::string out_a = (base / "a").string();
    const std::string out_b = (base / "b").string();
    run_simulate(data.log, data.q, &data.graph, cfg, strategies, out_a, true);
    run_simulate(data.log, data.q, &data.graph, cfg, strategies, out_b, true);

    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    };
    std::string fails;
    int compared = 0;
    for (const auto& entry : std::filesystem::directory_iterator(out_a)) {
        const std::string name = entry.path().filename().string();
        const std::string a = slurp(entry.path().string());
        const std::string b = slurp(out_b + "/" + name);
        ++compared;
        if (a.empty()) fails += name + " empty; ";
        if (a != b) fails += name + " differs between runs; ";
    }
    std::filesystem::remove_all(base);
    if (compared < 4) fails += "only " + std::to_string(compared) + " export files; ";
    if (!fails.empty()) return {false, false, fails};
    return {true, false,
            std::to_string(compared) + " export files byte-identical across runs, " +
                fmt("%.1f", elapsed_s(start)) + "s"};
}

struct Criterion {
    int number;
    const char* title;
    Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "path extraction matches brute-force enumeration", criterion_path_oracle},
    {2, "greedy coverage meets the (1-1/e) bound", criterion_greedy_coverage},
    {3, "reverse-mode gradients match finite differences", criterion_gradients},
    {4, "formula spot values", criterion_spot_values},
    {5, "strategy ordering on the synthetic population", criterion_strategy_ordering},
    {6, "model ordering on the 80/20 split", criterion_model_ordering},
    {7, "ablation monotonicity", criterion_ablation},
    {8, "real dataset statistics and AUC (optional)", criterion_datasets},
    {9, "byte-identical exports under a fixed seed", criterion_determinism},
};

}  // namespace

int main(int argc, char** argv) {
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& criterion : kCriteria) {
        if (!selected.empty() && !selected.count(criterion.number)) continue;
        Outcome outcome;
        try {
            outcome = criterion.run();
        } catch (const std::exception& e) {
            outcome = {false, false, std::string("exception: ") + e.what()};
        }
        const char* tag = outcome.skipped ? "SKIP" : outcome.ok ? "PASS" : "FAIL";
        std::printf("[%s] criterion %d: %s -- %s\n", tag, criterion.number, criterion.title,
                    outcome.details.c_str());
        std::fflush(stdout);
        if (!outcome.ok && !outcome.skipped) ++failures;
    }
    if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
    return failures;
}
