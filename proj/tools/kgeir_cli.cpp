// Command-line front end: data validation, model training, skill-importance
// weights, replay simulation of selection strategies, ablations, and plot
// data export. File formats are documented in the README.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "kgeir/checkpoint.hpp"
#include "kgeir/csv.hpp"
#include "kgeir/error.hpp"
#include "kgeir/pipeline.hpp"
#include "kgeir/synthetic.hpp"

namespace {

using namespace kgeir;

Config load_config_or_default(const std::string& path) {
    return path.empty() ? Config() : Config::load(path);
}

struct CommonData {
    InteractionLog log;
    QMatrix q;
    std::optional<KnowledgeGraph> graph;
};

CommonData load_common(const std::string& log_path, const std::string& q_path,
                       const std::string& skills_path, const std::string& graph_path) {
    CommonData d;
    d.log = load_interaction_log(log_path);
    d.q = load_q_matrix(q_path, skills_path.empty()
                                    ? std::nullopt
                                    : std::optional<std::string>(skills_path));
    validate_log_against_q(d.log, d.q);
    if (!graph_path.empty()) {
        d.graph = load_graph(graph_path);
        for (const auto& id : d.q.skill_ids)
            require(d.graph->node_index(id) >= 0,
                    "Q-matrix skill missing from the knowledge graph: " + id);
    }
    return d;
}

int cmd_ingest(const std::string& log_path, const std::string& q_path,
               const std::string& skills_path, const std::string& graph_path) {
    const CommonData d = load_common(log_path, q_path, skills_path, graph_path);
    std::int64_t correct = 0;
    for (const auto& r : d.log.records) correct += r.correct;
    std::printf("records:   %lld\n", static_cast<long long>(d.log.n_records()));
    std::printf("students:  %d\n", d.log.n_students());
    std::printf("questions: %d\n", d.q.n_exercises());
    std::printf("skills:    %d\n", d.q.n_skills());
    std::printf("avg record/student: %.1f\n",
                d.log.n_students() ? static_cast<double>(d.log.n_records()) / d.log.n_students() : 0.0);
    std::printf("correct rate: %.4f\n",
                d.log.n_records() ? static_cast<double>(correct) / d.log.n_records() : 0.0);
    if (d.graph)
        std::printf("graph: %d learning objects, %zu edges\n", d.graph->n_nodes(),
                    d.graph->edges.size());
    std::printf("ok\n");
    return 0;
}

int cmd_weights(const std::string& log_path, const std::string& q_path,
                const std::string& graph_path, const std::string& out_path,
                const std::string& config_path, const std::string& embeddings_out,
                const std::string& need) {
    Config cfg = load_config_or_default(config_path);
    if (!need.empty()) cfg.set("need", need);
    const CommonData d = load_common(log_path, q_path, "", graph_path);
    require(d.graph.has_value(), "weights: a knowledge graph is required");
    const DenseLog dense = to_dense(d.log, d.q);
    const WeightsArtifacts art = compute_weights(dense, d.q, *d.graph, cfg);
    save_skill_importance(art.table, out_path);
    if (!embeddings_out.empty()) save_embeddings(art.embeddings, d.q, embeddings_out);
    std::printf("paths: %d\n", art.paths.n_paths());
    std::printf("wrote %s (%d skills)\n", out_path.c_str(), art.table.n_skills());
    return 0;
}

int cmd_train(const std::string& log_path, const std::string& q_path, const std::string& model_name,
              const std::string& out_dir, const std::string& config_path,
              const std::string& weights_path) {
    Config cfg = load_config_or_default(config_path);
    const CommonData d = load_common(log_path, q_path, "", "");
    CdmKind kind;
    require(cdm_kind_from_string(model_name, kind), "unknown model kind: " + model_name);
    SkillImportanceTable table = weights_path.empty()
                                     ? SkillImportanceTable::uniform(d.q)
                                     : load_skill_importance(d.q, weights_path);
    std::unique_ptr<Cdm> model =
        make_model_from_config(cfg, kind, d.log.n_students(), d.q, table.weights());
    const DenseLog dense = to_dense(d.log, d.q);
    const std::vector<double> curve = model->train(dense, train_config_from(cfg));
    save_checkpoint(*model, out_dir, static_cast<std::uint64_t>(cfg.get_int("seed")), cfg.hash());
    std::printf("epochs: %zu, first loss %.6f, final loss %.6f\n", curve.size(), curve.front(),
                curve.back());
    std::printf("checkpoint written to %s\n", out_dir.c_str());
    return 0;
}

void apply_overrides(Config& cfg, const std::map<std::string, std::string>& overrides) {
    for (const auto& [k, v] : overrides)
        if (!v.empty()) cfg.set(k, v);
}

int cmd_simulate(const std::string& log_path, const std::string& q_path,
                 const std::string& graph_path, const std::string& strategy_name,
                 const std::string& out_dir, const std::string& config_path,
                 const std::map<std::string, std::string>& overrides, const AblationFlags& ablation,
                 bool audit) {
    Config cfg = load_config_or_default(config_path);
    apply_overrides(cfg, overrides);
    const CommonData d = load_common(log_path, q_path, "", graph_path);

    StrategySpec spec;
    require(strategy_kind_from_string(strategy_name, spec.kind),
            "unknown strategy: " + strategy_name);
    spec.ablation = ablation;
    spec.name = strategy_name;
    if (spec.kind == StrategyKind::KgEir) {
        if (ablation.disable_informativeness) spec.name += "-no-inf";
        if (ablation.disable_representativeness) spec.name += "-no-repr";
        if (ablation.disable_knowledge_importance) spec.name += "-no-ki";
    }

    const PipelineResult result = run_simulate(d.log, d.q, d.graph ? &*d.graph : nullptr, cfg,
                                               {spec}, out_dir, audit);
    const auto& traces = result.runs[0].traces;
    const int steps = result.info.steps;
    const auto inf = mean_inf_at(traces, steps);
    std::printf("strategy %s: %zu sessions, final mean cov %.4f", spec.name.c_str(), traces.size(),
                mean_cov_at(traces, steps));
    if (inf) std::printf(", final mean inf %.4f", *inf);
    std::printf("\nexports written to %s\n", out_dir.c_str());
    return 0;
}

int cmd_ablate(const std::string& log_path, const std::string& q_path,
               const std::string& graph_path, const std::string& out_dir,
               const std::string& config_path, const std::map<std::string, std::string>& overrides) {
    Config cfg = load_config_or_default(config_path);
    apply_overrides(cfg, overrides);
    const CommonData d = load_common(log_path, q_path, "", graph_path);
    const PipelineResult result = run_simulate(d.log, d.q, d.graph ? &*d.graph : nullptr, cfg,
                                               ablation_strategies(), out_dir, false);
    for (const auto& run : result.runs) {
        const auto inf = mean_inf_at(run.traces, result.info.steps);
        std::printf("%-16s final mean inf %s, final mean cov %.4f\n", run.spec.name.c_str(),
                    inf ? format_double(*inf).c_str() : "n/a",
                    mean_cov_at(run.traces, result.info.steps));
    }
    std::printf("exports written to %s\n", out_dir.c_str());
    return 0;
}

// merges traces.csv files from several run directories into one comparison
// table (per-step means) and one heatmap grid
int cmd_export_plots(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    require(!run_dirs.empty(), "export-plots: no run directories");
    struct Cell {
        double inf_total = 0.0;
        int inf_n = 0;
        double cov_total = 0.0;
        int n = 0;
    };
    std::map<std::string, std::map<int, Cell>> grid;  // strategy -> step -> cell
    int max_step = 0;
    for (const auto& dir : run_dirs) {
        CsvReader reader(dir + "/traces.csv");
        const int c_strategy = reader.column("strategy");
        const int c_step = reader.column("step");
        const int c_inf = reader.column("inf");
        const int c_cov = reader.column("cov");
        std::vector<std::string> fields;
        while (reader.next(fields)) {
            const int step = std::stoi(fields[c_step]);
            max_step = std::max(max_step, step);
            Cell& cell = grid[fields[c_strategy]][step];
            if (!fields[c_inf].empty()) {
                cell.inf_total += std::strtod(fields[c_inf].c_str(), nullptr);
                ++cell.inf_n;
            }
            cell.cov_total += std::strtod(fields[c_cov].c_str(), nullptr);
            ++cell.n;
        }
    }
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream out(out_dir + "/comparison.csv");
        require(out.good(), "cannot write comparison.csv");
        out << "strategy,step,mean_inf,mean_cov,n\n";
        for (const auto& [strategy, steps] : grid)
            for (const auto& [step, cell] : steps) {
                out << strategy << ',' << step << ',';
                if (cell.inf_n > 0) out << format_double(cell.inf_total / cell.inf_n);
                out << ',' << format_double(cell.cov_total / cell.n) << ',' << cell.n << '\n';
            }
    }
    {
        std::ofstream out(out_dir + "/heatmap.csv");
        require(out.good(), "cannot write heatmap.csv");
        out << "strategy";
        for (int s = 0; s < max_step; ++s) out << ",step_" << s;
        out << '\n';
        for (const auto& [strategy, steps] : grid) {
            out << strategy;
            for (int s = 1; s <= max_step; ++s) {
                out << ',';
                const auto it = steps.find(s);
                if (it != steps.end() && it->second.inf_n > 0)
                    out << format_double(it->second.inf_total / it->second.inf_n);
            }
            out << '\n';
        }
    }
    std::printf("combined plot data written to %s\n", out_dir.c_str());
    return 0;
}

int cmd_synth(const std::string& out_dir, int students, int exercises, int skills, double slip,
              double guess, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.students = students;
    spec.exercises = exercises;
    spec.skills = skills;
    spec.slip = slip;
    spec.guess = guess;
    spec.seed = seed;
    const SyntheticData data = generate_synthetic(spec);
    write_synthetic(data, out_dir);
    std::printf("synthetic dataset written to %s (%lld records)\n", out_dir.c_str(),
                static_cast<long long>(data.log.n_records()));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"KG-EIR adaptive exercise selection engine"};
    app.require_subcommand(1);

    std::string log_path, q_path, skills_path, graph_path, config_path, out_path;
    std::string model_name = "nacd", strategy_name = "kg-eir", weights_path, embeddings_out, need;
    std::vector<std::string> run_dirs;
    std::map<std::string, std::string> overrides;
    AblationFlags ablation;
    bool audit = false;
    int students = 200, exercises = 100, skills = 10;
    double slip = 0.1, guess = 0.1;
    std::uint64_t seed = 0;

    auto add_data_opts = [&](CLI::App* cmd, bool graph_optional) {
        cmd->add_option("--log", log_path, "interaction log CSV")->required();
        cmd->add_option("--qmatrix", q_path, "Q-matrix CSV")->required();
        if (graph_optional) cmd->add_option("--graph", graph_path, "knowledge graph JSON");
    };
    auto add_sim_opts = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key=value configuration file");
        cmd->add_option("--steps", overrides["steps"], "session length");
        cmd->add_option("--seed", overrides["seed"], "random seed");
        cmd->add_option("--cdm", overrides["cdm"], "cognitive diagnosis model (irt|mirt|nacd)");
        cmd->add_option("--top-k", overrides["top_k"], "candidate set size");
        cmd->add_option("--holdout-fraction", overrides["holdout_fraction"],
                        "per-student heldout fraction");
        cmd->add_option("--out", out_path, "output directory")->required();
    };

    auto* ingest = app.add_subcommand("ingest", "validate and summarize a dataset");
    add_data_opts(ingest, true);
    ingest->add_option("--skills", skills_path, "skill vocabulary file");

    auto* weights = app.add_subcommand("weights", "compute the skill importance table");
    add_data_opts(weights, true);
    weights->add_option("--out", out_path, "output CSV path")->required();
    weights->add_option("--config", config_path, "key=value configuration file");
    weights->add_option("--embeddings-out", embeddings_out, "directory for the embedding CSVs");
    weights->add_option("--need", need, "relation constraint preset (all or kind list)");

    auto* train = app.add_subcommand("train", "fit a cognitive diagnosis model");
    add_data_opts(train, false);
    train->add_option("--model", model_name, "irt|mirt|nacd");
    train->add_option("--out", out_path, "checkpoint directory")->required();
    train->add_option("--config", config_path, "key=value configuration file");
    train->add_option("--weights", weights_path, "skill importance table CSV (NACD)");

    auto* simulate = app.add_subcommand("simulate", "replay one selection strategy");
    add_data_opts(simulate, true);
    simulate->add_option("--strategy", strategy_name, "random|expectimax|kg-eir");
    simulate->add_flag("--disable-informativeness", ablation.disable_informativeness,
                       "ablation: candidate set = whole untested pool");
    simulate->add_flag("--disable-representativeness", ablation.disable_representativeness,
                       "ablation: pick the max-EMC question directly");
    simulate->add_flag("--disable-knowledge-importance", ablation.disable_knowledge_importance,
                       "ablation: uniform skill weights in the coverage term");
    simulate->add_flag("--audit", audit, "write per-candidate selection audit CSV");
    add_sim_opts(simulate);

    auto* ablate = app.add_subcommand("ablate", "run the full strategy and its ablations");
    add_data_opts(ablate, true);
    add_sim_opts(ablate);

    auto* plots = app.add_subcommand("export-plots", "merge run directories into plot data");
    plots->add_option("--runs", run_dirs, "run directories to merge")->required();
    plots->add_option("--out", out_path, "output directory")->required();

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--out", out_path, "output directory")->required();
    synth->add_option("--students", students, "number of students");
    synth->add_option("--exercises", exercises, "number of exercises");
    synth->add_option("--skills", skills, "number of skills");
    synth->add_option("--slip", slip, "slip probability");
    synth->add_option("--guess", guess, "guess probability");
    synth->add_option("--seed", seed, "random seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) return cmd_ingest(log_path, q_path, skills_path, graph_path);
        if (weights->parsed())
            return cmd_weights(log_path, q_path, graph_path, out_path, config_path, embeddings_out,
                               need);
        if (train->parsed())
            return cmd_train(log_path, q_path, model_name, out_path, config_path, weights_path);
        if (simulate->parsed())
            return cmd_simulate(log_path, q_path, graph_path, strategy_name, out_path, config_path,
                                overrides, ablation, audit);
        if (ablate->parsed())
            return cmd_ablate(log_path, q_path, graph_path, out_path, config_path, overrides);
        if (plots->parsed()) return cmd_export_plots(run_dirs, out_path);
        if (synth->parsed())
            return cmd_synth(out_path, students, exercises, skills, slip, guess, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
