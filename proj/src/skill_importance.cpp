#include "kgeir/skill_importance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "kgeir/csv.hpp"
#include "kgeir/error.hpp"

namespace kgeir {

double f1_level(const PathSet& paths, int node) {
    if (node < 0 || node >= static_cast<int>(paths.containing.size())) return 0.0;
    const auto& in = paths.containing[node];
    if (in.empty()) return 0.0;
    double total = 0.0;
    for (int p : in) total += level_in_path(paths.paths[p], node);
    return total / static_cast<double>(in.size());
}

double f2_frequency(const PathSet& paths, int node) {
    require(paths.n_paths() >= 1, "f2_frequency: empty path set");
    if (node < 0 || node >= static_cast<int>(paths.containing.size())) return 0.0;
    return static_cast<double>(paths.containing[node].size()) /
           static_cast<double>(paths.n_paths());
}

double f3_connection(const PathSet& paths, int node, int total_kcs) {
    require(total_kcs >= 1, "f3_connection: total KC count must be >= 1");
    if (node < 0 || node >= static_cast<int>(paths.containing.size())) return 0.0;
    std::set<int> connected;
    for (int p : paths.containing[node])
        for (int other : paths.paths[p].nodes)
            if (other != node) connected.insert(other);
    return static_cast<double>(connected.size()) / static_cast<double>(total_kcs);
}

double f4_similarity(const Matrix& s_star, int skill) {
    require(s_star.rows >= 2, "f4_similarity: need at least 2 skills");
    require(skill >= 0 && skill < s_star.rows, "f4_similarity: skill out of range");
    double total = 0.0;
    for (int other = 0; other < s_star.rows; ++other) {
        if (other == skill) continue;
        total += cosine(s_star.row(skill), s_star.row(other));
    }
    return total / static_cast<double>(s_star.rows - 1);
}

int pi_difficulty(const DenseLog& log, const QMatrix& q, int student, int skill, std::int64_t t) {
    require(student >= 0 && student < log.n_students, "pi_difficulty: unknown student");
    require(skill >= 0 && skill < q.n_skills(), "pi_difficulty: unknown skill");
    int attempts = 0;
    int wrong = 0;
    for (const auto& r : log.student_records(student)) {
        if (r.timestamp >= t) break;  // records are chronological
        if (!q.at(r.exercise, skill)) continue;
        ++attempts;
        wrong += 1 - r.correct;
    }
    if (attempts < 5) return 5;
    return static_cast<int>(std::floor(static_cast<double>(wrong) / attempts * 4.0));
}

double f5_difficulty(const DenseLog& log, const QMatrix& q, int skill,
                     const std::vector<std::int64_t>& checkpoints) {
    require(!checkpoints.empty(), "f5_difficulty: empty checkpoint list");
    require(log.n_students >= 1, "f5_difficulty: no students");
    double total = 0.0;
    for (int s = 0; s < log.n_students; ++s)
        for (std::int64_t t : checkpoints) total += pi_difficulty(log, q, s, skill, t);
    return total / (static_cast<double>(log.n_students) * checkpoints.size());
}

double combine(const SkillFeatures& f, const PreferenceWeights& w) {
    return w.w[0] * f.f1_level + w.w[1] * f.f2_frequency + w.w[2] * f.f3_connection +
           w.w[3] * f.f4_similarity + w.w[4] * f.f5_difficulty;
}

double skill_importance(double w_nov, double w_pop) { return std::tanh(w_nov + w_pop); }

std::vector<double> SkillImportanceTable::weights() const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.w_k);
    return out;
}

SkillImportanceTable SkillImportanceTable::uniform(const QMatrix& q) {
    SkillImportanceTable t;
    t.rows.resize(q.n_skills());
    for (int k = 0; k < q.n_skills(); ++k) {
        t.rows[k].skill_id = q.skill_ids[k];
        t.rows[k].w_k = 1.0;
    }
    return t;
}

std::vector<SkillFeatures> normalize_features(const std::vector<SkillFeatures>& raw) {
    auto minmax = [&](auto field) {
        double lo = HUGE_VAL, hi = -HUGE_VAL;
        for (const auto& f : raw) {
            lo = std::min(lo, f.*field);
            hi = std::max(hi, f.*field);
        }
        return std::pair{lo, hi};
    };
    auto norm = [](double v, std::pair<double, double> range) {
        return range.second > range.first ? (v - range.first) / (range.second - range.first) : 0.5;
    };
    const auto r1 = minmax(&SkillFeatures::f1_level);
    const auto r2 = minmax(&SkillFeatures::f2_frequency);
    const auto r3 = minmax(&SkillFeatures::f3_connection);
    const auto r4 = minmax(&SkillFeatures::f4_similarity);
    const auto r5 = minmax(&SkillFeatures::f5_difficulty);
    std::vector<SkillFeatures> out(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        out[i].f1_level = norm(raw[i].f1_level, r1);
        out[i].f2_frequency = norm(raw[i].f2_frequency, r2);
        out[i].f3_connection = norm(raw[i].f3_connection, r3);
        out[i].f4_similarity = norm(raw[i].f4_similarity, r4);
        out[i].f5_difficulty = norm(raw[i].f5_difficulty, r5);
    }
    return out;
}

SkillImportanceTable build_skill_importance_table(const KnowledgeGraph& kg, const PathSet& paths,
                                                  const QMatrix& q, const DenseLog& log,
                                                  const Matrix& s_star) {
    require(s_star.rows == q.n_skills(), "skill importance: embedding table shape mismatch");
    for (const auto& id : q.skill_ids)
        require(kg.node_index(id) >= 0,
                "Q-matrix skill missing from the knowledge graph: " + id);

    std::int64_t max_t = 0;
    for (const auto& r : log.records) max_t = std::max(max_t, r.timestamp);
    const std::vector<std::int64_t> final_checkpoint{max_t + 1};

    std::vector<SkillFeatures> raw(q.n_skills());
    for (int k = 0; k < q.n_skills(); ++k) {
        const int node = kg.node_index(q.skill_ids[k]);
        raw[k].f1_level = f1_level(paths, node);
        raw[k].f2_frequency = f2_frequency(paths, node);
        raw[k].f3_connection = f3_connection(paths, node, kg.n_nodes());
        raw[k].f4_similarity = q.n_skills() >= 2 ? f4_similarity(s_star, k) : 0.0;
        raw[k].f5_difficulty = f5_difficulty(log, q, k, final_checkpoint);
    }
    const std::vector<SkillFeatures> normalized = normalize_features(raw);

    SkillImportanceTable table;
    table.rows.resize(q.n_skills());
    for (int k = 0; k < q.n_skills(); ++k) {
        auto& row = table.rows[k];
        row.skill_id = q.skill_ids[k];
        row.raw = raw[k];
        row.normalized = normalized[k];
        row.w_nov = combine(normalized[k], PreferenceWeights::novelty());
        row.w_pop = combine(normalized[k], PreferenceWeights::popularity());
        row.w_k = skill_importance(row.w_nov, row.w_pop);
    }
    return table;
}

void save_skill_importance(const SkillImportanceTable& table, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << "skill_id,f1,f2,f3,f4,f5,w_nov,w_pop,w_k\n";
    for (const auto& r : table.rows) {
        out << csv_escape(r.skill_id) << ',' << format_double(r.raw.f1_level) << ','
            << format_double(r.raw.f2_frequency) << ',' << format_double(r.raw.f3_connection) << ','
            << format_double(r.raw.f4_similarity) << ',' << format_double(r.raw.f5_difficulty) << ','
            << format_double(r.w_nov) << ',' << format_double(r.w_pop) << ','
            << format_double(r.w_k) << '\n';
    }
    require(out.good(), "write failed: " + path);
}

SkillImportanceTable load_skill_importance(const QMatrix& q, const std::string& path) {
    CsvReader reader(path);
    const int c_id = reader.column("skill_id");
    const int c[8] = {reader.column("f1"),    reader.column("f2"),    reader.column("f3"),
                      reader.column("f4"),    reader.column("f5"),    reader.column("w_nov"),
                      reader.column("w_pop"), reader.column("w_k")};
    SkillImportanceTable table;
    table.rows.resize(q.n_skills());
    std::vector<char> seen(q.n_skills(), 0);
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        const int k = q.skill_index(fields[c_id]);
        if (k < 0) reader.fail_at("unknown skill: " + fields[c_id]);
        seen[k] = 1;
        auto& row = table.rows[k];
        row.skill_id = fields[c_id];
        row.raw.f1_level = std::strtod(fields[c[0]].c_str(), nullptr);
        row.raw.f2_frequency = std::strtod(fields[c[1]].c_str(), nullptr);
        row.raw.f3_connection = std::strtod(fields[c[2]].c_str(), nullptr);
        row.raw.f4_similarity = std::strtod(fields[c[3]].c_str(), nullptr);
        row.raw.f5_difficulty = std::strtod(fields[c[4]].c_str(), nullptr);
        row.w_nov = std::strtod(fields[c[5]].c_str(), nullptr);
        row.w_pop = std::strtod(fields[c[6]].c_str(), nullptr);
        row.w_k = std::strtod(fields[c[7]].c_str(), nullptr);
    }
    for (int k = 0; k < q.n_skills(); ++k)
        require(seen[k], path + ": missing skill " + q.skill_ids[k]);
    return table;
}

}  // namespace kgeir
