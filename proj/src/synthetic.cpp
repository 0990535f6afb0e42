#include "kgeir/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "kgeir/error.hpp"
#include "kgeir/rng.hpp"

namespace kgeir {

namespace {

std::string padded_id(const char* prefix, int index, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, index + 1);
    return buf;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    require(spec.students >= 1 && spec.exercises >= 1 && spec.skills >= 1,
            "synthetic: sizes must be >= 1");
    require(spec.slip >= 0.0 && spec.slip < 0.5 && spec.guess >= 0.0 && spec.guess < 0.5,
            "synthetic: slip/guess must lie in [0, 0.5)");
    Rng rng(spec.seed ^ 0xd6e8feb86659fd93ULL);
    const int K = spec.skills;

    // skewed skill popularity: rank r drawn with weight 1/(r+1)^1.2
    std::vector<double> skill_weight(K);
    for (int k = 0; k < K; ++k) skill_weight[k] = 1.0 / std::pow(k + 1.0, 1.2);

    std::vector<std::string> skill_ids(K);
    for (int k = 0; k < K; ++k) skill_ids[k] = padded_id("k", k, 2);
    std::vector<std::string> exercise_ids(spec.exercises);
    for (int e = 0; e < spec.exercises; ++e) exercise_ids[e] = padded_id("e", e, 4);
    std::vector<std::string> student_ids(spec.students);
    for (int s = 0; s < spec.students; ++s) student_ids[s] = padded_id("s", s, 4);

    auto draw_skill = [&](const std::vector<char>& taken) {
        double total = 0.0;
        for (int k = 0; k < K; ++k)
            if (!taken[k]) total += skill_weight[k];
        double u = rng.uniform() * total;
        for (int k = 0; k < K; ++k) {
            if (taken[k]) continue;
            u -= skill_weight[k];
            if (u <= 0.0) return k;
        }
        for (int k = K - 1; k >= 0; --k)
            if (!taken[k]) return k;
        return 0;
    };

    require(spec.min_skills_per_exercise >= 1 &&
                spec.max_skills_per_exercise >= spec.min_skills_per_exercise,
            "synthetic: bad skills-per-exercise range");
    std::vector<std::vector<int>> skills_of(spec.exercises);
    for (int e = 0; e < spec.exercises; ++e) {
        const int span = spec.max_skills_per_exercise - spec.min_skills_per_exercise + 1;
        const int count = std::min(K, spec.min_skills_per_exercise + rng.uniform_int(span));
        std::vector<char> taken(K, 0);
        for (int c = 0; c < count; ++c) {
            const int k = draw_skill(taken);
            taken[k] = 1;
            skills_of[e].push_back(k);
        }
        std::sort(skills_of[e].begin(), skills_of[e].end());
    }
    // every skill needs a few exercises so coverage is attainable
    const int min_per_skill = std::max(3, spec.exercises / 12);
    std::vector<int> freq(K, 0);
    for (const auto& sk : skills_of)
        for (int k : sk) ++freq[k];
    for (int k = 0; k < K; ++k) {
        while (freq[k] < min_per_skill) {
            const int e = rng.uniform_int(spec.exercises);
            if (std::find(skills_of[e].begin(), skills_of[e].end(), k) != skills_of[e].end())
                continue;
            skills_of[e].push_back(k);
            std::sort(skills_of[e].begin(), skills_of[e].end());
            ++freq[k];
        }
    }

    std::vector<std::pair<std::string, std::string>> pairs;
    for (int e = 0; e < spec.exercises; ++e)
        for (int k : skills_of[e]) pairs.emplace_back(exercise_ids[e], skill_ids[k]);

    SyntheticData data;
    data.q = build_q_matrix(pairs);

    // mastery rate falls with skill rank: common skills are widely mastered
    std::vector<double> mastery_rate(K);
    for (int k = 0; k < K; ++k)
        mastery_rate[k] =
            K == 1 ? spec.mastery_hi
                   : spec.mastery_hi -
                         (spec.mastery_hi - spec.mastery_lo) * static_cast<double>(k) / (K - 1);

    std::vector<InteractionRecord> records;
    records.reserve(static_cast<size_t>(spec.students) * spec.exercises);
    std::vector<int> order(spec.exercises);
    data.mastery = Matrix(spec.students, K);
    for (int s = 0; s < spec.students; ++s) {
        std::vector<char> mastered(K, 0);
        for (int k = 0; k < K; ++k) {
            mastered[k] = rng.bernoulli(mastery_rate[k]) ? 1 : 0;
            data.mastery(s, k) = mastered[k];
        }
        std::iota(order.begin(), order.end(), 0);
        for (int i = spec.exercises - 1; i > 0; --i)
            std::swap(order[i], order[rng.uniform_int(i + 1)]);
        for (int t = 0; t < spec.exercises; ++t) {
            const int e = order[t];
            bool knows = true;
            for (int k : skills_of[e]) knows = knows && mastered[k];
            const double p = knows ? 1.0 - spec.slip : spec.guess;
            records.push_back({student_ids[s], exercise_ids[e], rng.bernoulli(p) ? 1 : 0,
                               static_cast<std::int64_t>(t + 1)});
        }
    }
    data.log = build_interaction_log(std::move(records));

    // knowledge graph: one subject implementing every skill, a prerequisite
    // chain through the skills (rare skills sit deep), and task applications
    std::vector<LearningObject> nodes;
    nodes.push_back({"subject", "synthetic subject", ClassLevel::Subject});
    for (int k = 0; k < K; ++k) nodes.push_back({skill_ids[k], "skill " + skill_ids[k], ClassLevel::Basic});
    const int n_tasks = std::max(2, K / 2);
    for (int t = 0; t < n_tasks; ++t)
        nodes.push_back({padded_id("t", t, 2), "task", ClassLevel::Task});

    std::vector<std::tuple<std::string, std::string, RelationKind>> edges;
    for (int k = 0; k < K; ++k)
        edges.emplace_back("subject", skill_ids[k], RelationKind::Implement);
    // prerequisite links point from a skill to the knowledge it builds on, so
    // learning paths flow toward the common foundational skills
    for (int k = 0; k + 1 < K; ++k)
        edges.emplace_back(skill_ids[k + 1], skill_ids[k], RelationKind::PreKnowledge);
    for (int t = 0; t < n_tasks; ++t)
        edges.emplace_back(skill_ids[0], padded_id("t", t, 2), RelationKind::ApplyToBasic);
    data.graph = build_graph(std::move(nodes), std::move(edges));
    return data;
}

void write_synthetic(const SyntheticData& data, const std::string& dir) {
    std::filesystem::create_directories(dir);
    save_interaction_log(data.log, dir + "/log.csv");
    save_q_matrix(data.q, dir + "/q_matrix.csv");
    save_graph(data.graph, dir + "/graph.json");
}

}  // namespace kgeir
