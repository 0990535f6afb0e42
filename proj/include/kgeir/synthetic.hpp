#pragma once

#include <cstdint>
#include <string>

#include "kgeir/ingest.hpp"
#include "kgeir/knowledge_graph.hpp"
#include "kgeir/matrix.hpp"

namespace kgeir {

// Conjunctive (DINA-style) response generator: a student answers correctly
// with probability 1-slip when they master every skill of the exercise and
// with probability guess otherwise. Skill popularity is skewed and mastery
// rates fall with skill rank, so low-index skills are common and easy while
// high-index skills are rare and hard.
struct SyntheticSpec {
    int students = 200;
    int exercises = 100;
    int skills = 10;
    double slip = 0.1;
    double guess = 0.1;
    std::uint64_t seed = 0;
    // structural knobs: skills per exercise drawn uniformly from the range;
    // mastery rate interpolates from hi (common skills) to lo (rare skills)
    int min_skills_per_exercise = 1;
    int max_skills_per_exercise = 2;
    double mastery_hi = 0.92;
    double mastery_lo = 0.3;
};

struct SyntheticData {
    InteractionLog log;
    QMatrix q;
    KnowledgeGraph graph;
    // ground-truth mastery (students x skills, 0/1), aligned with the sorted
    // student/skill ids; kept for tests and diagnostics
    Matrix mastery;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// writes log.csv, q_matrix.csv and graph.json under dir
void write_synthetic(const SyntheticData& data, const std::string& dir);

}  // namespace kgeir
