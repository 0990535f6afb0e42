#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace kgeir {

struct InteractionRecord {
    std::string student_id;
    std::string exercise_id;
    int correct = 0;           // 0 or 1
    std::int64_t timestamp = 0;  // 1..n within a student after normalization
};

// Immutable after load. Records are grouped by student (students sorted
// lexicographically) and ordered chronologically within each student;
// timestamps are normalized to the 1-based position in that order.
struct InteractionLog {
    std::vector<InteractionRecord> records;
    std::vector<std::string> student_ids;            // sorted
    std::vector<std::pair<int, int>> student_spans;  // [begin, end) into records

    int n_students() const { return static_cast<int>(student_ids.size()); }
    std::int64_t n_records() const { return static_cast<std::int64_t>(records.size()); }

    int student_index(const std::string& id) const;  // -1 when absent
    std::span<const InteractionRecord> student_records(int index) const;
    std::span<const InteractionRecord> student_records(const std::string& id) const;
};

InteractionLog load_interaction_log(const std::string& path);
void save_interaction_log(const InteractionLog& log, const std::string& path);
// builds the canonical grouped/normalized form from raw records
InteractionLog build_interaction_log(std::vector<InteractionRecord> records);

struct QMatrix {
    std::vector<std::string> exercise_ids;  // sorted
    std::vector<std::string> skill_ids;     // sorted
    std::vector<std::uint8_t> entries;      // N_e x K, row-major, binary
    std::vector<std::vector<int>> skills_of;  // per exercise, sorted skill columns

    int n_exercises() const { return static_cast<int>(exercise_ids.size()); }
    int n_skills() const { return static_cast<int>(skill_ids.size()); }
    std::uint8_t at(int e, int k) const { return entries[static_cast<size_t>(e) * n_skills() + k]; }
    int exercise_index(const std::string& id) const;  // -1 when absent
    int skill_index(const std::string& id) const;
};

QMatrix load_q_matrix(const std::string& path,
                      const std::optional<std::string>& skill_vocab_path = std::nullopt);
void save_q_matrix(const QMatrix& q, const std::string& path);
QMatrix build_q_matrix(const std::vector<std::pair<std::string, std::string>>& pairs,
                       const std::vector<std::string>* skill_vocab = nullptr);

// every log exercise must exist in the Q-matrix
void validate_log_against_q(const InteractionLog& log, const QMatrix& q);

// Chronological per-student split; the heldout suffix becomes the replay
// question pool. `seed` is carried for provenance only.
struct SessionSplit {
    std::string student_id;
    std::pair<int, int> observed;  // [begin, end) into log.records
    std::pair<int, int> heldout;
    std::uint64_t seed = 0;

    std::span<const InteractionRecord> observed_records(const InteractionLog& log) const;
    std::span<const InteractionRecord> heldout_records(const InteractionLog& log) const;
};

SessionSplit split_holdout(const InteractionLog& log, const std::string& student, double fraction,
                           std::uint64_t seed);

// Dense-index view shared by the models: students/exercises/skills become
// contiguous ints (students from the log, exercises/skills from the Q-matrix).
struct DenseRecord {
    int student = -1;
    int exercise = -1;
    int correct = 0;
    std::int64_t timestamp = 0;
};

struct DenseLog {
    std::vector<DenseRecord> records;                // same order as the source log
    std::vector<std::pair<int, int>> student_spans;  // aligned with log.student_ids
    int n_students = 0;
    int n_exercises = 0;

    std::span<const DenseRecord> student_records(int s) const {
        const auto [b, e] = student_spans[s];
        return {records.data() + b, static_cast<size_t>(e - b)};
    }
};

DenseLog to_dense(const InteractionLog& log, const QMatrix& q);

}  // namespace kgeir
