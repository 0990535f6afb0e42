#include "kgeir/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "kgeir/csv.hpp"
#include "kgeir/error.hpp"

namespace kgeir {

int InteractionLog::student_index(const std::string& id) const {
    const auto it = std::lower_bound(student_ids.begin(), student_ids.end(), id);
    if (it == student_ids.end() || *it != id) return -1;
    return static_cast<int>(it - student_ids.begin());
}

std::span<const InteractionRecord> InteractionLog::student_records(int index) const {
    const auto [b, e] = student_spans[index];
    return {records.data() + b, static_cast<size_t>(e - b)};
}

std::span<const InteractionRecord> InteractionLog::student_records(const std::string& id) const {
    const int idx = student_index(id);
    require(idx >= 0, "unknown student: " + id);
    return student_records(idx);
}

InteractionLog build_interaction_log(std::vector<InteractionRecord> records) {
    // group by student, chronological within student, file order breaking ties
    std::vector<size_t> order(records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) {
        if (records[x].student_id != records[y].student_id)
            return records[x].student_id < records[y].student_id;
        return records[x].timestamp < records[y].timestamp;
    });

    InteractionLog log;
    log.records.reserve(records.size());
    for (size_t i : order) log.records.push_back(std::move(records[i]));

    std::int64_t pos = 0;
    for (size_t i = 0; i < log.records.size(); ++i) {
        if (i == 0 || log.records[i].student_id != log.records[i - 1].student_id) {
            if (i > 0) log.student_spans.back().second = static_cast<int>(i);
            log.student_ids.push_back(log.records[i].student_id);
            log.student_spans.push_back({static_cast<int>(i), 0});
            pos = 0;
        }
        log.records[i].timestamp = ++pos;  // normalized: strictly increasing per student
    }
    if (!log.records.empty()) log.student_spans.back().second = static_cast<int>(log.records.size());
    return log;
}

InteractionLog load_interaction_log(const std::string& path) {
    CsvReader reader(path);
    const int c_student = reader.column("student_id");
    const int c_exercise = reader.column("exercise_id");
    const int c_correct = reader.column("correct");
    const int c_time = reader.column("timestamp");
    const size_t min_fields =
        static_cast<size_t>(std::max({c_student, c_exercise, c_correct, c_time})) + 1;

    std::vector<InteractionRecord> records;
    std::set<std::tuple<std::string, std::string, std::int64_t>> seen;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        if (fields.size() < min_fields) reader.fail_at("malformed row: too few fields");
        InteractionRecord r;
        r.student_id = fields[c_student];
        r.exercise_id = fields[c_exercise];
        if (r.student_id.empty()) reader.fail_at("malformed row: empty student_id");
        if (r.exercise_id.empty()) reader.fail_at("malformed row: empty exercise_id");
        std::int64_t correct = 0;
        if (!parse_int64(fields[c_correct], correct))
            reader.fail_at("malformed row: correct is not an integer: " + fields[c_correct]);
        if (correct != 0 && correct != 1)
            reader.fail_at("correct value outside {0,1}: " + fields[c_correct]);
        r.correct = static_cast<int>(correct);
        if (!parse_int64(fields[c_time], r.timestamp))
            reader.fail_at("malformed row: timestamp is not an integer: " + fields[c_time]);
        if (!seen.insert({r.student_id, r.exercise_id, r.timestamp}).second)
            reader.fail_at("duplicate (student, exercise, timestamp) triple is ambiguous: " +
                           r.student_id + "," + r.exercise_id + "," + fields[c_time]);
        records.push_back(std::move(r));
    }
    return build_interaction_log(std::move(records));
}

void save_interaction_log(const InteractionLog& log, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << "student_id,exercise_id,correct,timestamp\n";
    for (const auto& r : log.records)
        out << csv_escape(r.student_id) << ',' << csv_escape(r.exercise_id) << ',' << r.correct
            << ',' << r.timestamp << '\n';
    require(out.good(), "write failed: " + path);
}

int QMatrix::exercise_index(const std::string& id) const {
    const auto it = std::lower_bound(exercise_ids.begin(), exercise_ids.end(), id);
    if (it == exercise_ids.end() || *it != id) return -1;
    return static_cast<int>(it - exercise_ids.begin());
}

int QMatrix::skill_index(const std::string& id) const {
    const auto it = std::lower_bound(skill_ids.begin(), skill_ids.end(), id);
    if (it == skill_ids.end() || *it != id) return -1;
    return static_cast<int>(it - skill_ids.begin());
}

QMatrix build_q_matrix(const std::vector<std::pair<std::string, std::string>>& pairs,
                       const std::vector<std::string>* skill_vocab) {
    QMatrix q;
    std::set<std::string> exercises;
    std::set<std::string> skills;
    if (skill_vocab) skills.insert(skill_vocab->begin(), skill_vocab->end());
    for (const auto& [e, k] : pairs) {
        require(!e.empty(), "q-matrix: empty exercise_id");
        if (k.empty()) fail("exercise with no skill: " + e);
        exercises.insert(e);
        if (skill_vocab)
            require(skills.count(k) > 0, "q-matrix: unknown skill '" + k + "' for exercise " + e);
        else
            skills.insert(k);
    }
    q.exercise_ids.assign(exercises.begin(), exercises.end());
    q.skill_ids.assign(skills.begin(), skills.end());
    q.entries.assign(static_cast<size_t>(q.n_exercises()) * q.n_skills(), 0);
    for (const auto& [e, k] : pairs) {
        const int ei = q.exercise_index(e);
        const int ki = q.skill_index(k);
        q.entries[static_cast<size_t>(ei) * q.n_skills() + ki] = 1;
    }
    q.skills_of.resize(q.n_exercises());
    for (int e = 0; e < q.n_exercises(); ++e) {
        for (int k = 0; k < q.n_skills(); ++k)
            if (q.at(e, k)) q.skills_of[e].push_back(k);
        require(!q.skills_of[e].empty(), "exercise with no skill: " + q.exercise_ids[e]);
    }
    return q;
}

QMatrix load_q_matrix(const std::string& path, const std::optional<std::string>& skill_vocab_path) {
    std::optional<std::vector<std::string>> vocab;
    if (skill_vocab_path) {
        std::ifstream in(*skill_vocab_path);
        require(in.good(), "cannot open skill vocabulary: " + *skill_vocab_path);
        vocab.emplace();
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line == "skill_id") continue;
            vocab->push_back(line);
        }
        require(!vocab->empty(), "empty skill vocabulary: " + *skill_vocab_path);
    }

    CsvReader reader(path);
    const int c_exercise = reader.column("exercise_id");
    const int c_skill = reader.column("skill_id");
    const size_t min_fields = static_cast<size_t>(std::max(c_exercise, c_skill)) + 1;
    std::vector<std::pair<std::string, std::string>> pairs;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        if (fields.size() < min_fields) reader.fail_at("malformed row: too few fields");
        if (fields[c_exercise].empty()) reader.fail_at("malformed row: empty exercise_id");
        if (fields[c_skill].empty())
            reader.fail_at("exercise with no skill: " + fields[c_exercise]);
        pairs.emplace_back(fields[c_exercise], fields[c_skill]);
    }
    try {
        return build_q_matrix(pairs, vocab ? &*vocab : nullptr);
    } catch (const Error& e) {
        fail(path + ": " + e.what());
    }
}

void save_q_matrix(const QMatrix& q, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << "exercise_id,skill_id\n";
    for (int e = 0; e < q.n_exercises(); ++e)
        for (int k : q.skills_of[e])
            out << csv_escape(q.exercise_ids[e]) << ',' << csv_escape(q.skill_ids[k]) << '\n';
    require(out.good(), "write failed: " + path);
}

void validate_log_against_q(const InteractionLog& log, const QMatrix& q) {
    for (const auto& r : log.records)
        require(q.exercise_index(r.exercise_id) >= 0,
                "log exercise not present in Q-matrix: " + r.exercise_id);
}

std::span<const InteractionRecord> SessionSplit::observed_records(const InteractionLog& log) const {
    return {log.records.data() + observed.first, static_cast<size_t>(observed.second - observed.first)};
}

std::span<const InteractionRecord> SessionSplit::heldout_records(const InteractionLog& log) const {
    return {log.records.data() + heldout.first, static_cast<size_t>(heldout.second - heldout.first)};
}

SessionSplit split_holdout(const InteractionLog& log, const std::string& student, double fraction,
                           std::uint64_t seed) {
    require(fraction >= 0.0 && fraction < 1.0, "split_holdout: fraction must lie in [0, 1)");
    const int s = log.student_index(student);
    require(s >= 0, "unknown student: " + student);
    const auto [begin, end] = log.student_spans[s];
    const int n = end - begin;
    require(n >= 2, "split_holdout: student " + student + " has fewer than 2 records");
    const int observed = static_cast<int>(std::ceil((1.0 - fraction) * n));
    require(observed < n, "split_holdout: fraction " + std::to_string(fraction) +
                              " leaves the heldout set empty for student " + student);
    SessionSplit split;
    split.student_id = student;
    split.observed = {begin, begin + observed};
    split.heldout = {begin + observed, end};
    split.seed = seed;
    return split;
}

DenseLog to_dense(const InteractionLog& log, const QMatrix& q) {
    DenseLog d;
    d.n_students = log.n_students();
    d.n_exercises = q.n_exercises();
    d.student_spans = log.student_spans;
    d.records.reserve(log.records.size());
    int s = -1;
    for (size_t i = 0; i < log.records.size(); ++i) {
        while (s + 1 < log.n_students() &&
               static_cast<size_t>(log.student_spans[s + 1].first) <= i)
            ++s;
        const auto& r = log.records[i];
        const int e = q.exercise_index(r.exercise_id);
        require(e >= 0, "log exercise not present in Q-matrix: " + r.exercise_id);
        d.records.push_back({s, e, r.correct, r.timestamp});
    }
    return d;
}

}  // namespace kgeir
