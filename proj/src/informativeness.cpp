#include "kgeir/informativeness.hpp"

#include <algorithm>
#include <fstream>

#include "kgeir/csv.hpp"
#include "kgeir/error.hpp"

namespace kgeir {

InformativenessScore expected_model_change(const Cdm& model, int student, int exercise,
                                           std::span<const int> history) {
    const double p = model.predict(student, exercise, history);
    const std::vector<double> g1 = model.student_grad(student, exercise, 1, history);
    const std::vector<double> g0 = model.student_grad(student, exercise, 0, history);
    const double emc = p * norm2(g1) + (1.0 - p) * norm2(g0);
    return {exercise, emc};
}

std::vector<int> select_candidates(std::vector<InformativenessScore> scores, int k) {
    require(!scores.empty(), "select_candidates: empty score list");
    require(k >= 1, "select_candidates: K must be >= 1");
    std::sort(scores.begin(), scores.end(), [](const auto& x, const auto& y) {
        if (x.emc != y.emc) return x.emc > y.emc;
        return x.exercise < y.exercise;
    });
    const size_t take = std::min(scores.size(), static_cast<size_t>(k));
    std::vector<int> out;
    out.reserve(take);
    for (size_t i = 0; i < take; ++i) out.push_back(scores[i].exercise);
    return out;
}

void save_scores(const std::vector<InformativenessScore>& scores, const QMatrix& q,
                 const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << "exercise_id,emc\n";
    for (const auto& s : scores)
        out << csv_escape(q.exercise_ids.at(s.exercise)) << ',' << format_double(s.emc) << '\n';
    require(out.good(), "write failed: " + path);
}

}  // namespace kgeir
