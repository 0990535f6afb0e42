#include "kgeir/representativeness.hpp"

#include <cmath>
#include <set>

#include "kgeir/error.hpp"

namespace kgeir {

namespace {
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace

double skc(std::span<const int> exercises, const QMatrix& q) {
    require(q.n_skills() >= 1, "skc: no skills");
    std::vector<char> covered(q.n_skills(), 0);
    for (int e : exercises)
        for (int k : q.skills_of[e]) covered[k] = 1;
    int count = 0;
    for (char c : covered) count += c;
    return static_cast<double>(count) / static_cast<double>(q.n_skills());
}

double ecov(int cnt, EcovVariant variant) {
    require(cnt >= 0, "ecov: negative count");
    switch (variant) {
        case EcovVariant::Saturating:
            return 2.0 * sigmoid(static_cast<double>(cnt)) - 1.0;
        case EcovVariant::Literal:
            return static_cast<double>(cnt) * sigmoid(static_cast<double>(cnt));
    }
    fail("ecov: invalid variant");
}

CoverageState CoverageState::make(const QMatrix& q, std::vector<double> weights,
                                  EcovVariant variant) {
    require(static_cast<int>(weights.size()) == q.n_skills(),
            "coverage state: weight count does not match skill count");
    CoverageState s;
    s.cnt.assign(q.n_skills(), 0);
    s.weights = std::move(weights);
    s.variant = variant;
    return s;
}

void CoverageState::add(int exercise, const QMatrix& q) {
    for (int k : q.skills_of[exercise]) ++cnt[k];
}

double CoverageState::ewkc() const {
    double num = 0.0;
    double denom = 0.0;
    for (size_t k = 0; k < cnt.size(); ++k) {
        num += weights[k] * ecov(cnt[k], variant);
        denom += weights[k];
    }
    require(denom > 0.0, "ewkc: all-zero skill weights");
    return num / denom;
}

double CoverageState::ewkc_with(int exercise, const QMatrix& q) const {
    double num = 0.0;
    double denom = 0.0;
    for (size_t k = 0; k < cnt.size(); ++k) {
        const int c = cnt[k] + (q.at(exercise, static_cast<int>(k)) ? 1 : 0);
        num += weights[k] * ecov(c, variant);
        denom += weights[k];
    }
    require(denom > 0.0, "ewkc: all-zero skill weights");
    return num / denom;
}

double ewkc(const CoverageState& state) { return state.ewkc(); }

Matrix response_matrix(const Cdm& model, const DenseLog& log) {
    require(model.n_students() >= log.n_students, "response_matrix: student vocabulary mismatch");
    Matrix pn(log.n_students, log.n_exercises);
    for (int s = 0; s < log.n_students; ++s) {
        const auto records = log.student_records(s);
        std::vector<int> history;
        std::set<int> answered;
        history.reserve(records.size());
        for (const auto& r : records) {
            history.push_back(r.exercise);
            answered.insert(r.exercise);
        }
        for (int e : answered) pn(s, e) = model.predict(s, e, history);
    }
    return pn;
}

Matrix dissimilarity(const Matrix& e_star) {
    Matrix d(e_star.rows, e_star.rows);
    std::vector<double> norms(e_star.rows);
    for (int i = 0; i < e_star.rows; ++i) {
        norms[i] = norm2(e_star.row(i));
        require(norms[i] > 0.0, "dissimilarity: zero-norm embedding for exercise index " +
                                    std::to_string(i));
    }
    for (int i = 0; i < e_star.rows; ++i)
        for (int j = i + 1; j < e_star.rows; ++j) {
            const double v = 1.0 - dot(e_star.row(i), e_star.row(j)) / (norms[i] * norms[j]);
            d(i, j) = v;
            d(j, i) = v;
        }
    return d;
}

double mean_dissimilarity(const Matrix& e_star, int candidate, std::span<const int> tested) {
    if (tested.empty()) return 1.0;  // neutral across candidates at step 1
    const double nc = norm2(e_star.row(candidate));
    require(nc > 0.0, "dissimilarity: zero-norm embedding for exercise index " +
                          std::to_string(candidate));
    double total = 0.0;
    for (int t : tested) {
        const double nt = norm2(e_star.row(t));
        require(nt > 0.0, "dissimilarity: zero-norm embedding for exercise index " +
                              std::to_string(t));
        total += 1.0 - dot(e_star.row(candidate), e_star.row(t)) / (nc * nt);
    }
    return total / static_cast<double>(tested.size());
}

ReprScore representativeness_score(int candidate, const ReprContext& ctx) {
    require(ctx.state != nullptr && ctx.q != nullptr, "representativeness: missing context");
    ReprScore s;
    s.coverage_term = ctx.alphas.alpha1 * ctx.state->ewkc_with(candidate, *ctx.q);
    s.pn_term = ctx.alphas.alpha2 * (ctx.pn ? ctx.pn(candidate) : 0.0);
    s.diss_term = ctx.alphas.alpha3 * (ctx.diss ? ctx.diss(candidate) : 0.0);
    s.total = s.coverage_term + s.pn_term + s.diss_term;
    return s;
}

int select_representative(std::span<const int> candidates, const ReprContext& ctx,
                          std::vector<ReprScore>* audit) {
    require(!candidates.empty(), "select_representative: empty candidate list");
    int best = -1;
    double best_total = 0.0;
    for (int c : candidates) {
        const ReprScore s = representativeness_score(c, ctx);
        if (audit) audit->push_back(s);
        if (best < 0 || s.total > best_total || (s.total == best_total && c < best)) {
            best = c;
            best_total = s.total;
        }
    }
    return best;
}

}  // namespace kgeir
