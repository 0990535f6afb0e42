#include "kgeir/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "kgeir/error.hpp"
#include "kgeir/representativeness.hpp"

namespace kgeir {

std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
    require(scores.size() == labels.size(), "auc: score/label size mismatch");
    const size_t n = scores.size();
    std::int64_t n_pos = 0;
    for (int y : labels) {
        require(y == 0 || y == 1, "auc: labels must be 0 or 1");
        n_pos += y;
    }
    const std::int64_t n_neg = static_cast<std::int64_t>(n) - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // average ranks over tie groups, then the Mann-Whitney statistic
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (size_t t = i; t <= j; ++t)
            if (labels[order[t]] == 1) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double accuracy(std::span<const double> scores, std::span<const int> labels) {
    require(scores.size() == labels.size() && !scores.empty(), "accuracy: bad inputs");
    std::int64_t hits = 0;
    for (size_t i = 0; i < scores.size(); ++i)
        hits += (scores[i] >= 0.5 ? 1 : 0) == labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(scores.size());
}

double cov_metric(std::span<const int> tested, const QMatrix& q) { return skc(tested, q); }

}  // namespace kgeir
