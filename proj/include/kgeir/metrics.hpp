#pragma once

#include <optional>
#include <span>

#include "kgeir/ingest.hpp"

namespace kgeir {

// Rank-based ROC AUC with half credit for ties (Mann-Whitney). Undefined
// (nullopt) when only one class is present.
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);

// fraction of predictions on the correct side of 0.5
double accuracy(std::span<const double> scores, std::span<const int> labels);

// Cov(s): fraction of all knowledge concepts present in the tested set
double cov_metric(std::span<const int> tested, const QMatrix& q);

}  // namespace kgeir
