#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "uqaudit/predictive_matrix.hpp"

namespace uqaudit {

// Per-sample instability measures over an ensemble's predictive matrix.
// Undefined values (empty subgroup, b < 2 for jitter) are nullopt, never 0.
struct StabilityProfile {
    std::vector<double> label_stability;  // |#pos - #neg| / b, in [0, 1]
    std::vector<double> jitter;           // mean pairwise label churn, in [0, 1]
    std::vector<double> std_dev;          // sample std (b-1 denominator)
    std::vector<double> iqr;              // Q75 - Q25, linear interpolation
    std::vector<double> entropy;          // optional; empty unless requested
};

// |#positives - #negatives| / b for one sample's label column.
double label_stability(std::span<const std::uint8_t> labels);

// Fraction of samples where the two members' labels disagree.
double pairwise_jitter(std::span<const std::uint8_t> labels_i,
                       std::span<const std::uint8_t> labels_j);

// Mean pairwise jitter over all unordered member pairs. Requires b >= 2.
double jitter(const PredictiveMatrix& matrix);

// Per-column sample standard deviation (b-1 denominator). Requires b >= 2.
std::vector<double> per_sample_std(const Matrix& probabilities);

// Per-column Q75 - Q25 with linear interpolation between order statistics.
std::vector<double> per_sample_iqr(const Matrix& probabilities);

// Binary entropy of the column's mean probability, with 0*ln(0) = 0.
double predictive_entropy(std::span<const double> probabilities);

// Arithmetic mean of a per-sample metric over a subgroup's sample positions.
std::optional<double> aggregate_over(std::span<const double> metric,
                                     std::span<const std::size_t> indices);

StabilityProfile stability_profile(const PredictiveMatrix& matrix,
                                   bool with_entropy = false);

// Linearly interpolated quantile of a sample, q in [0, 1].
double quantile_linear(std::vector<double> values, double q);

}  // namespace uqaudit
