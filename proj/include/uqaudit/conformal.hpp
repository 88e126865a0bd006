#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uqaudit/estimators.hpp"
#include "uqaudit/interval.hpp"

namespace uqaudit {

// abs_residual for regression, one_minus_proba for classification. Larger
// score = larger disagreement.
enum class ScoreKind { abs_residual, one_minus_proba };

struct CalibrationRecord {
    std::vector<double> scores;  // sorted ascending
    double alpha = 0.1;
    double q_hat = 0.0;  // +inf when the order index exceeds n_cal
    bool corrected = true;

    bool unbounded() const { return std::isinf(q_hat); }
};

// Per-sample conformal prediction set over the binary labels.
struct PredictionSet {
    bool contains_zero = false;
    bool contains_one = false;
    double score_zero = 0.0;
    double score_one = 0.0;
    double alpha = 0.1;

    int size() const { return (contains_zero ? 1 : 0) + (contains_one ? 1 : 0); }
    bool covers(double y) const { return y == 1.0 ? contains_one : contains_zero; }
};

struct CoverageStats {
    double coverage = 0.0;
    // Mean interval width or mean set size; unbounded intervals are counted
    // separately and excluded from the mean.
    std::optional<double> mean_width;
    std::size_t unbounded_count = 0;
};

// model_output is P(y=1) for classification, the point prediction for
// regression.
double score(ScoreKind kind, double model_output, double candidate_y);

// q_hat = the ceil((n+1)(1-alpha))-th smallest score; the index overflowing n
// yields +inf. With corrected=false the plain ceil(n(1-alpha))-th empirical
// order statistic is used instead (no finite-sample guarantee).
CalibrationRecord calibrate(std::vector<double> scores, double alpha,
                            bool corrected = true);

// Label y enters the set iff score(x, y) <= q_hat. Empty sets are returned
// as-is unless force_nonempty adds the top-probability label.
PredictionSet predict_set(double p_one, const CalibrationRecord& record,
                          bool force_nonempty = false);

PredictiveInterval predict_interval(double y_hat, const CalibrationRecord& record);

CoverageStats evaluate_coverage(std::span<const PredictiveInterval> intervals,
                                std::span<const double> truths);
CoverageStats evaluate_coverage(std::span<const PredictionSet> sets,
                                std::span<const double> truths);

}  // namespace uqaudit
