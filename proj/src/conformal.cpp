#include "uqaudit/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "uqaudit/errors.hpp"

namespace uqaudit {

double score(ScoreKind kind, double model_output, double candidate_y) {
    switch (kind) {
        case ScoreKind::abs_residual:
            return std::abs(candidate_y - model_output);
        case ScoreKind::one_minus_proba: {
            if (candidate_y != 0.0 && candidate_y != 1.0)
                throw ValidationError("score: classification candidate label must be 0 or 1");
            const double p = candidate_y == 1.0 ? model_output : 1.0 - model_output;
            return 1.0 - p;
        }
    }
    throw std::logic_error("unknown score kind");
}

CalibrationRecord calibrate(std::vector<double> scores, double alpha,
                            bool corrected) {
    if (scores.empty()) throw ValidationError("calibrate: empty calibration set");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ValidationError("calibrate: alpha must lie in (0, 1)");
    std::sort(scores.begin(), scores.end());
    const auto n = scores.size();

    CalibrationRecord rec;
    rec.alpha = alpha;
    rec.corrected = corrected;
    // The nudge keeps e.g. 0.9 * 10 = 9.000000000000002 at rank 9.
    const auto nudged_ceil = [](double v) {
        return static_cast<std::size_t>(std::ceil(v - 1e-9));
    };
    if (corrected) {
        // ceil((n+1)(1-alpha))-th smallest; rank beyond n means the quantile
        // is unattainable and every candidate is accepted.
        const auto rank = nudged_ceil((static_cast<double>(n) + 1.0) * (1.0 - alpha));
        if (rank > n) {
            rec.q_hat = std::numeric_limits<double>::infinity();
        } else {
            rec.q_hat = scores[rank - 1];
        }
    } else {
        auto rank = nudged_ceil(static_cast<double>(n) * (1.0 - alpha));
        rank = std::min(std::max<std::size_t>(rank, 1), n);
        rec.q_hat = scores[rank - 1];
    }
    rec.scores = std::move(scores);
    return rec;
}

PredictionSet predict_set(double p_one, const CalibrationRecord& record,
                          bool force_nonempty) {
    PredictionSet set;
    set.alpha = record.alpha;
    set.score_zero = score(ScoreKind::one_minus_proba, p_one, 0.0);
    set.score_one = score(ScoreKind::one_minus_proba, p_one, 1.0);
    set.contains_zero = set.score_zero <= record.q_hat;
    set.contains_one = set.score_one <= record.q_hat;
    if (force_nonempty && set.size() == 0) {
        if (p_one >= 0.5) {
            set.contains_one = true;
        } else {
            set.contains_zero = true;
        }
    }
    return set;
}

PredictiveInterval predict_interval(double y_hat, const CalibrationRecord& record) {
    PredictiveInterval iv;
    iv.alpha = record.alpha;
    iv.method = IntervalMethod::conformal;
    iv.lower = y_hat - record.q_hat;
    iv.upper = y_hat + record.q_hat;
    if (iv.bounded()) {
        iv.finite_lower = iv.lower;
        iv.finite_upper = iv.upper;
    }
    return iv;
}

CoverageStats evaluate_coverage(std::span<const PredictiveInterval> intervals,
                                std::span<const double> truths) {
    if (intervals.size() != truths.size())
        throw ValidationError("evaluate_coverage: size mismatch");
    if (intervals.empty()) throw ValidationError("evaluate_coverage: empty input");
    std::size_t covered = 0, unbounded = 0;
    double width_sum = 0.0;
    std::size_t width_n = 0;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        if (intervals[i].covers(truths[i])) ++covered;
        if (intervals[i].bounded()) {
            width_sum += intervals[i].width();
            ++width_n;
        } else {
            ++unbounded;
        }
    }
    CoverageStats stats;
    stats.coverage = static_cast<double>(covered) / static_cast<double>(intervals.size());
    if (width_n > 0) stats.mean_width = width_sum / static_cast<double>(width_n);
    stats.unbounded_count = unbounded;
    return stats;
}

CoverageStats evaluate_coverage(std::span<const PredictionSet> sets,
                                std::span<const double> truths) {
    if (sets.size() != truths.size())
        throw ValidationError("evaluate_coverage: size mismatch");
    if (sets.empty()) throw ValidationError("evaluate_coverage: empty input");
    std::size_t covered = 0;
    double size_sum = 0.0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        if (sets[i].covers(truths[i])) ++covered;
        size_sum += sets[i].size();
    }
    CoverageStats stats;
    stats.coverage = static_cast<double>(covered) / static_cast<double>(sets.size());
    stats.mean_width = size_sum / static_cast<double>(sets.size());
    stats.unbounded_count = 0;
    return stats;
}

}  // namespace uqaudit
