#pragma once

#include <limits>
#include <optional>

namespace uqaudit {

enum class IntervalMethod { jackknife_plus, jab, conformal, bootstrap_percentile };

// Predictive interval on the extended reals. When an order-statistic index
// under/overflows, the bound is the corresponding infinity and the finite
// extreme of the candidate set is kept alongside for reporting.
struct PredictiveInterval {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    double alpha = 0.1;
    IntervalMethod method = IntervalMethod::conformal;
    std::optional<double> finite_lower;  // set only when lower is -inf
    std::optional<double> finite_upper;  // set only when upper is +inf

    bool covers(double y) const { return lower <= y && y <= upper; }
    bool bounded() const {
        return lower > -std::numeric_limits<double>::infinity() &&
               upper < std::numeric_limits<double>::infinity();
    }
    double width() const { return upper - lower; }
};

}  // namespace uqaudit
