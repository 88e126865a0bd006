#pragma once

#include <cstdint>
#include <vector>

#include "uqaudit/matrix.hpp"

namespace uqaudit {

// Ensemble outputs on an evaluation set: one row per member, one column per
// sample. Labels are derived from the probabilities at a fixed threshold.
struct PredictiveMatrix {
    Matrix probabilities;              // b x m
    std::vector<std::uint8_t> labels;  // row-major b x m
    double threshold = 0.5;

    std::size_t members() const { return probabilities.rows(); }
    std::size_t samples() const { return probabilities.cols(); }

    std::uint8_t label(std::size_t member, std::size_t sample) const {
        return labels[member * probabilities.cols() + sample];
    }
};

PredictiveMatrix make_predictive_matrix(Matrix probabilities, double threshold);

}  // namespace uqaudit
