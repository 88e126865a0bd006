#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uqaudit {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
};

// Rates with zero denominators are nullopt; parity composition propagates
// the marker instead of inventing a 0 or 1.
struct RateSet {
    std::optional<double> tpr;
    std::optional<double> fpr;
    std::optional<double> tnr;
    std::optional<double> fnr;
    std::optional<double> accuracy;
    std::optional<double> positive_rate;
};

ConfusionCounts confusion_counts(std::span<const std::uint8_t> y_true,
                                 std::span<const std::uint8_t> y_pred);

RateSet rates(const ConfusionCounts& counts);

// Rates restricted to each subgroup's positional indices into the prediction
// vectors. An "overall" entry over all samples is always present.
std::map<std::string, RateSet> subgroup_rates(
    std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred,
    const std::map<std::string, std::vector<std::size_t>>& partition);

}  // namespace uqaudit
