#include "uqaudit/bias.hpp"

#include "uqaudit/errors.hpp"

namespace uqaudit {

ConfusionCounts confusion_counts(std::span<const std::uint8_t> y_true,
                                 std::span<const std::uint8_t> y_pred) {
    if (y_true.size() != y_pred.size() || y_true.empty()) {
        throw ValidationError("confusion_counts requires equal nonzero lengths");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] == 1) {
            y_pred[i] == 1 ? ++c.tp : ++c.fn;
        } else {
            y_pred[i] == 1 ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

RateSet rates(const ConfusionCounts& c) {
    auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    RateSet r;
    r.tpr = ratio(c.tp, c.tp + c.fn);
    r.fnr = ratio(c.fn, c.fn + c.tp);
    r.tnr = ratio(c.tn, c.tn + c.fp);
    r.fpr = ratio(c.fp, c.fp + c.tn);
    r.accuracy = ratio(c.tp + c.tn, c.total());
    r.positive_rate = ratio(c.tp + c.fp, c.total());
    return r;
}

std::map<std::string, RateSet> subgroup_rates(
    std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred,
    const std::map<std::string, std::vector<std::size_t>>& partition) {
    if (y_true.size() != y_pred.size()) {
        throw ValidationError("subgroup_rates requires equal lengths");
    }
    std::map<std::string, RateSet> out;
    for (const auto& [name, indices] : partition) {
        if (indices.empty()) {
            out[name] = RateSet{};  // all-undefined, flags the empty subgroup
            continue;
        }
        ConfusionCounts c;
        for (std::size_t idx : indices) {
            if (idx >= y_true.size()) {
                throw ValidationError("subgroup index out of range in '" + name + "'");
            }
            if (y_true[idx] == 1) {
                y_pred[idx] == 1 ? ++c.tp : ++c.fn;
            } else {
                y_pred[idx] == 1 ? ++c.fp : ++c.tn;
            }
        }
        out[name] = rates(c);
    }
    if (out.count("overall") == 0 && !y_true.empty()) {
        out["overall"] = rates(confusion_counts(y_true, y_pred));
    }
    return out;
}

}  // namespace uqaudit
