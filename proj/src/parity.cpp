#include "uqaudit/parity.hpp"

#include <algorithm>
#include <cmath>

#include "uqaudit/errors.hpp"

namespace uqaudit {

void MetricsTable::set(const std::string& metric, const std::string& subgroup,
                       std::optional<double> value) {
    if (!cells.count(metric)) metric_order.push_back(metric);
    if (std::find(subgroup_order.begin(), subgroup_order.end(), subgroup) ==
        subgroup_order.end())
        subgroup_order.push_back(subgroup);
    cells[metric][subgroup] = value;
}

bool MetricsTable::has(const std::string& metric, const std::string& subgroup) const {
    const auto m = cells.find(metric);
    return m != cells.end() && m->second.count(subgroup) > 0;
}

std::optional<double> MetricsTable::get(const std::string& metric,
                                        const std::string& subgroup) const {
    const auto m = cells.find(metric);
    if (m == cells.end()) return std::nullopt;
    const auto s = m->second.find(subgroup);
    if (s == m->second.end()) return std::nullopt;
    return s->second;
}

std::string to_string(ParityKind kind) {
    return kind == ParityKind::difference ? "difference" : "ratio";
}

std::string to_string(DisparityClass cls) {
    switch (cls) {
        case DisparityClass::parity: return "parity";
        case DisparityClass::discrimination: return "discrimination";
        case DisparityClass::reverse_discrimination: return "reverse_discrimination";
        case DisparityClass::undefined: return "undefined";
    }
    return "undefined";
}

std::optional<double> diff_metric(std::optional<double> dis_value,
                                  std::optional<double> priv_value) {
    if (!dis_value || !priv_value) return std::nullopt;
    return *dis_value - *priv_value;
}

std::optional<double> ratio_metric(std::optional<double> dis_value,
                                   std::optional<double> priv_value) {
    if (!dis_value || !priv_value) return std::nullopt;
    if (*priv_value == 0.0) return std::nullopt;
    return *dis_value / *priv_value;
}

namespace {

// What an above-band value means, and whether favorable_positive flips it.
struct ClassRule {
    DisparityClass above;
    bool flips;
};

std::optional<ClassRule> rule_for(const std::string& metric) {
    // Variance metrics: more instability on dis is discrimination either way.
    if (metric == "jitter_parity" || metric == "std_parity" ||
        metric == "iqr_parity")
        return ClassRule{DisparityClass::discrimination, false};
    // Higher stability on dis is reverse discrimination either way.
    if (metric == "label_stability_ratio")
        return ClassRule{DisparityClass::reverse_discrimination, false};
    if (metric == "equalized_odds_tpr" || metric == "equalized_odds_fpr")
        return ClassRule{DisparityClass::discrimination, false};
    if (metric == "accuracy_parity")
        return ClassRule{DisparityClass::reverse_discrimination, false};
    // Positive-rate metrics depend on whether a positive label is favorable.
    if (metric == "statistical_parity_difference" || metric == "disparate_impact")
        return ClassRule{DisparityClass::reverse_discrimination, true};
    return std::nullopt;
}

DisparityClass opposite(DisparityClass cls) {
    return cls == DisparityClass::discrimination
               ? DisparityClass::reverse_discrimination
               : DisparityClass::discrimination;
}

}  // namespace

DisparityClass classify_disparity(const ParityEntry& entry,
                                  bool favorable_positive, double tolerance) {
    if (!(tolerance > 0.0))
        throw ValidationError("classify_disparity: tolerance must be > 0");
    if (!entry.value || !std::isfinite(*entry.value))
        return DisparityClass::undefined;
    const auto rule = rule_for(entry.metric);
    if (!rule) throw ValidationError("classify_disparity: unknown metric " + entry.metric);

    // Closed neutral band, stated on the value itself so the representable
    // edges (e.g. a ratio of exactly 1.05 at tolerance 0.05) stay inside.
    const double neutral = entry.kind == ParityKind::ratio ? 1.0 : 0.0;
    if (*entry.value >= neutral - tolerance && *entry.value <= neutral + tolerance)
        return DisparityClass::parity;
    const double deviation = *entry.value - neutral;

    DisparityClass above = rule->above;
    if (rule->flips && !favorable_positive) above = opposite(above);
    return deviation > 0.0 ? above : opposite(above);
}

namespace {

struct ParitySpec {
    const char* parity_name;
    const char* base_metric;
    ParityKind kind;
};

constexpr ParitySpec kParitySpecs[] = {
    {"equalized_odds_tpr", "tpr", ParityKind::difference},
    {"equalized_odds_fpr", "fpr", ParityKind::difference},
    {"disparate_impact", "positive_rate", ParityKind::ratio},
    {"statistical_parity_difference", "positive_rate", ParityKind::difference},
    {"accuracy_parity", "accuracy", ParityKind::difference},
    {"label_stability_ratio", "label_stability", ParityKind::ratio},
    {"jitter_parity", "jitter", ParityKind::difference},
    {"std_parity", "std", ParityKind::difference},
    {"iqr_parity", "iqr", ParityKind::difference},
};

}  // namespace

ParityReport compose_parity(const MetricsTable& table,
                            const std::vector<std::string>& attributes,
                            bool favorable_positive, double tolerance) {
    ParityReport report;
    report.tolerance = tolerance;
    report.favorable_positive = favorable_positive;

    for (const auto& attr : attributes) {
        const std::string priv_col = attr + "_priv";
        const std::string dis_col = attr + "_dis";
        for (const auto& spec : kParitySpecs) {
            ParityEntry entry;
            entry.metric = spec.parity_name;
            entry.attribute = attr;
            entry.kind = spec.kind;

            if (!table.has(spec.base_metric, priv_col) ||
                !table.has(spec.base_metric, dis_col)) {
                entry.note = std::string("missing base cell: ") + spec.base_metric;
            } else {
                const auto dis = table.get(spec.base_metric, dis_col);
                const auto priv = table.get(spec.base_metric, priv_col);
                entry.value = spec.kind == ParityKind::ratio
                                  ? ratio_metric(dis, priv)
                                  : diff_metric(dis, priv);
                if (!entry.value)
                    entry.note = std::string("undefined base value: ") + spec.base_metric;
            }
            entry.classification =
                classify_disparity(entry, favorable_positive, tolerance);
            report.entries.push_back(std::move(entry));
        }
    }
    return report;
}

}  // namespace uqaudit
