#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace uqaudit {

// Grid of (metric name x subgroup name) -> value, plus run identity. A cell
// can be present but undefined (nullopt): e.g. tpr of a subgroup with no
// positives. Missing and undefined both poison derived parity values.
struct MetricsTable {
    std::string model;
    std::uint64_t seed = 0;
    std::string dataset_id;

    std::vector<std::string> metric_order;
    std::vector<std::string> subgroup_order;
    std::map<std::string, std::map<std::string, std::optional<double>>> cells;

    void set(const std::string& metric, const std::string& subgroup,
             std::optional<double> value);
    bool has(const std::string& metric, const std::string& subgroup) const;
    // Missing cells read as undefined.
    std::optional<double> get(const std::string& metric,
                              const std::string& subgroup) const;
};

enum class ParityKind { difference, ratio };
enum class DisparityClass { parity, discrimination, reverse_discrimination, undefined };

std::string to_string(ParityKind kind);
std::string to_string(DisparityClass cls);

struct ParityEntry {
    std::string metric;     // e.g. "statistical_parity_difference"
    std::string attribute;  // sensitive attribute or "a&b" intersection
    std::optional<double> value;
    ParityKind kind = ParityKind::difference;
    DisparityClass classification = DisparityClass::undefined;
    std::string note;  // names the missing/undefined base cell, if any
};

struct ParityReport {
    std::vector<ParityEntry> entries;
    double tolerance = 0.05;
    bool favorable_positive = true;
};

// dis - priv; undefined input -> nullopt.
std::optional<double> diff_metric(std::optional<double> dis_value,
                                  std::optional<double> priv_value);
// dis / priv; undefined input or priv == 0 -> nullopt.
std::optional<double> ratio_metric(std::optional<double> dis_value,
                                   std::optional<double> priv_value);

// Neutral band: |diff| <= tolerance, ratio in [1-tolerance, 1+tolerance].
// Outside the band the sign maps to discrimination vs reverse discrimination;
// favorable_positive flips the mapping only for the positive-rate metrics
// (statistical parity difference, disparate impact).
DisparityClass classify_disparity(const ParityEntry& entry,
                                  bool favorable_positive, double tolerance);

// Derives the parity metrics for each attribute from its "<attr>_priv" and
// "<attr>_dis" grid columns: equalized-odds violations (delta tpr, delta
// fpr), disparate impact, statistical parity difference, accuracy parity,
// label stability ratio, jitter/std/iqr parity. Entries come back classified.
ParityReport compose_parity(const MetricsTable& table,
                            const std::vector<std::string>& attributes,
                            bool favorable_positive = true,
                            double tolerance = 0.05);

}  // namespace uqaudit
