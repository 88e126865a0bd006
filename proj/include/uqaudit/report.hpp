#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uqaudit/runner.hpp"

namespace uqaudit {

// One row of the interval-method comparison: coverage, width/set size, fit
// cost, and stage wall time, traceable to its record file.
struct ComparisonRow {
    std::string model;
    std::uint64_t seed = 0;
    std::string method;
    double alpha = 0.1;
    std::optional<double> coverage;
    std::optional<double> mean_width;
    std::size_t unbounded = 0;
    std::size_t excluded_samples = 0;
    std::uint64_t fits = 0;
    std::optional<double> wall_ms;  // absent when no timing sidecar was loaded
    std::string record_file;
};

// Per (model, metric, subgroup) spread across seeds. Undefined cells are
// skipped; count says how many seeds contributed.
struct AggregateRow {
    std::string model;
    std::string metric;
    std::string subgroup;
    std::size_t count = 0;
    std::optional<double> mean;
    std::optional<double> stddev;  // sample std (n-1); absent when count < 2
    std::optional<double> min;
    std::optional<double> max;
};

std::vector<ComparisonRow> method_comparison(const std::vector<RunRecord>& records);
std::vector<AggregateRow> cross_seed_aggregates(const std::vector<RunRecord>& records);

std::string plain_summary(const std::vector<RunRecord>& records);

// Writes metrics, parity, comparison and aggregate tables plus summary.txt
// into out_dir. format is "csv" or "json". Rows are fully sorted, so the same
// records always produce byte-identical files. Returns the paths written.
std::vector<std::string> emit_tables(const std::vector<RunRecord>& records,
                                     const std::string& out_dir,
                                     const std::string& format);

// 6-significant-digit formatting used for all CSV numbers.
std::string format_number(double value);

}  // namespace uqaudit
