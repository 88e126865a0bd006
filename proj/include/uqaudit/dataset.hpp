#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "uqaudit/matrix.hpp"

namespace uqaudit {

enum class TaskKind { binary_classification, regression };

struct SensitiveColumn {
    std::string name;
    // When true and the column is not already a declared feature, it is
    // treated as an extra categorical feature.
    bool as_feature = true;
};

struct ColumnSchema {
    std::string target;
    TaskKind task = TaskKind::binary_classification;
    std::vector<std::string> numericals;
    std::vector<std::string> categoricals;
    std::vector<SensitiveColumn> sensitive;

    // Checks the schema's internal invariants (throws SchemaError).
    void validate() const;

    bool is_sensitive(const std::string& column) const;
};

struct SubgroupAttribute {
    std::string column;
    std::string privileged_value;
};

struct SubgroupSpec {
    std::vector<SubgroupAttribute> attributes;
    // Each entry crosses >= 2 declared attributes, e.g. {"sex", "race"}.
    std::vector<std::vector<std::string>> intersections;

    void validate(const ColumnSchema& schema) const;
};

// Column-major tabular dataset. Raw cells are kept as strings; the target and
// declared numerical columns are parsed at load time. Immutable after load.
struct Dataset {
    ColumnSchema schema;
    std::vector<std::string> columns;  // CSV header order
    std::unordered_map<std::string, std::size_t> column_index;
    std::vector<std::vector<std::string>> cells;  // [column][row]
    std::vector<double> targets;
    std::size_t n_rows = 0;

    const std::vector<std::string>& column(const std::string& name) const;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::vector<std::size_t> calibration;
};

// name -> row indices (subsets of the split handed to partition_subgroups).
// Empty vectors mark subgroups with no members.
using SubgroupPartition = std::map<std::string, std::vector<std::size_t>>;

struct Preprocessor {
    struct NumericStats {
        double mean = 0.0;
        double stddev = 1.0;  // population convention; 1 when train variance is 0
    };
    // Feature layout: numericals in schema order, then categorical blocks in
    // schema order (sensitive-as-feature columns appended last). Categorical
    // vocabularies are in first-seen-in-train order.
    std::vector<std::string> numerical_columns;
    std::vector<std::string> categorical_columns;
    std::unordered_map<std::string, NumericStats> numeric_stats;
    std::unordered_map<std::string, std::vector<std::string>> vocabularies;
    std::vector<std::string> warnings;
    std::size_t width = 0;
};

Dataset load_csv(const std::string& path, const ColumnSchema& schema);

// Deterministic shuffle split. Sizes are round(fraction*n) for test and
// calibration; leftover rows go to train when the fractions sum to 1.
SplitIndices split(const Dataset& dataset, double train_frac, double test_frac,
                   double calibration_frac, std::uint64_t seed);

// Emits "<attr>_priv"/"<attr>_dis" per attribute, "<a>&<b>_priv"/"_dis" per
// intersection, and "overall". Intersectional membership requires all member
// attributes privileged (priv) or all non-privileged (dis); mixed rows belong
// to neither.
SubgroupPartition partition_subgroups(const Dataset& dataset,
                                      const std::vector<std::size_t>& split,
                                      const SubgroupSpec& spec);

Preprocessor fit_preprocessor(const Dataset& dataset,
                              const std::vector<std::size_t>& train);

// Unseen categories encode as an all-zeros block.
Matrix transform(const Preprocessor& preproc, const Dataset& dataset,
                 const std::vector<std::size_t>& indices);

std::vector<double> gather_targets(const Dataset& dataset,
                                   const std::vector<std::size_t>& indices);

}  // namespace uqaudit
