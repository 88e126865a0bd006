#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uqaudit/dataset.hpp"
#include "uqaudit/estimators.hpp"

namespace uqaudit {

struct MethodSettings {
    bool bootstrap_metrics = true;
    bool jackknife_plus = false;
    bool jab = false;
    bool conformal = false;
    std::vector<double> jackknife_alphas = {0.1};
    std::vector<double> jab_alphas = {0.1};
    std::vector<double> conformal_alphas = {0.1};
};

struct NamedModel {
    std::string name;
    ModelSpec spec;
};

struct RunConfig {
    std::string dataset_path;  // resolved relative to the config file
    std::string dataset_id;    // default: dataset file stem
    ColumnSchema schema;
    SubgroupSpec subgroups;

    double train_fraction = 0.8;
    double test_fraction = 0.1;
    double calibration_fraction = 0.1;

    std::size_t ensemble_size = 200;
    double bootstrap_fraction = 0.8;
    double threshold = 0.5;

    MethodSettings methods;
    std::vector<NamedModel> models;
    std::vector<std::uint64_t> seeds;

    bool favorable_positive = true;
    double tolerance = 0.05;
    bool with_entropy = false;

    // Set from CLI flags, not the config file.
    bool strict_oob = false;
    bool corrected_quantile = true;
    bool force_nonempty_sets = false;

    void validate() const;  // throws ConfigError

    // Stable hash of the resolved configuration (canonical serialized form).
    std::uint64_t fingerprint() const;
};

// Accepts YAML (.yaml/.yml) or JSON (.json); both are normalized into one
// representation before a single validation pass. Unknown keys are errors.
RunConfig parse_config(const std::string& path);

// Same, from an in-memory document ("yaml" or "json" syntax); base_dir
// resolves relative dataset paths.
RunConfig parse_config_text(const std::string& text, const std::string& syntax,
                            const std::string& base_dir);

}  // namespace uqaudit
