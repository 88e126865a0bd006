#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uqaudit/config.hpp"
#include "uqaudit/dataset.hpp"
#include "uqaudit/parity.hpp"

#include "json.hpp"

namespace uqaudit {

// Per-interval-method audit summary on the test split.
struct MethodSummary {
    std::string method;  // bootstrap_percentile | jackknife_plus | jab | conformal
    double alpha = 0.1;
    // Empirical test coverage; absent for the percentile heuristic, whose
    // probability band has no label-coverage meaning.
    std::optional<double> coverage;
    // Mean prediction-set size (classification) or mean interval width.
    std::optional<double> mean_width;
    std::size_t unbounded = 0;          // intervals with an infinite endpoint
    std::size_t excluded_samples = 0;   // training rows with no out-of-bag member
    std::uint64_t fits = 0;             // measured model fits this method required
};

struct RunRecord {
    int schema_version = 1;
    std::string dataset_id;
    std::string model;
    std::uint64_t seed = 0;
    std::uint64_t config_fingerprint = 0;
    std::uint64_t split_fingerprint = 0;
    bool failed = false;
    std::string failure_stage;    // pipeline stage that aborted the run
    std::string failure_message;
    double threshold = 0.5;
    MetricsTable metrics;
    ParityReport parity;
    std::vector<MethodSummary> methods;
    std::vector<std::string> warnings;

    // Wall-clock per stage, milliseconds. Not part of the canonical record:
    // persisted to a sidecar so record files stay byte-identical across runs.
    std::map<std::string, double> stage_ms;
};

nlohmann::json record_to_json(const RunRecord& record);
RunRecord record_from_json(const nlohmann::json& doc);

std::string record_filename(const RunRecord& record);
// Writes {dataset_id}_{model}_{seed}.json plus a .timings.json sidecar.
void persist(const RunRecord& record, const std::string& out_dir);

struct LoadResult {
    std::vector<RunRecord> records;
    std::vector<std::string> errors;  // "<file>: <reason>", loading continues
};
LoadResult load_records(const std::string& out_dir);

// Result of the standalone coverage evaluation (no ensembles, no persistence).
// Works for classification (prediction sets) and regression (intervals).
struct ConformalRun {
    std::string model;
    std::uint64_t seed = 0;
    double alpha = 0.1;
    double q_hat = 0.0;
    bool corrected = true;
    double coverage = 0.0;
    std::optional<double> mean_width;  // mean set size or mean interval width
    std::size_t unbounded = 0;
    std::size_t calibration_size = 0;
    std::size_t test_size = 0;
};

std::vector<ConformalRun> run_conformal(const RunConfig& config);

class AuditRunner {
public:
    // Loads and validates the dataset once; reused across runs.
    explicit AuditRunner(RunConfig config);

    const RunConfig& config() const { return config_; }
    const Dataset& data() const { return dataset_; }

    // Full pipeline for one (model, seed): split, preprocess, fit, bias
    // metrics, ensemble, stability metrics, parity, interval methods.
    // Failures become a persisted-able stub record, not an exception.
    RunRecord run_single(const std::string& model_name, std::uint64_t seed) const;

    // One record per roster model, all sharing the seed's split.
    std::vector<RunRecord> run_multi_model(std::uint64_t seed) const;

    // seeds x models grid, persisting after each run. (seed, model) pairs
    // already on disk are loaded, not recomputed.
    std::vector<RunRecord> run_multi_seed(const std::string& out_dir) const;

private:
    RunConfig config_;
    Dataset dataset_;
    std::uint64_t config_fp_ = 0;
};

}  // namespace uqaudit
