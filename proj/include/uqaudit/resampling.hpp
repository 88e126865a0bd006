#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uqaudit/estimators.hpp"
#include "uqaudit/interval.hpp"
#include "uqaudit/matrix.hpp"
#include "uqaudit/predictive_matrix.hpp"
#include "uqaudit/rng.hpp"

namespace uqaudit {

// Ensemble of models fit on with-replacement resamples of the training set.
// Bags are kept so out-of-bag machinery can prove sample exclusion later.
struct BootstrapEnsemble {
    std::vector<FittedModel> members;
    std::vector<std::vector<std::size_t>> bags;  // with-replacement draws
    std::vector<std::uint64_t> member_seeds;
    double fraction = 0.8;

    std::size_t size() const { return members.size(); }
};

// Leave-one-out model set: model i never sees training row i. Residuals are
// |y_i - pred_i| for regression and 1 - p(y_i) for classification.
struct LooSet {
    std::vector<FittedModel> models;
    std::vector<double> residuals;

    std::size_t size() const { return models.size(); }
};

// Per-training-sample out-of-bag bookkeeping for an ensemble.
struct OobSets {
    // member_sets[i] = indices of members whose bag excludes sample i.
    std::vector<std::vector<std::size_t>> member_sets;
    // Mean prediction of those members on sample i itself (NaN when empty).
    std::vector<double> aggregates;
    std::vector<double> residuals;  // NaN when no out-of-bag member exists
    std::vector<std::size_t> covered;    // samples with >= 1 excluded member
    std::vector<std::size_t> uncovered;  // samples every bag contains
};

// round(fraction * n) uniform draws with replacement from [0, n).
std::vector<std::size_t> bootstrap_indices(std::size_t n, double fraction,
                                           RngStream& rng);

// Member j is fit on bag j with seed derive_seed(root_seed, "member", j);
// bag j is drawn from derive_seed(root_seed, "bag", j). Fits run in
// parallel; seeds and bags are fixed up front so the result is identical at
// any worker count.
BootstrapEnsemble fit_bootstrap_ensemble(const ModelSpec& spec,
                                         const Matrix& features,
                                         const std::vector<double>& targets,
                                         std::size_t b, double fraction,
                                         std::uint64_t root_seed);

PredictiveMatrix predict_distribution(const BootstrapEnsemble& ensemble,
                                      const Matrix& eval_features,
                                      double threshold);

// n leave-one-out fits, model i seeded with derive_seed(seed, "loo", i).
LooSet fit_jackknife(const ModelSpec& spec, const Matrix& features,
                     const std::vector<double>& targets, std::uint64_t seed);

// lower = floor(alpha*(n+1))-th smallest of {pred_i(x) - R_i}, upper =
// ceil((1-alpha)*(n+1))-th smallest of {pred_i(x) + R_i}. Out-of-range order
// indices become -inf/+inf with the finite extreme kept alongside.
PredictiveInterval jackknife_plus_interval(const LooSet& loo,
                                           std::span<const double> x,
                                           double alpha);

// strict: any sample contained in every bag is an error; otherwise such
// samples are listed in `uncovered` and skipped downstream.
OobSets oob_prediction_sets(const BootstrapEnsemble& ensemble,
                            const Matrix& train_features,
                            const std::vector<double>& train_targets,
                            bool strict = false);

// Jackknife+ construction with the leave-one-out prediction replaced by the
// mean over sample i's out-of-bag members evaluated at x. Reuses the already
// fitted ensemble; performs no fits.
PredictiveInterval jab_interval(const BootstrapEnsemble& ensemble,
                                const OobSets& oob, std::span<const double> x,
                                double alpha);

// Empirical [alpha/2, 1-alpha/2] percentiles of the member predictions at one
// point. No coverage guarantee; reported as a labeled heuristic only.
PredictiveInterval bootstrap_percentile_interval(
    std::vector<double> member_predictions, double alpha);

// Shared order-statistic core for jackknife_plus_interval / jab_interval:
// takes the per-model centers and residuals directly.
PredictiveInterval order_statistic_interval(std::span<const double> centers,
                                            std::span<const double> residuals,
                                            double alpha, IntervalMethod method);

}  // namespace uqaudit
