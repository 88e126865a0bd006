#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "uqaudit/dataset.hpp"
#include "uqaudit/matrix.hpp"

namespace uqaudit {

enum class ModelKind { logistic_regression, decision_tree, knn };

struct ModelSpec {
    ModelKind kind = ModelKind::logistic_regression;
    TaskKind task = TaskKind::binary_classification;

    // logistic regression
    double learning_rate = 0.1;
    int iterations = 500;
    double l2 = 1e-4;
    // decision tree
    int max_depth = 5;
    int min_leaf = 1;
    // knn
    int k = 5;

    void validate() const;
};

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind kind);

// Immutable fitted estimator. Prediction is a pure function of the learned
// state and the input row.
class FittedModel {
public:
    struct Impl;

    const ModelSpec& spec() const { return spec_; }
    std::uint64_t fingerprint() const { return fingerprint_; }

    double predict_row(std::span<const double> features) const;
    std::vector<double> predict(const Matrix& features) const;

private:
    friend FittedModel fit(const ModelSpec&, const Matrix&,
                           const std::vector<double>&, std::uint64_t);
    ModelSpec spec_;
    std::uint64_t fingerprint_ = 0;
    std::shared_ptr<const Impl> impl_;
};

// Deterministic given (features, targets, seed). Increments the process-wide
// fit counter.
FittedModel fit(const ModelSpec& spec, const Matrix& features,
                const std::vector<double>& targets, std::uint64_t seed);

// Classification: P(y=1) per row. Regression: point predictions.
std::vector<double> predict_proba(const FittedModel& model, const Matrix& features);

// label = 1 iff probability >= threshold.
std::vector<std::uint8_t> predict_label(const std::vector<double>& probabilities,
                                        double threshold = 0.5);

// Total fit() calls in this process; used to verify no-refit contracts.
std::uint64_t fit_count();

// Log-loss gradient at (weights, bias), exposed for the finite-difference
// check in the tests.
void logistic_loss_gradient(const Matrix& features, const std::vector<double>& targets,
                            std::span<const double> weights, double bias, double l2,
                            std::span<double> grad_w, double& grad_b);
double logistic_loss(const Matrix& features, const std::vector<double>& targets,
                     std::span<const double> weights, double bias, double l2);

}  // namespace uqaudit
