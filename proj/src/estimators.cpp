#include "uqaudit/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>

#include "uqaudit/errors.hpp"
#include "uqaudit/kernels.hpp"
#include "uqaudit/rng.hpp"

namespace uqaudit {
namespace {

std::atomic<std::uint64_t> g_fit_count{0};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::uint64_t hash_training_data(const Matrix& features,
                                 const std::vector<double>& targets,
                                 std::uint64_t seed, ModelKind kind) {
    auto bytes = [](const void* p, std::size_t n) {
        return std::string_view(static_cast<const char*>(p), n);
    };
    std::uint64_t h = fnv1a64(bytes(features.storage().data(),
                                    features.storage().size() * sizeof(double)));
    h = fnv1a64(bytes(targets.data(), targets.size() * sizeof(double)), h);
    h = fnv1a64(bytes(&seed, sizeof(seed)), h);
    const int k = static_cast<int>(kind);
    return fnv1a64(bytes(&k, sizeof(k)), h);
}

void check_training_inputs(const ModelSpec& spec, const Matrix& features,
                           const std::vector<double>& targets) {
    if (features.rows() == 0) throw ValidationError("fit requires at least 1 row");
    if (features.cols() == 0) throw ValidationError("fit requires at least 1 feature");
    if (features.rows() != targets.size()) {
        throw ValidationError("feature rows and target length differ");
    }
    for (double v : features.storage()) {
        if (!std::isfinite(v)) throw ValidationError("non-finite feature value");
    }
    for (double y : targets) {
        if (!std::isfinite(y)) throw ValidationError("non-finite target value");
        if (spec.task == TaskKind::binary_classification && y != 0.0 && y != 1.0) {
            throw ValidationError("classification target outside {0, 1}");
        }
    }
}

}  // namespace

void ModelSpec::validate() const {
    switch (kind) {
        case ModelKind::logistic_regression:
            if (task != TaskKind::binary_classification) {
                throw ValidationError("logistic_regression supports binary_classification only");
            }
            if (learning_rate <= 0.0) throw ValidationError("learning_rate must be positive");
            if (iterations <= 0) throw ValidationError("iterations must be positive");
            if (l2 < 0.0) throw ValidationError("l2 must be nonnegative");
            break;
        case ModelKind::decision_tree:
            if (max_depth < 0) throw ValidationError("max_depth must be nonnegative");
            if (min_leaf <= 0) throw ValidationError("min_leaf must be positive");
            break;
        case ModelKind::knn:
            if (k <= 0) throw ValidationError("k must be positive");
            break;
    }
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "logistic_regression") return ModelKind::logistic_regression;
    if (s == "decision_tree") return ModelKind::decision_tree;
    if (s == "knn") return ModelKind::knn;
    throw ValidationError("unknown model kind '" + s + "'");
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::logistic_regression: return "logistic_regression";
        case ModelKind::decision_tree: return "decision_tree";
        case ModelKind::knn: return "knn";
    }
    return "?";
}

struct FittedModel::Impl {
    virtual ~Impl() = default;
    virtual double predict_row(std::span<const double> x) const = 0;
    std::size_t width = 0;
};

namespace {

struct LogisticImpl final : FittedModel::Impl {
    std::vector<double> weights;
    double bias = 0.0;

    double predict_row(std::span<const double> x) const override {
        return sigmoid(kernels::dot(x, weights) + bias);
    }
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean target = positive fraction for classification
};

struct TreeImpl final : FittedModel::Impl {
    std::vector<TreeNode> nodes;

    double predict_row(std::span<const double> x) const override {
        int idx = 0;
        while (nodes[idx].feature >= 0) {
            const TreeNode& node = nodes[idx];
            idx = x[static_cast<std::size_t>(node.feature)] <= node.threshold
                      ? node.left
                      : node.right;
        }
        return nodes[idx].value;
    }
};

struct KnnImpl final : FittedModel::Impl {
    Matrix train;
    std::vector<double> targets;
    int k = 1;

    double predict_row(std::span<const double> x) const override {
        const std::size_t n = train.rows();
        std::vector<std::pair<double, std::size_t>> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            dist[i] = {kernels::sq_dist(x, train.row(i)), i};
        }
        // Distance ties break toward the lowest training index.
        const std::size_t kk = static_cast<std::size_t>(k);
        std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
        double acc = 0.0;
        for (std::size_t i = 0; i < kk; ++i) acc += targets[dist[i].second];
        return acc / static_cast<double>(kk);
    }
};

std::shared_ptr<FittedModel::Impl> fit_logistic(const ModelSpec& spec,
                                                const Matrix& features,
                                                const std::vector<double>& targets) {
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    auto impl = std::make_shared<LogisticImpl>();
    impl->weights.assign(d, 0.0);

    std::vector<double> grad(d);
    for (int it = 0; it < spec.iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const auto row = features.row(r);
            const double p = sigmoid(kernels::dot(row, impl->weights) + impl->bias);
            const double residual = p - targets[r];
            kernels::axpy(residual, row, grad);
            grad_b += residual;
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t j = 0; j < d; ++j) {
            grad[j] = grad[j] * inv_n + spec.l2 * impl->weights[j];
        }
        grad_b *= inv_n;
        kernels::axpy(-spec.learning_rate, grad, impl->weights);
        impl->bias -= spec.learning_rate * grad_b;
    }
    return impl;
}

struct SplitCandidate {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double impurity = std::numeric_limits<double>::infinity();
};

double subset_impurity(TaskKind task, double count, double sum, double sumsq) {
    if (count <= 0.0) return 0.0;
    if (task == TaskKind::binary_classification) {
        const double p = sum / count;  // targets are 0/1
        return 2.0 * p * (1.0 - p);    // Gini for two classes
    }
    const double mean = sum / count;
    return sumsq / count - mean * mean;  // variance
}

void build_tree(const ModelSpec& spec, const Matrix& features,
                const std::vector<double>& targets, std::vector<std::size_t>& samples,
                int depth, std::vector<TreeNode>& nodes, int node_idx) {
    const double count = static_cast<double>(samples.size());
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t s : samples) {
        sum += targets[s];
        sumsq += targets[s] * targets[s];
    }
    nodes[node_idx].value = sum / count;

    const bool pure = subset_impurity(spec.task, count, sum, sumsq) <= 0.0;
    if (depth >= spec.max_depth || pure ||
        samples.size() < 2 * static_cast<std::size_t>(spec.min_leaf)) {
        return;
    }

    SplitCandidate best;
    std::vector<std::pair<double, double>> sorted;  // (feature value, target)
    for (std::size_t f = 0; f < features.cols(); ++f) {
        sorted.clear();
        sorted.reserve(samples.size());
        for (std::size_t s : samples) sorted.emplace_back(features.at(s, f), targets[s]);
        std::sort(sorted.begin(), sorted.end());

        double left_count = 0.0, left_sum = 0.0, left_sumsq = 0.0;
        for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
            left_count += 1.0;
            left_sum += sorted[i].second;
            left_sumsq += sorted[i].second * sorted[i].second;
            if (sorted[i].first == sorted[i + 1].first) continue;
            if (left_count < spec.min_leaf ||
                count - left_count < static_cast<double>(spec.min_leaf)) {
                continue;
            }
            const double threshold = sorted[i].first +
                                     0.5 * (sorted[i + 1].first - sorted[i].first);
            const double weighted =
                (left_count / count) *
                    subset_impurity(spec.task, left_count, left_sum, left_sumsq) +
                ((count - left_count) / count) *
                    subset_impurity(spec.task, count - left_count, sum - left_sum,
                                    sumsq - left_sumsq);
            // Strict improvement keeps ties on the lowest feature index, then
            // the lowest threshold.
            if (weighted < best.impurity) {
                best = {true, static_cast<int>(f), threshold, weighted};
            }
        }
    }
    if (!best.found) return;

    std::vector<std::size_t> left, right;
    for (std::size_t s : samples) {
        (features.at(s, static_cast<std::size_t>(best.feature)) <= best.threshold
             ? left
             : right)
            .push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();

    nodes[node_idx].feature = best.feature;
    nodes[node_idx].threshold = best.threshold;
    nodes[node_idx].left = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes[node_idx].right = static_cast<int>(nodes.size());
    nodes.emplace_back();
    build_tree(spec, features, targets, left, depth + 1, nodes, nodes[node_idx].left);
    build_tree(spec, features, targets, right, depth + 1, nodes, nodes[node_idx].right);
}

std::shared_ptr<FittedModel::Impl> fit_tree(const ModelSpec& spec,
                                            const Matrix& features,
                                            const std::vector<double>& targets) {
    auto impl = std::make_shared<TreeImpl>();
    impl->nodes.emplace_back();
    std::vector<std::size_t> samples(features.rows());
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = i;
    build_tree(spec, features, targets, samples, 0, impl->nodes, 0);
    return impl;
}

std::shared_ptr<FittedModel::Impl> fit_knn(const ModelSpec& spec,
                                           const Matrix& features,
                                           const std::vector<double>& targets) {
    if (static_cast<std::size_t>(spec.k) > features.rows()) {
        throw ValidationError("knn requires k <= training size (k=" +
                              std::to_string(spec.k) + ", n=" +
                              std::to_string(features.rows()) + ")");
    }
    auto impl = std::make_shared<KnnImpl>();
    impl->train = features;
    impl->targets = targets;
    impl->k = spec.k;
    return impl;
}

}  // namespace

double FittedModel::predict_row(std::span<const double> features) const {
    if (features.size() != impl_->width) {
        throw ValidationError("feature width " + std::to_string(features.size()) +
                              " does not match training width " +
                              std::to_string(impl_->width));
    }
    return impl_->predict_row(features);
}

std::vector<double> FittedModel::predict(const Matrix& features) const {
    std::vector<double> out(features.rows());
    for (std::size_t r = 0; r < features.rows(); ++r) {
        out[r] = predict_row(features.row(r));
    }
    return out;
}

FittedModel fit(const ModelSpec& spec, const Matrix& features,
                const std::vector<double>& targets, std::uint64_t seed) {
    spec.validate();
    check_training_inputs(spec, features, targets);

    FittedModel model;
    model.spec_ = spec;
    model.fingerprint_ = hash_training_data(features, targets, seed, spec.kind);

    std::shared_ptr<FittedModel::Impl> impl;
    switch (spec.kind) {
        case ModelKind::logistic_regression:
            impl = fit_logistic(spec, features, targets);
            break;
        case ModelKind::decision_tree:
            impl = fit_tree(spec, features, targets);
            break;
        case ModelKind::knn:
            impl = fit_knn(spec, features, targets);
            break;
    }
    impl->width = features.cols();
    model.impl_ = std::move(impl);
    g_fit_count.fetch_add(1, std::memory_order_relaxed);
    return model;
}

std::vector<double> predict_proba(const FittedModel& model, const Matrix& features) {
    return model.predict(features);
}

std::vector<std::uint8_t> predict_label(const std::vector<double>& probabilities,
                                        double threshold) {
    std::vector<std::uint8_t> out(probabilities.size());
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        out[i] = probabilities[i] >= threshold ? 1 : 0;
    }
    return out;
}

std::uint64_t fit_count() { return g_fit_count.load(std::memory_order_relaxed); }

double logistic_loss(const Matrix& features, const std::vector<double>& targets,
                     std::span<const double> weights, double bias, double l2) {
    const std::size_t n = features.rows();
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double z = kernels::dot(features.row(r), weights) + bias;
        // log(1 + e^z) - y*z, numerically stable form
        const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z))
                                        : std::log1p(std::exp(z));
        loss += softplus - targets[r] * z;
    }
    loss /= static_cast<double>(n);
    double reg = 0.0;
    for (double w : weights) reg += w * w;
    return loss + 0.5 * l2 * reg;
}

void logistic_loss_gradient(const Matrix& features, const std::vector<double>& targets,
                            std::span<const double> weights, double bias, double l2,
                            std::span<double> grad_w, double& grad_b) {
    const std::size_t n = features.rows();
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    grad_b = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = features.row(r);
        const double residual = sigmoid(kernels::dot(row, weights) + bias) - targets[r];
        kernels::axpy(residual, row, grad_w);
        grad_b += residual;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < grad_w.size(); ++j) {
        grad_w[j] = grad_w[j] * inv_n + l2 * weights[j];
    }
    grad_b *= inv_n;
}

}  // namespace uqaudit
