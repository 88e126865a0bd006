#include "uqaudit/stability.hpp"

#include <algorithm>
#include <cmath>

#include "uqaudit/errors.hpp"
#include "uqaudit/kernels.hpp"

namespace uqaudit {

PredictiveMatrix make_predictive_matrix(Matrix probabilities, double threshold) {
    PredictiveMatrix pm;
    pm.threshold = threshold;
    pm.labels.resize(probabilities.rows() * probabilities.cols());
    const auto& data = probabilities.storage();
    for (std::size_t i = 0; i < data.size(); ++i) {
        pm.labels[i] = data[i] >= threshold ? 1 : 0;
    }
    pm.probabilities = std::move(probabilities);
    return pm;
}

double label_stability(std::span<const std::uint8_t> labels) {
    if (labels.empty()) throw ValidationError("label_stability requires b >= 1");
    std::int64_t positives = 0;
    for (std::uint8_t l : labels) positives += l;
    const std::int64_t b = static_cast<std::int64_t>(labels.size());
    return static_cast<double>(std::abs(2 * positives - b)) / static_cast<double>(b);
}

double pairwise_jitter(std::span<const std::uint8_t> labels_i,
                       std::span<const std::uint8_t> labels_j) {
    if (labels_i.size() != labels_j.size() || labels_i.empty()) {
        throw ValidationError("pairwise_jitter requires equal nonzero lengths");
    }
    std::size_t disagreements = 0;
    for (std::size_t s = 0; s < labels_i.size(); ++s) {
        disagreements += labels_i[s] != labels_j[s] ? 1 : 0;
    }
    return static_cast<double>(disagreements) / static_cast<double>(labels_i.size());
}

namespace {

// Positive-label count per sample column.
std::vector<std::size_t> positives_per_sample(const PredictiveMatrix& matrix) {
    std::vector<std::size_t> counts(matrix.samples(), 0);
    for (std::size_t i = 0; i < matrix.members(); ++i) {
        for (std::size_t s = 0; s < matrix.samples(); ++s) {
            counts[s] += matrix.label(i, s);
        }
    }
    return counts;
}

}  // namespace

double jitter(const PredictiveMatrix& matrix) {
    const std::size_t b = matrix.members();
    const std::size_t m = matrix.samples();
    if (b < 2) throw ValidationError("jitter requires at least 2 ensemble members");
    if (m == 0) throw ValidationError("jitter requires at least 1 sample");
    // Sum over member pairs of their disagreement counts equals
    // sum over samples of k*(b-k), with k the sample's positive count.
    const auto counts = positives_per_sample(matrix);
    std::uint64_t disagreements = 0;
    for (std::size_t k : counts) disagreements += static_cast<std::uint64_t>(k) * (b - k);
    const double pairs = 0.5 * static_cast<double>(b) * static_cast<double>(b - 1);
    return static_cast<double>(disagreements) / (pairs * static_cast<double>(m));
}

std::vector<double> per_sample_std(const Matrix& probabilities) {
    const std::size_t b = probabilities.rows();
    if (b < 2) throw ValidationError("per_sample_std requires at least 2 members");
    std::vector<double> out(probabilities.cols());
    for (std::size_t s = 0; s < probabilities.cols(); ++s) {
        const auto column = probabilities.column(s);
        const double mean = kernels::sum(column) / static_cast<double>(b);
        out[s] = std::sqrt(kernels::sumsq_dev(column, mean) / static_cast<double>(b - 1));
    }
    return out;
}

double quantile_linear(std::vector<double> values, double q) {
    if (values.empty()) throw ValidationError("quantile of empty sample");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

std::vector<double> per_sample_iqr(const Matrix& probabilities) {
    const std::size_t b = probabilities.rows();
    if (b < 2) throw ValidationError("per_sample_iqr requires at least 2 members");
    std::vector<double> out(probabilities.cols());
    for (std::size_t s = 0; s < probabilities.cols(); ++s) {
        auto column = probabilities.column(s);
        std::sort(column.begin(), column.end());
        const auto q = [&](double p) {
            const double pos = p * static_cast<double>(b - 1);
            const std::size_t lo = static_cast<std::size_t>(pos);
            if (lo + 1 >= b) return column.back();
            return column[lo] + (pos - static_cast<double>(lo)) * (column[lo + 1] - column[lo]);
        };
        out[s] = q(0.75) - q(0.25);
    }
    return out;
}

double predictive_entropy(std::span<const double> probabilities) {
    if (probabilities.empty()) throw ValidationError("predictive_entropy requires b >= 1");
    const double mean =
        kernels::sum(probabilities) / static_cast<double>(probabilities.size());
    auto term = [](double p) { return p > 0.0 ? -p * std::log(p) : 0.0; };
    return term(mean) + term(1.0 - mean);
}

std::optional<double> aggregate_over(std::span<const double> metric,
                                     std::span<const std::size_t> indices) {
    if (indices.empty()) return std::nullopt;
    double acc = 0.0;
    for (std::size_t idx : indices) acc += metric[idx];
    return acc / static_cast<double>(indices.size());
}

StabilityProfile stability_profile(const PredictiveMatrix& matrix, bool with_entropy) {
    const std::size_t b = matrix.members();
    const std::size_t m = matrix.samples();
    if (b < 2) throw ValidationError("stability profile requires at least 2 members");

    StabilityProfile profile;
    profile.label_stability.resize(m);
    profile.jitter.resize(m);

    const auto counts = positives_per_sample(matrix);
    const double bd = static_cast<double>(b);
    for (std::size_t s = 0; s < m; ++s) {
        const double k = static_cast<double>(counts[s]);
        profile.label_stability[s] = std::abs(2.0 * k - bd) / bd;
        profile.jitter[s] = 2.0 * k * (bd - k) / (bd * (bd - 1.0));
    }
    profile.std_dev = per_sample_std(matrix.probabilities);
    profile.iqr = per_sample_iqr(matrix.probabilities);
    if (with_entropy) {
        profile.entropy.resize(m);
        for (std::size_t s = 0; s < m; ++s) {
            profile.entropy[s] = predictive_entropy(matrix.probabilities.column(s));
        }
    }
    return profile;
}

}  // namespace uqaudit
