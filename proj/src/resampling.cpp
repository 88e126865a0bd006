#include "uqaudit/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "uqaudit/conformal.hpp"
#include "uqaudit/errors.hpp"
#include "uqaudit/parallel.hpp"
#include "uqaudit/stability.hpp"

namespace uqaudit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// floor/ceil with a tiny nudge so that e.g. 0.9 * 10 = 9.000000000000002
// still counts as the integer it mathematically is.
std::int64_t rank_floor(double v) {
    return static_cast<std::int64_t>(std::floor(v + 1e-9));
}
std::int64_t rank_ceil(double v) {
    return static_cast<std::int64_t>(std::ceil(v - 1e-9));
}

double point_residual(TaskKind task, double prediction, double truth) {
    if (task == TaskKind::binary_classification)
        return score(ScoreKind::one_minus_proba, prediction, truth);
    return score(ScoreKind::abs_residual, prediction, truth);
}

Matrix gather_rows(const Matrix& features, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), features.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = features.row(rows[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

}  // namespace

std::vector<std::size_t> bootstrap_indices(std::size_t n, double fraction,
                                           RngStream& rng) {
    if (n < 1) throw ValidationError("bootstrap_indices: n must be >= 1");
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw ValidationError("bootstrap_indices: fraction must lie in (0, 1]");
    const auto count = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(n)));
    if (count == 0)
        throw ValidationError("bootstrap_indices: fraction * n rounds to zero draws");
    std::vector<std::size_t> bag(count);
    for (auto& idx : bag) idx = static_cast<std::size_t>(rng.next_below(n));
    return bag;
}

BootstrapEnsemble fit_bootstrap_ensemble(const ModelSpec& spec,
                                         const Matrix& features,
                                         const std::vector<double>& targets,
                                         std::size_t b, double fraction,
                                         std::uint64_t root_seed) {
    if (b < 1) throw ValidationError("fit_bootstrap_ensemble: b must be >= 1");
    if (features.rows() != targets.size())
        throw ValidationError("fit_bootstrap_ensemble: feature/target row mismatch");

    BootstrapEnsemble ens;
    ens.fraction = fraction;
    ens.member_seeds.resize(b);
    ens.bags.resize(b);
    // Seeds and bags are derived sequentially up front; the parallel fits
    // below only read them and write to their own slot.
    for (std::size_t j = 0; j < b; ++j) {
        ens.member_seeds[j] = derive_seed(root_seed, "member", j);
        RngStream bag_rng(derive_seed(root_seed, "bag", j));
        ens.bags[j] = bootstrap_indices(features.rows(), fraction, bag_rng);
    }
    ens.members.resize(b);
    parallel_for(b, [&](std::size_t j) {
        try {
            const Matrix bag_features = gather_rows(features, ens.bags[j]);
            std::vector<double> bag_targets(ens.bags[j].size());
            for (std::size_t r = 0; r < bag_targets.size(); ++r)
                bag_targets[r] = targets[ens.bags[j][r]];
            ens.members[j] = fit(spec, bag_features, bag_targets, ens.member_seeds[j]);
        } catch (const std::exception& e) {
            std::ostringstream msg;
            msg << "ensemble member " << j << ": " << e.what();
            throw ValidationError(msg.str());
        }
    });
    return ens;
}

PredictiveMatrix predict_distribution(const BootstrapEnsemble& ensemble,
                                      const Matrix& eval_features,
                                      double threshold) {
    if (ensemble.members.empty())
        throw ValidationError("predict_distribution: empty ensemble");
    Matrix probabilities(ensemble.size(), eval_features.rows());
    parallel_for(ensemble.size(), [&](std::size_t j) {
        const auto preds = ensemble.members[j].predict(eval_features);
        std::copy(preds.begin(), preds.end(), probabilities.row(j).begin());
    });
    return make_predictive_matrix(std::move(probabilities), threshold);
}

LooSet fit_jackknife(const ModelSpec& spec, const Matrix& features,
                     const std::vector<double>& targets, std::uint64_t seed) {
    const auto n = features.rows();
    if (n < 2) throw ValidationError("fit_jackknife: need at least 2 training rows");
    if (n != targets.size())
        throw ValidationError("fit_jackknife: feature/target row mismatch");

    LooSet loo;
    loo.models.resize(n);
    loo.residuals.resize(n);
    std::vector<std::uint64_t> seeds(n);
    for (std::size_t i = 0; i < n; ++i) seeds[i] = derive_seed(seed, "loo", i);

    parallel_for(n, [&](std::size_t i) {
        std::vector<std::size_t> keep;
        keep.reserve(n - 1);
        for (std::size_t r = 0; r < n; ++r)
            if (r != i) keep.push_back(r);
        const Matrix sub_features = gather_rows(features, keep);
        std::vector<double> sub_targets(n - 1);
        for (std::size_t r = 0; r < keep.size(); ++r) sub_targets[r] = targets[keep[r]];
        loo.models[i] = fit(spec, sub_features, sub_targets, seeds[i]);
        const double pred = loo.models[i].predict_row(features.row(i));
        loo.residuals[i] = point_residual(spec.task, pred, targets[i]);
    });
    return loo;
}

PredictiveInterval order_statistic_interval(std::span<const double> centers,
                                            std::span<const double> residuals,
                                            double alpha, IntervalMethod method) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ValidationError("order_statistic_interval: alpha must lie in (0, 1)");
    if (centers.size() != residuals.size() || centers.empty())
        throw ValidationError("order_statistic_interval: bad inputs");

    const auto n = centers.size();
    std::vector<double> lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
        lo[i] = centers[i] - residuals[i];
        hi[i] = centers[i] + residuals[i];
    }
    std::sort(lo.begin(), lo.end());
    std::sort(hi.begin(), hi.end());

    const auto np1 = static_cast<double>(n) + 1.0;
    const std::int64_t lo_rank = rank_floor(alpha * np1);
    const std::int64_t hi_rank = rank_ceil((1.0 - alpha) * np1);

    PredictiveInterval iv;
    iv.alpha = alpha;
    iv.method = method;
    if (lo_rank >= 1) {
        iv.lower = lo[static_cast<std::size_t>(lo_rank) - 1];
        iv.finite_lower = iv.lower;
    } else {
        iv.lower = -kInf;
        iv.finite_lower = lo.front();
    }
    if (hi_rank <= static_cast<std::int64_t>(n)) {
        iv.upper = hi[static_cast<std::size_t>(hi_rank) - 1];
        iv.finite_upper = iv.upper;
    } else {
        iv.upper = kInf;
        iv.finite_upper = hi.back();
    }
    return iv;
}

PredictiveInterval jackknife_plus_interval(const LooSet& loo,
                                           std::span<const double> x,
                                           double alpha) {
    if (loo.models.empty())
        throw ValidationError("jackknife_plus_interval: empty leave-one-out set");
    std::vector<double> centers(loo.size());
    for (std::size_t i = 0; i < loo.size(); ++i)
        centers[i] = loo.models[i].predict_row(x);
    return order_statistic_interval(centers, loo.residuals, alpha,
                                    IntervalMethod::jackknife_plus);
}

OobSets oob_prediction_sets(const BootstrapEnsemble& ensemble,
                            const Matrix& train_features,
                            const std::vector<double>& train_targets,
                            bool strict) {
    if (ensemble.bags.empty())
        throw ValidationError("oob_prediction_sets: ensemble has no recorded bags");
    const auto n = train_features.rows();
    if (n != train_targets.size())
        throw ValidationError("oob_prediction_sets: feature/target row mismatch");
    const auto b = ensemble.size();
    const TaskKind task = ensemble.members.front().spec().task;

    // in_bag[j] = sorted unique view of bag j; a sample drawn any number of
    // times is in-bag.
    std::vector<std::unordered_set<std::size_t>> in_bag(b);
    for (std::size_t j = 0; j < b; ++j)
        in_bag[j].insert(ensemble.bags[j].begin(), ensemble.bags[j].end());

    OobSets oob;
    oob.member_sets.resize(n);
    oob.aggregates.assign(n, std::numeric_limits<double>::quiet_NaN());
    oob.residuals.assign(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < b; ++j)
            if (!in_bag[j].contains(i)) oob.member_sets[i].push_back(j);
        if (oob.member_sets[i].empty()) {
            oob.uncovered.push_back(i);
        } else {
            oob.covered.push_back(i);
        }
    }
    if (strict && !oob.uncovered.empty()) {
        std::ostringstream msg;
        msg << "out-of-bag coverage gap: " << oob.uncovered.size()
            << " training sample(s) appear in every bag:";
        for (auto i : oob.uncovered) msg << ' ' << i;
        throw ValidationError(msg.str());
    }

    parallel_for(oob.covered.size(), [&](std::size_t c) {
        const std::size_t i = oob.covered[c];
        double sum = 0.0;
        for (auto j : oob.member_sets[i])
            sum += ensemble.members[j].predict_row(train_features.row(i));
        const double agg = sum / static_cast<double>(oob.member_sets[i].size());
        oob.aggregates[i] = agg;
        oob.residuals[i] = point_residual(task, agg, train_targets[i]);
    });
    return oob;
}

PredictiveInterval jab_interval(const BootstrapEnsemble& ensemble,
                                const OobSets& oob, std::span<const double> x,
                                double alpha) {
    if (oob.covered.empty())
        throw ValidationError("jab_interval: no sample has an out-of-bag member");
    // One prediction per member at x; every per-sample aggregate reuses them.
    std::vector<double> member_pred(ensemble.size());
    for (std::size_t j = 0; j < ensemble.size(); ++j)
        member_pred[j] = ensemble.members[j].predict_row(x);

    std::vector<double> centers(oob.covered.size());
    std::vector<double> residuals(oob.covered.size());
    for (std::size_t c = 0; c < oob.covered.size(); ++c) {
        const std::size_t i = oob.covered[c];
        double sum = 0.0;
        for (auto j : oob.member_sets[i]) sum += member_pred[j];
        centers[c] = sum / static_cast<double>(oob.member_sets[i].size());
        residuals[c] = oob.residuals[i];
    }
    return order_statistic_interval(centers, residuals, alpha, IntervalMethod::jab);
}

PredictiveInterval bootstrap_percentile_interval(
    std::vector<double> member_predictions, double alpha) {
    if (member_predictions.empty())
        throw ValidationError("bootstrap_percentile_interval: empty predictions");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ValidationError("bootstrap_percentile_interval: alpha must lie in (0, 1)");
    PredictiveInterval iv;
    iv.alpha = alpha;
    iv.method = IntervalMethod::bootstrap_percentile;
    iv.lower = quantile_linear(member_predictions, alpha / 2.0);
    iv.upper = quantile_linear(std::move(member_predictions), 1.0 - alpha / 2.0);
    iv.finite_lower = iv.lower;
    iv.finite_upper = iv.upper;
    return iv;
}

}  // namespace uqaudit
