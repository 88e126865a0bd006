// End-to-end acceptance checks: statistical coverage guarantees, metric
// identities, classification-scheme conformance, reproducibility, and cost
// accounting. Each check prints exactly one PASS/FAIL line; the exit code is
// the number of failures.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "uqaudit/bias.hpp"
#include "uqaudit/conformal.hpp"
#include "uqaudit/config.hpp"
#include "uqaudit/estimators.hpp"
#include "uqaudit/parity.hpp"
#include "uqaudit/report.hpp"
#include "uqaudit/resampling.hpp"
#include "uqaudit/rng.hpp"
#include "uqaudit/runner.hpp"
#include "uqaudit/stability.hpp"

namespace fs = std::filesystem;
using namespace uqaudit;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& message) {
    if (!condition) throw Failure(message);
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

// y = 2x + eps with symmetric noise; x in [-2, 2].
void make_regression(RngStream& rng, std::size_t n, Matrix& x, std::vector<double>& y) {
    x = Matrix(n, 1);
    y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = rng.next_double() * 4.0 - 2.0;
        x.at(i, 0) = xi;
        y[i] = 2.0 * xi + 0.3 * rng.next_normal();
    }
}

ModelSpec knn_regressor(int k) {
    ModelSpec spec;
    spec.kind = ModelKind::knn;
    spec.task = TaskKind::regression;
    spec.k = k;
    return spec;
}

// --- 1: split conformal coverage on held-out synthetic regression ----------

std::string check_split_conformal_coverage() {
    const auto start = std::chrono::steady_clock::now();
    const ModelSpec spec = knn_regressor(5);
    const double alpha = 0.1;
    double coverage_sum = 0.0;
    const int n_seeds = 50;
    for (int s = 1; s <= n_seeds; ++s) {
        RngStream rng(derive_seed(static_cast<std::uint64_t>(s), "acceptance-sc"));
        Matrix x_train, x_cal, x_test;
        std::vector<double> y_train, y_cal, y_test;
        make_regression(rng, 200, x_train, y_train);
        make_regression(rng, 500, x_cal, y_cal);
        make_regression(rng, 2000, x_test, y_test);

        const FittedModel model =
            fit(spec, x_train, y_train, derive_seed(s, "acceptance-sc-fit"));
        const auto p_cal = model.predict(x_cal);
        std::vector<double> scores(p_cal.size());
        for (std::size_t i = 0; i < p_cal.size(); ++i)
            scores[i] = score(ScoreKind::abs_residual, p_cal[i], y_cal[i]);
        const auto record = calibrate(scores, alpha, true);

        const auto p_test = model.predict(x_test);
        std::vector<PredictiveInterval> intervals;
        intervals.reserve(p_test.size());
        for (const double y_hat : p_test)
            intervals.push_back(predict_interval(y_hat, record));
        coverage_sum +=
            evaluate_coverage(std::span<const PredictiveInterval>(intervals), y_test)
                .coverage;
    }
    const double mean = coverage_sum / n_seeds;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    require(mean >= 0.88 && mean <= 0.93,
            "mean coverage " + fmt("%.4f", mean) + " outside [0.88, 0.93]");
    require(mean >= 1.0 - alpha - 0.01,
            "mean coverage " + fmt("%.4f", mean) + " below 0.89");
    require(seconds < 30.0, "took " + fmt("%.1f", seconds) + "s (limit 30s)");
    return "mean coverage " + fmt("%.4f", mean) + " over 50 seeds at alpha 0.1";
}

// --- 2: jackknife+ interval coverage ---------------------------------------

std::string check_jackknife_plus_coverage() {
    const auto start = std::chrono::steady_clock::now();
    const ModelSpec spec = knn_regressor(5);
    const int trials = 1000;
    int covered = 0;
    for (int t = 0; t < trials; ++t) {
        RngStream rng(derive_seed(static_cast<std::uint64_t>(t), "acceptance-jk"));
        Matrix x_train, x_test;
        std::vector<double> y_train, y_test;
        make_regression(rng, 100, x_train, y_train);
        make_regression(rng, 1, x_test, y_test);

        const LooSet loo = fit_jackknife(spec, x_train, y_train,
                                         derive_seed(t, "acceptance-jk-loo"));
        const auto interval = jackknife_plus_interval(loo, x_test.row(0), 0.1);
        if (interval.covers(y_test[0])) ++covered;
    }
    const double coverage = static_cast<double>(covered) / trials;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    require(coverage >= 0.78,
            "coverage " + fmt("%.4f", coverage) + " below the 0.78 floor (1-2a-0.02)");
    require(seconds < 120.0, "took " + fmt("%.1f", seconds) + "s (limit 120s)");
    return "coverage " + fmt("%.4f", coverage) + " over 1000 train/test trials";
}

// --- 3: jackknife+ after bootstrap refits nothing --------------------------

std::string check_jab_no_refit() {
    ModelSpec spec;
    spec.kind = ModelKind::knn;
    spec.k = 5;
    const std::size_t n = 100, b = 200;
    RngStream rng(derive_seed(7, "acceptance-jab"));
    Matrix x(n, 1);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x.at(i, 0) = rng.next_double() * 4.0 - 2.0;
        y[i] = x.at(i, 0) + 0.5 * rng.next_normal() > 0.0 ? 1.0 : 0.0;
    }

    const std::uint64_t before_ensemble = fit_count();
    const BootstrapEnsemble ensemble =
        fit_bootstrap_ensemble(spec, x, y, b, 0.8, derive_seed(7, "acceptance-ens"));
    const std::uint64_t ensemble_fits = fit_count() - before_ensemble;
    require(ensemble_fits == b,
            "ensemble performed " + std::to_string(ensemble_fits) + " fits, not 200");

    const OobSets oob = oob_prediction_sets(ensemble, x, y);
    const std::uint64_t before_intervals = fit_count();
    for (int t = 0; t < 50; ++t) {
        const double q = -2.0 + 4.0 * t / 49.0;
        const std::array<double, 1> point{q};
        (void)jab_interval(ensemble, oob, point, 0.1);
    }
    require(fit_count() == before_intervals,
            "interval construction triggered extra model fits");

    // Every out-of-bag member really excludes its sample, over all pairs.
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<bool> in_bag(b, false);
        for (std::size_t j = 0; j < b; ++j)
            for (const std::size_t idx : ensemble.bags[j])
                if (idx == i) {
                    in_bag[j] = true;
                    break;
                }
        const std::set<std::size_t> excluded(oob.member_sets[i].begin(),
                                             oob.member_sets[i].end());
        for (std::size_t j = 0; j < b; ++j) {
            require(excluded.count(j) == (in_bag[j] ? 0u : 1u),
                    "bag membership mismatch for sample " + std::to_string(i) +
                        ", member " + std::to_string(j));
            ++pairs;
        }
    }
    return "200 fits for the ensemble, 0 for 50 intervals; " +
           std::to_string(pairs) + " bag-exclusion pairs verified";
}

// --- 4: stability metrics equal brute-force enumeration --------------------

std::string check_stability_brute_force() {
    RngStream rng(derive_seed(11, "acceptance-stab"));
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t b = 2 + rng.next_below(11);   // 2..12 members
        const std::size_t m = 1 + rng.next_below(20);   // 1..20 samples
        Matrix probs(b, m);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t s = 0; s < m; ++s) probs.at(i, s) = rng.next_double();
        const PredictiveMatrix matrix = make_predictive_matrix(probs, 0.5);
        const auto profile = stability_profile(matrix);

        std::uint64_t total_disagreements = 0;
        for (std::size_t s = 0; s < m; ++s) {
            std::size_t k = 0;
            for (std::size_t i = 0; i < b; ++i) k += matrix.label(i, s);
            // Label stability by direct count.
            const double ls = std::abs(static_cast<double>(2 * k) -
                                       static_cast<double>(b)) /
                              static_cast<double>(b);
            require(profile.label_stability[s] == ls,
                    "label stability differs from direct count");
            // Jitter by pair enumeration.
            std::uint64_t disagree = 0;
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = i + 1; j < b; ++j)
                    disagree += matrix.label(i, s) != matrix.label(j, s) ? 1 : 0;
            total_disagreements += disagree;
            const double pair_count = 0.5 * static_cast<double>(b) *
                                      static_cast<double>(b - 1);
            require(profile.jitter[s] == static_cast<double>(disagree) / pair_count,
                    "per-sample jitter differs from pair enumeration");
            // Closed-form identity at 1e-12.
            const double identity = static_cast<double>(b) * (1.0 - ls * ls) /
                                    (2.0 * (static_cast<double>(b) - 1.0));
            require(std::abs(profile.jitter[s] - identity) <= 1e-12,
                    "jitter identity b(1-LS^2)/(2(b-1)) violated");
        }

        // Pairwise jitter against a direct disagreement count.
        const auto row = [&](std::size_t i) {
            return std::span<const std::uint8_t>(matrix.labels.data() + i * m, m);
        };
        for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t j = i + 1; j < b; ++j) {
                std::size_t disagree = 0;
                for (std::size_t s = 0; s < m; ++s)
                    disagree += matrix.label(i, s) != matrix.label(j, s) ? 1 : 0;
                require(pairwise_jitter(row(i), row(j)) ==
                            static_cast<double>(disagree) / static_cast<double>(m),
                        "pairwise jitter differs from direct count");
            }
        }

        const double pair_count =
            0.5 * static_cast<double>(b) * static_cast<double>(b - 1);
        const double aggregate = static_cast<double>(total_disagreements) /
                                 (pair_count * static_cast<double>(m));
        require(jitter(matrix) == aggregate,
                "aggregate jitter differs from full pair enumeration");
    }
    return "200 random label matrices (b<=12, m<=20) match enumeration exactly";
}

// --- 5: parity fixed points and antisymmetry -------------------------------

const std::vector<std::string> kBaseMetrics = {
    "accuracy", "tpr", "fpr", "positive_rate", "label_stability",
    "jitter",   "std", "iqr"};

std::string check_parity_symmetry() {
    RngStream rng(derive_seed(13, "acceptance-parity"));
    for (int trial = 0; trial < 100; ++trial) {
        MetricsTable table;
        MetricsTable swapped;
        MetricsTable fixed;
        for (const auto& metric : kBaseMetrics) {
            const double priv = 0.05 + 0.9 * rng.next_double();
            const double dis = 0.05 + 0.9 * rng.next_double();
            table.set(metric, "g_priv", priv);
            table.set(metric, "g_dis", dis);
            swapped.set(metric, "g_priv", dis);
            swapped.set(metric, "g_dis", priv);
            fixed.set(metric, "g_priv", priv);
            fixed.set(metric, "g_dis", priv);
        }

        const auto fixed_report = compose_parity(fixed, {"g"});
        for (const auto& entry : fixed_report.entries) {
            const double neutral = entry.kind == ParityKind::ratio ? 1.0 : 0.0;
            require(entry.value.has_value() && *entry.value == neutral,
                    entry.metric + " not at its neutral value on identical inputs");
            require(entry.classification == DisparityClass::parity,
                    entry.metric + " not classified parity on identical inputs");
        }

        const auto forward = compose_parity(table, {"g"});
        const auto reversed = compose_parity(swapped, {"g"});
        require(forward.entries.size() == reversed.entries.size(),
                "entry count changed under role swap");
        for (std::size_t e = 0; e < forward.entries.size(); ++e) {
            const auto& f = forward.entries[e];
            const auto& r = reversed.entries[e];
            require(f.metric == r.metric, "entry order changed under role swap");
            require(f.value.has_value() && r.value.has_value(),
                    f.metric + " lost its value under role swap");
            if (f.kind == ParityKind::difference) {
                require(*r.value == -*f.value, f.metric + " did not negate");
            } else {
                require(std::abs(*f.value * *r.value - 1.0) <= 1e-12,
                        f.metric + " did not invert");
            }
        }
    }
    return "fixed points neutral and role swap negates/inverts on 100 tables";
}

// --- 6: disparity classification scheme ------------------------------------

std::string check_classification_scheme() {
    ParityEntry entry;
    entry.kind = ParityKind::difference;
    entry.value = 0.1;

    entry.metric = "accuracy_parity";  // disadvantaged group more accurate
    require(classify_disparity(entry, true, 0.05) ==
                DisparityClass::reverse_discrimination,
            "accuracy_parity > 0 must be reverse discrimination (favorable=1)");
    require(classify_disparity(entry, false, 0.05) ==
                DisparityClass::reverse_discrimination,
            "accuracy_parity > 0 must be reverse discrimination (favorable=0)");

    entry.metric = "std_parity";  // more instability on the disadvantaged group
    require(classify_disparity(entry, true, 0.05) == DisparityClass::discrimination,
            "std_parity > 0 must be discrimination (favorable=1)");
    require(classify_disparity(entry, false, 0.05) == DisparityClass::discrimination,
            "std_parity > 0 must be discrimination (favorable=0)");

    entry.metric = "statistical_parity_difference";
    require(classify_disparity(entry, true, 0.05) ==
                DisparityClass::reverse_discrimination,
            "SPD > 0 must be reverse discrimination when positive is favorable");
    require(classify_disparity(entry, false, 0.05) == DisparityClass::discrimination,
            "SPD > 0 must be discrimination when positive is unfavorable");
    return "accuracy/instability/positive-rate signs map to the expected classes";
}

// --- 7: end-to-end reproducibility across thread counts --------------------

void run_cli_or_throw(const std::string& args) {
    const char* cli = std::getenv("UQAUDIT_CLI");
    require(cli != nullptr, "UQAUDIT_CLI is not set");
    const std::string cmd =
        std::string("\"") + cli + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    require(WIFEXITED(status) && WEXITSTATUS(status) == 0,
            "command failed: " + cmd);
}

std::vector<std::string> record_names(const std::string& dir) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.size() > 5 && name.substr(name.size() - 5) == ".json" &&
            name.find(".timings.") == std::string::npos)
            names.push_back(name);
    }
    std::sort(names.begin(), names.end());
    return names;
}

void require_identical_files(const std::string& dir_a, const std::string& dir_b,
                             const std::vector<std::string>& names) {
    for (const auto& name : names) {
        require(testutil::read_file(dir_a + "/" + name) ==
                    testutil::read_file(dir_b + "/" + name),
                name + " differs between " + dir_a + " and " + dir_b);
    }
}

std::string check_reproducibility() {
    const char* fixtures = std::getenv("UQAUDIT_FIXTURE_DIR");
    require(fixtures != nullptr, "UQAUDIT_FIXTURE_DIR is not set");
    const std::string config =
        (fs::path(fixtures) / "audit.yaml").string();
    testutil::TempDir work("acceptance-repro");
    const std::string dir_a = work.file("a"), dir_b = work.file("b");

    run_cli_or_throw("audit \"" + config + "\" --out \"" + dir_a + "\" --threads 1");
    run_cli_or_throw("audit \"" + config + "\" --out \"" + dir_b + "\" --threads 8");

    const auto names = record_names(dir_a);
    require(names.size() == 9, "expected 9 records (3 models x 3 seeds), found " +
                                   std::to_string(names.size()));
    require(record_names(dir_b) == names, "record sets differ across thread counts");
    require_identical_files(dir_a, dir_b, names);

    // Simulated interruption: drop part of the grid and resume.
    for (const auto& name : {names[0], names[3], names[4], names[8]}) {
        fs::remove(dir_a + "/" + name);
        fs::remove(dir_a + "/" + name.substr(0, name.size() - 5) + ".timings.json");
    }
    run_cli_or_throw("audit \"" + config + "\" --out \"" + dir_a + "\" --threads 1");
    require(record_names(dir_a) == names, "resume changed the record set");
    require_identical_files(dir_a, dir_b, names);

    // Reports built from the same records must be byte-identical. Timing
    // sidecars legitimately differ run to run, so compare reports built from
    // the records alone.
    const std::string rec_a = work.file("rec_a"), rec_b = work.file("rec_b");
    fs::create_directories(rec_a);
    fs::create_directories(rec_b);
    for (const auto& name : names) {
        fs::copy_file(dir_a + "/" + name, rec_a + "/" + name);
        fs::copy_file(dir_b + "/" + name, rec_b + "/" + name);
    }
    run_cli_or_throw("report \"" + rec_a + "\"");
    run_cli_or_throw("report \"" + rec_b + "\"");
    require_identical_files(rec_a + "/report", rec_b + "/report",
                            {"metrics.csv", "parity.csv", "comparison.csv",
                             "aggregates.csv", "summary.txt"});
    return "9 records and 5 report tables byte-identical at 1 vs 8 threads, "
           "resume included";
}

// --- 8: confusion-rate identities ------------------------------------------

std::string check_bias_identities() {
    RngStream rng(derive_seed(17, "acceptance-bias"));
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng.next_below(50);
        std::vector<std::uint8_t> truths(n), preds(n);
        for (std::size_t i = 0; i < n; ++i) {
            truths[i] = rng.next_below(2) ? 1 : 0;
            preds[i] = rng.next_below(2) ? 1 : 0;
        }
        const auto counts = confusion_counts(truths, preds);
        const auto r = rates(counts);
        if (r.tpr) {
            require(r.fnr.has_value(), "tpr defined but fnr undefined");
            require(std::abs(*r.tpr + *r.fnr - 1.0) <= 1e-12, "tpr + fnr != 1");
        }
        if (r.tnr) {
            require(r.fpr.has_value(), "tnr defined but fpr undefined");
            require(std::abs(*r.tnr + *r.fpr - 1.0) <= 1e-12, "tnr + fpr != 1");
        }

        // Subgroup confusion counts partition the overall counts. Needs two
        // samples so both halves of the partition are nonempty.
        if (n < 2) continue;
        std::vector<std::uint8_t> t_even, p_even, t_odd, p_odd;
        for (std::size_t i = 0; i < n; ++i) {
            (i % 2 == 0 ? t_even : t_odd).push_back(truths[i]);
            (i % 2 == 0 ? p_even : p_odd).push_back(preds[i]);
        }
        const auto even = confusion_counts(t_even, p_even);
        const auto odd = confusion_counts(t_odd, p_odd);
        require(even.tp + odd.tp == counts.tp && even.fp + odd.fp == counts.fp &&
                    even.tn + odd.tn == counts.tn && even.fn + odd.fn == counts.fn,
                "subgroup confusion counts do not sum to the overall counts");
    }
    return "rate identities and count additivity hold on 500 random vectors";
}

// --- 9: configuration defaults ---------------------------------------------

std::string check_config_defaults() {
    testutil::TempDir dir("acceptance-defaults");
    testutil::write_file(dir.file("minimal.yaml"),
                         "dataset:\n"
                         "  path: toy.csv\n"
                         "schema:\n"
                         "  target: label\n"
                         "  numerical: [age]\n"
                         "  sensitive:\n"
                         "    - {name: sex, privileged: M}\n"
                         "models:\n"
                         "  - {kind: logistic_regression}\n"
                         "seeds: [1]\n");
    const RunConfig cfg = parse_config(dir.file("minimal.yaml"));
    require(cfg.ensemble_size == 200, "default ensemble size is not 200");
    require(cfg.bootstrap_fraction == 0.8, "default bootstrap fraction is not 0.8");
    require(cfg.train_fraction == 0.8 && cfg.test_fraction == 0.1 &&
                cfg.calibration_fraction == 0.1,
            "default splits are not 0.8/0.1/0.1");
    require(cfg.threshold == 0.5, "default label threshold is not 0.5");
    return "b=200, fraction=0.8, splits 0.8/0.1/0.1, threshold 0.5";
}

// --- 10: method comparison fit counts --------------------------------------

std::string check_fit_counts() {
    testutil::TempDir dir("acceptance-fits");
    std::string csv = "age,sex,label\n";
    for (int i = 0; i < 100; ++i) {
        const bool male = i % 2 == 0;
        const bool label = male ? (i % 4 != 0) : (i % 4 == 1);
        csv += std::to_string(20 + (i * 7) % 40) + "," + (male ? "M" : "F") + "," +
               std::to_string(label ? 1 : 0) + "\n";
    }
    testutil::write_file(dir.file("grid.csv"), csv);
    testutil::write_file(dir.file("audit.yaml"),
                         "dataset:\n"
                         "  path: grid.csv\n"
                         "schema:\n"
                         "  target: label\n"
                         "  numerical: [age]\n"
                         "  sensitive:\n"
                         "    - {name: sex, privileged: M}\n"
                         "splits: {train: 0.5, test: 0.25, calibration: 0.25}\n"
                         "methods:\n"
                         "  jackknife_plus: true\n"
                         "  jab: true\n"
                         "  conformal: true\n"
                         "models:\n"
                         "  - {name: knn, kind: knn, k: 5}\n"
                         "seeds: [3]\n");

    const AuditRunner runner(parse_config(dir.file("audit.yaml")));
    const RunRecord record = runner.run_single("knn", 3);
    require(!record.failed, "audit failed: " + record.failure_message);

    const auto rows = method_comparison({record});
    std::map<std::string, std::uint64_t> fits;
    for (const auto& row : rows) fits[row.method] = row.fits;
    require(fits.at("jackknife_plus") == 50,
            "jackknife+ fits = " + std::to_string(fits.at("jackknife_plus")) +
                ", expected 50 (one per training row)");
    require(fits.at("jab") == 200,
            "jab fits = " + std::to_string(fits.at("jab")) +
                ", expected 200 (the ensemble, no refits)");
    require(fits.at("conformal") == 1,
            "conformal fits = " + std::to_string(fits.at("conformal")) +
                ", expected 1");
    return "fits: jackknife+ 50, jab 200, conformal 1 on a 50-row training split";
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<std::string()> body;
    };
    const std::vector<Criterion> criteria = {
        {"split conformal coverage on synthetic regression",
         check_split_conformal_coverage},
        {"jackknife+ coverage on synthetic regression", check_jackknife_plus_coverage},
        {"jackknife+ after bootstrap performs no refits", check_jab_no_refit},
        {"stability metrics match brute-force enumeration",
         check_stability_brute_force},
        {"parity fixed points and antisymmetry", check_parity_symmetry},
        {"disparity classification scheme", check_classification_scheme},
        {"byte-identical audits across thread counts and resume",
         check_reproducibility},
        {"confusion-rate identities and count additivity", check_bias_identities},
        {"configuration defaults", check_config_defaults},
        {"method comparison fit counts", check_fit_counts},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        std::string verdict, detail;
        try {
            detail = criteria[i].body();
            verdict = "PASS";
        } catch (const std::exception& e) {
            detail = e.what();
            verdict = "FAIL";
            ++failures;
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        std::printf("[%s] %2zu/%zu %s — %s (%.1fs)\n", verdict.c_str(), i + 1,
                    criteria.size(), criteria[i].name, detail.c_str(), seconds);
        std::fflush(stdout);
    }
    if (failures == 0) {
        std::printf("all %zu acceptance criteria passed\n", criteria.size());
    } else {
        std::printf("%d acceptance criteria FAILED\n", failures);
    }
    return failures;
}
