#include "uqaudit/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "uqaudit/bias.hpp"
#include "uqaudit/conformal.hpp"
#include "uqaudit/errors.hpp"
#include "uqaudit/resampling.hpp"
#include "uqaudit/rng.hpp"
#include "uqaudit/stability.hpp"

namespace uqaudit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
    return std::stoull(s, nullptr, 16);
}

std::uint64_t fingerprint_split(const SplitIndices& s) {
    std::ostringstream os;
    os << "t:";
    for (auto i : s.train) os << i << ',';
    os << "e:";
    for (auto i : s.test) os << i << ',';
    os << "c:";
    for (auto i : s.calibration) os << i << ',';
    return fnv1a64(os.str());
}

// partition_subgroups returns dataset row indices; metric vectors are indexed
// by position within the split. Convert once per split.
std::map<std::string, std::vector<std::size_t>> to_positions(
    const SubgroupPartition& partition, const std::vector<std::size_t>& split) {
    std::unordered_map<std::size_t, std::size_t> pos;
    pos.reserve(split.size());
    for (std::size_t p = 0; p < split.size(); ++p) pos[split[p]] = p;
    std::map<std::string, std::vector<std::size_t>> out;
    for (const auto& [name, rows] : partition) {
        auto& v = out[name];
        v.reserve(rows.size());
        for (auto r : rows) v.push_back(pos.at(r));
    }
    return out;
}

std::vector<std::uint8_t> to_labels(const std::vector<double>& targets) {
    std::vector<std::uint8_t> out(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i)
        out[i] = targets[i] == 1.0 ? 1 : 0;
    return out;
}

// "overall" first, then the rest of the partition in its (sorted) map order.
std::vector<std::string> subgroup_columns(
    const std::map<std::string, std::vector<std::size_t>>& partition) {
    std::vector<std::string> cols{"overall"};
    for (const auto& [name, rows] : partition) {
        (void)rows;
        if (name != "overall") cols.push_back(name);
    }
    return cols;
}

class StageClock {
public:
    explicit StageClock(std::map<std::string, double>& sink) : sink_(sink) {}

    template <typename F>
    auto run(const std::string& stage, F&& body) {
        const auto start = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(body())>) {
            body();
            sink_[stage] = elapsed_ms(start);
        } else {
            auto result = body();
            sink_[stage] = elapsed_ms(start);
            return result;
        }
    }

private:
    static double elapsed_ms(std::chrono::steady_clock::time_point start) {
        return std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - start)
            .count();
    }
    std::map<std::string, double>& sink_;
};

std::vector<double> column_means(const Matrix& m) {
    std::vector<double> out(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) out[c] += row[c];
    }
    for (auto& v : out) v /= static_cast<double>(m.rows());
    return out;
}

json optional_to_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

std::optional<double> optional_from_json(const json& v) {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

ParityKind parity_kind_from_string(const std::string& s) {
    if (s == "difference") return ParityKind::difference;
    if (s == "ratio") return ParityKind::ratio;
    throw ParseError("unknown parity kind: " + s);
}

DisparityClass disparity_from_string(const std::string& s) {
    if (s == "parity") return DisparityClass::parity;
    if (s == "discrimination") return DisparityClass::discrimination;
    if (s == "reverse_discrimination") return DisparityClass::reverse_discrimination;
    if (s == "undefined") return DisparityClass::undefined;
    throw ParseError("unknown classification: " + s);
}

}  // namespace

json record_to_json(const RunRecord& record) {
    json doc;
    doc["schema_version"] = record.schema_version;
    doc["dataset_id"] = record.dataset_id;
    doc["model"] = record.model;
    doc["seed"] = record.seed;
    doc["config_fingerprint"] = hex64(record.config_fingerprint);
    doc["split_fingerprint"] = hex64(record.split_fingerprint);
    doc["failed"] = record.failed;
    doc["failure_stage"] = record.failure_stage;
    doc["failure_message"] = record.failure_message;
    doc["threshold"] = record.threshold;

    json grid = json::object();
    for (const auto& [metric, row] : record.metrics.cells) {
        json cells = json::object();
        for (const auto& [subgroup, value] : row)
            cells[subgroup] = optional_to_json(value);
        grid[metric] = cells;
    }
    doc["metrics"] = {{"metric_order", record.metrics.metric_order},
                      {"subgroup_order", record.metrics.subgroup_order},
                      {"grid", grid}};

    json entries = json::array();
    for (const auto& e : record.parity.entries) {
        entries.push_back({{"metric", e.metric},
                           {"attribute", e.attribute},
                           {"value", optional_to_json(e.value)},
                           {"kind", to_string(e.kind)},
                           {"classification", to_string(e.classification)},
                           {"note", e.note}});
    }
    doc["parity"] = {{"favorable_positive", record.parity.favorable_positive},
                     {"tolerance", record.parity.tolerance},
                     {"entries", entries}};

    json methods = json::array();
    for (const auto& m : record.methods) {
        methods.push_back({{"method", m.method},
                           {"alpha", m.alpha},
                           {"coverage", optional_to_json(m.coverage)},
                           {"mean_width", optional_to_json(m.mean_width)},
                           {"unbounded", m.unbounded},
                           {"excluded_samples", m.excluded_samples},
                           {"fits", m.fits}});
    }
    doc["methods"] = methods;
    doc["warnings"] = record.warnings;
    return doc;
}

RunRecord record_from_json(const json& doc) {
    RunRecord record;
    record.schema_version = doc.at("schema_version").get<int>();
    if (record.schema_version != 1)
        throw ParseError("unsupported record schema version");
    record.dataset_id = doc.at("dataset_id").get<std::string>();
    record.model = doc.at("model").get<std::string>();
    record.seed = doc.at("seed").get<std::uint64_t>();
    record.config_fingerprint = parse_hex64(doc.at("config_fingerprint").get<std::string>());
    record.split_fingerprint = parse_hex64(doc.at("split_fingerprint").get<std::string>());
    record.failed = doc.at("failed").get<bool>();
    record.failure_stage = doc.at("failure_stage").get<std::string>();
    record.failure_message = doc.at("failure_message").get<std::string>();
    record.threshold = doc.at("threshold").get<double>();

    const auto& metrics = doc.at("metrics");
    record.metrics.model = record.model;
    record.metrics.seed = record.seed;
    record.metrics.dataset_id = record.dataset_id;
    record.metrics.metric_order =
        metrics.at("metric_order").get<std::vector<std::string>>();
    record.metrics.subgroup_order =
        metrics.at("subgroup_order").get<std::vector<std::string>>();
    for (const auto& [metric, cells] : metrics.at("grid").items())
        for (const auto& [subgroup, value] : cells.items())
            record.metrics.cells[metric][subgroup] = optional_from_json(value);

    const auto& parity = doc.at("parity");
    record.parity.favorable_positive = parity.at("favorable_positive").get<bool>();
    record.parity.tolerance = parity.at("tolerance").get<double>();
    for (const auto& e : parity.at("entries")) {
        ParityEntry entry;
        entry.metric = e.at("metric").get<std::string>();
        entry.attribute = e.at("attribute").get<std::string>();
        entry.value = optional_from_json(e.at("value"));
        entry.kind = parity_kind_from_string(e.at("kind").get<std::string>());
        entry.classification =
            disparity_from_string(e.at("classification").get<std::string>());
        entry.note = e.at("note").get<std::string>();
        record.parity.entries.push_back(std::move(entry));
    }

    for (const auto& m : doc.at("methods")) {
        MethodSummary summary;
        summary.method = m.at("method").get<std::string>();
        summary.alpha = m.at("alpha").get<double>();
        summary.coverage = optional_from_json(m.at("coverage"));
        summary.mean_width = optional_from_json(m.at("mean_width"));
        summary.unbounded = m.at("unbounded").get<std::size_t>();
        summary.excluded_samples = m.at("excluded_samples").get<std::size_t>();
        summary.fits = m.at("fits").get<std::uint64_t>();
        record.methods.push_back(std::move(summary));
    }
    record.warnings = doc.at("warnings").get<std::vector<std::string>>();
    return record;
}

std::string record_filename(const RunRecord& record) {
    std::string name =
        record.dataset_id + "_" + record.model + "_" + std::to_string(record.seed);
    for (auto& c : name)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' &&
            c != '.')
            c = '-';
    return name + ".json";
}

void persist(const RunRecord& record, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const fs::path path = fs::path(out_dir) / record_filename(record);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write record file: " + path.string());
        out << record_to_json(record).dump(2) << '\n';
    }
    // Timings change run to run; they live next to the record, not in it.
    fs::path sidecar = path;
    sidecar.replace_extension(".timings.json");
    std::ofstream side(sidecar, std::ios::binary | std::ios::trunc);
    if (!side) throw IoError("cannot write timing sidecar: " + sidecar.string());
    side << json(record.stage_ms).dump(2) << '\n';
}

LoadResult load_records(const std::string& out_dir) {
    LoadResult result;
    if (!fs::exists(out_dir)) return result;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(out_dir)) {
        if (!entry.is_regular_file()) continue;
        const auto name = entry.path().filename().string();
        if (name.size() < 5 || name.substr(name.size() - 5) != ".json") continue;
        if (name.size() >= 13 &&
            name.substr(name.size() - 13) == ".timings.json")
            continue;
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        try {
            std::ifstream in(file, std::ios::binary);
            if (!in) throw IoError("cannot open");
            json doc = json::parse(in);
            auto record = record_from_json(doc);
            fs::path sidecar = file;
            sidecar.replace_extension(".timings.json");
            if (fs::exists(sidecar)) {
                std::ifstream side(sidecar, std::ios::binary);
                json timings = json::parse(side, nullptr, false);
                if (!timings.is_discarded() && timings.is_object())
                    for (const auto& [stage, ms] : timings.items())
                        if (ms.is_number()) record.stage_ms[stage] = ms.get<double>();
            }
            result.records.push_back(std::move(record));
        } catch (const std::exception& e) {
            result.errors.push_back(file.filename().string() + ": " + e.what());
        }
    }
    std::sort(result.records.begin(), result.records.end(),
              [](const RunRecord& a, const RunRecord& b) {
                  return std::tie(a.dataset_id, a.model, a.seed) <
                         std::tie(b.dataset_id, b.model, b.seed);
              });
    return result;
}

AuditRunner::AuditRunner(RunConfig config) : config_(std::move(config)) {
    config_.validate();
    if (config_.schema.task != TaskKind::binary_classification)
        throw ConfigError(
            "audit requires a binary classification dataset; regression is "
            "supported by the conformal coverage command only");
    dataset_ = load_csv(config_.dataset_path, config_.schema);
    config_fp_ = config_.fingerprint();
}

RunRecord AuditRunner::run_single(const std::string& model_name,
                                  std::uint64_t seed) const {
    RunRecord record;
    record.dataset_id = config_.dataset_id;
    record.model = model_name;
    record.seed = seed;
    record.config_fingerprint = config_fp_;
    record.threshold = config_.threshold;
    record.metrics.model = model_name;
    record.metrics.seed = seed;
    record.metrics.dataset_id = config_.dataset_id;

    const NamedModel* named = nullptr;
    for (const auto& m : config_.models)
        if (m.name == model_name) named = &m;
    if (!named) {
        record.failed = true;
        record.failure_stage = "lookup";
        record.failure_message = "model '" + model_name + "' is not in the roster";
        return record;
    }

    StageClock clock(record.stage_ms);
    std::string stage = "split";
    try {
        const SplitIndices split_idx = clock.run("split", [&] {
            return split(dataset_, config_.train_fraction, config_.test_fraction,
                         config_.calibration_fraction, seed);
        });
        record.split_fingerprint = fingerprint_split(split_idx);

        stage = "preprocess";
        struct Prepared {
            Preprocessor preproc;
            Matrix x_train, x_test, x_cal;
            std::vector<double> y_train, y_test, y_cal;
        };
        const Prepared prep = clock.run("preprocess", [&] {
            Prepared p;
            p.preproc = fit_preprocessor(dataset_, split_idx.train);
            p.x_train = transform(p.preproc, dataset_, split_idx.train);
            p.x_test = transform(p.preproc, dataset_, split_idx.test);
            p.y_train = gather_targets(dataset_, split_idx.train);
            p.y_test = gather_targets(dataset_, split_idx.test);
            if (!split_idx.calibration.empty()) {
                p.x_cal = transform(p.preproc, dataset_, split_idx.calibration);
                p.y_cal = gather_targets(dataset_, split_idx.calibration);
            }
            return p;
        });
        for (const auto& w : prep.preproc.warnings) record.warnings.push_back(w);

        stage = "fit";
        const std::uint64_t fits_before_point = fit_count();
        const FittedModel model = clock.run("fit", [&] {
            return fit(named->spec, prep.x_train, prep.y_train,
                       derive_seed(seed, "model:" + model_name));
        });
        const std::uint64_t point_fits = fit_count() - fits_before_point;

        stage = "bias";
        const auto partition =
            partition_subgroups(dataset_, split_idx.test, config_.subgroups);
        const auto positions = to_positions(partition, split_idx.test);
        const auto columns = subgroup_columns(positions);
        const std::vector<double> p_test = model.predict(prep.x_test);
        const std::vector<std::uint8_t> y_test_labels = to_labels(prep.y_test);
        const std::vector<std::uint8_t> y_pred_labels =
            predict_label(p_test, config_.threshold);
        clock.run("bias", [&] {
            const auto rate_map = subgroup_rates(y_test_labels, y_pred_labels, positions);
            const auto put = [&](const std::string& metric,
                                 const std::optional<double> RateSet::*field) {
                for (const auto& col : columns)
                    record.metrics.set(metric, col, rate_map.at(col).*field);
            };
            put("accuracy", &RateSet::accuracy);
            put("tpr", &RateSet::tpr);
            put("fpr", &RateSet::fpr);
            put("tnr", &RateSet::tnr);
            put("fnr", &RateSet::fnr);
            put("positive_rate", &RateSet::positive_rate);
        });

        const bool need_ensemble = config_.methods.bootstrap_metrics || config_.methods.jab;
        BootstrapEnsemble ensemble;
        PredictiveMatrix matrix;
        std::uint64_t ensemble_fits = 0;
        if (need_ensemble) {
            stage = "ensemble";
            const std::uint64_t before = fit_count();
            clock.run("ensemble", [&] {
                ensemble = fit_bootstrap_ensemble(
                    named->spec, prep.x_train, prep.y_train, config_.ensemble_size,
                    config_.bootstrap_fraction,
                    derive_seed(seed, "ensemble:" + model_name));
                matrix = predict_distribution(ensemble, prep.x_test, config_.threshold);
            });
            ensemble_fits = fit_count() - before;
        }

        if (config_.methods.bootstrap_metrics) {
            stage = "stability";
            clock.run("stability", [&] {
                const auto profile = stability_profile(matrix, config_.with_entropy);
                const auto put = [&](const std::string& metric,
                                     const std::vector<double>& values) {
                    for (const auto& col : columns)
                        record.metrics.set(metric, col,
                                           aggregate_over(values, positions.at(col)));
                };
                put("label_stability", profile.label_stability);
                put("jitter", profile.jitter);
                put("std", profile.std_dev);
                put("iqr", profile.iqr);
                if (config_.with_entropy) put("entropy", profile.entropy);
            });

            stage = "parity";
            clock.run("parity", [&] {
                std::vector<std::string> attrs;
                for (const auto& a : config_.subgroups.attributes)
                    attrs.push_back(a.column);
                for (const auto& inter : config_.subgroups.intersections) {
                    std::string name;
                    for (const auto& member : inter) {
                        if (!name.empty()) name += "&";
                        name += member;
                    }
                    attrs.push_back(name);
                }
                record.parity = compose_parity(record.metrics, attrs,
                                               config_.favorable_positive,
                                               config_.tolerance);
            });

            // Percentile band of the member probabilities; descriptive only,
            // so no coverage is claimed for it.
            stage = "bootstrap_percentile";
            clock.run("bootstrap_percentile", [&] {
                double width_sum = 0.0;
                for (std::size_t s = 0; s < matrix.samples(); ++s) {
                    const auto iv = bootstrap_percentile_interval(
                        matrix.probabilities.column(s), 0.05);
                    width_sum += iv.width();
                }
                MethodSummary summary;
                summary.method = "bootstrap_percentile";
                summary.alpha = 0.05;
                if (matrix.samples() > 0)
                    summary.mean_width =
                        width_sum / static_cast<double>(matrix.samples());
                summary.fits = ensemble_fits;
                record.methods.push_back(std::move(summary));
            });
        }

        if (config_.methods.jackknife_plus) {
            stage = "jackknife_plus";
            const std::uint64_t before = fit_count();
            clock.run("jackknife_plus", [&] {
                const LooSet loo =
                    fit_jackknife(named->spec, prep.x_train, prep.y_train,
                                  derive_seed(seed, "jackknife:" + model_name));
                const std::uint64_t loo_fits = fit_count() - before;
                // Mean probability across the leave-one-out models per test row.
                std::vector<double> p_mean(prep.x_test.rows(), 0.0);
                for (const auto& m : loo.models) {
                    const auto p = m.predict(prep.x_test);
                    for (std::size_t s = 0; s < p.size(); ++s) p_mean[s] += p[s];
                }
                for (auto& v : p_mean) v /= static_cast<double>(loo.models.size());
                for (const double alpha : config_.methods.jackknife_alphas) {
                    const auto rec = calibrate(loo.residuals, alpha,
                                               config_.corrected_quantile);
                    std::vector<PredictionSet> sets;
                    sets.reserve(p_mean.size());
                    for (const double p : p_mean)
                        sets.push_back(
                            predict_set(p, rec, config_.force_nonempty_sets));
                    const auto stats = evaluate_coverage(
                        std::span<const PredictionSet>(sets), prep.y_test);
                    MethodSummary summary;
                    summary.method = "jackknife_plus";
                    summary.alpha = alpha;
                    summary.coverage = stats.coverage;
                    summary.mean_width = stats.mean_width;
                    summary.fits = loo_fits;
                    record.methods.push_back(std::move(summary));
                }
            });
        }

        if (config_.methods.jab) {
            stage = "jab";
            clock.run("jab", [&] {
                const auto oob = oob_prediction_sets(ensemble, prep.x_train,
                                                     prep.y_train, config_.strict_oob);
                if (!oob.uncovered.empty()) {
                    std::ostringstream warn;
                    warn << "jab: " << oob.uncovered.size()
                         << " training sample(s) had no out-of-bag member and were "
                            "excluded from calibration";
                    record.warnings.push_back(warn.str());
                }
                std::vector<double> residuals;
                residuals.reserve(oob.covered.size());
                for (auto i : oob.covered) residuals.push_back(oob.residuals[i]);
                const std::vector<double> p_mean = column_means(matrix.probabilities);
                for (const double alpha : config_.methods.jab_alphas) {
                    const auto rec =
                        calibrate(residuals, alpha, config_.corrected_quantile);
                    std::vector<PredictionSet> sets;
                    sets.reserve(p_mean.size());
                    for (const double p : p_mean)
                        sets.push_back(
                            predict_set(p, rec, config_.force_nonempty_sets));
                    const auto stats = evaluate_coverage(
                        std::span<const PredictionSet>(sets), prep.y_test);
                    MethodSummary summary;
                    summary.method = "jab";
                    summary.alpha = alpha;
                    summary.coverage = stats.coverage;
                    summary.mean_width = stats.mean_width;
                    summary.excluded_samples = oob.uncovered.size();
                    summary.fits = ensemble_fits;
                    record.methods.push_back(std::move(summary));
                }
            });
        }

        if (config_.methods.conformal) {
            stage = "conformal";
            clock.run("conformal", [&] {
                const std::vector<double> p_cal = model.predict(prep.x_cal);
                std::vector<double> scores(p_cal.size());
                for (std::size_t i = 0; i < p_cal.size(); ++i)
                    scores[i] = score(ScoreKind::one_minus_proba, p_cal[i],
                                      prep.y_cal[i]);
                for (const double alpha : config_.methods.conformal_alphas) {
                    const auto rec =
                        calibrate(scores, alpha, config_.corrected_quantile);
                    std::vector<PredictionSet> sets;
                    sets.reserve(p_test.size());
                    for (const double p : p_test)
                        sets.push_back(
                            predict_set(p, rec, config_.force_nonempty_sets));
                    const auto stats = evaluate_coverage(
                        std::span<const PredictionSet>(sets), prep.y_test);
                    MethodSummary summary;
                    summary.method = "conformal";
                    summary.alpha = alpha;
                    summary.coverage = stats.coverage;
                    summary.mean_width = stats.mean_width;
                    summary.fits = point_fits;
                    record.methods.push_back(std::move(summary));
                }
            });
        }
    } catch (const std::exception& e) {
        RunRecord stub;
        stub.dataset_id = record.dataset_id;
        stub.model = record.model;
        stub.seed = record.seed;
        stub.config_fingerprint = record.config_fingerprint;
        stub.split_fingerprint = record.split_fingerprint;
        stub.threshold = record.threshold;
        stub.metrics.model = record.model;
        stub.metrics.seed = record.seed;
        stub.metrics.dataset_id = record.dataset_id;
        stub.failed = true;
        stub.failure_stage = stage;
        stub.failure_message = e.what();
        stub.stage_ms = record.stage_ms;
        return stub;
    }
    return record;
}

std::vector<RunRecord> AuditRunner::run_multi_model(std::uint64_t seed) const {
    std::vector<RunRecord> records;
    records.reserve(config_.models.size());
    for (const auto& m : config_.models) records.push_back(run_single(m.name, seed));
    return records;
}

std::vector<RunRecord> AuditRunner::run_multi_seed(const std::string& out_dir) const {
    fs::create_directories(out_dir);
    std::vector<RunRecord> records;
    for (const auto seed : config_.seeds) {
        for (const auto& m : config_.models) {
            RunRecord probe;
            probe.dataset_id = config_.dataset_id;
            probe.model = m.name;
            probe.seed = seed;
            const fs::path path = fs::path(out_dir) / record_filename(probe);
            if (fs::exists(path)) {
                std::ifstream in(path, std::ios::binary);
                records.push_back(record_from_json(json::parse(in)));
                continue;
            }
            auto record = run_single(m.name, seed);
            persist(record, out_dir);
            records.push_back(std::move(record));
        }
    }
    return records;
}

std::vector<ConformalRun> run_conformal(const RunConfig& config) {
    config.validate();
    if (!(config.calibration_fraction > 0.0))
        throw ConfigError("splits.calibration: conformal coverage needs a nonzero fraction");
    if (!(config.test_fraction > 0.0))
        throw ConfigError("splits.test: conformal coverage needs a nonzero fraction");
    const Dataset dataset = load_csv(config.dataset_path, config.schema);

    std::vector<ConformalRun> runs;
    for (const auto seed : config.seeds) {
        const SplitIndices split_idx =
            split(dataset, config.train_fraction, config.test_fraction,
                  config.calibration_fraction, seed);
        const Preprocessor preproc = fit_preprocessor(dataset, split_idx.train);
        const Matrix x_train = transform(preproc, dataset, split_idx.train);
        const Matrix x_test = transform(preproc, dataset, split_idx.test);
        const Matrix x_cal = transform(preproc, dataset, split_idx.calibration);
        const auto y_train = gather_targets(dataset, split_idx.train);
        const auto y_test = gather_targets(dataset, split_idx.test);
        const auto y_cal = gather_targets(dataset, split_idx.calibration);

        for (const auto& named : config.models) {
            const FittedModel model =
                fit(named.spec, x_train, y_train,
                    derive_seed(seed, "model:" + named.name));
            const auto p_cal = model.predict(x_cal);
            const auto p_test = model.predict(x_test);
            const bool classification =
                config.schema.task == TaskKind::binary_classification;
            const ScoreKind kind = classification ? ScoreKind::one_minus_proba
                                                  : ScoreKind::abs_residual;
            std::vector<double> scores(p_cal.size());
            for (std::size_t i = 0; i < p_cal.size(); ++i)
                scores[i] = score(kind, p_cal[i], y_cal[i]);

            for (const double alpha : config.methods.conformal_alphas) {
                const auto rec = calibrate(scores, alpha, config.corrected_quantile);
                ConformalRun run;
                run.model = named.name;
                run.seed = seed;
                run.alpha = alpha;
                run.q_hat = rec.q_hat;
                run.corrected = rec.corrected;
                run.calibration_size = scores.size();
                run.test_size = p_test.size();
                if (classification) {
                    std::vector<PredictionSet> sets;
                    sets.reserve(p_test.size());
                    for (const double p : p_test)
                        sets.push_back(
                            predict_set(p, rec, config.force_nonempty_sets));
                    const auto stats = evaluate_coverage(
                        std::span<const PredictionSet>(sets), y_test);
                    run.coverage = stats.coverage;
                    run.mean_width = stats.mean_width;
                    run.unbounded = stats.unbounded_count;
                } else {
                    std::vector<PredictiveInterval> intervals;
                    intervals.reserve(p_test.size());
                    for (const double y : p_test)
                        intervals.push_back(predict_interval(y, rec));
                    const auto stats = evaluate_coverage(
                        std::span<const PredictiveInterval>(intervals), y_test);
                    run.coverage = stats.coverage;
                    run.mean_width = stats.mean_width;
                    run.unbounded = stats.unbounded_count;
                }
                runs.push_back(std::move(run));
            }
        }
    }
    return runs;
}

}  // namespace uqaudit
