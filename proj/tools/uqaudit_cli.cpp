#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uqaudit/config.hpp"
#include "uqaudit/errors.hpp"
#include "uqaudit/parallel.hpp"
#include "uqaudit/report.hpp"
#include "uqaudit/runner.hpp"

namespace {

using namespace uqaudit;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) ||
        dynamic_cast<const ValidationError*>(&e) ||
        dynamic_cast<const SchemaError*>(&e) || dynamic_cast<const ParseError*>(&e))
        return 1;
    return 2;
}

struct CommonFlags {
    std::string out = "./uqaudit-out";
    bool out_set = false;
    std::string format = "csv";
    int threads = -1;
    bool strict_oob = false;
    bool uncorrected_quantile = false;
    bool force_nonempty_sets = false;
};

void apply_flags(RunConfig& cfg, const CommonFlags& flags) {
    if (flags.threads >= 0) set_worker_count(flags.threads);
    cfg.strict_oob = flags.strict_oob;
    cfg.corrected_quantile = !flags.uncorrected_quantile;
    cfg.force_nonempty_sets = flags.force_nonempty_sets;
}

std::string opt_text(const std::optional<double>& v) {
    return v ? format_number(*v) : std::string("-");
}

int cmd_audit(const std::string& config_path, const CommonFlags& flags) {
    RunConfig cfg = parse_config(config_path);
    apply_flags(cfg, flags);
    AuditRunner runner(std::move(cfg));
    const auto records = runner.run_multi_seed(flags.out);

    std::size_t failed = 0;
    for (const auto& record : records) {
        if (record.failed) {
            ++failed;
            std::cerr << record_filename(record) << ": failed at stage "
                      << record.failure_stage << ": " << record.failure_message
                      << "\n";
        }
    }
    std::cout << "persisted " << records.size() << " record(s) to " << flags.out
              << " (" << failed << " failed)\n";
    return failed == 0 ? 0 : 2;
}

int cmd_report(const std::string& records_dir, const CommonFlags& flags) {
    const auto loaded = load_records(records_dir);
    for (const auto& err : loaded.errors)
        std::cerr << "skipping unreadable record " << err << "\n";
    const std::string out =
        flags.out_set ? flags.out : records_dir + "/report";
    const auto written = emit_tables(loaded.records, out, flags.format);
    for (const auto& path : written) std::cout << path << "\n";
    return 0;
}

int cmd_conformal(const std::string& config_path, const CommonFlags& flags) {
    RunConfig cfg = parse_config(config_path);
    apply_flags(cfg, flags);
    const auto runs = run_conformal(cfg);
    std::printf("%-12s %-8s %-7s %-10s %-9s %-10s %-9s\n", "model", "seed",
                "alpha", "q_hat", "coverage", "mean_width", "unbounded");
    for (const auto& run : runs) {
        std::printf("%-12s %-8llu %-7s %-10s %-9s %-10s %-9zu\n",
                    run.model.c_str(),
                    static_cast<unsigned long long>(run.seed),
                    format_number(run.alpha).c_str(),
                    format_number(run.q_hat).c_str(),
                    format_number(run.coverage).c_str(),
                    opt_text(run.mean_width).c_str(), run.unbounded);
    }
    return 0;
}

int cmd_compare(const std::string& records_dir) {
    const auto loaded = load_records(records_dir);
    for (const auto& err : loaded.errors)
        std::cerr << "skipping unreadable record " << err << "\n";
    const auto rows = method_comparison(loaded.records);
    if (rows.empty()) {
        std::cout << "no interval methods recorded in " << records_dir << "\n";
        return 0;
    }
    std::printf("%-12s %-8s %-20s %-7s %-9s %-10s %-6s %-10s\n", "model", "seed",
                "method", "alpha", "coverage", "mean_width", "fits", "wall_ms");
    for (const auto& row : rows) {
        std::printf("%-12s %-8llu %-20s %-7s %-9s %-10s %-6llu %-10s\n",
                    row.model.c_str(), static_cast<unsigned long long>(row.seed),
                    row.method.c_str(), format_number(row.alpha).c_str(),
                    opt_text(row.coverage).c_str(),
                    opt_text(row.mean_width).c_str(),
                    static_cast<unsigned long long>(row.fits),
                    opt_text(row.wall_ms).c_str());
    }
    return 0;
}

int cmd_validate(const std::string& config_path) {
    const RunConfig cfg = parse_config(config_path);
    std::cout << "dataset: " << cfg.dataset_path << " (id: " << cfg.dataset_id
              << ")\n";
    std::cout << "task: "
              << (cfg.schema.task == TaskKind::binary_classification
                      ? "binary_classification"
                      : "regression")
              << "\n";
    std::cout << "splits: train=" << format_number(cfg.train_fraction)
              << " test=" << format_number(cfg.test_fraction)
              << " calibration=" << format_number(cfg.calibration_fraction) << "\n";
    std::cout << "ensemble: b=" << cfg.ensemble_size
              << " fraction=" << format_number(cfg.bootstrap_fraction)
              << " threshold=" << format_number(cfg.threshold) << "\n";
    std::cout << "models:";
    for (const auto& m : cfg.models) std::cout << " " << m.name;
    std::cout << "\nseeds:";
    for (const auto s : cfg.seeds) std::cout << " " << s;
    std::cout << "\nmethods:";
    if (cfg.methods.bootstrap_metrics) std::cout << " bootstrap_metrics";
    if (cfg.methods.jackknife_plus) std::cout << " jackknife_plus";
    if (cfg.methods.jab) std::cout << " jab";
    if (cfg.methods.conformal) std::cout << " conformal";
    std::cout << "\n";

    // Dry run: load the dataset and derive each seed's split and subgroup
    // sizes without fitting anything.
    const Dataset dataset = load_csv(cfg.dataset_path, cfg.schema);
    std::cout << "rows: " << dataset.n_rows << "\n";
    for (const auto seed : cfg.seeds) {
        const auto s = split(dataset, cfg.train_fraction, cfg.test_fraction,
                             cfg.calibration_fraction, seed);
        std::cout << "seed " << seed << ": train=" << s.train.size()
                  << " test=" << s.test.size()
                  << " calibration=" << s.calibration.size();
        const auto partition = partition_subgroups(dataset, s.test, cfg.subgroups);
        for (const auto& [name, rows] : partition) {
            if (name == "overall") continue;
            std::cout << " " << name << "=" << rows.size();
            if (rows.empty()) std::cout << "(empty!)";
        }
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fairness and uncertainty audits for tabular models"};
    app.require_subcommand(1);
    CommonFlags flags;

    std::string audit_config, conformal_config, validate_config;
    std::string report_dir, compare_dir;

    auto* audit = app.add_subcommand("audit", "Run the configured audits and persist records");
    audit->add_option("config", audit_config, "YAML or JSON config file")->required();
    audit->add_option("--out", flags.out, "Output directory for records");
    audit->add_option("--threads", flags.threads, "Worker threads (0 = auto)");
    audit->add_flag("--strict-oob", flags.strict_oob,
                    "Error out when a training sample appears in every bag");
    audit->add_flag("--uncorrected-quantile", flags.uncorrected_quantile,
                    "Use the plain empirical quantile (no finite-sample correction)");
    audit->add_flag("--force-nonempty-sets", flags.force_nonempty_sets,
                    "Put the most probable label into otherwise empty prediction sets");

    auto* report = app.add_subcommand("report", "Build report tables from persisted records");
    report->add_option("records", report_dir, "Directory holding record files")->required();
    auto* report_out = report->add_option("--out", flags.out, "Report output directory");
    report->add_option("--format", flags.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));

    auto* conformal = app.add_subcommand("conformal", "Evaluate calibrated coverage only");
    conformal->add_option("config", conformal_config, "YAML or JSON config file")->required();
    conformal->add_option("--threads", flags.threads, "Worker threads (0 = auto)");
    conformal->add_flag("--uncorrected-quantile", flags.uncorrected_quantile,
                        "Use the plain empirical quantile (no finite-sample correction)");
    conformal->add_flag("--force-nonempty-sets", flags.force_nonempty_sets,
                        "Put the most probable label into otherwise empty prediction sets");

    auto* compare = app.add_subcommand("compare", "Print the interval-method comparison table");
    compare->add_option("records", compare_dir, "Directory holding record files")->required();

    auto* validate = app.add_subcommand("validate", "Parse a config and dry-run its checks");
    validate->add_option("config", validate_config, "YAML or JSON config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    flags.out_set = report_out->count() > 0 || audit->count("--out") > 0;
    try {
        if (app.got_subcommand(audit)) return cmd_audit(audit_config, flags);
        if (app.got_subcommand(report)) return cmd_report(report_dir, flags);
        if (app.got_subcommand(conformal)) return cmd_conformal(conformal_config, flags);
        if (app.got_subcommand(compare)) return cmd_compare(compare_dir);
        if (app.got_subcommand(validate)) return cmd_validate(validate_config);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 1;
}
