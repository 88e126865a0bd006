#include "uqaudit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "uqaudit/errors.hpp"

namespace uqaudit {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string opt_cell(const std::optional<double>& v) {
    return v ? format_number(*v) : std::string();
}

std::string defined_cell(const std::optional<double>& v) {
    return v ? "1" : "0";
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write report file: " + path.string());
    out << content;
}

struct GridRow {
    std::string model;
    std::uint64_t seed;
    std::string metric;
    std::string subgroup;
    std::optional<double> value;
    std::string record_file;
};

std::vector<GridRow> grid_rows(const std::vector<RunRecord>& records) {
    std::vector<GridRow> rows;
    for (const auto& record : records) {
        const std::string file = record_filename(record);
        for (const auto& [metric, cells] : record.metrics.cells)
            for (const auto& [subgroup, value] : cells)
                rows.push_back({record.model, record.seed, metric, subgroup, value, file});
    }
    std::sort(rows.begin(), rows.end(), [](const GridRow& a, const GridRow& b) {
        return std::tie(a.model, a.seed, a.metric, a.subgroup) <
               std::tie(b.model, b.seed, b.metric, b.subgroup);
    });
    return rows;
}

struct ParityRow {
    std::string model;
    std::uint64_t seed;
    ParityEntry entry;
    std::string record_file;
};

std::vector<ParityRow> parity_rows(const std::vector<RunRecord>& records) {
    std::vector<ParityRow> rows;
    for (const auto& record : records) {
        const std::string file = record_filename(record);
        for (const auto& entry : record.parity.entries)
            rows.push_back({record.model, record.seed, entry, file});
    }
    std::sort(rows.begin(), rows.end(), [](const ParityRow& a, const ParityRow& b) {
        return std::tie(a.model, a.seed, a.entry.metric, a.entry.attribute) <
               std::tie(b.model, b.seed, b.entry.metric, b.entry.attribute);
    });
    return rows;
}

}  // namespace

std::vector<ComparisonRow> method_comparison(const std::vector<RunRecord>& records) {
    std::vector<ComparisonRow> rows;
    for (const auto& record : records) {
        const std::string file = record_filename(record);
        for (const auto& m : record.methods) {
            ComparisonRow row;
            row.model = record.model;
            row.seed = record.seed;
            row.method = m.method;
            row.alpha = m.alpha;
            row.coverage = m.coverage;
            row.mean_width = m.mean_width;
            row.unbounded = m.unbounded;
            row.excluded_samples = m.excluded_samples;
            row.fits = m.fits;
            const auto t = record.stage_ms.find(m.method);
            if (t != record.stage_ms.end()) row.wall_ms = t->second;
            row.record_file = file;
            rows.push_back(std::move(row));
        }
    }
    std::sort(rows.begin(), rows.end(),
              [](const ComparisonRow& a, const ComparisonRow& b) {
                  return std::tie(a.model, a.seed, a.method, a.alpha) <
                         std::tie(b.model, b.seed, b.method, b.alpha);
              });
    return rows;
}

std::vector<AggregateRow> cross_seed_aggregates(const std::vector<RunRecord>& records) {
    // (model, metric, subgroup) -> defined values across seeds
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>>
        groups;
    for (const auto& record : records) {
        if (record.failed) continue;
        for (const auto& [metric, cells] : record.metrics.cells)
            for (const auto& [subgroup, value] : cells)
                if (value)
                    groups[{record.model, metric, subgroup}].push_back(*value);
    }
    std::vector<AggregateRow> rows;
    for (const auto& [key, values] : groups) {
        AggregateRow row;
        row.model = std::get<0>(key);
        row.metric = std::get<1>(key);
        row.subgroup = std::get<2>(key);
        row.count = values.size();
        double sum = 0.0;
        double mn = values.front(), mx = values.front();
        for (double v : values) {
            sum += v;
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        const double mean = sum / static_cast<double>(values.size());
        row.mean = mean;
        row.min = mn;
        row.max = mx;
        if (values.size() >= 2) {
            double ss = 0.0;
            for (double v : values) ss += (v - mean) * (v - mean);
            row.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
        }
        rows.push_back(std::move(row));
    }
    return rows;  // map iteration order is already (model, metric, subgroup)
}

std::string plain_summary(const std::vector<RunRecord>& records) {
    std::size_t failed = 0;
    std::map<std::string, std::size_t> classifications;
    std::vector<std::string> warnings;
    for (const auto& record : records) {
        if (record.failed) ++failed;
        for (const auto& e : record.parity.entries)
            ++classifications[to_string(e.classification)];
        for (const auto& w : record.warnings)
            warnings.push_back(record_filename(record) + ": " + w);
    }
    std::ostringstream os;
    os << "records: " << records.size() << " (" << failed << " failed)\n";
    os << "parity classifications:\n";
    for (const auto& [name, count] : classifications)
        os << "  " << name << ": " << count << "\n";
    if (!warnings.empty()) {
        os << "warnings:\n";
        for (const auto& w : warnings) os << "  " << w << "\n";
    }
    for (const auto& record : records) {
        if (!record.failed) continue;
        os << "failed: " << record_filename(record) << " at stage "
           << record.failure_stage << ": " << record.failure_message << "\n";
    }
    return os.str();
}

std::vector<std::string> emit_tables(const std::vector<RunRecord>& records,
                                     const std::string& out_dir,
                                     const std::string& format) {
    if (records.empty()) throw ValidationError("emit_tables: no records");
    if (format != "csv" && format != "json")
        throw ValidationError("emit_tables: format must be csv or json");
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    const auto emit = [&](const std::string& name, const std::string& content) {
        const fs::path path = fs::path(out_dir) / name;
        write_file(path, content);
        written.push_back(path.string());
    };

    const auto grid = grid_rows(records);
    const auto parity = parity_rows(records);
    const auto comparison = method_comparison(records);
    const auto aggregates = cross_seed_aggregates(records);

    if (format == "csv") {
        {
            std::ostringstream os;
            os << "metric,subgroup,value,value_defined,model,seed,record\n";
            for (const auto& r : grid)
                os << csv_field(r.metric) << ',' << csv_field(r.subgroup) << ','
                   << opt_cell(r.value) << ',' << defined_cell(r.value) << ','
                   << csv_field(r.model) << ',' << r.seed << ','
                   << csv_field(r.record_file) << '\n';
            emit("metrics.csv", os.str());
        }
        {
            std::ostringstream os;
            os << "metric,subgroup,value,value_defined,kind,classification,model,"
                  "seed,record\n";
            for (const auto& r : parity)
                os << csv_field(r.entry.metric) << ',' << csv_field(r.entry.attribute)
                   << ',' << opt_cell(r.entry.value) << ','
                   << defined_cell(r.entry.value) << ',' << to_string(r.entry.kind)
                   << ',' << to_string(r.entry.classification) << ','
                   << csv_field(r.model) << ',' << r.seed << ','
                   << csv_field(r.record_file) << '\n';
            emit("parity.csv", os.str());
        }
        {
            std::ostringstream os;
            os << "method,alpha,coverage,coverage_defined,mean_width,"
                  "mean_width_defined,unbounded,excluded_samples,fits,wall_ms,"
                  "model,seed,record\n";
            for (const auto& r : comparison)
                os << csv_field(r.method) << ',' << format_number(r.alpha) << ','
                   << opt_cell(r.coverage) << ',' << defined_cell(r.coverage) << ','
                   << opt_cell(r.mean_width) << ',' << defined_cell(r.mean_width)
                   << ',' << r.unbounded << ',' << r.excluded_samples << ','
                   << r.fits << ',' << opt_cell(r.wall_ms) << ','
                   << csv_field(r.model) << ',' << r.seed << ','
                   << csv_field(r.record_file) << '\n';
            emit("comparison.csv", os.str());
        }
        {
            std::ostringstream os;
            os << "metric,subgroup,mean,stddev,min,max,count,model\n";
            for (const auto& r : aggregates)
                os << csv_field(r.metric) << ',' << csv_field(r.subgroup) << ','
                   << opt_cell(r.mean) << ',' << opt_cell(r.stddev) << ','
                   << opt_cell(r.min) << ',' << opt_cell(r.max) << ',' << r.count
                   << ',' << csv_field(r.model) << '\n';
            emit("aggregates.csv", os.str());
        }
    } else {
        const auto opt_json = [](const std::optional<double>& v) {
            return v ? json(*v) : json(nullptr);
        };
        {
            json arr = json::array();
            for (const auto& r : grid)
                arr.push_back({{"metric", r.metric},
                               {"subgroup", r.subgroup},
                               {"value", opt_json(r.value)},
                               {"model", r.model},
                               {"seed", r.seed},
                               {"record", r.record_file}});
            emit("metrics.json", arr.dump(2) + "\n");
        }
        {
            json arr = json::array();
            for (const auto& r : parity)
                arr.push_back({{"metric", r.entry.metric},
                               {"subgroup", r.entry.attribute},
                               {"value", opt_json(r.entry.value)},
                               {"kind", to_string(r.entry.kind)},
                               {"classification", to_string(r.entry.classification)},
                               {"model", r.model},
                               {"seed", r.seed},
                               {"record", r.record_file}});
            emit("parity.json", arr.dump(2) + "\n");
        }
        {
            json arr = json::array();
            for (const auto& r : comparison)
                arr.push_back({{"method", r.method},
                               {"alpha", r.alpha},
                               {"coverage", opt_json(r.coverage)},
                               {"mean_width", opt_json(r.mean_width)},
                               {"unbounded", r.unbounded},
                               {"excluded_samples", r.excluded_samples},
                               {"fits", r.fits},
                               {"wall_ms", opt_json(r.wall_ms)},
                               {"model", r.model},
                               {"seed", r.seed},
                               {"record", r.record_file}});
            emit("comparison.json", arr.dump(2) + "\n");
        }
        {
            json arr = json::array();
            for (const auto& r : aggregates)
                arr.push_back({{"metric", r.metric},
                               {"subgroup", r.subgroup},
                               {"mean", opt_json(r.mean)},
                               {"stddev", opt_json(r.stddev)},
                               {"min", opt_json(r.min)},
                               {"max", opt_json(r.max)},
                               {"count", r.count},
                               {"model", r.model}});
            emit("aggregates.json", arr.dump(2) + "\n");
        }
    }
    emit("summary.txt", plain_summary(records));
    return written;
}

}  // namespace uqaudit
