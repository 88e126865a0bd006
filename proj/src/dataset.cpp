#include "uqaudit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "uqaudit/errors.hpp"
#include "uqaudit/kernels.hpp"
#include "uqaudit/rng.hpp"

namespace uqaudit {
namespace {

// RFC 4180 row reader: handles quoted fields, doubled quotes and CRLF.
// Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool saw_any = false;
    int c;
    while ((c = in.get()) != EOF) {
        saw_any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get();
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(static_cast<char>(c));
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get();
            fields.push_back(std::move(field));
            return true;
        } else if (c == '\n') {
            fields.push_back(std::move(field));
            return true;
        } else {
            field.push_back(static_cast<char>(c));
        }
    }
    if (!saw_any) return false;
    fields.push_back(std::move(field));
    return true;
}

double parse_numeric_cell(const std::string& cell, std::size_t row,
                          const std::string& column) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ParseError("unparseable numeric cell '" + cell + "' at row " +
                         std::to_string(row) + ", column '" + column + "'");
    }
    return value;
}

}  // namespace

void ColumnSchema::validate() const {
    if (target.empty()) throw SchemaError("schema has no target column");
    auto contains = [](const std::vector<std::string>& v, const std::string& s) {
        return std::find(v.begin(), v.end(), s) != v.end();
    };
    if (contains(numericals, target) || contains(categoricals, target)) {
        throw SchemaError("target column '" + target +
                          "' must not be listed as a feature column");
    }
    std::set<std::string> seen;
    for (const auto& c : numericals) {
        if (!seen.insert(c).second) throw SchemaError("duplicate numerical column '" + c + "'");
    }
    for (const auto& c : categoricals) {
        if (!seen.insert(c).second) {
            throw SchemaError("column '" + c + "' listed as both numerical and categorical");
        }
    }
}

bool ColumnSchema::is_sensitive(const std::string& column) const {
    for (const auto& s : sensitive) {
        if (s.name == column) return true;
    }
    return false;
}

void SubgroupSpec::validate(const ColumnSchema& schema) const {
    std::set<std::string> declared;
    for (const auto& attr : attributes) {
        if (!schema.is_sensitive(attr.column)) {
            throw SchemaError("subgroup attribute '" + attr.column +
                              "' is not a declared sensitive column");
        }
        if (!declared.insert(attr.column).second) {
            throw SchemaError("duplicate subgroup attribute '" + attr.column + "'");
        }
    }
    for (const auto& inter : intersections) {
        if (inter.size() < 2) {
            throw SchemaError("intersection must reference at least 2 attributes");
        }
        std::set<std::string> members;
        for (const auto& name : inter) {
            if (declared.count(name) == 0) {
                throw SchemaError("intersection references unknown attribute '" + name + "'");
            }
            if (!members.insert(name).second) {
                throw SchemaError("intersection repeats attribute '" + name + "'");
            }
        }
    }
}

const std::vector<std::string>& Dataset::column(const std::string& name) const {
    auto it = column_index.find(name);
    if (it == column_index.end()) throw SchemaError("unknown column '" + name + "'");
    return cells[it->second];
}

Dataset load_csv(const std::string& path, const ColumnSchema& schema) {
    schema.validate();

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset file '" + path + "'");

    Dataset ds;
    ds.schema = schema;

    std::vector<std::string> record;
    if (!read_record(in, record)) throw ParseError("empty CSV file '" + path + "'");
    ds.columns = record;
    for (std::size_t i = 0; i < ds.columns.size(); ++i) {
        if (!ds.column_index.emplace(ds.columns[i], i).second) {
            throw ParseError("duplicate header column '" + ds.columns[i] + "'");
        }
    }

    auto require_column = [&](const std::string& name) {
        if (ds.column_index.count(name) == 0) {
            throw SchemaError("schema column '" + name + "' missing from CSV header");
        }
    };
    require_column(schema.target);
    for (const auto& c : schema.numericals) require_column(c);
    for (const auto& c : schema.categoricals) require_column(c);
    for (const auto& s : schema.sensitive) require_column(s.name);

    ds.cells.resize(ds.columns.size());
    while (read_record(in, record)) {
        if (record.size() == 1 && record[0].empty()) continue;  // trailing newline
        if (record.size() != ds.columns.size()) {
            throw ParseError("row " + std::to_string(ds.n_rows + 1) + " has " +
                             std::to_string(record.size()) + " fields, expected " +
                             std::to_string(ds.columns.size()));
        }
        for (std::size_t i = 0; i < record.size(); ++i) {
            ds.cells[i].push_back(std::move(record[i]));
        }
        ++ds.n_rows;
    }

    const auto& target_cells = ds.column(schema.target);
    ds.targets.reserve(ds.n_rows);
    for (std::size_t r = 0; r < ds.n_rows; ++r) {
        const double value = parse_numeric_cell(target_cells[r], r + 1, schema.target);
        if (schema.task == TaskKind::binary_classification && value != 0.0 && value != 1.0) {
            throw ValidationError("non-binary target value '" + target_cells[r] +
                                  "' at row " + std::to_string(r + 1));
        }
        ds.targets.push_back(value);
    }

    // Parse declared numerical columns eagerly so bad cells fail at load time.
    for (const auto& c : schema.numericals) {
        const auto& col = ds.column(c);
        for (std::size_t r = 0; r < ds.n_rows; ++r) {
            parse_numeric_cell(col[r], r + 1, c);
        }
    }

    return ds;
}

SplitIndices split(const Dataset& dataset, double train_frac, double test_frac,
                   double calibration_frac, std::uint64_t seed) {
    const std::size_t n = dataset.n_rows;
    if (n < 3) throw ValidationError("split requires at least 3 rows");
    for (double f : {train_frac, test_frac, calibration_frac}) {
        if (f < 0.0 || f > 1.0) throw ValidationError("split fraction outside [0, 1]");
    }
    const double total = train_frac + test_frac + calibration_frac;
    if (total > 1.0 + 1e-12) {
        throw ValidationError("split fractions sum to " + std::to_string(total) +
                              " (> 1)");
    }

    auto rounded = [n](double f) {
        return static_cast<std::size_t>(std::llround(f * static_cast<double>(n)));
    };
    const std::size_t n_test = rounded(test_frac);
    const std::size_t n_cal = rounded(calibration_frac);
    std::size_t n_train = rounded(train_frac);
    if (std::abs(total - 1.0) <= 1e-12) {
        n_train = n - n_test - n_cal;  // rounding remainder goes to train
    }
    auto check_nonempty = [](double f, std::size_t size, const char* name) {
        if (f > 0.0 && size == 0) {
            throw ValidationError(std::string(name) + " fraction yields an empty split");
        }
    };
    check_nonempty(train_frac, n_train, "train");
    check_nonempty(test_frac, n_test, "test");
    check_nonempty(calibration_frac, n_cal, "calibration");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream rng(derive_seed(seed, "split"));
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = rng.next_below(i + 1);
        std::swap(order[i], order[j]);
    }

    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + n_train);
    out.test.assign(order.begin() + n_train, order.begin() + n_train + n_test);
    out.calibration.assign(order.begin() + n_train + n_test,
                           order.begin() + n_train + n_test + n_cal);
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    std::sort(out.calibration.begin(), out.calibration.end());
    return out;
}

SubgroupPartition partition_subgroups(const Dataset& dataset,
                                      const std::vector<std::size_t>& split,
                                      const SubgroupSpec& spec) {
    spec.validate(dataset.schema);

    SubgroupPartition out;
    out["overall"] = split;

    std::unordered_map<std::string, const SubgroupAttribute*> by_name;
    for (const auto& attr : spec.attributes) by_name[attr.column] = &attr;

    for (const auto& attr : spec.attributes) {
        const auto& col = dataset.column(attr.column);
        std::vector<std::size_t> priv;
        std::vector<std::size_t> dis;
        for (std::size_t idx : split) {
            (col[idx] == attr.privileged_value ? priv : dis).push_back(idx);
        }
        out[attr.column + "_priv"] = std::move(priv);
        out[attr.column + "_dis"] = std::move(dis);
    }

    for (const auto& inter : spec.intersections) {
        std::string name;
        for (const auto& member : inter) {
            if (!name.empty()) name += "&";
            name += member;
        }
        std::vector<std::size_t> priv;
        std::vector<std::size_t> dis;
        for (std::size_t idx : split) {
            std::size_t privileged = 0;
            for (const auto& member : inter) {
                const auto* attr = by_name.at(member);
                if (dataset.column(attr->column)[idx] == attr->privileged_value) {
                    ++privileged;
                }
            }
            if (privileged == inter.size()) {
                priv.push_back(idx);
            } else if (privileged == 0) {
                dis.push_back(idx);
            }
        }
        out[name + "_priv"] = std::move(priv);
        out[name + "_dis"] = std::move(dis);
    }

    return out;
}

Preprocessor fit_preprocessor(const Dataset& dataset,
                              const std::vector<std::size_t>& train) {
    if (train.empty()) throw ValidationError("preprocessor requires a nonempty train split");

    Preprocessor pp;
    pp.numerical_columns = dataset.schema.numericals;
    pp.categorical_columns = dataset.schema.categoricals;
    for (const auto& s : dataset.schema.sensitive) {
        if (!s.as_feature) continue;
        const bool already =
            std::find(pp.numerical_columns.begin(), pp.numerical_columns.end(), s.name) !=
                pp.numerical_columns.end() ||
            std::find(pp.categorical_columns.begin(), pp.categorical_columns.end(),
                      s.name) != pp.categorical_columns.end();
        if (!already) pp.categorical_columns.push_back(s.name);
    }

    const double n = static_cast<double>(train.size());
    for (const auto& name : pp.numerical_columns) {
        const auto& col = dataset.column(name);
        std::vector<double> values;
        values.reserve(train.size());
        for (std::size_t idx : train) {
            values.push_back(parse_numeric_cell(col[idx], idx + 1, name));
        }
        Preprocessor::NumericStats stats;
        stats.mean = kernels::sum(values) / n;
        const double variance = kernels::sumsq_dev(values, stats.mean) / n;
        if (variance > 0.0) {
            stats.stddev = std::sqrt(variance);
        } else {
            stats.stddev = 1.0;
            pp.warnings.push_back("numerical column '" + name +
                                  "' has zero variance on train; scaling divisor set to 1");
        }
        pp.numeric_stats[name] = stats;
    }

    for (const auto& name : pp.categorical_columns) {
        const auto& col = dataset.column(name);
        std::vector<std::string> vocab;
        std::set<std::string> seen;
        for (std::size_t idx : train) {
            if (seen.insert(col[idx]).second) vocab.push_back(col[idx]);
        }
        pp.vocabularies[name] = std::move(vocab);
    }

    pp.width = pp.numerical_columns.size();
    for (const auto& name : pp.categorical_columns) {
        pp.width += pp.vocabularies.at(name).size();
    }
    return pp;
}

Matrix transform(const Preprocessor& preproc, const Dataset& dataset,
                 const std::vector<std::size_t>& indices) {
    Matrix out(indices.size(), preproc.width);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t idx = indices[r];
        std::size_t c = 0;
        for (const auto& name : preproc.numerical_columns) {
            const auto& stats = preproc.numeric_stats.at(name);
            const double raw = parse_numeric_cell(dataset.column(name)[idx], idx + 1, name);
            out.at(r, c++) = (raw - stats.mean) / stats.stddev;
        }
        for (const auto& name : preproc.categorical_columns) {
            const auto& vocab = preproc.vocabularies.at(name);
            const std::string& value = dataset.column(name)[idx];
            for (std::size_t v = 0; v < vocab.size(); ++v) {
                out.at(r, c + v) = vocab[v] == value ? 1.0 : 0.0;
            }
            c += vocab.size();
        }
    }
    return out;
}

std::vector<double> gather_targets(const Dataset& dataset,
                                   const std::vector<std::size_t>& indices) {
    std::vector<double> out;
    out.reserve(indices.size());
    for (std::size_t idx : indices) out.push_back(dataset.targets[idx]);
    return out;
}

}  // namespace uqaudit
