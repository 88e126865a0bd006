#include "uqaudit/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "uqaudit/errors.hpp"
#include "uqaudit/rng.hpp"

namespace uqaudit {

namespace {

using nlohmann::json;

bool parse_full_ll(const std::string& s, long long& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

bool parse_full_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

// yaml-cpp node -> json. Quoted scalars (tag "!") stay strings; plain scalars
// are tried as null/bool/integer/double before falling back to string.
json yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
            return nullptr;
        case YAML::NodeType::Scalar: {
            const std::string& s = node.Scalar();
            if (node.Tag() == "!") return s;
            if (s == "null" || s == "~") return nullptr;
            if (s == "true") return true;
            if (s == "false") return false;
            long long ll = 0;
            if (parse_full_ll(s, ll)) return ll;
            double d = 0.0;
            if (parse_full_double(s, d)) return d;
            return s;
        }
        case YAML::NodeType::Sequence: {
            json arr = json::array();
            for (const auto& item : node) arr.push_back(yaml_to_json(item));
            return arr;
        }
        case YAML::NodeType::Map: {
            json obj = json::object();
            for (const auto& kv : node)
                obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
            return obj;
        }
        default:
            return nullptr;
    }
}

[[noreturn]] void fail(const std::string& context, const std::string& what) {
    throw ConfigError(context + ": " + what);
}

void check_keys(const json& obj, const std::string& context,
                std::initializer_list<const char*> allowed) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!ok.count(key)) fail(context, "unknown key '" + key + "'");
    }
}

const json* find(const json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& context) {
    if (!v.is_number()) fail(context, "expected a number");
    return v.get<double>();
}

long long as_integer(const json& v, const std::string& context) {
    if (!v.is_number_integer()) fail(context, "expected an integer");
    return v.get<long long>();
}

bool as_bool(const json& v, const std::string& context) {
    if (!v.is_boolean()) fail(context, "expected true or false");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& context) {
    if (!v.is_string()) fail(context, "expected a string");
    return v.get<std::string>();
}

std::vector<std::string> as_string_list(const json& v, const std::string& context) {
    if (!v.is_array()) fail(context, "expected a list");
    std::vector<std::string> out;
    for (const auto& item : v) out.push_back(as_string(item, context));
    return out;
}

std::vector<double> as_alpha_list(const json& v, const std::string& context) {
    if (!v.is_array() || v.empty()) fail(context, "expected a nonempty list");
    std::vector<double> out;
    for (const auto& item : v) out.push_back(as_number(item, context));
    return out;
}

void parse_method(const json& v, const std::string& context, bool& enabled,
                  std::vector<double>& alphas) {
    if (v.is_boolean()) {
        enabled = v.get<bool>();
        return;
    }
    if (!v.is_object()) fail(context, "expected true/false or a mapping");
    check_keys(v, context, {"enabled", "alphas"});
    enabled = true;
    if (const auto* e = find(v, "enabled")) enabled = as_bool(*e, context + ".enabled");
    if (const auto* a = find(v, "alphas")) alphas = as_alpha_list(*a, context + ".alphas");
}

ModelSpec parse_model_spec(const json& m, const std::string& context,
                           TaskKind task) {
    check_keys(m, context,
               {"name", "kind", "learning_rate", "iterations", "l2", "max_depth",
                "min_leaf", "k"});
    const auto* kind = find(m, "kind");
    if (!kind) fail(context, "missing 'kind'");
    ModelSpec spec;
    try {
        spec.kind = model_kind_from_string(as_string(*kind, context + ".kind"));
    } catch (const std::exception& e) {
        fail(context + ".kind", e.what());
    }
    spec.task = task;
    if (const auto* v = find(m, "learning_rate"))
        spec.learning_rate = as_number(*v, context + ".learning_rate");
    if (const auto* v = find(m, "iterations"))
        spec.iterations = static_cast<int>(as_integer(*v, context + ".iterations"));
    if (const auto* v = find(m, "l2")) spec.l2 = as_number(*v, context + ".l2");
    if (const auto* v = find(m, "max_depth"))
        spec.max_depth = static_cast<int>(as_integer(*v, context + ".max_depth"));
    if (const auto* v = find(m, "min_leaf"))
        spec.min_leaf = static_cast<int>(as_integer(*v, context + ".min_leaf"));
    if (const auto* v = find(m, "k"))
        spec.k = static_cast<int>(as_integer(*v, context + ".k"));
    return spec;
}

RunConfig from_document(const json& doc, const std::string& base_dir) {
    if (!doc.is_object()) throw ConfigError("config root must be a mapping");
    check_keys(doc, "config",
               {"dataset", "schema", "subgroups", "splits", "ensemble", "methods",
                "models", "seeds", "report"});

    RunConfig cfg;

    const auto* dataset = find(doc, "dataset");
    if (!dataset) fail("config", "missing 'dataset' section");
    check_keys(*dataset, "dataset", {"path", "id"});
    const auto* path = find(*dataset, "path");
    if (!path) fail("dataset", "missing 'path'");
    std::filesystem::path p(as_string(*path, "dataset.path"));
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    cfg.dataset_path = p.lexically_normal().string();
    cfg.dataset_id = p.stem().string();
    if (const auto* id = find(*dataset, "id")) cfg.dataset_id = as_string(*id, "dataset.id");

    const auto* schema = find(doc, "schema");
    if (!schema) fail("config", "missing 'schema' section");
    check_keys(*schema, "schema",
               {"target", "task", "numerical", "categorical", "sensitive"});
    const auto* target = find(*schema, "target");
    if (!target) fail("schema", "missing 'target'");
    cfg.schema.target = as_string(*target, "schema.target");
    if (const auto* task = find(*schema, "task")) {
        const auto s = as_string(*task, "schema.task");
        if (s == "binary_classification") {
            cfg.schema.task = TaskKind::binary_classification;
        } else if (s == "regression") {
            cfg.schema.task = TaskKind::regression;
        } else {
            fail("schema.task", "must be binary_classification or regression");
        }
    }
    if (const auto* v = find(*schema, "numerical"))
        cfg.schema.numericals = as_string_list(*v, "schema.numerical");
    if (const auto* v = find(*schema, "categorical"))
        cfg.schema.categoricals = as_string_list(*v, "schema.categorical");
    if (const auto* sens = find(*schema, "sensitive")) {
        if (!sens->is_array()) fail("schema.sensitive", "expected a list");
        for (const auto& entry : *sens) {
            if (!entry.is_object()) fail("schema.sensitive", "expected mappings");
            check_keys(entry, "schema.sensitive", {"name", "privileged", "as_feature"});
            const auto* name = find(entry, "name");
            const auto* priv = find(entry, "privileged");
            if (!name) fail("schema.sensitive", "missing 'name'");
            if (!priv) fail("schema.sensitive", "missing 'privileged'");
            SensitiveColumn col;
            col.name = as_string(*name, "schema.sensitive.name");
            if (const auto* f = find(entry, "as_feature"))
                col.as_feature = as_bool(*f, "schema.sensitive.as_feature");
            cfg.schema.sensitive.push_back(col);
            SubgroupAttribute attr;
            attr.column = col.name;
            if (priv->is_string()) {
                attr.privileged_value = priv->get<std::string>();
            } else {
                // Numeric/bool privileged values are matched against raw CSV text.
                attr.privileged_value = priv->dump();
            }
            cfg.subgroups.attributes.push_back(attr);
        }
    }

    if (const auto* subgroups = find(doc, "subgroups")) {
        check_keys(*subgroups, "subgroups", {"intersections"});
        if (const auto* inter = find(*subgroups, "intersections")) {
            if (!inter->is_array()) fail("subgroups.intersections", "expected a list");
            for (const auto& entry : *inter)
                cfg.subgroups.intersections.push_back(
                    as_string_list(entry, "subgroups.intersections"));
        }
    }

    if (const auto* splits = find(doc, "splits")) {
        check_keys(*splits, "splits", {"train", "test", "calibration"});
        if (const auto* v = find(*splits, "train"))
            cfg.train_fraction = as_number(*v, "splits.train");
        if (const auto* v = find(*splits, "test"))
            cfg.test_fraction = as_number(*v, "splits.test");
        if (const auto* v = find(*splits, "calibration"))
            cfg.calibration_fraction = as_number(*v, "splits.calibration");
    }

    if (const auto* ensemble = find(doc, "ensemble")) {
        check_keys(*ensemble, "ensemble", {"b", "fraction", "threshold"});
        if (const auto* v = find(*ensemble, "b")) {
            const auto b = as_integer(*v, "ensemble.b");
            if (b < 1) fail("ensemble.b", "must be >= 1");
            cfg.ensemble_size = static_cast<std::size_t>(b);
        }
        if (const auto* v = find(*ensemble, "fraction"))
            cfg.bootstrap_fraction = as_number(*v, "ensemble.fraction");
        if (const auto* v = find(*ensemble, "threshold"))
            cfg.threshold = as_number(*v, "ensemble.threshold");
    }

    if (const auto* methods = find(doc, "methods")) {
        check_keys(*methods, "methods",
                   {"bootstrap_metrics", "jackknife_plus", "jab", "conformal"});
        if (const auto* v = find(*methods, "bootstrap_metrics"))
            cfg.methods.bootstrap_metrics = as_bool(*v, "methods.bootstrap_metrics");
        if (const auto* v = find(*methods, "jackknife_plus"))
            parse_method(*v, "methods.jackknife_plus", cfg.methods.jackknife_plus,
                         cfg.methods.jackknife_alphas);
        if (const auto* v = find(*methods, "jab"))
            parse_method(*v, "methods.jab", cfg.methods.jab, cfg.methods.jab_alphas);
        if (const auto* v = find(*methods, "conformal"))
            parse_method(*v, "methods.conformal", cfg.methods.conformal,
                         cfg.methods.conformal_alphas);
    }

    const auto* models = find(doc, "models");
    if (!models || !models->is_array() || models->empty())
        fail("config", "missing or empty 'models' list");
    for (std::size_t i = 0; i < models->size(); ++i) {
        const auto& m = (*models)[i];
        std::ostringstream ctx;
        ctx << "models[" << i << "]";
        if (!m.is_object()) fail(ctx.str(), "expected a mapping");
        NamedModel named;
        named.spec = parse_model_spec(m, ctx.str(), cfg.schema.task);
        if (const auto* name = find(m, "name")) {
            named.name = as_string(*name, ctx.str() + ".name");
        } else {
            named.name = to_string(named.spec.kind);
        }
        cfg.models.push_back(std::move(named));
    }

    const auto* seeds = find(doc, "seeds");
    if (!seeds || !seeds->is_array() || seeds->empty())
        fail("config", "missing or empty 'seeds' list");
    for (const auto& s : *seeds) {
        const auto v = as_integer(s, "seeds");
        if (v < 0) fail("seeds", "must be nonnegative");
        cfg.seeds.push_back(static_cast<std::uint64_t>(v));
    }

    if (const auto* report = find(doc, "report")) {
        check_keys(*report, "report", {"favorable_positive", "tolerance", "entropy"});
        if (const auto* v = find(*report, "favorable_positive"))
            cfg.favorable_positive = as_bool(*v, "report.favorable_positive");
        if (const auto* v = find(*report, "tolerance"))
            cfg.tolerance = as_number(*v, "report.tolerance");
        if (const auto* v = find(*report, "entropy"))
            cfg.with_entropy = as_bool(*v, "report.entropy");
    }

    cfg.validate();
    return cfg;
}

}  // namespace

void RunConfig::validate() const {
    if (dataset_path.empty()) throw ConfigError("dataset.path: must not be empty");
    try {
        schema.validate();
        subgroups.validate(schema);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }

    const auto check_fraction = [](double f, const char* what) {
        if (!(f >= 0.0 && f <= 1.0))
            throw ConfigError(std::string(what) + ": must lie in [0, 1]");
    };
    check_fraction(train_fraction, "splits.train");
    check_fraction(test_fraction, "splits.test");
    check_fraction(calibration_fraction, "splits.calibration");
    const double total = train_fraction + test_fraction + calibration_fraction;
    if (total > 1.0 + 1e-12) throw ConfigError("splits: fractions sum above 1");
    if (!(train_fraction > 0.0)) throw ConfigError("splits.train: must be > 0");

    if (!(bootstrap_fraction > 0.0 && bootstrap_fraction <= 1.0))
        throw ConfigError("ensemble.fraction: must lie in (0, 1]");
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ConfigError("ensemble.threshold: must lie in [0, 1]");
    if (methods.bootstrap_metrics && ensemble_size < 2)
        throw ConfigError("ensemble.b: stability metrics need b >= 2");

    const auto check_alphas = [](const std::vector<double>& alphas, const char* what) {
        for (double a : alphas)
            if (!(a > 0.0 && a < 1.0))
                throw ConfigError(std::string(what) + ": alpha values must lie in (0, 1)");
    };
    check_alphas(methods.jackknife_alphas, "methods.jackknife_plus.alphas");
    check_alphas(methods.jab_alphas, "methods.jab.alphas");
    check_alphas(methods.conformal_alphas, "methods.conformal.alphas");
    if (methods.conformal && calibration_fraction <= 0.0)
        throw ConfigError("splits.calibration: conformal calibration needs a nonzero fraction");

    if (models.empty()) throw ConfigError("models: must not be empty");
    std::set<std::string> names;
    for (const auto& m : models) {
        if (!names.insert(m.name).second)
            throw ConfigError("models: duplicate name '" + m.name + "'");
        try {
            m.spec.validate();
        } catch (const std::exception& e) {
            throw ConfigError("models." + m.name + ": " + e.what());
        }
    }
    if (seeds.empty()) throw ConfigError("seeds: must not be empty");
    if (!(tolerance > 0.0)) throw ConfigError("report.tolerance: must be > 0");
}

std::uint64_t RunConfig::fingerprint() const {
    json doc;
    doc["dataset_path"] = dataset_path;
    doc["dataset_id"] = dataset_id;
    doc["target"] = schema.target;
    doc["task"] = schema.task == TaskKind::binary_classification
                      ? "binary_classification"
                      : "regression";
    doc["numerical"] = schema.numericals;
    doc["categorical"] = schema.categoricals;
    json sens = json::array();
    for (std::size_t i = 0; i < schema.sensitive.size(); ++i) {
        sens.push_back({{"name", schema.sensitive[i].name},
                        {"privileged", subgroups.attributes[i].privileged_value},
                        {"as_feature", schema.sensitive[i].as_feature}});
    }
    doc["sensitive"] = sens;
    doc["intersections"] = subgroups.intersections;
    doc["splits"] = {train_fraction, test_fraction, calibration_fraction};
    doc["ensemble"] = {{"b", ensemble_size},
                       {"fraction", bootstrap_fraction},
                       {"threshold", threshold}};
    doc["methods"] = {{"bootstrap_metrics", methods.bootstrap_metrics},
                      {"jackknife_plus", methods.jackknife_plus},
                      {"jab", methods.jab},
                      {"conformal", methods.conformal},
                      {"jackknife_alphas", methods.jackknife_alphas},
                      {"jab_alphas", methods.jab_alphas},
                      {"conformal_alphas", methods.conformal_alphas}};
    json model_list = json::array();
    for (const auto& m : models) {
        model_list.push_back({{"name", m.name},
                              {"kind", to_string(m.spec.kind)},
                              {"learning_rate", m.spec.learning_rate},
                              {"iterations", m.spec.iterations},
                              {"l2", m.spec.l2},
                              {"max_depth", m.spec.max_depth},
                              {"min_leaf", m.spec.min_leaf},
                              {"k", m.spec.k}});
    }
    doc["models"] = model_list;
    doc["seeds"] = seeds;
    doc["report"] = {{"favorable_positive", favorable_positive},
                     {"tolerance", tolerance},
                     {"entropy", with_entropy}};
    return fnv1a64(doc.dump());
}

RunConfig parse_config_text(const std::string& text, const std::string& syntax,
                            const std::string& base_dir) {
    json doc;
    if (syntax == "json") {
        try {
            doc = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config parse failed: ") + e.what());
        }
    } else if (syntax == "yaml") {
        try {
            doc = yaml_to_json(YAML::Load(text));
        } catch (const YAML::Exception& e) {
            throw ConfigError(std::string("config parse failed: ") + e.what());
        }
    } else {
        throw ConfigError("unknown config syntax '" + syntax + "'");
    }
    return from_document(doc, base_dir);
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const auto ext = std::filesystem::path(path).extension().string();
    const std::string syntax = ext == ".json" ? "json" : "yaml";
    return parse_config_text(buf.str(), syntax,
                             std::filesystem::path(path).parent_path().string());
}

}  // namespace uqaudit
