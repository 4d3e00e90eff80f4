#include "ecgicd/runconfig.hpp"

#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>

namespace ecgicd::cli {

namespace {

std::string strip(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Cut a trailing comment that is not inside a string literal.
std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_str = !in_str;
        if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
}

TomlValue parse_scalar(const std::string& raw, int line_no) {
    TomlValue v;
    const std::string s = strip(raw);
    if (s.empty()) throw ConfigError("line " + std::to_string(line_no) + ": missing value");
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"')
            throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
        v.kind = TomlValue::Kind::String;
        v.str = s.substr(1, s.size() - 2);
        return v;
    }
    if (s == "true" || s == "false") {
        v.kind = TomlValue::Kind::Bool;
        v.boolean = s == "true";
        return v;
    }
    if (s.front() == '[') {
        if (s.back() != ']')
            throw ConfigError("line " + std::to_string(line_no) + ": unterminated array");
        v.kind = TomlValue::Kind::Array;
        std::string body = s.substr(1, s.size() - 2);
        std::string item;
        bool in_str = false;
        for (char c : body) {
            if (c == '"') in_str = !in_str;
            if (c == ',' && !in_str) {
                if (!strip(item).empty()) v.array.push_back(parse_scalar(item, line_no));
                item.clear();
            } else {
                item.push_back(c);
            }
        }
        if (!strip(item).empty()) v.array.push_back(parse_scalar(item, line_no));
        return v;
    }
    // Number: integer unless it has a '.', 'e' or 'E'.
    try {
        if (s.find_first_of(".eE") == std::string::npos) {
            std::size_t used = 0;
            v.integer = std::stoll(s, &used);
            if (used != s.size()) throw ConfigError("");
            v.kind = TomlValue::Kind::Int;
        } else {
            std::size_t used = 0;
            v.real = std::stod(s, &used);
            if (used != s.size()) throw ConfigError("");
            v.kind = TomlValue::Kind::Float;
        }
    } catch (...) {
        throw ConfigError("line " + std::to_string(line_no) + ": cannot parse value '" + s + "'");
    }
    return v;
}

}  // namespace

std::map<std::string, TomlValue> parse_toml(const std::string& text) {
    std::map<std::string, TomlValue> out;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
            section = strip(line.substr(1, line.size() - 2));
            if (section.empty() || section.find('.') != std::string::npos)
                throw ConfigError("line " + std::to_string(line_no) + ": bad section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = strip(line.substr(0, eq));
        if (key.empty() || key.find('.') != std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": bad key '" + key + "'");
        const std::string full = section.empty() ? key : section + "." + key;
        if (out.count(full)) throw ConfigError("duplicate key '" + full + "'");
        out[full] = parse_scalar(line.substr(eq + 1), line_no);
    }
    return out;
}

std::map<std::string, TomlValue> parse_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str());
}

RunConfig RunConfig::load(const std::string& path) {
    auto kv = parse_toml_file(path);
    RunConfig cfg;

    auto take = [&kv](const std::string& key) -> std::optional<TomlValue> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        TomlValue v = std::move(it->second);
        kv.erase(it);
        return v;
    };
    auto str = [&](const std::string& key, std::string& dst) {
        if (auto v = take(key)) {
            if (v->kind != TomlValue::Kind::String) throw ConfigError(key + " must be a string");
            dst = v->str;
        }
    };
    auto u64 = [&](const std::string& key, auto& dst) {
        if (auto v = take(key)) {
            if (v->kind != TomlValue::Kind::Int || v->integer < 0)
                throw ConfigError(key + " must be a non-negative integer");
            dst = static_cast<std::decay_t<decltype(dst)>>(v->integer);
        }
    };
    auto real = [&](const std::string& key, double& dst) {
        if (auto v = take(key)) {
            if (v->kind == TomlValue::Kind::Float) dst = v->real;
            else if (v->kind == TomlValue::Kind::Int) dst = static_cast<double>(v->integer);
            else throw ConfigError(key + " must be a number");
        }
    };
    auto opt_size = [&](const std::string& key, std::optional<std::size_t>& dst) {
        if (auto v = take(key)) {
            if (v->kind != TomlValue::Kind::Int || v->integer <= 0)
                throw ConfigError(key + " must be a positive integer");
            dst = static_cast<std::size_t>(v->integer);
        }
    };

    str("paths.edstays", cfg.edstays);
    str("paths.admissions", cfg.admissions);
    str("paths.ed_diagnoses", cfg.ed_diagnoses);
    str("paths.hosp_diagnoses", cfg.hosp_diagnoses);
    str("paths.signal_manifest", cfg.signal_manifest);
    str("paths.icd9_map", cfg.icd9_map);
    str("paths.descriptions", cfg.descriptions);
    str("paths.out_dir", cfg.out_dir);

    u64("build.fold_seed", cfg.fold_seed);
    u64("build.label_threshold", cfg.label_threshold);
    u64("build.n_folds", cfg.n_folds);

    str("scenario.value", cfg.scenario);

    str("model.preset", cfg.model_preset);
    opt_size("model.d_model", cfg.d_model);
    opt_size("model.n_layers", cfg.n_layers);
    opt_size("model.d_state", cfg.d_state);
    opt_size("model.base_width", cfg.base_width);
    opt_size("model.in_leads", cfg.in_leads);
    opt_size("model.input_len", cfg.input_len);
    if (auto v = take("model.stage_depths")) {
        if (v->kind != TomlValue::Kind::Array) throw ConfigError("model.stage_depths must be an array");
        std::vector<std::size_t> depths;
        for (const auto& e : v->array) {
            if (e.kind != TomlValue::Kind::Int || e.integer <= 0)
                throw ConfigError("model.stage_depths entries must be positive integers");
            depths.push_back(static_cast<std::size_t>(e.integer));
        }
        cfg.stage_depths = std::move(depths);
    }
    if (auto v = take("model.dropout")) {
        if (v->kind == TomlValue::Kind::Float) cfg.dropout = v->real;
        else if (v->kind == TomlValue::Kind::Int) cfg.dropout = static_cast<double>(v->integer);
        else throw ConfigError("model.dropout must be a number");
    }
    u64("model.seed", cfg.model_seed);

    real("train.lr", cfg.lr);
    real("train.weight_decay", cfg.weight_decay);
    u64("train.epochs", cfg.epochs);
    u64("train.batch_size", cfg.batch_size);
    u64("train.crop_len", cfg.crop_len);
    u64("train.seed", cfg.train_seed);
    real("train.early_stop_val_auroc", cfg.early_stop_val_auroc);

    u64("eval.n_boot", cfg.n_boot);
    real("eval.alpha", cfg.alpha);
    u64("eval.seed", cfg.eval_seed);
    real("eval.coverage_threshold", cfg.coverage_threshold);

    str("run.name", cfg.name);
    u64("run.threads", cfg.threads);

    if (!kv.empty()) throw ConfigError("unknown config key '" + kv.begin()->first + "'");
    return cfg;
}

void RunConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out.precision(17);
    out << "[paths]\n";
    auto w = [&out](const char* key, const std::string& v) {
        if (!v.empty()) out << key << " = \"" << v << "\"\n";
    };
    w("edstays", edstays);
    w("admissions", admissions);
    w("ed_diagnoses", ed_diagnoses);
    w("hosp_diagnoses", hosp_diagnoses);
    w("signal_manifest", signal_manifest);
    w("icd9_map", icd9_map);
    w("descriptions", descriptions);
    w("out_dir", out_dir);
    out << "\n[build]\nfold_seed = " << fold_seed << "\nlabel_threshold = " << label_threshold
        << "\nn_folds = " << n_folds << "\n";
    out << "\n[scenario]\nvalue = \"" << scenario << "\"\n";
    out << "\n[model]\npreset = \"" << model_preset << "\"\nseed = " << model_seed << "\n";
    if (d_model) out << "d_model = " << *d_model << "\n";
    if (n_layers) out << "n_layers = " << *n_layers << "\n";
    if (d_state) out << "d_state = " << *d_state << "\n";
    if (base_width) out << "base_width = " << *base_width << "\n";
    if (in_leads) out << "in_leads = " << *in_leads << "\n";
    if (input_len) out << "input_len = " << *input_len << "\n";
    if (stage_depths) {
        out << "stage_depths = [";
        for (std::size_t i = 0; i < stage_depths->size(); ++i)
            out << (i ? ", " : "") << (*stage_depths)[i];
        out << "]\n";
    }
    if (dropout) out << "dropout = " << *dropout << "\n";
    out << "\n[train]\nlr = " << lr << "\nweight_decay = " << weight_decay
        << "\nepochs = " << epochs << "\nbatch_size = " << batch_size << "\ncrop_len = " << crop_len
        << "\nseed = " << train_seed << "\nearly_stop_val_auroc = " << early_stop_val_auroc << "\n";
    out << "\n[eval]\nn_boot = " << n_boot << "\nalpha = " << alpha << "\nseed = " << eval_seed
        << "\ncoverage_threshold = " << coverage_threshold << "\n";
    out << "\n[run]\nname = \"" << name << "\"\nthreads = " << threads << "\n";
}

}  // namespace ecgicd::cli
