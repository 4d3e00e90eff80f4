#ifndef ECGICD_RUNCONFIG_HPP
#define ECGICD_RUNCONFIG_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ecgicd::cli {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Minimal TOML subset: [sections], `key = value` with strings, ints,
/// floats, booleans and flat arrays, '#' comments. Enough for run
/// configs; nested tables and dotted keys are rejected.
struct TomlValue {
    enum class Kind { String, Int, Float, Bool, Array } kind = Kind::String;
    std::string str;
    std::int64_t integer = 0;
    double real = 0.0;
    bool boolean = false;
    std::vector<TomlValue> array;
};

std::map<std::string, TomlValue> parse_toml(const std::string& text);
std::map<std::string, TomlValue> parse_toml_file(const std::string& path);

/// Resolved run configuration. Unknown keys in the file are rejected.
struct RunConfig {
    // [paths]
    std::string edstays, admissions, ed_diagnoses, hosp_diagnoses;
    std::string signal_manifest, icd9_map, descriptions, out_dir = "run/out";

    // [build]
    std::uint64_t fold_seed = 0;
    std::uint64_t label_threshold = 2000;
    int n_folds = 10;

    // [scenario]
    std::string scenario = "T(ED2ALL)-E(ED2ALL)";

    // [model]
    std::string model_preset = "tiny-s4";
    std::optional<std::size_t> d_model, n_layers, d_state, base_width, in_leads, input_len;
    std::optional<std::vector<std::size_t>> stage_depths;
    std::optional<double> dropout;
    std::uint64_t model_seed = 0;

    // [train]
    double lr = 1e-3;
    double weight_decay = 1e-3;
    std::uint32_t epochs = 20;
    std::uint32_t batch_size = 32;
    std::size_t crop_len = 250;
    std::uint64_t train_seed = 0;
    double early_stop_val_auroc = 0.0;

    // [eval]
    std::uint32_t n_boot = 1000;
    double alpha = 0.05;
    std::uint64_t eval_seed = 0;
    double coverage_threshold = 0.9;

    // [run]
    std::string name = "out";
    unsigned threads = 1;

    static RunConfig load(const std::string& path);
    void save(const std::string& path) const;  // resolved snapshot
};

}  // namespace ecgicd::cli

#endif
