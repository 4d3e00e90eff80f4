#ifndef ECGICD_PIPELINE_HPP
#define ECGICD_PIPELINE_HPP

#include <string>

#include "ecgicd/runconfig.hpp"

namespace ecgicd::cli {

struct LabelSetMismatch : std::runtime_error {
    LabelSetMismatch() : std::runtime_error("checkpoint was trained against a different label set") {}
};

/// Output directory layout (under cfg.out_dir):
///   config.toml, manifest.json, folds.csv, labels.csv, stats.json,
///   signal_cache.csv, signals/*.bin, checkpoint.bin, train_log.jsonl,
///   report.{json,csv}, tables/*.csv, metadata.json
void cmd_build(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);

struct EvalOptions {
    std::string checkpoint;       // defaults to <out_dir>/checkpoint.bin
    std::string scenario;         // overrides cfg.scenario when nonempty
    bool oracle_scores = false;   // diagnostic: scores := labels
    std::string auroc_csv;        // table-only mode from an existing report CSV
};
void cmd_eval(const RunConfig& cfg, const EvalOptions& opts);

void cmd_compare(const RunConfig& cfg, const std::string& checkpoint_a,
                 const std::string& checkpoint_b, const std::string& scenario);

void dump_chapters(std::ostream& out);

}  // namespace ecgicd::cli

#endif
