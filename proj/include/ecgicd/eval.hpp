#ifndef ECGICD_EVAL_HPP
#define ECGICD_EVAL_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecgicd/dataset.hpp"
#include "ecgicd/icd.hpp"

namespace ecgicd::eval {

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Scores for an evaluation view: records x labels, finite values.
struct PredictionMatrix {
    std::vector<std::string> record_ids;
    icd::LabelSet label_set;
    std::size_t n = 0, m = 0;
    std::vector<double> scores;  // row-major

    double& at(std::size_t i, std::size_t j) { return scores[i * m + j]; }
    double at(std::size_t i, std::size_t j) const { return scores[i * m + j]; }
};

/// Mann-Whitney AUROC with midrank tie credit; nullopt when a class is
/// absent. O(n log n) rank formulation; the O(n^2) pair counter lives in
/// the tests as the oracle.
std::optional<double> auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

/// Weighted variant used by the bootstrap fast path: `order` is the
/// ascending index permutation of scores; `weight[i]` is the resample
/// multiplicity of record i (0 allowed).
std::optional<double> auroc_weighted(const std::vector<double>& scores,
                                     const std::vector<std::uint8_t>& labels,
                                     const std::vector<std::uint32_t>& order,
                                     const std::vector<std::uint32_t>& weight);

struct MacroResult {
    double value = 0.0;
    std::vector<std::size_t> skipped;  // single-class label columns
};

/// Unweighted mean over labels with defined AUROC. Throws EvalError when
/// every label is single-class.
MacroResult macro_auroc(const PredictionMatrix& p, const data::BitMatrix& y);

struct Interval {
    double point = 0.0;
    double low = 0.0;
    double high = 0.0;
};

struct LabelReport {
    std::string code;
    std::optional<Interval> auroc;  // nullopt when single-class
    double prevalence = 0.0;
    std::uint64_t n_pos = 0;
};

struct EvalReport {
    std::vector<LabelReport> labels;
    Interval macro;
    std::vector<std::string> skipped;  // single-class codes
    std::uint64_t seed = 0;
    std::uint32_t n_boot = 0;
    double alpha = 0.05;

    void save_json(const std::string& path) const;
    void save_csv(const std::string& path,
                  const std::map<std::string, std::string>* descriptions = nullptr) const;

    /// Reads `code,auroc[,ci_low,ci_high,prevalence,n_pos]`; an empty
    /// auroc field marks a skipped label. Used to feed published
    /// per-code values through the table machinery.
    static EvalReport load_csv(const std::string& path);
};

/// Row resampling plan: maps iteration index -> per-record multiplicity.
/// The default draws n rows with replacement from the iteration's own
/// RNG stream, which makes results independent of worker count.
using Resampler = std::function<void(std::uint32_t iteration, std::vector<std::uint32_t>& weight)>;

Resampler default_resampler(std::uint64_t seed, std::size_t n);

/// Percentile-bootstrap per-label and macro AUROC confidence intervals.
EvalReport bootstrap_ci(const PredictionMatrix& p, const data::BitMatrix& y,
                        std::uint32_t n_boot = 1000, double alpha = 0.05, std::uint64_t seed = 0,
                        unsigned threads = 1, const Resampler* resampler = nullptr);

struct PairedLabelResult {
    std::string code;
    double diff = 0.0;  // model A minus model B, point estimate
    double low = 0.0;
    double high = 0.0;
    bool significant = false;  // 0 outside [low, high]
};

struct PairedReport {
    std::vector<PairedLabelResult> labels;
    Interval macro_diff;
    bool macro_significant = false;
    std::uint64_t a_better = 0;  // significant with diff > 0
    std::uint64_t b_better = 0;

    void save_csv(const std::string& path) const;
};

/// Same bootstrap row indices applied to both models per iteration.
PairedReport paired_significance(const PredictionMatrix& a, const PredictionMatrix& b,
                                 const data::BitMatrix& y, std::uint32_t n_boot = 1000,
                                 double alpha = 0.05, std::uint64_t seed = 0, unsigned threads = 1);

struct CoverageRow {
    icd::Chapter chapter;
    std::string code3;
    std::uint64_t covered = 0;
    std::uint64_t total = 0;
    double prevalence = 0.0;  // prevalence of the 3-digit code itself
    std::string description;
};

/// Group report labels by 3-digit prefix and count members whose AUROC
/// exceeds the threshold. Rows sorted by chapter, then prevalence
/// descending, then code.
std::vector<CoverageRow> coverage_table(const EvalReport& report, double threshold,
                                        const std::map<std::string, std::string>* descriptions = nullptr);

void save_coverage_csv(const std::string& path, const std::vector<CoverageRow>& rows);

/// Matthews correlation matrix between label columns; NaN marks entries
/// with a degenerate marginal.
std::vector<double> mcc_matrix(const data::BitMatrix& y);
void save_mcc_csv(const std::string& path, const std::vector<double>& mcc, const icd::LabelSet& labels);

std::vector<double> prevalence(const data::BitMatrix& y);

struct ChapterAuroc {
    icd::Chapter chapter;
    double macro_auroc = 0.0;
    std::size_t n_labels = 0;
};

/// Per-chapter macro AUROC (plot data for the chapter bars figure).
std::vector<ChapterAuroc> chapter_macro(const EvalReport& report);
void save_chapter_csv(const std::string& path, const std::vector<ChapterAuroc>& rows);

}  // namespace ecgicd::eval

#endif
