#ifndef ECGICD_DATASET_HPP
#define ECGICD_DATASET_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ecgicd/cohort.hpp"
#include "ecgicd/icd.hpp"

namespace ecgicd::data {

struct ScenarioParseError : std::runtime_error {
    explicit ScenarioParseError(const std::string& s)
        : std::runtime_error("bad scenario '" + s + "', expected T(A2B)-E(C2D) with tokens ALL|ED|HOSP") {}
};
struct UnknownRecord : std::runtime_error {
    explicit UnknownRecord(const std::string& id) : std::runtime_error("diagnosis set for unknown record '" + id + "'") {}
};
struct EmptySplit : std::runtime_error {
    explicit EmptySplit(const std::string& what) : std::runtime_error("empty split: " + what) {}
};

/// Patient-level fold assignment, folds 1..n_folds (1-8 train, 9 val,
/// 10 test for the default 10).
struct FoldAssignment {
    std::map<std::string, int> fold_of;
    std::uint64_t seed = 0;
    int n_folds = 10;

    void save_csv(const std::string& path) const;
    static FoldAssignment load_csv(const std::string& path);
};

/// Balanced assignment: subjects sorted, shuffled with the documented
/// RNG, then dealt round-robin, so fold sizes differ by at most one.
FoldAssignment assign_folds(const std::set<std::string>& subjects, std::uint64_t seed,
                            int n_folds = 10);

enum class Subset { All, Ed, Hosp };

const char* to_string(Subset s);
Subset subset_from_string(const std::string& s);

/// Train/eval subset and label-source selector, round-tripping the
/// "T(A2B)-E(C2D)" notation.
struct ScenarioSpec {
    Subset train_subset = Subset::Ed;
    Subset train_labels = Subset::All;
    Subset eval_subset = Subset::Ed;
    Subset eval_labels = Subset::All;

    static ScenarioSpec parse(const std::string& s);
    std::string to_string() const;

    bool operator==(const ScenarioSpec&) const = default;
};

/// Column-major bit-packed binary matrix.
class BitMatrix {
public:
    BitMatrix() = default;
    BitMatrix(std::size_t rows, std::size_t cols);

    void set(std::size_t i, std::size_t j) { words_[j * wpc_ + i / 64] |= 1ULL << (i % 64); }
    bool get(std::size_t i, std::size_t j) const {
        return (words_[j * wpc_ + i / 64] >> (i % 64)) & 1ULL;
    }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t column_count(std::size_t j) const;
    std::size_t column_and_count(std::size_t a, std::size_t b) const;
    bool row_any(std::size_t i) const;

private:
    std::size_t rows_ = 0, cols_ = 0, wpc_ = 0;
    std::vector<std::uint64_t> words_;
};

/// One assembled record. Waveforms stay in external storage; records
/// carry only the manifest index, so dataset views never copy signal
/// data.
struct RecordEntry {
    std::string record_id;
    std::string subject_id;
    std::string stay_key;  // stay_id for ED-sited records, hadm_id for HOSP
    cohort::Site site = cohort::Site::None;
    int fold = 0;
    std::int64_t ecg_time = 0;
    std::uint32_t signal_index = 0;

    bool has_ed_labels = false;
    bool has_hosp_labels = false;
    std::vector<std::uint32_t> ed_label_cols;    // sorted label columns
    std::vector<std::uint32_t> hosp_label_cols;  // sorted label columns

    /// Combined = hospital set when present, else ED.
    const std::vector<std::uint32_t>& label_cols(Subset source) const;
    bool has_labels(Subset source) const;
};

/// Fold-split records plus the label matrix for one label source.
struct LabeledDataset {
    std::vector<RecordEntry> records;
    icd::LabelSet label_set;
    Subset label_source = Subset::All;
    BitMatrix y;
    std::uint64_t zero_rows = 0;  // retained records with no in-vocabulary label

    std::vector<std::size_t> fold_indices(int lo, int hi) const;  // folds in [lo, hi]
    void rebuild_matrix();
};

/// Per-record diagnosis material fed into build_matrix.
struct RecordDiagnoses {
    std::set<icd::IcdCode> ed;    // expanded, may be empty
    std::set<icd::IcdCode> hosp;  // expanded, may be empty
};

/// Assemble the label matrix. Diagnosis sets are looked up by record_id;
/// a set without a matching record throws UnknownRecord.
LabeledDataset build_matrix(std::vector<RecordEntry> records,
                            const std::map<std::string, RecordDiagnoses>& diagnosis_sets,
                            icd::LabelSet label_set, Subset label_source = Subset::All);

/// Keep only the first ECG per (subject, stay key) in validation/test
/// folds; training folds pass through. Timestamp ties keep the
/// lexicographically smallest record_id. Idempotent.
LabeledDataset eval_view(const LabeledDataset& ds, int val_fold = 9, int test_fold = 10);

enum class Phase { Train, Eval };

/// Subset filter on record site plus label-source selection; records
/// lacking the requested source's diagnosis set are dropped.
LabeledDataset apply_scenario(const LabeledDataset& ds, const ScenarioSpec& spec, Phase phase);

/// Reproducibility manifest (record list, label set reference, seed,
/// scenario provenance) as JSON.
void save_manifest(const std::string& path, const LabeledDataset& ds, std::uint64_t fold_seed,
                   const std::string& label_set_path, const std::string& signal_manifest_path,
                   const std::string& scenario);
LabeledDataset load_manifest(const std::string& path, std::string* signal_manifest_path = nullptr);

}  // namespace ecgicd::data

#endif
