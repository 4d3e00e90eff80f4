#ifndef ECGICD_SYNTH_HPP
#define ECGICD_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ecgicd/dataset.hpp"
#include "ecgicd/signal.hpp"
#include "ecgicd/trainer.hpp"

namespace ecgicd::synth {

/// Planted-signature multi-label set: each label is a lead-specific
/// sinusoid burst covering most of the record, so every training crop
/// overlaps it. Ground truth is exact by construction.
struct PlantedSpec {
    std::size_t n_records = 512;
    std::size_t n_labels = 8;
    std::size_t n_leads = 4;
    std::size_t len = 1000;  // samples
    double fs = 100.0;
    double label_prob = 0.35;
    double noise_sigma = 0.25;
    double burst_amp = 0.8;
    std::uint64_t seed = 0;
};

struct PlantedData {
    train::SignalStore signals;
    data::LabeledDataset dataset;  // folds assigned, site ED, one subject per record
};

PlantedData generate_planted(const PlantedSpec& spec);

/// File-tree fixture mirroring the production input schemas: MIMIC-style
/// CSV tables, an ICD-9 mapping TSV and ECG1 payloads with gaps and
/// out-of-range spikes. The returned counts are the generator's own
/// bookkeeping, used as the golden values for the build command.
struct CohortSpec {
    std::size_t n_subjects = 20;
    std::uint64_t seed = 0;
    double fs = 500.0;
    std::size_t n_leads = 12;
    double duration_s = 10.0;
};

struct CohortExpected {
    std::uint64_t records_written = 0;
    std::uint64_t ed_records = 0;
    std::uint64_t hosp_records = 0;
    std::uint64_t unlinked_records = 0;
    std::uint64_t empty_diagnosis_records = 0;
    std::uint64_t kept_records = 0;   // linked and nonempty
    std::uint64_t kept_patients = 0;  // subjects with >= 1 kept record
};

CohortExpected generate_cohort_fixture(const std::string& dir, const CohortSpec& spec);

}  // namespace ecgicd::synth

#endif
