#ifndef ECGICD_SIGNAL_HPP
#define ECGICD_SIGNAL_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecgicd::signal {

struct EmptySignal : std::runtime_error {
    EmptySignal() : std::runtime_error("signal has no samples") {}
};
struct SignalIoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Multi-lead waveform in millivolts. Missing samples are NaN.
struct Ecg {
    std::vector<std::string> leads;       // lead names, canonical 12-lead order by default
    std::vector<std::vector<float>> samples;  // per lead, equal lengths
    double fs = 0.0;                      // Hz

    std::size_t n_leads() const { return samples.size(); }
    std::size_t n_samples() const { return samples.empty() ? 0 : samples[0].size(); }
    void validate() const;
};

/// fill_missing/resample/clip warning counters, accumulated per record.
struct PreprocessStats {
    std::uint64_t all_missing_leads = 0;
    std::uint64_t interpolated_values = 0;
    std::uint64_t boundary_zero_fills = 0;
    std::uint64_t clipped_values = 0;
};

const std::vector<std::string>& standard_leads();

/// Interior gaps -> linear interpolation between nearest finite
/// neighbours; gaps touching either boundary -> 0.0. A fully missing lead
/// becomes all zeros and bumps the warning counter. Finite samples pass
/// through untouched.
Ecg fill_missing(const Ecg& sig, PreprocessStats* stats = nullptr);

/// Linear time-grid interpolation onto fs_out. Output length
/// round(len * fs_out / fs_in); exact pass-through when rates match.
/// Requires finite input (run fill_missing first).
Ecg resample(const Ecg& sig, double fs_out = 100.0);

/// Symmetric amplitude clamp to [-limit, +limit].
Ecg clip(const Ecg& sig, float limit = 3.0f, PreprocessStats* stats = nullptr);

/// fill_missing -> resample(100) -> clip(3.0).
Ecg preprocess(const Ecg& sig, double fs_out = 100.0, float limit = 3.0f,
               PreprocessStats* stats = nullptr);

// --- storage ---------------------------------------------------------

/// Binary waveform payload: 16-byte header
/// `magic "ECG1" | n_leads u32 | n_samples u32 | fs_hz f32`,
/// then little-endian f32 data, lead-major. Lead names are not stored;
/// the canonical 12-lead order applies unless `leads` is given on read.
void write_ecg1(const std::string& path, const Ecg& sig);
Ecg read_ecg1(const std::string& path, const std::vector<std::string>* leads = nullptr);

/// CSV payload: one column per lead, header row of lead names, empty
/// fields are missing values.
void write_ecg_csv(const std::string& path, const Ecg& sig);
Ecg read_ecg_csv(const std::string& path, double fs);

/// One row of the record manifest:
/// `record_id,subject_id,ecg_time,fs,n_samples,path`.
struct ManifestRow {
    std::string record_id;
    std::string subject_id;
    std::int64_t ecg_time = 0;  // seconds since epoch
    double fs = 0.0;
    std::uint32_t n_samples = 0;
    std::string path;
};

std::vector<ManifestRow> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);

/// Load a record's payload by manifest row (dispatches on file suffix:
/// .csv -> CSV payload, anything else -> ECG1 binary).
Ecg load_record(const ManifestRow& row, const std::string& base_dir = "");

}  // namespace ecgicd::signal

#endif
