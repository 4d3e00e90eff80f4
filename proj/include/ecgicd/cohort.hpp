#ifndef ECGICD_COHORT_HPP
#define ECGICD_COHORT_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ecgicd/icd.hpp"

namespace ecgicd::cohort {

enum class StayKind { Ed, Hosp };
enum class Site { Ed, Hosp, None };

const char* to_string(Site s);

/// One ED stay or hospital admission. out_time falls back to the death
/// time when the discharge timestamp is absent.
struct StayInterval {
    std::string subject_id;
    std::string id;  // stay_id (ED) or hadm_id (HOSP)
    StayKind kind = StayKind::Ed;
    std::int64_t in_time = 0;
    std::int64_t out_time = 0;
    std::string hadm_id;  // ED stays: linked admission when known

    bool contains(std::int64_t t) const { return in_time <= t && t <= out_time; }
};

struct Linkage {
    std::string record_id;
    std::optional<std::string> ed_stay;
    std::optional<std::string> hosp_admission;
    Site site = Site::None;
};

/// Normalized + ancestor-expanded diagnosis set for one record.
struct DiagnosisSet {
    std::string record_id;
    std::set<icd::IcdCode> codes;
    Site source = Site::None;
};

/// Ingestion counters; discards are tracked outcomes, not errors.
struct LinkStats {
    std::uint64_t linked_ed = 0;
    std::uint64_t linked_hosp = 0;
    std::uint64_t unlinked = 0;
    std::uint64_t overlapping_intervals = 0;
    std::uint64_t discarded_empty_diagnoses = 0;
    std::uint64_t malformed_codes_skipped = 0;
    std::uint64_t unmappable_icd9_skipped = 0;
    std::uint64_t oversize_code_lists = 0;
};

/// Per-subject interval index; intervals are sorted by in_time on build.
class StayIndex {
public:
    void add(StayInterval interval);
    void finalize();

    /// Timestamp-containment linkage. Site is ED when the time falls in an
    /// ED stay (admission attached via the stay's hadm_id, else by
    /// containment); else HOSP when inside an admission; else NONE.
    /// Overlapping same-kind hits pick the latest in_time and count a
    /// warning.
    Linkage link_record(const std::string& record_id, const std::string& subject_id,
                        std::int64_t ecg_time, LinkStats* stats = nullptr) const;

    static StayIndex from_tables(const std::string& edstays_csv, const std::string& admissions_csv);

private:
    struct SubjectStays {
        std::vector<StayInterval> ed;
        std::vector<StayInterval> hosp;
    };
    std::unordered_map<std::string, SubjectStays> by_subject_;
    bool finalized_ = false;
};

/// Raw diagnosis rows keyed by stay_id (ED) or hadm_id (HOSP).
struct DiagnosisRow {
    std::string icd_code;
    icd::IcdVersion version = icd::IcdVersion::Icd10;
};

class DiagnosisTable {
public:
    void add(const std::string& key, DiagnosisRow row);
    const std::vector<DiagnosisRow>* find(const std::string& key) const;

    /// `stay_id|hadm_id,seq_num,icd_code,icd_version` CSV (key column name
    /// depends on the table).
    static DiagnosisTable from_csv(const std::string& path, const std::string& key_column);

private:
    std::unordered_map<std::string, std::vector<DiagnosisRow>> rows_;
};

/// Normalize, expand and de-duplicate one source's raw code list.
/// Malformed / unmappable rows are counted and skipped (permissive
/// ingestion); the result may be empty.
std::set<icd::IcdCode> expand_raw_codes(const std::vector<DiagnosisRow>& rows,
                                        const icd::MappingTable& mapping, StayKind kind,
                                        LinkStats* stats = nullptr);

/// Hospital set when present, else the ED set; empty results are a
/// Discard outcome (std::nullopt) counted in stats.
std::optional<DiagnosisSet> resolve_diagnoses(const Linkage& linkage,
                                              const DiagnosisTable& ed_dx,
                                              const DiagnosisTable& hosp_dx,
                                              const icd::MappingTable& mapping,
                                              LinkStats* stats = nullptr);

}  // namespace ecgicd::cohort

#endif
