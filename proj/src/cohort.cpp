#include "ecgicd/cohort.hpp"

#include <algorithm>

#include "ecgicd/csv.hpp"
#include "ecgicd/timeparse.hpp"

namespace ecgicd::cohort {

const char* to_string(Site s) {
    switch (s) {
        case Site::Ed: return "ED";
        case Site::Hosp: return "HOSP";
        default: return "NONE";
    }
}

void StayIndex::add(StayInterval interval) {
    auto& stays = by_subject_[interval.subject_id];
    (interval.kind == StayKind::Ed ? stays.ed : stays.hosp).push_back(std::move(interval));
    finalized_ = false;
}

void StayIndex::finalize() {
    for (auto& [subject, stays] : by_subject_) {
        auto by_in_time = [](const StayInterval& a, const StayInterval& b) {
            if (a.in_time != b.in_time) return a.in_time < b.in_time;
            return a.id < b.id;
        };
        std::sort(stays.ed.begin(), stays.ed.end(), by_in_time);
        std::sort(stays.hosp.begin(), stays.hosp.end(), by_in_time);
    }
    finalized_ = true;
}

namespace {

// Containing intervals use closed bounds; ties between overlapping
// intervals resolve to the latest in_time (with id as final tie-break so
// shuffled inputs produce identical links).
const StayInterval* find_containing(const std::vector<StayInterval>& sorted, std::int64_t t,
                                    LinkStats* stats) {
    const StayInterval* best = nullptr;
    int hits = 0;
    for (const auto& s : sorted) {
        if (s.in_time > t) break;
        if (s.contains(t)) {
            ++hits;
            if (best == nullptr || s.in_time > best->in_time ||
                (s.in_time == best->in_time && s.id > best->id)) {
                best = &s;
            }
        }
    }
    if (hits > 1 && stats != nullptr) ++stats->overlapping_intervals;
    return best;
}

}  // namespace

Linkage StayIndex::link_record(const std::string& record_id, const std::string& subject_id,
                               std::int64_t ecg_time, LinkStats* stats) const {
    Linkage link;
    link.record_id = record_id;
    auto it = by_subject_.find(subject_id);
    if (it == by_subject_.end()) {
        if (stats != nullptr) ++stats->unlinked;
        return link;
    }
    const auto& stays = it->second;
    if (const StayInterval* ed = find_containing(stays.ed, ecg_time, stats)) {
        link.site = Site::Ed;
        link.ed_stay = ed->id;
        if (!ed->hadm_id.empty()) {
            link.hosp_admission = ed->hadm_id;
        } else if (const StayInterval* adm = find_containing(stays.hosp, ecg_time, stats)) {
            link.hosp_admission = adm->id;
        }
        if (stats != nullptr) ++stats->linked_ed;
        return link;
    }
    if (const StayInterval* adm = find_containing(stays.hosp, ecg_time, stats)) {
        link.site = Site::Hosp;
        link.hosp_admission = adm->id;
        if (stats != nullptr) ++stats->linked_hosp;
        return link;
    }
    if (stats != nullptr) ++stats->unlinked;
    return link;
}

StayIndex StayIndex::from_tables(const std::string& edstays_csv, const std::string& admissions_csv) {
    StayIndex index;
    {
        const CsvTable t = read_csv(edstays_csv);
        const std::size_t c_sub = t.column("subject_id");
        const std::size_t c_stay = t.column("stay_id");
        const std::size_t c_hadm = t.column("hadm_id");
        const std::size_t c_in = t.column("intime");
        const std::size_t c_out = t.column("outtime");
        for (const auto& r : t.rows) {
            StayInterval s;
            s.subject_id = r[c_sub];
            s.id = r[c_stay];
            s.kind = StayKind::Ed;
            s.hadm_id = r[c_hadm];
            s.in_time = parse_timestamp(r[c_in]);
            s.out_time = r[c_out].empty() ? s.in_time : parse_timestamp(r[c_out]);
            index.add(std::move(s));
        }
    }
    {
        const CsvTable t = read_csv(admissions_csv);
        const std::size_t c_sub = t.column("subject_id");
        const std::size_t c_hadm = t.column("hadm_id");
        const std::size_t c_in = t.column("admittime");
        const std::size_t c_out = t.column("dischtime");
        const std::size_t c_death = t.column("deathtime");
        for (const auto& r : t.rows) {
            StayInterval s;
            s.subject_id = r[c_sub];
            s.id = r[c_hadm];
            s.kind = StayKind::Hosp;
            s.in_time = parse_timestamp(r[c_in]);
            if (!r[c_out].empty()) {
                s.out_time = parse_timestamp(r[c_out]);
            } else if (!r[c_death].empty()) {
                s.out_time = parse_timestamp(r[c_death]);
            } else {
                s.out_time = s.in_time;
            }
            index.add(std::move(s));
        }
    }
    index.finalize();
    return index;
}

void DiagnosisTable::add(const std::string& key, DiagnosisRow row) {
    rows_[key].push_back(std::move(row));
}

const std::vector<DiagnosisRow>* DiagnosisTable::find(const std::string& key) const {
    auto it = rows_.find(key);
    return it == rows_.end() ? nullptr : &it->second;
}

DiagnosisTable DiagnosisTable::from_csv(const std::string& path, const std::string& key_column) {
    const CsvTable t = read_csv(path);
    const std::size_t c_key = t.column(key_column);
    const std::size_t c_code = t.column("icd_code");
    const std::size_t c_ver = t.column("icd_version");
    DiagnosisTable table;
    for (const auto& r : t.rows) {
        DiagnosisRow row;
        row.icd_code = r[c_code];
        row.version = r[c_ver] == "9" ? icd::IcdVersion::Icd9 : icd::IcdVersion::Icd10;
        table.add(r[c_key], std::move(row));
    }
    return table;
}

std::set<icd::IcdCode> expand_raw_codes(const std::vector<DiagnosisRow>& rows,
                                        const icd::MappingTable& mapping, StayKind kind,
                                        LinkStats* stats) {
    const std::size_t max_raw = kind == StayKind::Ed ? 9 : 39;
    if (rows.size() > max_raw && stats != nullptr) ++stats->oversize_code_lists;

    std::set<icd::IcdCode> out;
    for (const auto& row : rows) {
        std::vector<icd::IcdCode> normalized;
        try {
            normalized = icd::normalize(row.icd_code, row.version, &mapping);
        } catch (const icd::UnmappableIcd9&) {
            if (stats != nullptr) ++stats->unmappable_icd9_skipped;
            continue;
        } catch (const icd::MalformedCode&) {
            if (stats != nullptr) ++stats->malformed_codes_skipped;
            continue;
        }
        for (const auto& code : normalized) {
            const auto expanded = icd::expand_ancestors(code);
            out.insert(expanded.begin(), expanded.end());
        }
    }
    return out;
}

std::optional<DiagnosisSet> resolve_diagnoses(const Linkage& linkage, const DiagnosisTable& ed_dx,
                                              const DiagnosisTable& hosp_dx,
                                              const icd::MappingTable& mapping, LinkStats* stats) {
    DiagnosisSet set;
    set.record_id = linkage.record_id;
    if (linkage.hosp_admission) {
        if (const auto* rows = hosp_dx.find(*linkage.hosp_admission)) {
            set.codes = expand_raw_codes(*rows, mapping, StayKind::Hosp, stats);
            set.source = Site::Hosp;
        }
    }
    if (set.codes.empty() && linkage.ed_stay) {
        if (const auto* rows = ed_dx.find(*linkage.ed_stay)) {
            set.codes = expand_raw_codes(*rows, mapping, StayKind::Ed, stats);
            set.source = Site::Ed;
        }
    }
    if (set.codes.empty()) {
        if (stats != nullptr) ++stats->discarded_empty_diagnoses;
        return std::nullopt;
    }
    return set;
}

}  // namespace ecgicd::cohort
