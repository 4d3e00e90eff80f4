#include "ecgicd/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "ecgicd/rng.hpp"
#include "ecgicd/timeparse.hpp"

namespace ecgicd::synth {

namespace fs = std::filesystem;

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

std::string zero_pad(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%05zu", prefix, i);
    return buf;
}

}  // namespace

PlantedData generate_planted(const PlantedSpec& spec) {
    // Distinct planted tones, one lead per label.
    static const std::vector<std::string> kCodePool = {
        "E11", "I10", "I21", "I48", "I50", "J96", "N18", "R57",
        "A41", "F10", "G93", "K70", "M10", "Q23", "T36", "Z66",
    };
    if (spec.n_labels > kCodePool.size())
        throw std::invalid_argument("planted generator supports at most 16 labels");

    icd::LabelSet label_set;
    label_set.threshold = 0;
    {
        std::vector<std::string> codes(kCodePool.begin(),
                                       kCodePool.begin() + static_cast<std::ptrdiff_t>(spec.n_labels));
        std::sort(codes.begin(), codes.end());
        for (std::size_t i = 0; i < codes.size(); ++i) {
            label_set.codes.push_back({codes[i], icd::IcdVersion::Icd10});
            label_set.index[codes[i]] = i;
        }
    }

    std::vector<double> freqs(spec.n_labels);
    for (std::size_t j = 0; j < spec.n_labels; ++j)
        freqs[j] = 2.0 + 3.1 * static_cast<double>(j);  // all below Nyquist at 100 Hz

    DetRng rng(spec.seed);
    PlantedData out;
    out.signals.reserve(spec.n_records);

    std::vector<data::RecordEntry> records;
    std::map<std::string, data::RecordDiagnoses> diagnoses;
    std::set<std::string> subjects;
    const std::size_t burst_len = spec.len - spec.len / 10;  // covers every crop

    for (std::size_t i = 0; i < spec.n_records; ++i) {
        std::vector<std::uint8_t> active(spec.n_labels, 0);
        bool any = false;
        for (std::size_t j = 0; j < spec.n_labels; ++j) {
            active[j] = rng.real01() < spec.label_prob ? 1 : 0;
            any = any || active[j];
        }
        if (!any) active[rng.below(spec.n_labels)] = 1;

        signal::Ecg sig;
        sig.fs = spec.fs;
        sig.samples.assign(spec.n_leads, std::vector<float>(spec.len, 0.0f));
        for (std::size_t l = 0; l < spec.n_leads; ++l) {
            sig.leads.push_back("L" + std::to_string(l));
            for (auto& v : sig.samples[l]) v = static_cast<float>(rng.normal() * spec.noise_sigma);
        }
        for (std::size_t j = 0; j < spec.n_labels; ++j) {
            if (!active[j]) continue;
            const std::size_t lead = j % spec.n_leads;
            const std::size_t start = static_cast<std::size_t>(rng.below(spec.len - burst_len + 1));
            const double phase = rng.real01() * kTau;
            auto& v = sig.samples[lead];
            for (std::size_t t = start; t < start + burst_len; ++t) {
                v[t] += static_cast<float>(
                    spec.burst_amp * std::sin(kTau * freqs[j] * static_cast<double>(t) / spec.fs + phase));
            }
        }

        data::RecordEntry rec;
        rec.record_id = zero_pad("R", i);
        rec.subject_id = zero_pad("S", i);
        rec.stay_key = zero_pad("ST", i);
        rec.site = cohort::Site::Ed;
        rec.ecg_time = 1577836800 + static_cast<std::int64_t>(i) * 3600;
        rec.signal_index = static_cast<std::uint32_t>(i);
        subjects.insert(rec.subject_id);

        data::RecordDiagnoses dx;
        for (std::size_t j = 0; j < spec.n_labels; ++j)
            if (active[j]) dx.ed.insert(label_set.codes[j]);
        diagnoses[rec.record_id] = std::move(dx);
        records.push_back(std::move(rec));
        out.signals.push_back(std::move(sig));
    }

    const auto folds = data::assign_folds(subjects, spec.seed);
    for (auto& rec : records) rec.fold = folds.fold_of.at(rec.subject_id);
    out.dataset = data::build_matrix(std::move(records), diagnoses, std::move(label_set));
    return out;
}

CohortExpected generate_cohort_fixture(const std::string& dir, const CohortSpec& spec) {
    fs::create_directories(fs::path(dir) / "signals");
    DetRng rng(spec.seed);
    CohortExpected expected;

    std::ofstream edstays(fs::path(dir) / "edstays.csv");
    std::ofstream admissions(fs::path(dir) / "admissions.csv");
    std::ofstream dx_ed(fs::path(dir) / "diagnoses_ed.csv");
    std::ofstream dx_hosp(fs::path(dir) / "diagnoses_hosp.csv");
    std::ofstream manifest(fs::path(dir) / "manifest.csv");
    edstays << "subject_id,stay_id,hadm_id,intime,outtime\n";
    admissions << "subject_id,hadm_id,admittime,dischtime,deathtime\n";
    dx_ed << "stay_id,seq_num,icd_code,icd_version\n";
    dx_hosp << "hadm_id,seq_num,icd_code,icd_version\n";
    manifest << "record_id,subject_id,ecg_time,fs,n_samples,path\n";

    {
        std::ofstream map_tsv(fs::path(dir) / "icd9_map.tsv");
        map_tsv << "# synthetic equivalence table\n"
                << "42731\tI48.91\n"
                << "4280\tI50.9\n"
                << "25000\tE11.9\n"
                << "5849\tN17.9\n"
                << "5849\tN19\n";  // one-to-many on purpose
        std::ofstream desc_tsv(fs::path(dir) / "descriptions.tsv");
        desc_tsv << "I48\tAtrial fibrillation and flutter\n"
                 << "I4891\tUnspecified atrial fibrillation\n"
                 << "I50\tHeart failure\n"
                 << "E11\tType 2 diabetes mellitus\n"
                 << "N17\tAcute kidney failure\n"
                 << "Z66\tDo not resuscitate\n"
                 << "T36\tPoisoning by systemic antibiotics\n";
    }

    // ICD-10 pool (version 10) plus ICD-9 rows that exercise the mapping.
    const std::vector<std::pair<std::string, int>> code_pool = {
        {"I48.91", 10}, {"I50.9", 10}, {"E11.9", 10},  {"Z66", 10},   {"T36.0X", 10},
        {"J96.01", 10}, {"N18.6", 10}, {"R57.0", 10},  {"A41.9", 10}, {"I21.4", 10},
        {"42731", 9},   {"4280", 9},   {"25000", 9},   {"5849", 9},
    };

    const auto n_samples = static_cast<std::size_t>(spec.fs * spec.duration_s);
    std::size_t record_counter = 0;
    std::int64_t base = parse_timestamp("2140-01-01 00:00:00");

    for (std::size_t s = 0; s < spec.n_subjects; ++s) {
        const std::string subject = zero_pad("P", s + 1);
        const std::int64_t subject_base = base + static_cast<std::int64_t>(s) * 86400 * 30;
        const std::size_t n_ecgs = 1 + rng.below(3);

        // Interval layout per subject: an ED stay [0, 6h) and an
        // admission [6h, 10d); record placement picks the site.
        const std::int64_t ed_in = subject_base;
        const std::int64_t ed_out = subject_base + 6 * 3600;
        const std::int64_t adm_in = ed_out + 1;
        const std::int64_t adm_out = subject_base + 10 * 86400;
        const bool admitted = rng.real01() < 0.5;
        const std::string stay_id = zero_pad("ST", s + 1);
        const std::string hadm_id = zero_pad("H", s + 1);

        edstays << subject << ',' << stay_id << ',' << (admitted ? hadm_id : "") << ','
                << format_timestamp(ed_in) << ',' << format_timestamp(ed_out) << '\n';
        if (admitted)
            admissions << subject << ',' << hadm_id << ',' << format_timestamp(adm_in) << ','
                       << format_timestamp(adm_out) << ",\n";

        // Diagnoses: ED rows always, hospital rows when admitted; a
        // fraction of subjects get no rows at all (empty-set discard).
        const bool empty_dx = rng.real01() < 0.15;
        if (!empty_dx) {
            const std::size_t n_ed = 1 + rng.below(4);
            for (std::size_t k = 0; k < n_ed; ++k) {
                const auto& [code, ver] = code_pool[rng.below(code_pool.size())];
                dx_ed << stay_id << ',' << (k + 1) << ',' << code << ',' << ver << '\n';
            }
            if (admitted) {
                const std::size_t n_hosp = 2 + rng.below(6);
                for (std::size_t k = 0; k < n_hosp; ++k) {
                    const auto& [code, ver] = code_pool[rng.below(code_pool.size())];
                    dx_hosp << hadm_id << ',' << (k + 1) << ',' << code << ',' << ver << '\n';
                }
            }
        }

        bool subject_kept = false;
        for (std::size_t e = 0; e < n_ecgs; ++e) {
            const double where = rng.real01();
            std::int64_t ecg_time;
            bool linked_ed = false, linked_hosp = false;
            if (where < 0.6) {
                ecg_time = ed_in + 600 + static_cast<std::int64_t>(rng.below(3600 * 4));
                linked_ed = true;
            } else if (where < 0.9 && admitted) {
                ecg_time = adm_in + 3600 + static_cast<std::int64_t>(rng.below(86400 * 5));
                linked_hosp = true;
            } else {
                ecg_time = subject_base - 86400 * 200 - static_cast<std::int64_t>(rng.below(86400));
            }

            signal::Ecg sig;
            sig.fs = spec.fs;
            sig.leads = signal::standard_leads();
            sig.leads.resize(spec.n_leads);
            sig.samples.assign(spec.n_leads, std::vector<float>(n_samples, 0.0f));
            for (std::size_t l = 0; l < spec.n_leads; ++l) {
                const double f0 = 1.0 + rng.real01() * 4.0;
                for (std::size_t t = 0; t < n_samples; ++t)
                    sig.samples[l][t] = static_cast<float>(
                        std::sin(kTau * f0 * static_cast<double>(t) / spec.fs) +
                        rng.normal() * 0.05);
            }
            // Boundary gap, interior gap, and an over-range spike.
            if (rng.real01() < 0.5) {
                const std::size_t gap = 5 + rng.below(20);
                for (std::size_t t = 0; t < gap; ++t)
                    sig.samples[0][t] = std::numeric_limits<float>::quiet_NaN();
            }
            if (rng.real01() < 0.5) {
                const std::size_t at = 100 + rng.below(n_samples - 200);
                for (std::size_t t = at; t < at + 7; ++t)
                    sig.samples[1][t] = std::numeric_limits<float>::quiet_NaN();
            }
            sig.samples[2][n_samples / 2] = 4.2f;

            const std::string record_id = zero_pad("R", ++record_counter);
            const std::string rel_path = "signals/" + record_id + ".bin";
            signal::write_ecg1((fs::path(dir) / rel_path).string(), sig);
            manifest << record_id << ',' << subject << ',' << format_timestamp(ecg_time) << ','
                     << spec.fs << ',' << n_samples << ',' << rel_path << '\n';

            ++expected.records_written;
            if (linked_ed) {
                ++expected.ed_records;
            } else if (linked_hosp) {
                ++expected.hosp_records;
            } else {
                ++expected.unlinked_records;
                continue;
            }
            // Combined set: hospital diagnoses take precedence; ED-linked
            // records of admitted subjects still resolve to the hospital
            // set, so emptiness is decided by the subject's rows.
            if (empty_dx) {
                ++expected.empty_diagnosis_records;
            } else {
                ++expected.kept_records;
                subject_kept = true;
            }
        }
        if (subject_kept) ++expected.kept_patients;
    }
    return expected;
}

}  // namespace ecgicd::synth
