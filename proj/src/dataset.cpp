#include "ecgicd/dataset.hpp"

#include <algorithm>
#include <bit>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ecgicd/csv.hpp"
#include "ecgicd/rng.hpp"
#include "ecgicd/timeparse.hpp"

namespace ecgicd::data {

using nlohmann::json;

void FoldAssignment::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "subject_id,fold\n";
    for (const auto& [subject, fold] : fold_of) out << subject << ',' << fold << '\n';
}

FoldAssignment FoldAssignment::load_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const std::size_t c_sub = t.column("subject_id");
    const std::size_t c_fold = t.column("fold");
    FoldAssignment fa;
    fa.n_folds = 0;
    for (const auto& r : t.rows) {
        const int fold = std::stoi(r[c_fold]);
        fa.fold_of[r[c_sub]] = fold;
        fa.n_folds = std::max(fa.n_folds, fold);
    }
    return fa;
}

FoldAssignment assign_folds(const std::set<std::string>& subjects, std::uint64_t seed, int n_folds) {
    if (subjects.empty()) throw EmptySplit("no subjects");
    std::vector<std::string> order(subjects.begin(), subjects.end());  // sorted by set order
    DetRng rng(seed);
    rng.shuffle(order);
    FoldAssignment fa;
    fa.seed = seed;
    fa.n_folds = n_folds;
    for (std::size_t i = 0; i < order.size(); ++i)
        fa.fold_of[order[i]] = static_cast<int>(i % static_cast<std::size_t>(n_folds)) + 1;
    return fa;
}

const char* to_string(Subset s) {
    switch (s) {
        case Subset::Ed: return "ED";
        case Subset::Hosp: return "HOSP";
        default: return "ALL";
    }
}

Subset subset_from_string(const std::string& s) {
    if (s == "ALL") return Subset::All;
    if (s == "ED") return Subset::Ed;
    if (s == "HOSP") return Subset::Hosp;
    throw ScenarioParseError(s);
}

ScenarioSpec ScenarioSpec::parse(const std::string& s) {
    // T(A2B)-E(C2D), tokens ALL|ED|HOSP, no whitespace.
    auto fail = [&s]() -> ScenarioParseError { return ScenarioParseError(s); };
    std::size_t p = 0;
    auto expect = [&](const char* lit) {
        const std::size_t n = std::char_traits<char>::length(lit);
        if (s.compare(p, n, lit) != 0) throw fail();
        p += n;
    };
    auto token = [&]() {
        const std::size_t start = p;
        while (p < s.size() && s[p] >= 'A' && s[p] <= 'Z') ++p;
        if (p == start) throw fail();
        return subset_from_string(s.substr(start, p - start));
    };
    ScenarioSpec spec;
    expect("T(");
    spec.train_subset = token();
    expect("2");
    spec.train_labels = token();
    expect(")-E(");
    spec.eval_subset = token();
    expect("2");
    spec.eval_labels = token();
    expect(")");
    if (p != s.size()) throw fail();
    return spec;
}

std::string ScenarioSpec::to_string() const {
    std::string out;
    out += "T(";
    out += data::to_string(train_subset);
    out += '2';
    out += data::to_string(train_labels);
    out += ")-E(";
    out += data::to_string(eval_subset);
    out += '2';
    out += data::to_string(eval_labels);
    out += ')';
    return out;
}

BitMatrix::BitMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), wpc_((rows + 63) / 64), words_(wpc_ * cols, 0ULL) {}

std::size_t BitMatrix::column_count(std::size_t j) const {
    std::size_t n = 0;
    for (std::size_t w = 0; w < wpc_; ++w) n += static_cast<std::size_t>(std::popcount(words_[j * wpc_ + w]));
    return n;
}

std::size_t BitMatrix::column_and_count(std::size_t a, std::size_t b) const {
    std::size_t n = 0;
    for (std::size_t w = 0; w < wpc_; ++w)
        n += static_cast<std::size_t>(std::popcount(words_[a * wpc_ + w] & words_[b * wpc_ + w]));
    return n;
}

bool BitMatrix::row_any(std::size_t i) const {
    for (std::size_t j = 0; j < cols_; ++j)
        if (get(i, j)) return true;
    return false;
}

const std::vector<std::uint32_t>& RecordEntry::label_cols(Subset source) const {
    switch (source) {
        case Subset::Ed: return ed_label_cols;
        case Subset::Hosp: return hosp_label_cols;
        default: return has_hosp_labels ? hosp_label_cols : ed_label_cols;
    }
}

bool RecordEntry::has_labels(Subset source) const {
    switch (source) {
        case Subset::Ed: return has_ed_labels;
        case Subset::Hosp: return has_hosp_labels;
        default: return has_hosp_labels || has_ed_labels;
    }
}

void LabeledDataset::rebuild_matrix() {
    y = BitMatrix(records.size(), label_set.size());
    zero_rows = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& cols = records[i].label_cols(label_source);
        for (const auto j : cols) y.set(i, j);
        if (cols.empty()) ++zero_rows;
    }
}

std::vector<std::size_t> LabeledDataset::fold_indices(int lo, int hi) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].fold >= lo && records[i].fold <= hi) out.push_back(i);
    return out;
}

namespace {

std::vector<std::uint32_t> to_columns(const std::set<icd::IcdCode>& codes, const icd::LabelSet& ls) {
    std::vector<std::uint32_t> cols;
    for (const auto& c : codes) {
        auto it = ls.index.find(c.text);
        if (it != ls.index.end()) cols.push_back(static_cast<std::uint32_t>(it->second));
    }
    std::sort(cols.begin(), cols.end());
    return cols;
}

}  // namespace

LabeledDataset build_matrix(std::vector<RecordEntry> records,
                            const std::map<std::string, RecordDiagnoses>& diagnosis_sets,
                            icd::LabelSet label_set, Subset label_source) {
    LabeledDataset ds;
    ds.label_set = std::move(label_set);
    ds.label_source = label_source;

    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < records.size(); ++i) by_id[records[i].record_id] = i;
    for (const auto& [record_id, dx] : diagnosis_sets) {
        auto it = by_id.find(record_id);
        if (it == by_id.end()) throw UnknownRecord(record_id);
        auto& rec = records[it->second];
        rec.has_ed_labels = !dx.ed.empty();
        rec.has_hosp_labels = !dx.hosp.empty();
        rec.ed_label_cols = to_columns(dx.ed, ds.label_set);
        rec.hosp_label_cols = to_columns(dx.hosp, ds.label_set);
    }
    ds.records = std::move(records);
    ds.rebuild_matrix();
    return ds;
}

LabeledDataset eval_view(const LabeledDataset& ds, int val_fold, int test_fold) {
    // (subject, stay key) -> index of the earliest record, ties by id.
    std::map<std::pair<std::string, std::string>, std::size_t> first;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& r = ds.records[i];
        if (r.fold != val_fold && r.fold != test_fold) continue;
        const auto key = std::make_pair(r.subject_id, r.stay_key);
        auto it = first.find(key);
        if (it == first.end()) {
            first.emplace(key, i);
            continue;
        }
        const auto& cur = ds.records[it->second];
        if (r.ecg_time < cur.ecg_time ||
            (r.ecg_time == cur.ecg_time && r.record_id < cur.record_id)) {
            it->second = i;
        }
    }
    LabeledDataset out;
    out.label_set = ds.label_set;
    out.label_source = ds.label_source;
    out.records.reserve(ds.records.size());
    std::set<std::size_t> keep;
    for (const auto& [key, idx] : first) keep.insert(idx);
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const auto& r = ds.records[i];
        if (r.fold == val_fold || r.fold == test_fold) {
            if (keep.count(i)) out.records.push_back(r);
        } else {
            out.records.push_back(r);
        }
    }
    out.rebuild_matrix();
    return out;
}

LabeledDataset apply_scenario(const LabeledDataset& ds, const ScenarioSpec& spec, Phase phase) {
    const Subset subset = phase == Phase::Train ? spec.train_subset : spec.eval_subset;
    const Subset source = phase == Phase::Train ? spec.train_labels : spec.eval_labels;
    LabeledDataset out;
    out.label_set = ds.label_set;
    out.label_source = source;
    for (const auto& r : ds.records) {
        if (subset == Subset::Ed && r.site != cohort::Site::Ed) continue;
        if (subset == Subset::Hosp && r.site != cohort::Site::Hosp) continue;
        if (!r.has_labels(source)) continue;
        out.records.push_back(r);
    }
    out.rebuild_matrix();
    return out;
}

void save_manifest(const std::string& path, const LabeledDataset& ds, std::uint64_t fold_seed,
                   const std::string& label_set_path, const std::string& signal_manifest_path,
                   const std::string& scenario) {
    json j;
    j["label_set"] = {{"path", label_set_path},
                      {"digest", ds.label_set.digest()},
                      {"threshold", ds.label_set.threshold},
                      {"n_labels", ds.label_set.size()}};
    j["signal_manifest"] = signal_manifest_path;
    j["fold_seed"] = fold_seed;
    j["scenario"] = scenario;
    j["label_source"] = to_string(ds.label_source);
    j["zero_rows"] = ds.zero_rows;
    json records = json::array();
    for (const auto& r : ds.records) {
        records.push_back({{"record_id", r.record_id},
                           {"subject_id", r.subject_id},
                           {"stay_key", r.stay_key},
                           {"site", cohort::to_string(r.site)},
                           {"fold", r.fold},
                           {"ecg_time", format_timestamp(r.ecg_time)},
                           {"signal_index", r.signal_index},
                           {"ed_labels", r.ed_label_cols},
                           {"hosp_labels", r.hosp_label_cols},
                           {"has_ed", r.has_ed_labels},
                           {"has_hosp", r.has_hosp_labels}});
    }
    j["records"] = std::move(records);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(1, '\t') << '\n';
}

LabeledDataset load_manifest(const std::string& path, std::string* signal_manifest_path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    LabeledDataset ds;
    const std::string ls_path = j.at("label_set").at("path").get<std::string>();
    ds.label_set = icd::LabelSet::load_csv(ls_path);
    ds.label_set.threshold = j.at("label_set").at("threshold").get<std::uint64_t>();
    const auto digest = j.at("label_set").at("digest").get<std::string>();
    if (digest != ds.label_set.digest())
        throw std::runtime_error(path + ": label set file changed since manifest was written");
    if (signal_manifest_path != nullptr)
        *signal_manifest_path = j.at("signal_manifest").get<std::string>();
    ds.label_source = subset_from_string(j.at("label_source").get<std::string>());
    for (const auto& rj : j.at("records")) {
        RecordEntry r;
        r.record_id = rj.at("record_id").get<std::string>();
        r.subject_id = rj.at("subject_id").get<std::string>();
        r.stay_key = rj.at("stay_key").get<std::string>();
        const auto site = rj.at("site").get<std::string>();
        r.site = site == "ED"     ? cohort::Site::Ed
                 : site == "HOSP" ? cohort::Site::Hosp
                                  : cohort::Site::None;
        r.fold = rj.at("fold").get<int>();
        r.ecg_time = parse_timestamp(rj.at("ecg_time").get<std::string>());
        r.signal_index = rj.at("signal_index").get<std::uint32_t>();
        r.ed_label_cols = rj.at("ed_labels").get<std::vector<std::uint32_t>>();
        r.hosp_label_cols = rj.at("hosp_labels").get<std::vector<std::uint32_t>>();
        r.has_ed_labels = rj.at("has_ed").get<bool>();
        r.has_hosp_labels = rj.at("has_hosp").get<bool>();
        ds.records.push_back(std::move(r));
    }
    ds.rebuild_matrix();
    return ds;
}

}  // namespace ecgicd::data
