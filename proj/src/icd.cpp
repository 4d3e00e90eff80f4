#include "ecgicd/icd.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "ecgicd/csv.hpp"

namespace ecgicd::icd {

std::string canonicalize(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        if (c == '.' || std::isspace(static_cast<unsigned char>(c))) continue;
        out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return out;
}

namespace {

bool valid_icd10_text(const std::string& t) {
    if (t.size() < 3 || t.size() > 5) return false;
    if (t[0] < 'A' || t[0] > 'Z') return false;
    for (char c : t)
        if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'))) return false;
    return true;
}

// Truncate to 5 chars, then strip trailing placeholder X while more than
// 3 chars remain (a position-3 X is part of the category, not a
// placeholder).
std::string normalize_icd10_text(const std::string& canonical) {
    std::string t = canonical.substr(0, 5);
    while (t.size() > 3 && t.back() == 'X') t.pop_back();
    return t;
}

}  // namespace

MappingTable MappingTable::load_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mapping table " + path);
    MappingTable table;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error(path + ": expected `icd9<TAB>icd10`, got '" + line + "'");
        std::string key = line.substr(0, tab);
        std::string val = line.substr(tab + 1);
        if (!val.empty() && val.back() == '\r') val.pop_back();
        table.add(key, val);
    }
    return table;
}

void MappingTable::add(const std::string& icd9, const std::string& icd10) {
    const std::string key = canonicalize(icd9);
    const std::string target = normalize_icd10_text(canonicalize(icd10));
    if (!valid_icd10_text(target)) throw MalformedCode(icd10);
    entries_[key].push_back(target);
}

const std::vector<std::string>* MappingTable::find(const std::string& canonical_icd9) const {
    auto it = entries_.find(canonical_icd9);
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<IcdCode> normalize(const std::string& raw, IcdVersion version, const MappingTable* table) {
    const std::string canonical = canonicalize(raw);
    if (canonical.empty()) throw MalformedCode(raw);

    std::vector<std::string> targets;
    if (version == IcdVersion::Icd9) {
        if (table == nullptr) throw UnmappableIcd9(raw);
        const auto* mapped = table->find(canonical);
        if (mapped == nullptr) throw UnmappableIcd9(raw);
        targets = *mapped;
    } else {
        targets.push_back(canonical);
    }

    std::vector<IcdCode> out;
    out.reserve(targets.size());
    for (const auto& t : targets) {
        const std::string text = normalize_icd10_text(t);
        if (!valid_icd10_text(text)) throw MalformedCode(raw);
        IcdCode code{text, IcdVersion::Icd10};
        if (std::find(out.begin(), out.end(), code) == out.end()) out.push_back(std::move(code));
    }
    return out;
}

std::set<IcdCode> expand_ancestors(const IcdCode& code) {
    std::set<IcdCode> out;
    out.insert(code);
    if (code.text.size() == 5)
        out.insert({normalize_icd10_text(code.text.substr(0, 4)), IcdVersion::Icd10});
    if (code.text.size() > 3)
        out.insert({code.text.substr(0, 3), IcdVersion::Icd10});
    return out;
}

namespace {

const std::array<const char*, 23> kRoman = {
    "",    "I",    "II",  "III", "IV",  "V",    "VI",  "VII", "VIII", "IX",  "X", "XI",
    "XII", "XIII", "XIV", "XV",  "XVI", "XVII", "XVIII", "XIX", "XX", "XXI", "XXII",
};

}  // namespace

const char* to_roman(Chapter c) { return kRoman[static_cast<int>(c)]; }

Chapter chapter_from_roman(const std::string& s) {
    for (int i = 1; i <= 22; ++i)
        if (s == kRoman[static_cast<std::size_t>(i)]) return static_cast<Chapter>(i);
    throw OutOfRange(s);
}

const std::vector<ChapterRange>& chapter_ranges() {
    // ICD-10-CM tabular-list chapters, with range ends extended so the
    // 3-char prefix space A00..Z99 is tiled with no gaps.
    static const std::vector<ChapterRange> ranges = {
        {Chapter::I, "A00", "B99", "Certain infectious and parasitic diseases"},
        {Chapter::II, "C00", "D49", "Neoplasms"},
        {Chapter::III, "D50", "D99", "Diseases of the blood and blood-forming organs"},
        {Chapter::IV, "E00", "E99", "Endocrine, nutritional and metabolic diseases"},
        {Chapter::V, "F00", "F99", "Mental and behavioural disorders"},
        {Chapter::VI, "G00", "G99", "Diseases of the nervous system"},
        {Chapter::VII, "H00", "H59", "Diseases of the eye and adnexa"},
        {Chapter::VIII, "H60", "H99", "Diseases of the ear and mastoid process"},
        {Chapter::IX, "I00", "I99", "Diseases of the circulatory system"},
        {Chapter::X, "J00", "J99", "Diseases of the respiratory system"},
        {Chapter::XI, "K00", "K99", "Diseases of the digestive system"},
        {Chapter::XII, "L00", "L99", "Diseases of the skin and subcutaneous tissue"},
        {Chapter::XIII, "M00", "M99", "Diseases of the musculoskeletal system and connective tissue"},
        {Chapter::XIV, "N00", "N99", "Diseases of the genitourinary system"},
        {Chapter::XV, "O00", "O99", "Pregnancy, childbirth and the puerperium"},
        {Chapter::XVI, "P00", "P99", "Certain conditions originating in the perinatal period"},
        {Chapter::XVII, "Q00", "Q99", "Congenital malformations, deformations and chromosomal abnormalities"},
        {Chapter::XVIII, "R00", "R99", "Symptoms, signs and abnormal clinical and laboratory findings"},
        {Chapter::XIX, "S00", "T99", "Injury, poisoning and certain other consequences of external causes"},
        {Chapter::XXII, "U00", "U99", "Codes for special purposes"},
        {Chapter::XX, "V00", "Y99", "External causes of morbidity and mortality"},
        {Chapter::XXI, "Z00", "Z99", "Factors influencing health status and contact with health services"},
    };
    return ranges;
}

Chapter chapter_of(const IcdCode& code) {
    // Dispatch on the leading letter; the two split letters (D, H) compare
    // the remaining two characters lexicographically, which also places
    // alphanumeric tails such as O9A deterministically.
    const std::string& t = code.text;
    if (t.size() < 3) throw OutOfRange(t);
    const char c = t[0];
    const std::string tail = t.substr(1, 2);
    switch (c) {
        case 'A': case 'B': return Chapter::I;
        case 'C': return Chapter::II;
        case 'D': return tail < "50" ? Chapter::II : Chapter::III;
        case 'E': return Chapter::IV;
        case 'F': return Chapter::V;
        case 'G': return Chapter::VI;
        case 'H': return tail < "60" ? Chapter::VII : Chapter::VIII;
        case 'I': return Chapter::IX;
        case 'J': return Chapter::X;
        case 'K': return Chapter::XI;
        case 'L': return Chapter::XII;
        case 'M': return Chapter::XIII;
        case 'N': return Chapter::XIV;
        case 'O': return Chapter::XV;
        case 'P': return Chapter::XVI;
        case 'Q': return Chapter::XVII;
        case 'R': return Chapter::XVIII;
        case 'S': case 'T': return Chapter::XIX;
        case 'U': return Chapter::XXII;
        case 'V': case 'W': case 'X': case 'Y': return Chapter::XX;
        case 'Z': return Chapter::XXI;
        default: throw OutOfRange(t);
    }
}

LabelSet select_label_set(const std::map<std::string, std::uint64_t>& counts, std::uint64_t threshold) {
    LabelSet set;
    set.threshold = threshold;
    for (const auto& [text, n] : counts) {
        if (n >= threshold) set.codes.push_back({text, IcdVersion::Icd10});
    }
    if (set.codes.empty()) throw EmptyLabelSet();
    // std::map iteration is already lexicographic; keep the sort as the
    // documented contract rather than an implementation detail.
    std::sort(set.codes.begin(), set.codes.end());
    for (std::size_t i = 0; i < set.codes.size(); ++i) set.index[set.codes[i].text] = i;
    return set;
}

LabelSet select_label_set(const std::vector<IcdCode>& annotations, std::uint64_t threshold) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& c : annotations) ++counts[c.text];
    return select_label_set(counts, threshold);
}

std::string LabelSet::digest() const {
    // FNV-1a over the ordered code texts and the threshold; stable across
    // platforms, used to pair checkpoints with dataset manifests.
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        h ^= 0x1f;
        h *= 1099511628211ULL;
    };
    for (const auto& c : codes) mix(c.text);
    mix(std::to_string(threshold));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void LabelSet::save_csv(const std::string& path, const std::map<std::string, std::uint64_t>* counts) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "code,count\n";
    for (const auto& c : codes) {
        std::uint64_t n = 0;
        if (counts != nullptr) {
            auto it = counts->find(c.text);
            if (it != counts->end()) n = it->second;
        }
        out << c.text << ',' << n << '\n';
    }
}

LabelSet LabelSet::load_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const std::size_t col = t.column("code");
    LabelSet set;
    for (const auto& row : t.rows) set.codes.push_back({row[col], IcdVersion::Icd10});
    std::sort(set.codes.begin(), set.codes.end());
    set.codes.erase(std::unique(set.codes.begin(), set.codes.end()), set.codes.end());
    if (set.codes.empty()) throw EmptyLabelSet();
    for (std::size_t i = 0; i < set.codes.size(); ++i) set.index[set.codes[i].text] = i;
    return set;
}

std::map<std::string, std::string> load_descriptions_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open descriptions " + path);
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) continue;
        std::string desc = line.substr(tab + 1);
        if (!desc.empty() && desc.back() == '\r') desc.pop_back();
        out[canonicalize(line.substr(0, tab))] = std::move(desc);
    }
    return out;
}

}  // namespace ecgicd::icd
