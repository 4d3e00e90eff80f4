#ifndef ECGICD_ICD_HPP
#define ECGICD_ICD_HPP

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace ecgicd::icd {

enum class IcdVersion { Icd9, Icd10 };

struct MalformedCode : std::runtime_error {
    explicit MalformedCode(const std::string& raw) : std::runtime_error("malformed ICD code '" + raw + "'") {}
};
struct UnmappableIcd9 : std::runtime_error {
    explicit UnmappableIcd9(const std::string& raw) : std::runtime_error("ICD-9 code '" + raw + "' not in mapping table") {}
};
struct EmptyLabelSet : std::runtime_error {
    EmptyLabelSet() : std::runtime_error("no code meets the count threshold") {}
};
struct OutOfRange : std::runtime_error {
    explicit OutOfRange(const std::string& code) : std::runtime_error("code '" + code + "' outside the chapter ranges") {}
};

/// Normalized diagnosis code: uppercase alphanumeric, 3-5 chars, no dot,
/// no trailing placeholder X.
struct IcdCode {
    std::string text;
    IcdVersion version = IcdVersion::Icd10;

    auto operator<=>(const IcdCode&) const = default;
};

/// ICD-9 -> ICD-10 equivalence table (one-to-many), loaded once from TSV.
class MappingTable {
public:
    MappingTable() = default;

    /// Two-column TSV `icd9_code<TAB>icd10_code`, one target per line,
    /// '#' comments ignored. Keys and targets are canonicalized
    /// (uppercased, dots stripped) on load.
    static MappingTable load_tsv(const std::string& path);

    void add(const std::string& icd9, const std::string& icd10);
    const std::vector<std::string>* find(const std::string& canonical_icd9) const;
    std::size_t size() const { return entries_.size(); }

private:
    std::unordered_map<std::string, std::vector<std::string>> entries_;
};

/// Uppercase + strip dots/whitespace; shared by ICD-9 keys and ICD-10 text.
std::string canonicalize(const std::string& raw);

/// Normalize a raw code to ICD-10 vocabulary: uppercase, strip dots,
/// truncate to 5 chars, strip trailing placeholder X (repeatedly, never
/// below 3 chars). ICD-9 inputs are mapped through `table` first and may
/// yield several codes.
///
/// Throws MalformedCode / UnmappableIcd9. `table` may be null for pure
/// ICD-10 input.
std::vector<IcdCode> normalize(const std::string& raw, IcdVersion version,
                               const MappingTable* table = nullptr);

/// {code} plus its 4-char prefix (if 5 chars) and 3-char prefix.
/// Prefixes get the same trailing-X normalization, so the result is
/// closed under re-expansion.
std::set<IcdCode> expand_ancestors(const IcdCode& code);

// ICD-10 chapters I..XXII.
enum class Chapter : int {
    I = 1, II, III, IV, V, VI, VII, VIII, IX, X, XI,
    XII, XIII, XIV, XV, XVI, XVII, XVIII, XIX, XX, XXI, XXII,
};

const char* to_roman(Chapter c);
Chapter chapter_from_roman(const std::string& s);

struct ChapterRange {
    Chapter chapter;
    std::string lo;  // inclusive 3-char prefix
    std::string hi;  // inclusive 3-char prefix
    std::string title;
};

/// The compiled-in chapter range table; ranges tile A00..Z99 so that every
/// valid code prefix maps to exactly one chapter.
const std::vector<ChapterRange>& chapter_ranges();

/// Chapter of a normalized ICD-10 code. Throws OutOfRange for prefixes
/// outside A..Z (cannot happen for codes that passed normalize()).
Chapter chapter_of(const IcdCode& code);

/// Selected training vocabulary: codes with count >= threshold in
/// deterministic lexicographic column order.
struct LabelSet {
    std::vector<IcdCode> codes;                    // lexicographic
    std::map<std::string, std::size_t> index;      // text -> column
    std::uint64_t threshold = 0;

    std::size_t size() const { return codes.size(); }
    bool contains(const std::string& text) const { return index.count(text) != 0; }

    std::string digest() const;  // stable content hash for checkpoint/label-set compatibility

    void save_csv(const std::string& path,
                  const std::map<std::string, std::uint64_t>* counts = nullptr) const;
    static LabelSet load_csv(const std::string& path);
};

/// Count occurrences over an annotation stream (one count per
/// (record, code) pair; callers de-duplicate within a record) and keep
/// codes meeting the threshold. Throws EmptyLabelSet.
LabelSet select_label_set(const std::map<std::string, std::uint64_t>& counts,
                          std::uint64_t threshold);

/// Convenience over a flat stream of already-expanded per-record codes.
LabelSet select_label_set(const std::vector<IcdCode>& annotations, std::uint64_t threshold);

/// Optional `code<TAB>description` table used for report output.
std::map<std::string, std::string> load_descriptions_tsv(const std::string& path);

}  // namespace ecgicd::icd

#endif
