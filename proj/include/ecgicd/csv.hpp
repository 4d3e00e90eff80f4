#ifndef ECGICD_CSV_HPP
#define ECGICD_CSV_HPP

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecgicd {

struct CsvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Split one CSV line. Supports double-quoted fields with "" escapes;
/// no multi-line fields (none of the consumed tables use them).
inline std::vector<std::string> split_csv_line(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == sep) {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return out;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw CsvError("missing column '" + name + "'");
    }
};

/// Read a delimited file with a header row. Lines starting with '#' and
/// blank lines are skipped.
inline CsvTable read_csv(const std::string& path, char sep = ',') {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open " + path);
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv_line(line, sep);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
        } else {
            if (fields.size() != t.header.size())
                throw CsvError(path + ": row with " + std::to_string(fields.size()) +
                               " fields, header has " + std::to_string(t.header.size()));
            t.rows.push_back(std::move(fields));
        }
    }
    if (!have_header) throw CsvError(path + ": empty file");
    return t;
}

}  // namespace ecgicd

#endif
