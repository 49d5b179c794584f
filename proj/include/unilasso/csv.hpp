#pragma once

#include "unilasso/data.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace unilasso {

/// Header plus numeric body of a CSV file, stored column-major.
struct CsvTable {
    std::vector<std::string> header;
    Matrix values;

    Index column_index(const std::string& name) const;  // -1 when absent
};

/// Parses a comma-separated file with a header row. Numbers are parsed
/// with std::from_chars, so the decimal separator is always '.'.
/// Lines starting with '#' are skipped.
CsvTable read_csv_table(const std::string& path);
CsvTable parse_csv_table(std::istream& in, const std::string& source_name);

struct ResponseSelector {
    std::optional<std::string> name;
    std::optional<Index> index;  // 1-based, as typed on the command line
};

/// Response column by name or 1-based index; every other column becomes a
/// feature in file order. Throws ValidationError when the column is missing.
Dataset dataset_from_table(const CsvTable& table, const ResponseSelector& response, Family family);
Dataset read_dataset(const std::string& path, const ResponseSelector& response, Family family);

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double value);

}  // namespace unilasso
