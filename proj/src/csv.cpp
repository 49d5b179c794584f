#include "unilasso/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace unilasso {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\"");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\"");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(trim(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(trim(current));
    return fields;
}

double parse_number(const std::string& field, const std::string& source, std::size_t line, std::size_t col) {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    if (!field.empty() && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (field.empty() || ec != std::errc() || ptr != end) {
        if (field == "NA" || field == "NaN" || field == "nan") return std::nan("");
        std::ostringstream msg;
        msg << source << ": line " << line << ", column " << col << ": cannot parse '" << field << "' as a number";
        throw ValidationError(msg.str());
    }
    return value;
}

}  // namespace

Index CsvTable::column_index(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (header[k] == name) return static_cast<Index>(k);
    }
    return -1;
}

CsvTable parse_csv_table(std::istream& in, const std::string& source_name) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_fields(line);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            std::ostringstream msg;
            msg << source_name << ": line " << line_no << " has " << fields.size() << " fields, header has "
                << table.header.size();
            throw ValidationError(msg.str());
        }
        std::vector<double> row(fields.size());
        for (std::size_t k = 0; k < fields.size(); ++k) {
            row[k] = parse_number(fields[k], source_name, line_no, k + 1);
        }
        rows.push_back(std::move(row));
    }
    if (!have_header) throw ValidationError(source_name + ": empty file");
    table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(table.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < rows[i].size(); ++k) {
            table.values(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
        }
    }
    return table;
}

CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return parse_csv_table(in, path);
}

Dataset dataset_from_table(const CsvTable& table, const ResponseSelector& response, Family family) {
    Index resp = -1;
    if (response.name) {
        resp = table.column_index(*response.name);
        if (resp < 0) throw ValidationError("response column '" + *response.name + "' not found in header");
    } else if (response.index) {
        resp = *response.index - 1;
        if (resp < 0 || resp >= static_cast<Index>(table.header.size())) {
            throw ValidationError("response index " + std::to_string(*response.index) + " out of range (1.." +
                                  std::to_string(table.header.size()) + ")");
        }
    } else {
        throw ValidationError("no response column selected");
    }

    Dataset data;
    data.family = family;
    data.response_name = table.header[static_cast<std::size_t>(resp)];
    data.response = table.values.col(resp);
    const Index p = table.values.cols() - 1;
    data.features.resize(table.values.rows(), p);
    Index j = 0;
    for (Index k = 0; k < table.values.cols(); ++k) {
        if (k == resp) continue;
        data.features.col(j) = table.values.col(k);
        data.feature_names.push_back(table.header[static_cast<std::size_t>(k)]);
        ++j;
    }
    return data;
}

Dataset read_dataset(const std::string& path, const ResponseSelector& response, Family family) {
    return dataset_from_table(read_csv_table(path), response, family);
}

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    (void)ec;
    return std::string(buf.data(), ptr);
}

}  // namespace unilasso
