#include "drbc/csv_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "drbc/errors.hpp"

namespace drbc {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t start = 0;
        while (start < cell.size() && cell[start] == ' ') ++start;
        cells.push_back(cell.substr(start));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_double(const std::string& s, std::size_t row, std::size_t col) {
    double v = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw DataError("csv: cannot parse '" + s + "' as a number at row " +
                        std::to_string(row) + ", column " + std::to_string(col));
    }
    return v;
}

}  // namespace

LabeledTable read_labeled_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("csv: cannot open " + file.string());

    LabeledTable table;
    std::string line;
    if (!std::getline(in, line)) throw DataError("csv: empty file " + file.string());
    table.header = split_line(line);
    if (table.header.size() < 2) {
        throw DataError("csv: " + file.string() + " needs a label column and at least one value column");
    }
    const std::size_t ncols = table.header.size() - 1;

    std::vector<std::vector<double>> rows;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        auto cells = split_line(line);
        if (cells.size() != table.header.size()) {
            throw DataError("csv: row " + std::to_string(row) + " of " + file.string() + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(table.header.size()));
        }
        table.labels.push_back(cells[0]);
        std::vector<double> values(ncols);
        for (std::size_t c = 0; c < ncols; ++c) values[c] = parse_double(cells[c + 1], row, c + 2);
        rows.push_back(std::move(values));
    }
    table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ncols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < ncols; ++c) {
            table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
        }
    }
    return table;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv_row(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) os << ',';
        os << cells[i];
    }
    os << '\n';
}

std::ofstream open_for_write(const std::filesystem::path& file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + file.string() + " for writing");
    return out;
}

}  // namespace drbc
