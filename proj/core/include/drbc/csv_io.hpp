#pragma once

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>
#include <vector>

#include "drbc/types.hpp"

namespace drbc {

// A CSV whose first column is a free-form label (date, index, time) and whose
// remaining columns are numeric.
struct LabeledTable {
    std::vector<std::string> header;
    std::vector<std::string> labels;
    Matrix values;
};

LabeledTable read_labeled_csv(const std::filesystem::path& file);

// Shortest round-trip representation is not needed; 17 significant digits
// reproduces every double exactly.
std::string format_double(double v);

void write_csv_row(std::ostream& os, const std::vector<std::string>& cells);

std::ofstream open_for_write(const std::filesystem::path& file);

}  // namespace drbc
