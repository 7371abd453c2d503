#pragma once

#include <string>
#include <vector>

#include "cec/common.hpp"

namespace cec::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col_index(const std::string& name) const;  // -1 if absent
};

// RFC-4180: quoted fields, doubled-quote escapes, CR/LF tolerant.
Table parse(const std::string& text);
Table read_file(const std::string& path);

std::string escape_field(const std::string& field);
void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

// Shortest-faithful float formatting used by every emitted CSV (17 significant
// digits round-trips a double exactly).
std::string format_double(double v);

}  // namespace cec::csv
