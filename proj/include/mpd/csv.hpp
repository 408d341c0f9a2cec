#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mpd::csv {

// 17 significant digits; round-trips doubles exactly.
std::string format_double(double v);

void write_row(std::ostream& out, const std::vector<std::string>& cells);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;
};

Table read(const std::string& path);

}  // namespace mpd::csv
