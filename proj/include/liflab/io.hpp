#pragma once
#include <string>
#include <vector>

namespace liflab::io {

// Shortest decimal string that round-trips to the same double.
std::string fmt_shortest(double x);

// Fixed 17 significant digits; used for density tables so files from
// different runs are byte-comparable even across minor code motion.
std::string fmt17(double x);

// Write text to path (parent directory must exist), '\n' line endings.
void write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// Minimal CSV: split a line on commas (no quoting — none of our tables
// need it).
std::vector<std::string> split_csv_line(const std::string& line);

double parse_double(const std::string& s);  // throws ValidationError

void ensure_dir(const std::string& path);  // mkdir -p equivalent

}  // namespace liflab::io
