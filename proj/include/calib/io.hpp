#pragma once

// Dataset CSV and JSON report formats.
//
// Dataset CSV: optional leading '#' comment lines, a header p_0,...,p_{k-1},label,
// then one row per sample. Numbers are written in shortest round-trip form, so a
// written dataset re-parses to bit-identical values.

#include "calib/core.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace calib {

inline constexpr const char* kToolVersion = "0.1.0";

class DatasetParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

LabeledDataset parse_dataset(std::istream& in, const std::string& source = "<stream>");
LabeledDataset parse_dataset(const std::string& path);

/// `comments` are written as leading '#' lines.
void write_dataset(std::ostream& out, const LabeledDataset& d, const std::vector<std::string>& comments = {});
void write_dataset(const std::string& path, const LabeledDataset& d, const std::vector<std::string>& comments = {});

/// Shortest decimal that round-trips to the same double.
std::string format_double(double x);

/// {"reports": [...]} with a fixed key order per entry.
std::string reports_to_json(const std::vector<CEReport>& reports);
void emit_report(const std::vector<CEReport>& reports, const std::string& path);

}  // namespace calib
