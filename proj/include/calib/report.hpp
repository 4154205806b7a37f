#pragma once

#include <iosfwd>
#include <span>

#include "json.hpp"

#include "calib/metrics.hpp"

namespace calib {

using OrderedJson = nlohmann::ordered_json;

// JSON view of a calibration report with stable field order. ECE/MCE appear
// both as fractions and as x100 percentages; bin statistics keep full
// precision so ECE/MCE can be recomputed from the rows.
OrderedJson report_to_json(const CalibrationReport& report);

// Inverse of the bins array emitted by report_to_json.
std::vector<ReliabilityBin> bins_from_json(const OrderedJson& bins);

// Comma-separated bin table, one row per bin including empty ones (empty
// statistics as empty fields). Header:
//   bin_lo,bin_hi,count,avg_confidence,accuracy,gap
void write_reliability_csv(std::ostream& out, std::span<const ReliabilityBin> bins);

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

}  // namespace calib
