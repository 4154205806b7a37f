#include "calib/report.hpp"

#include <charconv>
#include <ostream>

namespace calib {

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

OrderedJson report_to_json(const CalibrationReport& report) {
  OrderedJson doc;
  doc["n"] = report.n;
  doc["k"] = report.k;
  doc["num_bins"] = report.num_bins;
  doc["accuracy"] = report.accuracy;
  doc["nll"] = report.nll;
  doc["ece"] = report.ece;
  doc["mce"] = report.mce;
  doc["ece_percent"] = report.ece * 100.0;
  doc["mce_percent"] = report.mce * 100.0;
  OrderedJson bins = OrderedJson::array();
  for (const auto& bin : report.bins) {
    OrderedJson row;
    row["lo"] = bin.lo;
    row["hi"] = bin.hi;
    row["count"] = bin.count;
    row["avg_confidence"] = bin.avg_confidence ? OrderedJson(*bin.avg_confidence) : OrderedJson();
    row["accuracy"] = bin.accuracy ? OrderedJson(*bin.accuracy) : OrderedJson();
    row["gap"] = bin.gap ? OrderedJson(*bin.gap) : OrderedJson();
    bins.push_back(std::move(row));
  }
  doc["bins"] = std::move(bins);
  return doc;
}

std::vector<ReliabilityBin> bins_from_json(const OrderedJson& bins) {
  std::vector<ReliabilityBin> out;
  out.reserve(bins.size());
  for (const auto& row : bins) {
    ReliabilityBin bin;
    bin.lo = row.at("lo").get<double>();
    bin.hi = row.at("hi").get<double>();
    bin.count = row.at("count").get<long>();
    if (!row.at("avg_confidence").is_null())
      bin.avg_confidence = row.at("avg_confidence").get<double>();
    if (!row.at("accuracy").is_null()) bin.accuracy = row.at("accuracy").get<double>();
    if (!row.at("gap").is_null()) bin.gap = row.at("gap").get<double>();
    out.push_back(bin);
  }
  return out;
}

void write_reliability_csv(std::ostream& out, std::span<const ReliabilityBin> bins) {
  out << "bin_lo,bin_hi,count,avg_confidence,accuracy,gap\n";
  for (const auto& bin : bins) {
    out << format_double(bin.lo) << ',' << format_double(bin.hi) << ',' << bin.count << ',';
    if (bin.avg_confidence) out << format_double(*bin.avg_confidence);
    out << ',';
    if (bin.accuracy) out << format_double(*bin.accuracy);
    out << ',';
    if (bin.gap) out << format_double(*bin.gap);
    out << '\n';
  }
}

}  // namespace calib
