#include "calib/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "calib/numerics.hpp"

namespace calib {

namespace {

void check_config(const BinningConfig& config) {
  if (config.num_bins < 1)
    throw Error(ErrorKind::InvalidArgument, "num_bins must be >= 1");
}

void check_shapes(const ProbBatch& probs, const LabelVector& labels) {
  if (labels.size() != probs.n())
    throw Error(ErrorKind::Dimension, "batch has " + std::to_string(probs.n()) +
                                          " rows but " + std::to_string(labels.size()) +
                                          " labels");
  if (labels.num_classes() != static_cast<int>(probs.k()))
    throw Error(ErrorKind::Dimension, "labels carry " + std::to_string(labels.num_classes()) +
                                          " classes but probabilities have " +
                                          std::to_string(probs.k()) + " columns");
}

}  // namespace

std::vector<int> assign_bins(std::span<const double> confidences, const BinningConfig& config) {
  check_config(config);
  const int b = config.num_bins;
  std::vector<int> out(confidences.size());
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0))
      throw Error(ErrorKind::Range,
                  "confidence " + std::to_string(c) + " at index " + std::to_string(i) +
                      " outside [0, 1]");
    // Equal-width bins [i/B, (i+1)/B), last bin closed at 1.0.
    out[i] = std::min(static_cast<int>(std::floor(c * b)), b - 1);
  }
  return out;
}

std::vector<ReliabilityBin> reliability_bins(const ProbBatch& probs, const LabelVector& labels,
                                             const BinningConfig& config) {
  check_config(config);
  check_shapes(probs, labels);
  const int b = config.num_bins;
  const Top1 t = top1(probs);
  const std::vector<int> idx = assign_bins(t.confidences, config);

  std::vector<long> count(b, 0);
  std::vector<double> conf_sum(b, 0.0), correct_sum(b, 0.0);
  for (std::size_t i = 0; i < probs.n(); ++i) {
    const int bi = idx[i];
    ++count[bi];
    conf_sum[bi] += t.confidences[i];
    correct_sum[bi] += t.predictions[i] == labels[i] ? 1.0 : 0.0;
  }

  std::vector<ReliabilityBin> bins(b);
  for (int i = 0; i < b; ++i) {
    bins[i].lo = static_cast<double>(i) / b;
    bins[i].hi = static_cast<double>(i + 1) / b;
    bins[i].count = count[i];
    if (count[i] > 0) {
      bins[i].avg_confidence = conf_sum[i] / static_cast<double>(count[i]);
      bins[i].accuracy = correct_sum[i] / static_cast<double>(count[i]);
      bins[i].gap = std::abs(*bins[i].accuracy - *bins[i].avg_confidence);
    }
  }
  return bins;
}

double ece_from_bins(std::span<const ReliabilityBin> bins, std::size_t n) {
  double out = 0.0;
  for (const auto& bin : bins)
    if (bin.count > 0) out += static_cast<double>(bin.count) / static_cast<double>(n) * *bin.gap;
  return out;
}

double mce_from_bins(std::span<const ReliabilityBin> bins) {
  double out = 0.0;
  for (const auto& bin : bins)
    if (bin.count > 0) out = std::max(out, *bin.gap);
  return out;
}

double ece(const ProbBatch& probs, const LabelVector& labels, const BinningConfig& config) {
  return ece_from_bins(reliability_bins(probs, labels, config), probs.n());
}

double mce(const ProbBatch& probs, const LabelVector& labels, const BinningConfig& config) {
  return mce_from_bins(reliability_bins(probs, labels, config));
}

CalibrationReport full_report(const ProbBatch& probs, const LabelVector& labels,
                              const BinningConfig& config) {
  CalibrationReport report;
  report.bins = reliability_bins(probs, labels, config);
  report.n = probs.n();
  report.k = probs.k();
  report.num_bins = config.num_bins;
  report.ece = ece_from_bins(report.bins, report.n);
  report.mce = mce_from_bins(report.bins);

  const Top1 t = top1(probs);
  double correct = 0.0, nll_sum = 0.0;
  for (std::size_t i = 0; i < probs.n(); ++i) {
    if (t.predictions[i] == labels[i]) correct += 1.0;
    const double p = probs.values()(i, static_cast<std::size_t>(labels[i]));
    nll_sum -= std::log(std::max(p, 1e-12));
  }
  report.accuracy = correct / static_cast<double>(report.n);
  report.nll = nll_sum / static_cast<double>(report.n);
  return report;
}

}  // namespace calib
