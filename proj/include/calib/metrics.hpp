#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "calib/types.hpp"

namespace calib {

struct BinningConfig {
  int num_bins = 10;
};

// One equal-width confidence bin [lo, hi); the last bin is closed at 1.0.
// Statistics are absent when the bin is empty.
struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  long count = 0;
  std::optional<double> avg_confidence;
  std::optional<double> accuracy;
  std::optional<double> gap;  // |accuracy - avg_confidence|
};

struct CalibrationReport {
  double ece = 0.0;
  double mce = 0.0;
  double accuracy = 0.0;
  double nll = 0.0;
  std::vector<ReliabilityBin> bins;
  std::size_t n = 0;
  std::size_t k = 0;
  int num_bins = 0;
};

// index = min(floor(conf * B), B - 1)
std::vector<int> assign_bins(std::span<const double> confidences, const BinningConfig& config);

// Per-bin count, mean top-1 confidence and top-1 accuracy: the data behind a
// reliability diagram.
std::vector<ReliabilityBin> reliability_bins(const ProbBatch& probs, const LabelVector& labels,
                                             const BinningConfig& config);

// Count-weighted mean of |accuracy - confidence| over occupied bins.
double ece(const ProbBatch& probs, const LabelVector& labels, const BinningConfig& config);

// Max of |accuracy - confidence| over occupied bins.
double mce(const ProbBatch& probs, const LabelVector& labels, const BinningConfig& config);

// Recompute ECE/MCE from an existing bin table (n = total sample count).
double ece_from_bins(std::span<const ReliabilityBin> bins, std::size_t n);
double mce_from_bins(std::span<const ReliabilityBin> bins);

// ECE, MCE, accuracy and NLL in one consistent report. NLL is evaluated on
// log(p) with a 1e-12 probability floor.
CalibrationReport full_report(const ProbBatch& probs, const LabelVector& labels,
                              const BinningConfig& config);

}  // namespace calib
