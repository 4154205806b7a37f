#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "calib/rng.hpp"
#include "calib/types.hpp"

namespace calib {

// Synthetic ordinal classification data: class c is a unit-covariance
// Gaussian with mean c * separation along the first feature axis. Collinear
// means make adjacent classes overlap more than distant ones, so ordinal
// penalties have real structure to exploit.
struct SyntheticConfig {
  int k = 4;
  int d = 8;
  int n_train = 613;
  int n_test = 315;
  double separation = 1.5;
  RngSeed seed = 42;
};

struct Dataset {
  Matrix features;  // N x d
  LabelVector labels;
};

// Ordered class names; position in the list is the ordinal class index.
class LabelMap {
public:
  explicit LabelMap(std::vector<std::string> ordered_names);

  // normal -> 0, squamous -> 1, adenocarcinoma -> 2, large-cell -> 3,
  // ordered by increasing tumor coverage.
  static LabelMap default_lung_map();

  int index_of(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }
  int size() const { return static_cast<int>(names_.size()); }

private:
  std::vector<std::string> names_;
};

std::pair<Dataset, Dataset> generate_synthetic(const SyntheticConfig& config);

LabelVector remap_labels(std::span<const std::string> raw_labels, const LabelMap& map);

// Text interchange formats:
//   logits: header "l0,...,l{K-1}", one comma-separated row per sample
//   labels: header "label", one integer per line
// UTF-8, '\n' line endings, shortest round-trip decimal floats.
LogitBatch load_logits(const std::filesystem::path& path);
std::vector<int> load_label_column(const std::filesystem::path& path);
std::pair<LogitBatch, LabelVector> load_logits_labels(const std::filesystem::path& logits_path,
                                                      const std::filesystem::path& labels_path);
void save_logits(const std::filesystem::path& path, const LogitBatch& logits);
void save_labels(const std::filesystem::path& path, const LabelVector& labels);

// Seeded shuffle then partition; first part gets round(fraction * N) rows.
std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, RngSeed seed);

}  // namespace calib
