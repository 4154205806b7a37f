#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "calib/error.hpp"
#include "calib/matrix.hpp"

namespace calib {

// N x K matrix of raw classifier scores. Construction rejects non-finite
// entries, so downstream code never sees NaN/Inf logits.
class LogitBatch {
public:
  explicit LogitBatch(Matrix values);

  const Matrix& values() const { return values_; }
  std::size_t n() const { return values_.rows(); }
  std::size_t k() const { return values_.cols(); }

private:
  Matrix values_;
};

// N x K row-stochastic matrix of class probabilities. Rows must sum to 1
// within 1e-9 and every entry must lie in [0, 1].
class ProbBatch {
public:
  explicit ProbBatch(Matrix values);

  const Matrix& values() const { return values_; }
  std::size_t n() const { return values_.rows(); }
  std::size_t k() const { return values_.cols(); }

private:
  Matrix values_;
};

// Integer class labels in [0, K-1], carrying the ordinal class convention:
// adjacent indices are semantically closer than distant ones.
class LabelVector {
public:
  LabelVector(std::vector<int> labels, int num_classes);

  const std::vector<int>& labels() const { return labels_; }
  int operator[](std::size_t i) const { return labels_[i]; }
  std::size_t size() const { return labels_.size(); }
  int num_classes() const { return num_classes_; }

  friend bool operator==(const LabelVector& a, const LabelVector& b) = default;

private:
  std::vector<int> labels_;
  int num_classes_;
};

}  // namespace calib
