#include "calib/types.hpp"

#include <cmath>
#include <string>

namespace calib {

namespace {
constexpr double kRowSumTol = 1e-9;
}

LogitBatch::LogitBatch(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 2)
    throw Error(ErrorKind::Dimension, "LogitBatch requires n >= 1 and k >= 2, got " +
                                          std::to_string(values_.rows()) + "x" +
                                          std::to_string(values_.cols()));
  if (!values_.all_finite())
    throw Error(ErrorKind::InvalidArgument, "LogitBatch rejects non-finite entries");
}

ProbBatch::ProbBatch(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 2)
    throw Error(ErrorKind::Dimension, "ProbBatch requires n >= 1 and k >= 2, got " +
                                          std::to_string(values_.rows()) + "x" +
                                          std::to_string(values_.cols()));
  for (std::size_t i = 0; i < values_.rows(); ++i) {
    double sum = 0.0;
    for (double v : values_.row(i)) {
      if (!(v >= 0.0 && v <= 1.0))
        throw Error(ErrorKind::Range, "ProbBatch entry outside [0, 1] in row " + std::to_string(i));
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
      throw Error(ErrorKind::Range, "ProbBatch row " + std::to_string(i) +
                                        " sums to " + std::to_string(sum) + ", expected 1");
  }
}

LabelVector::LabelVector(std::vector<int> labels, int num_classes)
    : labels_(std::move(labels)), num_classes_(num_classes) {
  if (num_classes_ < 1)
    throw Error(ErrorKind::InvalidArgument, "LabelVector requires num_classes >= 1");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || labels_[i] >= num_classes_)
      throw Error(ErrorKind::Range, "label " + std::to_string(labels_[i]) + " at index " +
                                        std::to_string(i) + " outside [0, " +
                                        std::to_string(num_classes_ - 1) + "]");
  }
}

}  // namespace calib
