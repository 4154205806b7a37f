#include "calib/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace calib {

ProbBatch softmax(const LogitBatch& logits) {
  const Matrix& z = logits.values();
  Matrix p(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto row = z.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) {
      p(i, j) = std::exp(z(i, j) - m);
      sum += p(i, j);
    }
    for (std::size_t j = 0; j < z.cols(); ++j) p(i, j) /= sum;
  }
  return ProbBatch(std::move(p));
}

Matrix log_softmax(const LogitBatch& logits) {
  const Matrix& z = logits.values();
  Matrix out(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto row = z.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    for (std::size_t j = 0; j < z.cols(); ++j) out(i, j) = z(i, j) - lse;
  }
  return out;
}

Top1 top1(const ProbBatch& probs) {
  const Matrix& p = probs.values();
  std::vector<int> preds(p.rows());
  std::vector<double> confs(p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    int best = 0;
    double best_p = p(i, 0);
    for (std::size_t j = 1; j < p.cols(); ++j) {
      if (p(i, j) > best_p) {  // strict: ties go to the lowest index
        best_p = p(i, j);
        best = static_cast<int>(j);
      }
    }
    preds[i] = best;
    confs[i] = best_p;
  }
  return {LabelVector(std::move(preds), static_cast<int>(p.cols())), std::move(confs)};
}

}  // namespace calib
