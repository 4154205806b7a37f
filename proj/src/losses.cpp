#include "calib/losses.hpp"

#include <cmath>
#include <string>

#include "calib/numerics.hpp"

namespace calib {

namespace {

constexpr double kWeightSumTol = 1e-9;

void check_shapes(const LogitBatch& logits, const LabelVector& labels) {
  if (labels.size() != logits.n())
    throw Error(ErrorKind::Dimension, "batch has " + std::to_string(logits.n()) +
                                          " rows but " + std::to_string(labels.size()) +
                                          " labels");
  if (labels.num_classes() != static_cast<int>(logits.k()))
    throw Error(ErrorKind::Dimension, "labels carry " + std::to_string(labels.num_classes()) +
                                          " classes but logits have " +
                                          std::to_string(logits.k()) + " columns");
}

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

LossWeights::LossWeights(double alpha, double beta, double gamma)
    : alpha_(alpha), beta_(beta), gamma_(gamma) {
  if (!(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "loss weights must be non-negative");
  if (std::abs(alpha + beta + gamma - 1.0) > kWeightSumTol)
    throw Error(ErrorKind::InvalidArgument,
                "loss weights must sum to 1, got " + std::to_string(alpha + beta + gamma));
}

LossValueGrad cross_entropy(const LogitBatch& logits, const LabelVector& labels) {
  check_shapes(logits, labels);
  const std::size_t n = logits.n(), k = logits.k();
  const Matrix logp = log_softmax(logits);
  const double inv_n = 1.0 / static_cast<double>(n);

  double value = 0.0;
  Matrix grad(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    value -= logp(i, static_cast<std::size_t>(y));
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(logp(i, j));
      grad(i, j) = inv_n * (p - (static_cast<int>(j) == y ? 1.0 : 0.0));
    }
  }
  return {value * inv_n, std::move(grad)};
}

LossValueGrad focal_loss(const LogitBatch& logits, const LabelVector& labels,
                         double focal_gamma) {
  if (!(focal_gamma >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "focal_gamma must be >= 0");
  check_shapes(logits, labels);
  const std::size_t n = logits.n(), k = logits.k();
  const Matrix logp = log_softmax(logits);
  const double inv_n = 1.0 / static_cast<double>(n);

  double value = 0.0;
  Matrix grad(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    const double log_q = logp(i, static_cast<std::size_t>(y));
    const double q = std::exp(log_q);
    const double modulator = std::pow(1.0 - q, focal_gamma);  // pow(0,0) == 1 covers g = 0
    value += modulator * (-log_q);

    // d/dq [(1-q)^g (-ln q)] * q, kept in a form that stays finite as q -> 0
    // (q ln q -> 0) and as q -> 1 (the g > 0 kink has limit 0).
    double t1 = 0.0;
    if (focal_gamma > 0.0 && q < 1.0)
      t1 = focal_gamma * std::pow(1.0 - q, focal_gamma - 1.0) * q * log_q;
    const double q_dfdq = t1 - modulator;
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(logp(i, j));
      const double indicator = static_cast<int>(j) == y ? 1.0 : 0.0;
      grad(i, j) = inv_n * q_dfdq * (indicator - p);
    }
  }
  return {value * inv_n, std::move(grad)};
}

LossValueGrad mdca_loss(const LogitBatch& logits, const LabelVector& labels) {
  check_shapes(logits, labels);
  const std::size_t n = logits.n(), k = logits.k();
  const ProbBatch probs = softmax(logits);
  const Matrix& p = probs.values();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_k = 1.0 / static_cast<double>(k);

  // Per-class gap between batch-mean probability and empirical frequency.
  std::vector<double> mean_prob(k, 0.0), mean_freq(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) mean_prob[j] += p(i, j);
    mean_freq[static_cast<std::size_t>(labels[i])] += 1.0;
  }
  double value = 0.0;
  std::vector<double> sgn(k);
  for (std::size_t j = 0; j < k; ++j) {
    mean_prob[j] *= inv_n;
    mean_freq[j] *= inv_n;
    const double diff = mean_prob[j] - mean_freq[j];
    value += std::abs(diff);
    sgn[j] = sign0(diff);
  }
  value *= inv_k;

  // dL/dp[i,j] = sgn[j] / (K N); chain through the softmax of row i.
  Matrix grad(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < k; ++j) dot += sgn[j] * p(i, j);
    for (std::size_t j = 0; j < k; ++j)
      grad(i, j) = inv_k * inv_n * p(i, j) * (sgn[j] - dot);
  }
  return {value, std::move(grad)};
}

LossValueGrad ts_loss(const LogitBatch& logits, const LabelVector& labels, TsMode mode) {
  check_shapes(logits, labels);
  const std::size_t n = logits.n(), k = logits.k();
  if (k < 2) throw Error(ErrorKind::InvalidArgument, "ordinal loss needs K >= 2");
  const ProbBatch probs = softmax(logits);
  const Matrix& p = probs.values();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double denom = static_cast<double>(k) - 1.0;

  double value = 0.0;
  Matrix grad(n, k);  // stays zero in Hard mode
  if (mode == TsMode::Hard) {
    const Top1 t = top1(probs);
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = static_cast<double>(labels[i] - t.predictions[i]) / denom;
      value += diff * diff;
    }
    return {value * inv_n, std::move(grad)};
  }

  for (std::size_t i = 0; i < n; ++i) {
    // Expected normalized class index: sum_k p[i,k] * k / (K-1).
    double expected = 0.0;
    for (std::size_t j = 0; j < k; ++j) expected += p(i, j) * static_cast<double>(j) / denom;
    const double err = expected - static_cast<double>(labels[i]) / denom;
    value += err * err;
    for (std::size_t j = 0; j < k; ++j)
      grad(i, j) = 2.0 * inv_n * err * p(i, j) * (static_cast<double>(j) / denom - expected);
  }
  return {value * inv_n, std::move(grad)};
}

LossValueGrad total_loss(const LogitBatch& logits, const LabelVector& labels,
                         const LossWeights& weights, TsMode mode) {
  const LossValueGrad ce = cross_entropy(logits, labels);
  const LossValueGrad mdca = mdca_loss(logits, labels);
  const LossValueGrad ts = ts_loss(logits, labels, mode);

  LossValueGrad out;
  out.value = weights.alpha() * ce.value + weights.beta() * mdca.value + weights.gamma() * ts.value;
  out.grad = Matrix(logits.n(), logits.k());
  for (std::size_t idx = 0; idx < out.grad.data().size(); ++idx)
    out.grad.data()[idx] = weights.alpha() * ce.grad.data()[idx] +
                           weights.beta() * mdca.grad.data()[idx] +
                           weights.gamma() * ts.grad.data()[idx];
  return out;
}

}  // namespace calib
