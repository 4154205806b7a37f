#include "calib/temperature.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "calib/numerics.hpp"

namespace calib {

namespace {

constexpr double kLnLow = -2.99573227355399099;  // ln 0.05
constexpr double kLnHigh = 2.99573227355399099;  // ln 20
constexpr double kLnTol = 1e-4;
constexpr double kInvPhi = 0.6180339887498949;

bool rows_all_constant(const Matrix& z) {
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto row = z.row(i);
    const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    if (*hi - *lo > 0.0) return false;
  }
  return true;
}

}  // namespace

Temperature::Temperature(double t) : t_(t) {
  if (!(t > 0.0) || !std::isfinite(t))
    throw Error(ErrorKind::InvalidArgument,
                "temperature must be positive and finite, got " + std::to_string(t));
}

LogitBatch apply_temperature(const LogitBatch& logits, Temperature temp) {
  Matrix scaled = logits.values();
  for (double& v : scaled.data()) v /= temp.value();
  return LogitBatch(std::move(scaled));
}

double nll(const LogitBatch& logits, const LabelVector& labels) {
  if (labels.size() != logits.n() || labels.num_classes() != static_cast<int>(logits.k()))
    throw Error(ErrorKind::Dimension, "logits/labels shape mismatch in nll");
  const Matrix logp = log_softmax(logits);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.n(); ++i)
    sum -= logp(i, static_cast<std::size_t>(labels[i]));
  return sum / static_cast<double>(logits.n());
}

TempFitResult fit_temperature(const LogitBatch& val_logits, const LabelVector& val_labels) {
  if (val_logits.n() < 2)
    throw Error(ErrorKind::InvalidArgument, "temperature fit needs at least 2 samples");

  TempFitResult result;
  result.nll_before = nll(val_logits, val_labels);

  if (rows_all_constant(val_logits.values())) {
    // NLL is flat in t; report the identity temperature and flag it.
    result.temperature = Temperature(1.0);
    result.nll_after = result.nll_before;
    result.converged = false;
    return result;
  }

  const auto objective = [&](double ln_t) {
    return nll(apply_temperature(val_logits, Temperature(std::exp(ln_t))), val_labels);
  };

  // Golden-section search on ln t.
  double a = kLnLow, b = kLnHigh;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  int iterations = 0;
  const int max_iterations = 200;
  while (b - a > kLnTol && iterations < max_iterations) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = objective(d);
    }
    ++iterations;
  }

  const double t_fit = std::exp(0.5 * (a + b));
  const double nll_fit = nll(apply_temperature(val_logits, Temperature(t_fit)), val_labels);
  result.iterations = iterations;
  if (nll_fit <= result.nll_before) {
    result.temperature = Temperature(t_fit);
    result.nll_after = nll_fit;
    result.converged = b - a <= kLnTol;
  } else {
    // The search interval never beat the identity; keep t = 1.
    result.temperature = Temperature(1.0);
    result.nll_after = result.nll_before;
    result.converged = false;
  }
  return result;
}

}  // namespace calib
