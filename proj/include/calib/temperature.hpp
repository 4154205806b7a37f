#pragma once

#include "calib/types.hpp"

namespace calib {

// Scalar divisor applied to logits before the softmax. Must be positive and
// finite. t > 1 softens the distribution, t < 1 sharpens it.
class Temperature {
public:
  explicit Temperature(double t);
  double value() const { return t_; }

private:
  double t_;
};

struct TempFitResult {
  Temperature temperature{1.0};
  double nll_before = 0.0;  // at t = 1
  double nll_after = 0.0;   // at the fitted t
  int iterations = 0;
  bool converged = false;
};

// logits / t elementwise. Argmax of every row is unchanged, so accuracy is
// invariant under temperature scaling.
LogitBatch apply_temperature(const LogitBatch& logits, Temperature temp);

// Mean negative log-likelihood of the true class, on the stable log-softmax
// path (never log of softmax probabilities).
double nll(const LogitBatch& logits, const LabelVector& labels);

// Fit t by minimizing validation NLL with golden-section search on ln t over
// ln t in [ln 0.05, ln 20], absolute tolerance 1e-4 on ln t. The search
// domain deliberately includes t < 1: underconfident models need it, and the
// fitted value is reported rather than clamped. Degenerate input (every
// logit row constant) returns t = 1 with converged = false.
TempFitResult fit_temperature(const LogitBatch& val_logits, const LabelVector& val_labels);

}  // namespace calib
