#pragma once

#include "calib/types.hpp"

namespace calib {

// Mixing weights of the composite loss. Non-negative and constrained to sum
// to 1 within 1e-9.
class LossWeights {
public:
  LossWeights(double alpha, double beta, double gamma);

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double gamma() const { return gamma_; }

private:
  double alpha_, beta_, gamma_;
};

// Loss value plus its analytic gradient with respect to the logits.
struct LossValueGrad {
  double value = 0.0;
  Matrix grad;  // N x K, d(loss)/d(logit)
};

// The ordinal loss comes in two flavors. HARD takes the argmax of the
// predicted distribution: faithful to the definition but piecewise constant,
// so its gradient is identically zero and it only works as a metric. SOFT
// replaces the argmax with the expected normalized class index, which is
// differentiable and is what training uses.
enum class TsMode { Soft, Hard };

// value = -(1/N) sum_i log softmax(z)[i, y_i]
// grad  = (1/N) (softmax(z) - onehot(y))
LossValueGrad cross_entropy(const LogitBatch& logits, const LabelVector& labels);

// value = -(1/N) sum_i (1 - p_y)^g log p_y, reduces to cross entropy at g=0.
LossValueGrad focal_loss(const LogitBatch& logits, const LabelVector& labels,
                         double focal_gamma);

// Batch-level class-wise gap between mean predicted probability and
// empirical class frequency:
//   value = (1/K) sum_k | mean_i p[i,k] - mean_i 1[y_i = k] |
// The subgradient at |0| is taken as 0.
LossValueGrad mdca_loss(const LogitBatch& logits, const LabelVector& labels);

// Squared difference of normalized class indices, y_norm = y / (K-1).
// Penalizes misclassification proportionally to ordinal distance: for K=4,
// predicting class 2 for a class-3 sample costs 1/9, class 1 costs 4/9.
LossValueGrad ts_loss(const LogitBatch& logits, const LabelVector& labels, TsMode mode);

// alpha*CE + beta*MDCA + gamma*TS, gradients combined the same way.
// TS uses `mode`; Soft is required when the result drives gradient descent.
LossValueGrad total_loss(const LogitBatch& logits, const LabelVector& labels,
                         const LossWeights& weights, TsMode mode);

}  // namespace calib
