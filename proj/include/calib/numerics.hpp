#pragma once

#include <vector>

#include "calib/types.hpp"

namespace calib {

// Row-wise softmax with max subtraction; safe for arbitrarily large logits.
ProbBatch softmax(const LogitBatch& logits);

// Row-wise log-softmax via log-sum-exp with max subtraction.
// exp(log_softmax(z)) == softmax(z) within 1e-12 elementwise.
Matrix log_softmax(const LogitBatch& logits);

struct Top1 {
  LabelVector predictions;          // argmax per row, lowest index on ties
  std::vector<double> confidences;  // the max probability per row
};

Top1 top1(const ProbBatch& probs);

}  // namespace calib
