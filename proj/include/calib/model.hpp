#pragma once

#include <vector>

#include "calib/rng.hpp"
#include "calib/types.hpp"

namespace calib {

// Desk-scale stand-ins for a deep backbone. The calibration machinery only
// ever consumes logits, so anything that produces an N x K score matrix
// plugs in here.
enum class Arch { Linear, Mlp1 };

struct ModelParams {
  Arch arch = Arch::Linear;
  // Linear: w1 is d x K, b1 has K entries; w2/b2 stay empty.
  // Mlp1:   w1 is d x h, b1 has h entries, w2 is h x K, b2 has K entries.
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;

  friend bool operator==(const ModelParams& a, const ModelParams& b) = default;
};

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
ModelParams init_params(Arch arch, std::size_t d, std::size_t k, std::size_t hidden, Rng& rng);

// Linear: X W + b.  Mlp1: ReLU(X W1 + b1) W2 + b2.
LogitBatch forward(const ModelParams& params, const Matrix& features);

struct ParamGrads {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
};

// Backpropagates a d(loss)/d(logits) matrix to parameter gradients.
ParamGrads backward(const ModelParams& params, const Matrix& features, const Matrix& dlogits);

}  // namespace calib
