#include "calib/model.hpp"

#include <cmath>
#include <string>

#include "calib/error.hpp"

namespace calib {

namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = (2.0 * rng.uniform() - 1.0) * bound;
  return m;
}

// rows(X) x cols(W) product, X is N x d, W is d x m.
Matrix affine(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
  Matrix out(x.rows(), w.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double acc = b[j];
      for (std::size_t c = 0; c < x.cols(); ++c) acc += x(i, c) * w(c, j);
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix hidden_activations(const ModelParams& params, const Matrix& features) {
  Matrix h = affine(features, params.w1, params.b1);
  for (double& v : h.data()) v = v > 0.0 ? v : 0.0;
  return h;
}

}  // namespace

ModelParams init_params(Arch arch, std::size_t d, std::size_t k, std::size_t hidden, Rng& rng) {
  ModelParams params;
  params.arch = arch;
  if (arch == Arch::Linear) {
    params.w1 = uniform_matrix(d, k, 1.0 / std::sqrt(static_cast<double>(d)), rng);
    params.b1.assign(k, 0.0);
  } else {
    params.w1 = uniform_matrix(d, hidden, 1.0 / std::sqrt(static_cast<double>(d)), rng);
    params.b1.assign(hidden, 0.0);
    params.w2 = uniform_matrix(hidden, k, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
    params.b2.assign(k, 0.0);
  }
  return params;
}

LogitBatch forward(const ModelParams& params, const Matrix& features) {
  if (features.cols() != params.w1.rows())
    throw Error(ErrorKind::Dimension, "features have " + std::to_string(features.cols()) +
                                          " columns but the model expects " +
                                          std::to_string(params.w1.rows()));
  if (params.arch == Arch::Linear)
    return LogitBatch(affine(features, params.w1, params.b1));
  return LogitBatch(affine(hidden_activations(params, features), params.w2, params.b2));
}

ParamGrads backward(const ModelParams& params, const Matrix& features, const Matrix& dlogits) {
  if (features.rows() != dlogits.rows())
    throw Error(ErrorKind::Dimension, "features/dlogits row mismatch in backward");
  ParamGrads g;
  if (params.arch == Arch::Linear) {
    g.w1 = Matrix(params.w1.rows(), params.w1.cols());
    g.b1.assign(params.b1.size(), 0.0);
    for (std::size_t i = 0; i < features.rows(); ++i)
      for (std::size_t j = 0; j < g.w1.cols(); ++j) {
        const double dz = dlogits(i, j);
        g.b1[j] += dz;
        for (std::size_t c = 0; c < g.w1.rows(); ++c) g.w1(c, j) += features(i, c) * dz;
      }
    return g;
  }

  const Matrix h = hidden_activations(params, features);
  g.w2 = Matrix(params.w2.rows(), params.w2.cols());
  g.b2.assign(params.b2.size(), 0.0);
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = 0; j < g.w2.cols(); ++j) {
      const double dz = dlogits(i, j);
      g.b2[j] += dz;
      for (std::size_t c = 0; c < g.w2.rows(); ++c) g.w2(c, j) += h(i, c) * dz;
    }

  // dh = dlogits W2^T, gated by the ReLU mask.
  Matrix dh(h.rows(), h.cols());
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t c = 0; c < h.cols(); ++c) {
      if (h(i, c) <= 0.0) continue;  // dh starts at zero
      double acc = 0.0;
      for (std::size_t j = 0; j < params.w2.cols(); ++j) acc += dlogits(i, j) * params.w2(c, j);
      dh(i, c) = acc;
    }

  g.w1 = Matrix(params.w1.rows(), params.w1.cols());
  g.b1.assign(params.b1.size(), 0.0);
  for (std::size_t i = 0; i < features.rows(); ++i)
    for (std::size_t j = 0; j < g.w1.cols(); ++j) {
      const double dz = dh(i, j);
      g.b1[j] += dz;
      for (std::size_t c = 0; c < g.w1.rows(); ++c) g.w1(c, j) += features(i, c) * dz;
    }
  return g;
}

}  // namespace calib
