#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "calib/losses.hpp"
#include "calib/numerics.hpp"
#include "calib/rng.hpp"

#include "oracles.hpp"

using namespace calib;

namespace {

// Logits whose softmax equals the given probability rows.
Matrix logits_for_probs(const Matrix& probs) {
  Matrix z(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.rows(); ++i)
    for (std::size_t j = 0; j < probs.cols(); ++j) z(i, j) = std::log(probs(i, j));
  return z;
}

}  // namespace

TEST_CASE("cross entropy on uniform logits is ln K") {
  const LogitBatch z(Matrix(3, 4, 0.0));
  const LossValueGrad ce = cross_entropy(z, LabelVector({0, 1, 3}, 4));
  CHECK(ce.value == doctest::Approx(std::log(4.0)).epsilon(1e-14));
}

TEST_CASE("cross entropy vanishes for a confident correct prediction") {
  const LossValueGrad ce =
      cross_entropy(LogitBatch(Matrix::from_rows({{1000, 0}})), LabelVector({0}, 2));
  CHECK(ce.value == doctest::Approx(0.0));
}

TEST_CASE("cross entropy matches brute-force formula and finite differences") {
  Rng rng(101);
  const Matrix z = oracle::random_logits(rng, 2, 3);
  const std::vector<int> y = oracle::random_labels(rng, 2, 3);
  const LabelVector labels(y, 3);

  // brute force: -(1/N) sum log p[i, y_i] with a locally computed softmax
  const Matrix p = oracle::plain_softmax(z);
  double expected = 0.0;
  for (int i = 0; i < 2; ++i) expected -= std::log(p(i, y[i]));
  expected /= 2.0;

  const LossValueGrad ce = cross_entropy(LogitBatch(z), labels);
  CHECK(ce.value == doctest::Approx(expected).epsilon(1e-12));

  const Matrix fd = oracle::fd_grad(
      [&](const Matrix& m) { return cross_entropy(LogitBatch(m), labels).value; }, z);
  CHECK(oracle::rel_err(ce.grad, fd) < 1e-6);
}

TEST_CASE("focal loss reduces to cross entropy at gamma 0") {
  Rng rng(102);
  const Matrix z = oracle::random_logits(rng, 5, 4);
  const LabelVector labels(oracle::random_labels(rng, 5, 4), 4);
  const LossValueGrad ce = cross_entropy(LogitBatch(z), labels);
  const LossValueGrad fl = focal_loss(LogitBatch(z), labels, 0.0);
  CHECK(std::abs(ce.value - fl.value) < 1e-12);
  for (std::size_t i = 0; i < ce.grad.data().size(); ++i)
    CHECK(std::abs(ce.grad.data()[i] - fl.grad.data()[i]) < 1e-12);
}

TEST_CASE("focal loss vanishes for confident correct predictions") {
  const LossValueGrad fl =
      focal_loss(LogitBatch(Matrix::from_rows({{1000, 0}})), LabelVector({0}, 2), 2.0);
  CHECK(fl.value == doctest::Approx(0.0));
  for (double g : fl.grad.data()) CHECK(std::isfinite(g));
}

TEST_CASE("focal loss gradient matches finite differences") {
  Rng rng(103);
  const Matrix z = oracle::random_logits(rng, 4, 4);
  const LabelVector labels(oracle::random_labels(rng, 4, 4), 4);
  const LossValueGrad fl = focal_loss(LogitBatch(z), labels, 2.0);
  const Matrix fd = oracle::fd_grad(
      [&](const Matrix& m) { return focal_loss(LogitBatch(m), labels, 2.0).value; }, z);
  CHECK(oracle::rel_err(fl.grad, fd) < 1e-6);
}

TEST_CASE("focal loss rejects negative gamma") {
  CHECK_THROWS_AS(focal_loss(LogitBatch(Matrix(1, 2, 0.0)), LabelVector({0}, 2), -1.0), Error);
}

TEST_CASE("mdca is zero on a class-calibrated batch") {
  const Matrix z = logits_for_probs(Matrix::from_rows({{0.7, 0.3}, {0.3, 0.7}}));
  const LossValueGrad m = mdca_loss(LogitBatch(z), LabelVector({0, 1}, 2));
  CHECK(m.value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mdca matches the hand-evaluated two-sample case") {
  const Matrix z = logits_for_probs(Matrix::from_rows({{0.7, 0.3}, {0.5, 0.5}}));
  const LossValueGrad m = mdca_loss(LogitBatch(z), LabelVector({0, 1}, 2));
  // mean probs (0.6, 0.4) vs frequencies (0.5, 0.5): (0.1 + 0.1) / 2
  CHECK(std::abs(m.value - 0.1) < 1e-12);
}

TEST_CASE("mdca gradient matches finite differences away from kinks") {
  Rng rng(104);
  int done = 0;
  while (done < 5) {
    const Matrix z = oracle::random_logits(rng, 8, 4);
    const LabelVector labels(oracle::random_labels(rng, 8, 4), 4);

    const Matrix p = oracle::plain_softmax(z);
    bool near_kink = false;
    for (int j = 0; j < 4; ++j) {
      double diff = 0.0;
      for (int i = 0; i < 8; ++i) diff += p(i, j) - (labels[i] == j ? 1.0 : 0.0);
      if (std::abs(diff / 8.0) < 1e-7) near_kink = true;
    }
    if (near_kink) continue;

    const LossValueGrad m = mdca_loss(LogitBatch(z), labels);
    const Matrix fd = oracle::fd_grad(
        [&](const Matrix& q) { return mdca_loss(LogitBatch(q), labels).value; }, z);
    CHECK(oracle::rel_err(m.grad, fd) < 1e-5);
    ++done;
  }
}

TEST_CASE("ordinal loss is zero when predictions equal labels") {
  const Matrix z = Matrix::from_rows({{9, 0, 0, 0}, {0, 0, 9, 0}});
  const LabelVector labels({0, 2}, 4);
  CHECK(ts_loss(LogitBatch(z), labels, TsMode::Hard).value == doctest::Approx(0.0));
  CHECK(ts_loss(LogitBatch(z), labels, TsMode::Soft).value < 1e-4);
}

TEST_CASE("hard ordinal loss prices misclassification by class distance") {
  // K=4, true class 3, predicted class 2: ((3-2)/3)^2 = 1/9.
  const LossValueGrad near = ts_loss(LogitBatch(Matrix::from_rows({{0, 0, 10, 0}})),
                                     LabelVector({3}, 4), TsMode::Hard);
  CHECK(near.value == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
  for (double g : near.grad.data()) CHECK(g == 0.0);

  const LossValueGrad far = ts_loss(LogitBatch(Matrix::from_rows({{0, 10, 0, 0}})),
                                    LabelVector({3}, 4), TsMode::Hard);
  CHECK(far.value == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
  CHECK(near.value < far.value);
}

TEST_CASE("soft ordinal loss gradient matches finite differences") {
  Rng rng(105);
  const Matrix z = oracle::random_logits(rng, 4, 4);
  const LabelVector labels(oracle::random_labels(rng, 4, 4), 4);
  const LossValueGrad ts = ts_loss(LogitBatch(z), labels, TsMode::Soft);
  const Matrix fd = oracle::fd_grad(
      [&](const Matrix& m) { return ts_loss(LogitBatch(m), labels, TsMode::Soft).value; }, z);
  CHECK(oracle::rel_err(ts.grad, fd) < 1e-6);
}

TEST_CASE("hard ordinal loss is invariant under sample permutation") {
  Rng rng(106);
  const Matrix z = oracle::random_logits(rng, 12, 5);
  std::vector<int> y = oracle::random_labels(rng, 12, 5);
  const double before = ts_loss(LogitBatch(z), LabelVector(y, 5), TsMode::Hard).value;

  std::vector<std::size_t> perm(12);
  for (std::size_t i = 0; i < 12; ++i) perm[i] = i;
  rng.shuffle(perm);
  Matrix pz(12, 5);
  std::vector<int> py(12);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 5; ++j) pz(i, j) = z(perm[i], j);
    py[i] = y[perm[i]];
  }
  const double after = ts_loss(LogitBatch(pz), LabelVector(py, 5), TsMode::Hard).value;
  CHECK(before == doctest::Approx(after).epsilon(1e-15));
}

TEST_CASE("weights must be non-negative and sum to one") {
  CHECK_THROWS_AS(LossWeights(0.5, 0.5, 0.5), Error);
  CHECK_THROWS_AS(LossWeights(-0.1, 0.6, 0.5), Error);
  CHECK_NOTHROW(LossWeights(1.0, 0.0, 0.0));
}

TEST_CASE("composite loss degenerates exactly and recomposes") {
  Rng rng(107);
  const Matrix z = oracle::random_logits(rng, 8, 4);
  const LabelVector labels(oracle::random_labels(rng, 8, 4), 4);
  const LogitBatch batch(z);

  const LossValueGrad ce = cross_entropy(batch, labels);
  const LossValueGrad only_ce = total_loss(batch, labels, LossWeights(1, 0, 0), TsMode::Soft);
  CHECK(only_ce.value == ce.value);
  CHECK(only_ce.grad.data() == ce.grad.data());

  const LossValueGrad ts = ts_loss(batch, labels, TsMode::Soft);
  const LossValueGrad only_ts = total_loss(batch, labels, LossWeights(0, 0, 1), TsMode::Soft);
  CHECK(only_ts.value == ts.value);
  CHECK(only_ts.grad.data() == ts.grad.data());

  const LossValueGrad mdca = mdca_loss(batch, labels);
  const LossValueGrad mix = total_loss(batch, labels, LossWeights(0.85, 0.10, 0.05), TsMode::Soft);
  CHECK(std::abs(mix.value - (0.85 * ce.value + 0.10 * mdca.value + 0.05 * ts.value)) < 1e-12);
}

TEST_CASE("loss values stay in their documented ranges") {
  Rng rng(108);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.uniform_int(1, 16), k = rng.uniform_int(2, 6);
    const LogitBatch z(oracle::random_logits(rng, n, k));
    const LabelVector labels(oracle::random_labels(rng, n, k), k);
    CHECK(cross_entropy(z, labels).value >= 0.0);
    CHECK(focal_loss(z, labels, 2.0).value >= 0.0);
    const double ts_soft = ts_loss(z, labels, TsMode::Soft).value;
    const double ts_hard = ts_loss(z, labels, TsMode::Hard).value;
    CHECK(ts_soft >= 0.0);
    CHECK(ts_soft <= 1.0);
    CHECK(ts_hard >= 0.0);
    CHECK(ts_hard <= 1.0);
    const double m = mdca_loss(z, labels).value;
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
  }
}

TEST_CASE("losses are shift invariant and their gradient rows sum to zero") {
  Rng rng(109);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = rng.uniform_int(1, 12), k = rng.uniform_int(2, 6);
    const Matrix z = oracle::random_logits(rng, n, k);
    Matrix shifted = z;
    for (int i = 0; i < n; ++i) {
      const double c = (2.0 * rng.uniform() - 1.0) * 20.0;
      for (int j = 0; j < k; ++j) shifted(i, j) += c;
    }
    const LabelVector labels(oracle::random_labels(rng, n, k), k);
    const LossWeights w(0.85, 0.10, 0.05);

    const auto pairs = {
        std::pair{cross_entropy(LogitBatch(z), labels), cross_entropy(LogitBatch(shifted), labels)},
        std::pair{focal_loss(LogitBatch(z), labels, 2.0),
                  focal_loss(LogitBatch(shifted), labels, 2.0)},
        std::pair{mdca_loss(LogitBatch(z), labels), mdca_loss(LogitBatch(shifted), labels)},
        std::pair{ts_loss(LogitBatch(z), labels, TsMode::Soft),
                  ts_loss(LogitBatch(shifted), labels, TsMode::Soft)},
        std::pair{total_loss(LogitBatch(z), labels, w, TsMode::Soft),
                  total_loss(LogitBatch(shifted), labels, w, TsMode::Soft)},
    };
    for (const auto& [a, b] : pairs) {
      CHECK(std::abs(a.value - b.value) < 1e-9);
      for (std::size_t i = 0; i < a.grad.rows(); ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < a.grad.cols(); ++j) row_sum += a.grad(i, j);
        CHECK(std::abs(row_sum) < 1e-9);
      }
    }
  }
}

TEST_CASE("shape mismatches are rejected") {
  const LogitBatch z(Matrix(3, 4, 0.0));
  CHECK_THROWS_AS(cross_entropy(z, LabelVector({0, 1}, 4)), Error);
  CHECK_THROWS_AS(cross_entropy(z, LabelVector({0, 1, 2}, 3)), Error);
  CHECK_THROWS_AS(mdca_loss(z, LabelVector({0}, 4)), Error);
}
