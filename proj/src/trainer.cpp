#include "calib/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "calib/numerics.hpp"

namespace calib {

namespace {

constexpr std::uint64_t kInitStream = 0x171A17;
constexpr std::uint64_t kShuffleStream = 0x5801FF;
constexpr std::uint64_t kGradStream = 0x6D0C4E;
constexpr double kFdStep = 1e-6;
constexpr double kMdcaKinkRadius = 1e-7;

struct Batch {
  Matrix features;
  LabelVector labels;
};

Batch take_batch(const Dataset& data, std::span<const std::size_t> rows) {
  Matrix features(rows.size(), data.features.cols());
  std::vector<int> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < data.features.cols(); ++c)
      features(i, c) = data.features(rows[i], c);
    labels[i] = data.labels[rows[i]];
  }
  return {std::move(features), LabelVector(std::move(labels), data.labels.num_classes())};
}

LossValueGrad dispatch_loss(const TrainConfig& config, const LogitBatch& logits,
                            const LabelVector& labels) {
  switch (config.loss) {
    case LossSpec::Ce:
      return cross_entropy(logits, labels);
    case LossSpec::Focal:
      return focal_loss(logits, labels, config.focal_gamma);
    case LossSpec::CeMdca:
    case LossSpec::CeMdcaTs:
      return total_loss(logits, labels, config.weights, TsMode::Soft);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown loss spec");
}

void sgd_step(Matrix& w, Matrix& vel, const Matrix& g, double lr, double mu) {
  for (std::size_t i = 0; i < w.data().size(); ++i) {
    vel.data()[i] = mu * vel.data()[i] - lr * g.data()[i];
    w.data()[i] += vel.data()[i];
  }
}

void sgd_step(std::vector<double>& b, std::vector<double>& vel, const std::vector<double>& g,
              double lr, double mu) {
  for (std::size_t i = 0; i < b.size(); ++i) {
    vel[i] = mu * vel[i] - lr * g[i];
    b[i] += vel[i];
  }
}

double mean_top1_confidence(const ModelParams& params, const Matrix& features) {
  const Top1 t = top1(softmax(forward(params, features)));
  const double sum = std::accumulate(t.confidences.begin(), t.confidences.end(), 0.0);
  return sum / static_cast<double>(t.confidences.size());
}

void check_dataset(const Dataset& data, const char* name, std::size_t d, int k) {
  if (data.features.cols() != d)
    throw Error(ErrorKind::Dimension, std::string(name) + " split feature width mismatch");
  if (data.features.rows() != data.labels.size())
    throw Error(ErrorKind::Dimension, std::string(name) + " split feature/label count mismatch");
  if (data.labels.num_classes() != k)
    throw Error(ErrorKind::Dimension, std::string(name) + " split class count mismatch");
}

}  // namespace

std::string loss_spec_name(LossSpec spec) {
  switch (spec) {
    case LossSpec::Ce: return "ce";
    case LossSpec::Focal: return "focal";
    case LossSpec::CeMdca: return "ce+mdca";
    case LossSpec::CeMdcaTs: return "ce+mdca+ts";
  }
  return "?";
}

TrainResult train(const Dataset& train_data, const Dataset& val_data, const Dataset& test_data,
                  const TrainConfig& config) {
  if (config.epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0.0) ||
      !(config.momentum >= 0.0 && config.momentum < 1.0))
    throw Error(ErrorKind::InvalidArgument, "invalid training config");
  const std::size_t n = train_data.features.rows();
  const std::size_t d = train_data.features.cols();
  const int k = train_data.labels.num_classes();
  if (n == 0) throw Error(ErrorKind::Dimension, "training split is empty");
  check_dataset(train_data, "train", d, k);
  check_dataset(test_data, "test", d, k);
  if (config.temp_scale) {
    if (val_data.features.rows() == 0)
      throw Error(ErrorKind::InvalidArgument, "temperature scaling needs a non-empty val split");
    check_dataset(val_data, "val", d, k);
  }

  const Rng root(config.seed);
  Rng init_rng = root.split(kInitStream);
  ModelParams params = init_params(config.arch, d, static_cast<std::size_t>(k),
                                   static_cast<std::size_t>(config.hidden), init_rng);
  ModelParams velocity = params;
  for (double& v : velocity.w1.data()) v = 0.0;
  for (double& v : velocity.b1) v = 0.0;
  for (double& v : velocity.w2.data()) v = 0.0;
  for (double& v : velocity.b2) v = 0.0;

  TrainResult result;
  result.loss_curve.reserve(config.epochs);
  result.confidence_curve.reserve(config.epochs);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng = root.split(kShuffleStream).split(static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t len = std::min(batch_size, n - start);
      const Batch batch = take_batch(train_data, std::span(order).subspan(start, len));

      LossValueGrad loss;
      try {
        const LogitBatch logits = forward(params, batch.features);
        loss = dispatch_loss(config, logits, batch.labels);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::InvalidArgument) throw;
        throw Error(ErrorKind::Numeric,
                    "training diverged (non-finite logits) at epoch " + std::to_string(epoch + 1));
      }
      if (!std::isfinite(loss.value))
        throw Error(ErrorKind::Numeric,
                    "training diverged (non-finite loss) at epoch " + std::to_string(epoch + 1));

      const ParamGrads grads = backward(params, batch.features, loss.grad);
      sgd_step(params.w1, velocity.w1, grads.w1, config.learning_rate, config.momentum);
      sgd_step(params.b1, velocity.b1, grads.b1, config.learning_rate, config.momentum);
      if (params.arch == Arch::Mlp1) {
        sgd_step(params.w2, velocity.w2, grads.w2, config.learning_rate, config.momentum);
        sgd_step(params.b2, velocity.b2, grads.b2, config.learning_rate, config.momentum);
      }
      epoch_loss += loss.value * static_cast<double>(len);
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(n));
    result.confidence_curve.push_back(mean_top1_confidence(params, train_data.features));
  }

  const BinningConfig bins{config.num_bins};
  const LogitBatch test_logits = forward(params, test_data.features);
  result.report_before = full_report(softmax(test_logits), test_data.labels, bins);

  if (config.temp_scale) {
    const LogitBatch val_logits = forward(params, val_data.features);
    const TempFitResult fit = fit_temperature(val_logits, val_data.labels);
    const LogitBatch scaled = apply_temperature(test_logits, fit.temperature);
    result.report_after = full_report(softmax(scaled), test_data.labels, bins);
    result.temp_fit = fit;
  }

  result.params = std::move(params);
  return result;
}

// ---------------------------------------------------------------------------
// Finite-difference harness
// ---------------------------------------------------------------------------

namespace {

struct LossInstance {
  Matrix logits;
  LabelVector labels;
};

LossInstance random_instance(Rng& rng) {
  const int k = rng.uniform_int(2, 6);
  const int n = rng.uniform_int(1, 32);
  Matrix logits(n, k);
  for (double& v : logits.data()) v = (2.0 * rng.uniform() - 1.0) * 4.0;
  std::vector<int> labels(n);
  for (int& y : labels) y = rng.uniform_int(0, k - 1);
  return {std::move(logits), LabelVector(std::move(labels), k)};
}

bool near_mdca_kink(const Matrix& logits, const LabelVector& labels) {
  const ProbBatch probs = softmax(LogitBatch(logits));
  const std::size_t n = probs.n(), k = probs.k();
  for (std::size_t j = 0; j < k; ++j) {
    double mean_prob = 0.0, mean_freq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mean_prob += probs.values()(i, j);
      if (labels[i] == static_cast<int>(j)) mean_freq += 1.0;
    }
    if (std::abs((mean_prob - mean_freq) / static_cast<double>(n)) < kMdcaKinkRadius) return true;
  }
  return false;
}

double loss_value(GradCheckTarget target, const Matrix& logits, const LabelVector& labels) {
  const LogitBatch batch{logits};
  switch (target) {
    case GradCheckTarget::CrossEntropy: return cross_entropy(batch, labels).value;
    case GradCheckTarget::Focal0: return focal_loss(batch, labels, 0.0).value;
    case GradCheckTarget::Focal1: return focal_loss(batch, labels, 1.0).value;
    case GradCheckTarget::Focal2: return focal_loss(batch, labels, 2.0).value;
    case GradCheckTarget::Mdca: return mdca_loss(batch, labels).value;
    case GradCheckTarget::TsSoft: return ts_loss(batch, labels, TsMode::Soft).value;
    case GradCheckTarget::TsHard: return ts_loss(batch, labels, TsMode::Hard).value;
    case GradCheckTarget::Composite:
      return total_loss(batch, labels, LossWeights(0.85, 0.10, 0.05), TsMode::Soft).value;
    default: break;
  }
  throw Error(ErrorKind::InvalidArgument, "not a logit-space target");
}

Matrix analytic_grad(GradCheckTarget target, const Matrix& logits, const LabelVector& labels) {
  const LogitBatch batch{logits};
  switch (target) {
    case GradCheckTarget::CrossEntropy: return cross_entropy(batch, labels).grad;
    case GradCheckTarget::Focal0: return focal_loss(batch, labels, 0.0).grad;
    case GradCheckTarget::Focal1: return focal_loss(batch, labels, 1.0).grad;
    case GradCheckTarget::Focal2: return focal_loss(batch, labels, 2.0).grad;
    case GradCheckTarget::Mdca: return mdca_loss(batch, labels).grad;
    case GradCheckTarget::TsSoft: return ts_loss(batch, labels, TsMode::Soft).grad;
    case GradCheckTarget::TsHard: return ts_loss(batch, labels, TsMode::Hard).grad;
    case GradCheckTarget::Composite:
      return total_loss(batch, labels, LossWeights(0.85, 0.10, 0.05), TsMode::Soft).grad;
    default: break;
  }
  throw Error(ErrorKind::InvalidArgument, "not a logit-space target");
}

// max |a - b| scaled by the largest gradient magnitude present.
double relative_error(const std::vector<double>& analytic, const std::vector<double>& fd) {
  double num = 0.0, den = 1e-12;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    num = std::max(num, std::abs(analytic[i] - fd[i]));
    den = std::max({den, std::abs(analytic[i]), std::abs(fd[i])});
  }
  return num / den;
}

double check_logit_target(GradCheckTarget target, Rng& trial_rng) {
  LossInstance inst = random_instance(trial_rng);
  if (target == GradCheckTarget::Mdca) {
    int attempts = 0;
    while (near_mdca_kink(inst.logits, inst.labels) && ++attempts < 100)
      inst = random_instance(trial_rng);
  }

  const Matrix grad = analytic_grad(target, inst.logits, inst.labels);
  std::vector<double> fd(grad.data().size());
  for (std::size_t i = 0; i < fd.size(); ++i) {
    Matrix plus = inst.logits, minus = inst.logits;
    plus.data()[i] += kFdStep;
    minus.data()[i] -= kFdStep;
    fd[i] = (loss_value(target, plus, inst.labels) - loss_value(target, minus, inst.labels)) /
            (2.0 * kFdStep);
  }
  return relative_error(grad.data(), fd);
}

std::vector<double*> param_entries(ModelParams& params) {
  std::vector<double*> out;
  for (double& v : params.w1.data()) out.push_back(&v);
  for (double& v : params.b1) out.push_back(&v);
  for (double& v : params.w2.data()) out.push_back(&v);
  for (double& v : params.b2) out.push_back(&v);
  return out;
}

double check_param_target(Arch arch, Rng& trial_rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    const int d = trial_rng.uniform_int(2, 5);
    const int k = trial_rng.uniform_int(2, 6);
    const int n = trial_rng.uniform_int(2, 16);
    const int hidden = 4;
    Matrix x(n, d);
    for (double& v : x.data()) v = (2.0 * trial_rng.uniform() - 1.0) * 2.0;
    std::vector<int> y(n);
    for (int& v : y) v = trial_rng.uniform_int(0, k - 1);
    const LabelVector labels(std::move(y), k);
    ModelParams params = init_params(arch, static_cast<std::size_t>(d),
                                     static_cast<std::size_t>(k),
                                     static_cast<std::size_t>(hidden), trial_rng);

    if (arch == Arch::Mlp1) {
      // Redraw if a hidden pre-activation sits inside the FD stencil of the
      // ReLU kink.
      const Matrix pre = [&] {
        Matrix h(x.rows(), params.w1.cols());
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < params.w1.cols(); ++j) {
            double acc = params.b1[j];
            for (std::size_t c = 0; c < x.cols(); ++c) acc += x(i, c) * params.w1(c, j);
            h(i, j) = acc;
          }
        return h;
      }();
      bool bad = false;
      for (double v : pre.data())
        if (std::abs(v) < 1e-5) bad = true;
      if (bad) continue;
    }

    const LossWeights weights(0.85, 0.10, 0.05);
    const auto value = [&](const ModelParams& p) {
      return total_loss(forward(p, x), labels, weights, TsMode::Soft).value;
    };

    const LossValueGrad loss = total_loss(forward(params, x), labels, weights, TsMode::Soft);
    const ParamGrads grads = backward(params, x, loss.grad);

    std::vector<double> analytic;
    for (double v : grads.w1.data()) analytic.push_back(v);
    for (double v : grads.b1) analytic.push_back(v);
    for (double v : grads.w2.data()) analytic.push_back(v);
    for (double v : grads.b2) analytic.push_back(v);

    const std::vector<double*> entries = param_entries(params);
    std::vector<double> fd(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const double saved = *entries[i];
      *entries[i] = saved + kFdStep;
      const double up = value(params);
      *entries[i] = saved - kFdStep;
      const double down = value(params);
      *entries[i] = saved;
      fd[i] = (up - down) / (2.0 * kFdStep);
    }
    return relative_error(analytic, fd);
  }
  throw Error(ErrorKind::Numeric, "could not draw a kink-free parameter instance");
}

std::string target_name(GradCheckTarget target) {
  switch (target) {
    case GradCheckTarget::CrossEntropy: return "cross_entropy";
    case GradCheckTarget::Focal0: return "focal(gamma=0)";
    case GradCheckTarget::Focal1: return "focal(gamma=1)";
    case GradCheckTarget::Focal2: return "focal(gamma=2)";
    case GradCheckTarget::Mdca: return "mdca";
    case GradCheckTarget::TsSoft: return "ts(soft)";
    case GradCheckTarget::TsHard: return "ts(hard)";
    case GradCheckTarget::Composite: return "composite";
    case GradCheckTarget::LinearParams: return "params(linear)";
    case GradCheckTarget::Mlp1Params: return "params(mlp1)";
  }
  return "?";
}

}  // namespace

GradCheckResult grad_check(GradCheckTarget target, int trials, RngSeed seed) {
  if (trials < 1) throw Error(ErrorKind::InvalidArgument, "grad_check needs trials >= 1");
  GradCheckResult result;
  result.target = target;
  result.name = target_name(target);
  result.trials = trials;

  Rng root = Rng(seed).split(kGradStream).split(static_cast<std::uint64_t>(target));

  if (target == GradCheckTarget::TsHard) {
    // Piecewise constant: assert the analytic gradient really is zero.
    result.differentiable = false;
    for (int t = 0; t < trials; ++t) {
      const RngSeed inst_seed = root.split(static_cast<std::uint64_t>(t)).next_u64();
      Rng trial_rng(inst_seed);
      const LossInstance inst = random_instance(trial_rng);
      const Matrix grad = analytic_grad(target, inst.logits, inst.labels);
      for (double v : grad.data())
        if (v != 0.0) {
          result.max_rel_err = std::max(result.max_rel_err, std::abs(v));
          result.worst_seed = inst_seed;
        }
    }
    return result;
  }

  for (int t = 0; t < trials; ++t) {
    const RngSeed inst_seed = root.split(static_cast<std::uint64_t>(t)).next_u64();
    Rng trial_rng(inst_seed);
    double err = 0.0;
    if (target == GradCheckTarget::LinearParams)
      err = check_param_target(Arch::Linear, trial_rng);
    else if (target == GradCheckTarget::Mlp1Params)
      err = check_param_target(Arch::Mlp1, trial_rng);
    else
      err = check_logit_target(target, trial_rng);
    if (err > result.max_rel_err) {
      result.max_rel_err = err;
      result.worst_seed = inst_seed;
    }
  }
  return result;
}

std::vector<GradCheckResult> grad_check_all(int trials, RngSeed seed) {
  std::vector<GradCheckResult> out;
  for (const GradCheckTarget target :
       {GradCheckTarget::CrossEntropy, GradCheckTarget::Focal0, GradCheckTarget::Focal1,
        GradCheckTarget::Focal2, GradCheckTarget::Mdca, GradCheckTarget::TsSoft,
        GradCheckTarget::TsHard, GradCheckTarget::Composite, GradCheckTarget::LinearParams,
        GradCheckTarget::Mlp1Params})
    out.push_back(grad_check(target, trials, seed));
  return out;
}

}  // namespace calib
