#pragma once

#include <optional>
#include <string>
#include <vector>

#include "calib/data_io.hpp"
#include "calib/losses.hpp"
#include "calib/metrics.hpp"
#include "calib/model.hpp"
#include "calib/temperature.hpp"

namespace calib {

enum class LossSpec { Ce, Focal, CeMdca, CeMdcaTs };

std::string loss_spec_name(LossSpec spec);

struct TrainConfig {
  LossSpec loss = LossSpec::Ce;
  LossWeights weights{0.85, 0.10, 0.05};  // used by the composite specs
  double focal_gamma = 2.0;
  int epochs = 200;
  int batch_size = 128;
  double learning_rate = 0.05;
  double momentum = 0.8;
  RngSeed seed = 42;
  bool temp_scale = false;
  Arch arch = Arch::Linear;
  int hidden = 16;  // Mlp1 width
  int num_bins = 10;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_curve;        // mean per-sample training loss per epoch
  std::vector<double> confidence_curve;  // mean top-1 confidence on the training split per epoch
  std::optional<TempFitResult> temp_fit;
  CalibrationReport report_before;                 // test split, raw logits
  std::optional<CalibrationReport> report_after;   // test split, temperature-scaled
};

// Minibatch SGD with momentum on the configured loss (Soft ordinal mode
// whenever the ordinal term participates). Deterministic given the seed:
// weight init and per-epoch shuffles derive from independent child streams.
// If temp_scale is set, fits a temperature on val_data afterwards. Both
// calibration reports are evaluated on test_data. Throws ErrorKind::Numeric
// naming the epoch if the loss goes non-finite.
TrainResult train(const Dataset& train_data, const Dataset& val_data, const Dataset& test_data,
                  const TrainConfig& config);

// Which gradient path a check exercises.
enum class GradCheckTarget {
  CrossEntropy,
  Focal0,  // focal_gamma = 0
  Focal1,
  Focal2,
  Mdca,
  TsSoft,
  TsHard,
  Composite,
  LinearParams,  // loss gradient through forward() to Linear parameters
  Mlp1Params,
};

struct GradCheckResult {
  GradCheckTarget target;
  std::string name;
  int trials = 0;
  double max_rel_err = 0.0;
  bool differentiable = true;  // Hard mode is reported, not failed
  RngSeed worst_seed = 0;      // instance seed of the worst trial
};

// Compares analytic gradients against central finite differences
// (step 1e-6) on random instances with K in {2..6}, N in {1..32}.
// MDCA instances whose class terms sit within 1e-7 of a sign change are
// redrawn, matching the subgradient convention.
GradCheckResult grad_check(GradCheckTarget target, int trials, RngSeed seed);
std::vector<GradCheckResult> grad_check_all(int trials, RngSeed seed);

}  // namespace calib
