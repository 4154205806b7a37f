// Command-line surface for the calibration toolkit: evaluate external
// logits, fit temperatures, export reliability-diagram data, run the
// synthetic ablation demo and the gradient checks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "calib/data_io.hpp"
#include "calib/metrics.hpp"
#include "calib/numerics.hpp"
#include "calib/report.hpp"
#include "calib/temperature.hpp"
#include "calib/trainer.hpp"
#include "calib/version.hpp"

namespace {

using calib::OrderedJson;

constexpr int kExitUsage = 2;
constexpr int kExitParse = 3;
constexpr int kExitDimension = 4;
constexpr int kExitRange = 5;
constexpr int kExitInvalid = 6;
constexpr int kExitNumeric = 7;
constexpr double kGradTol = 1e-5;

constexpr const char* kExitCodeHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  2  bad usage / unknown flags\n"
    "  3  file not readable or malformed content\n"
    "  4  shape mismatch (rows, columns, counts)\n"
    "  5  out-of-range value (labels, confidences)\n"
    "  6  invalid parameter (weights, temperature, config)\n"
    "  7  numerical failure (divergence, failed gradient check)\n"
    "\n"
    "If CALIB_OUT_DIR is set, relative --out paths are resolved against it.";

int exit_code_for(calib::ErrorKind kind) {
  switch (kind) {
    case calib::ErrorKind::Parse: return kExitParse;
    case calib::ErrorKind::Dimension: return kExitDimension;
    case calib::ErrorKind::Range: return kExitRange;
    case calib::ErrorKind::InvalidArgument: return kExitInvalid;
    case calib::ErrorKind::Numeric: return kExitNumeric;
  }
  return 1;
}

std::filesystem::path resolve_out(const std::string& out) {
  std::filesystem::path p(out);
  if (p.is_relative())
    if (const char* dir = std::getenv("CALIB_OUT_DIR")) p = std::filesystem::path(dir) / p;
  return p;
}

OrderedJson make_doc(const std::string& command) {
  OrderedJson doc;
  doc["tool"] = calib::kToolName;
  doc["version"] = calib::kToolVersion;
  doc["command"] = command;
  return doc;
}

void emit(const OrderedJson& doc, const std::string& out) {
  const std::string text = doc.dump(2) + "\n";
  std::cout << text;
  if (!out.empty()) {
    const auto path = resolve_out(out);
    std::ofstream file(path);
    if (!file) throw calib::Error(calib::ErrorKind::Parse, "cannot write " + path.string());
    file << text;
  }
}

void print_summary(const char* tag, const calib::CalibrationReport& report) {
  std::fprintf(stderr, "%s accuracy %.2f%%  ece %.2f%%  mce %.2f%%  nll %.4f  (n=%zu, k=%zu, %d bins)\n",
               tag, report.accuracy * 100.0, report.ece * 100.0, report.mce * 100.0, report.nll,
               report.n, report.k, report.num_bins);
}

// ---- eval ------------------------------------------------------------

struct EvalArgs {
  std::string logits, labels, out;
  int bins = 10;
  double temperature = 1.0;
  bool has_temperature = false;
};

int run_eval(const EvalArgs& args) {
  auto [logits, labels] = calib::load_logits_labels(args.logits, args.labels);
  if (args.has_temperature)
    logits = calib::apply_temperature(logits, calib::Temperature(args.temperature));
  const calib::CalibrationReport report =
      calib::full_report(calib::softmax(logits), labels, {args.bins});

  OrderedJson doc = make_doc("eval");
  OrderedJson config;
  config["logits"] = args.logits;
  config["labels"] = args.labels;
  config["bins"] = args.bins;
  config["temperature"] = args.has_temperature ? OrderedJson(args.temperature) : OrderedJson();
  doc["config"] = std::move(config);
  doc.update(calib::report_to_json(report));
  emit(doc, args.out);
  print_summary("eval:", report);
  return 0;
}

// ---- fit-temp --------------------------------------------------------

struct FitTempArgs {
  std::string logits, labels, out;
  int bins = 10;
};

int run_fit_temp(const FitTempArgs& args) {
  const auto [logits, labels] = calib::load_logits_labels(args.logits, args.labels);
  const calib::TempFitResult fit = calib::fit_temperature(logits, labels);

  const calib::BinningConfig bins{args.bins};
  const double ece_before = calib::ece(calib::softmax(logits), labels, bins);
  const double ece_after = calib::ece(
      calib::softmax(calib::apply_temperature(logits, fit.temperature)), labels, bins);

  OrderedJson doc = make_doc("fit-temp");
  OrderedJson config;
  config["logits"] = args.logits;
  config["labels"] = args.labels;
  config["bins"] = args.bins;
  doc["config"] = std::move(config);
  doc["temperature"] = fit.temperature.value();
  doc["converged"] = fit.converged;
  doc["iterations"] = fit.iterations;
  doc["nll_before"] = fit.nll_before;
  doc["nll_after"] = fit.nll_after;
  doc["ece_before"] = ece_before;
  doc["ece_after"] = ece_after;
  emit(doc, args.out);

  if (!fit.converged)
    std::fprintf(stderr, "fit-temp: search did not converge; reporting t = %g\n",
                 fit.temperature.value());
  if (fit.temperature.value() < 1.0)
    std::fprintf(stderr, "fit-temp: fitted t < 1 (model was underconfident)\n");
  std::fprintf(stderr, "fit-temp: t %.4f  nll %.6f -> %.6f  ece %.2f%% -> %.2f%%\n",
               fit.temperature.value(), fit.nll_before, fit.nll_after, ece_before * 100.0,
               ece_after * 100.0);
  return 0;
}

// ---- reliability -----------------------------------------------------

struct ReliabilityArgs {
  std::string logits, labels, out;
  int bins = 10;
};

int run_reliability(const ReliabilityArgs& args) {
  const auto [logits, labels] = calib::load_logits_labels(args.logits, args.labels);
  const auto rows = calib::reliability_bins(calib::softmax(logits), labels, {args.bins});

  const auto path = resolve_out(args.out);
  std::ofstream file(path);
  if (!file) throw calib::Error(calib::ErrorKind::Parse, "cannot write " + path.string());
  calib::write_reliability_csv(file, rows);
  calib::write_reliability_csv(std::cout, rows);
  return 0;
}

// ---- train-demo ------------------------------------------------------

struct TrainDemoArgs {
  std::string loss = "ce";
  double alpha = -1.0, beta = -1.0, gamma = -1.0;  // all three or none
  double focal_gamma = 2.0;
  bool temp_scale = false;
  std::string arch = "linear";
  std::string out;
  int bins = 10;
  calib::TrainConfig train;
  calib::SyntheticConfig synth;
  double val_fraction = 0.15;
};

OrderedJson curve_json(const std::vector<double>& curve) {
  OrderedJson arr = OrderedJson::array();
  for (double v : curve) arr.push_back(v);
  return arr;
}

int run_train_demo(TrainDemoArgs& args) {
  calib::TrainConfig config = args.train;
  config.seed = args.synth.seed;
  config.focal_gamma = args.focal_gamma;
  config.temp_scale = args.temp_scale;
  config.num_bins = args.bins;
  config.arch = args.arch == "mlp1" ? calib::Arch::Mlp1 : calib::Arch::Linear;

  if (args.loss == "ce") {
    config.loss = calib::LossSpec::Ce;
  } else if (args.loss == "focal") {
    config.loss = calib::LossSpec::Focal;
  } else if (args.loss == "ce+mdca") {
    config.loss = calib::LossSpec::CeMdca;
    config.weights = calib::LossWeights(0.9, 0.1, 0.0);
  } else if (args.loss == "ce+mdca+ts") {
    config.loss = calib::LossSpec::CeMdcaTs;
    config.weights = calib::LossWeights(0.85, 0.10, 0.05);
  } else {
    throw calib::Error(calib::ErrorKind::InvalidArgument, "unknown loss '" + args.loss + "'");
  }

  const bool has_weights = args.alpha >= 0.0 || args.beta >= 0.0 || args.gamma >= 0.0;
  if (has_weights) {
    if (args.alpha < 0.0 || args.beta < 0.0 || args.gamma < 0.0)
      throw calib::Error(calib::ErrorKind::InvalidArgument,
                         "--alpha, --beta and --gamma must be given together");
    config.weights = calib::LossWeights(args.alpha, args.beta, args.gamma);
    if (config.loss == calib::LossSpec::CeMdca && config.weights.gamma() != 0.0)
      throw calib::Error(calib::ErrorKind::InvalidArgument,
                         "--loss ce+mdca requires --gamma 0");
  }

  const auto [full_train, test] = calib::generate_synthetic(args.synth);

  // Hold out the tail of the (already shuffled) training split for
  // temperature fitting; all loss configurations train on the same head so
  // the ablation rows stay comparable.
  const std::size_t n = full_train.features.rows();
  const auto n_val = static_cast<std::size_t>(std::llround(args.val_fraction * double(n)));
  if (n_val == 0 || n_val >= n)
    throw calib::Error(calib::ErrorKind::InvalidArgument, "val fraction leaves an empty split");
  const std::size_t n_head = n - n_val;

  const auto slice = [&](std::size_t start, std::size_t len) {
    calib::Matrix features(len, full_train.features.cols());
    std::vector<int> labels(len);
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t c = 0; c < full_train.features.cols(); ++c)
        features(i, c) = full_train.features(start + i, c);
      labels[i] = full_train.labels[start + i];
    }
    return calib::Dataset{std::move(features),
                          calib::LabelVector(std::move(labels), full_train.labels.num_classes())};
  };
  const calib::Dataset head = slice(0, n_head);
  const calib::Dataset val = slice(n_head, n_val);

  const calib::TrainResult result = calib::train(head, val, test, config);

  OrderedJson doc = make_doc("train-demo");
  OrderedJson config_json;
  config_json["loss"] = args.loss;
  config_json["alpha"] = config.weights.alpha();
  config_json["beta"] = config.weights.beta();
  config_json["gamma"] = config.weights.gamma();
  config_json["focal_gamma"] = config.focal_gamma;
  config_json["arch"] = args.arch;
  config_json["hidden"] = config.hidden;
  config_json["epochs"] = config.epochs;
  config_json["batch_size"] = config.batch_size;
  config_json["learning_rate"] = config.learning_rate;
  config_json["momentum"] = config.momentum;
  config_json["temp_scale"] = config.temp_scale;
  config_json["seed"] = config.seed;
  config_json["bins"] = args.bins;
  config_json["classes"] = args.synth.k;
  config_json["dim"] = args.synth.d;
  config_json["n_train"] = args.synth.n_train;
  config_json["n_test"] = args.synth.n_test;
  config_json["separation"] = args.synth.separation;
  config_json["val_fraction"] = args.val_fraction;
  config_json["n_fit"] = n_head;
  config_json["n_val"] = n_val;
  doc["config"] = std::move(config_json);

  doc["loss_curve"] = curve_json(result.loss_curve);
  doc["confidence_curve"] = curve_json(result.confidence_curve);
  if (result.temp_fit) {
    OrderedJson fit;
    fit["temperature"] = result.temp_fit->temperature.value();
    fit["converged"] = result.temp_fit->converged;
    fit["iterations"] = result.temp_fit->iterations;
    fit["nll_before"] = result.temp_fit->nll_before;
    fit["nll_after"] = result.temp_fit->nll_after;
    doc["temperature_fit"] = std::move(fit);
  } else {
    doc["temperature_fit"] = OrderedJson();
  }
  doc["report_before"] = calib::report_to_json(result.report_before);
  doc["report_after"] =
      result.report_after ? calib::report_to_json(*result.report_after) : OrderedJson();
  emit(doc, args.out);

  print_summary("train-demo: before temp:", result.report_before);
  if (result.report_after) print_summary("train-demo: after temp: ", *result.report_after);
  return 0;
}

// ---- gradcheck -------------------------------------------------------

struct GradCheckArgs {
  int trials = 100;
  calib::RngSeed seed = 42;
};

int run_gradcheck(const GradCheckArgs& args) {
  const auto results = calib::grad_check_all(args.trials, args.seed);
  std::printf("%-18s %7s %14s  %s\n", "loss", "trials", "max_rel_err", "status");
  bool all_pass = true;
  for (const auto& r : results) {
    const char* status = "pass";
    if (!r.differentiable) {
      status = r.max_rel_err == 0.0 ? "non-differentiable" : "FAIL";
    } else if (r.max_rel_err >= kGradTol) {
      status = "FAIL";
    }
    if (std::string(status) == "FAIL") {
      all_pass = false;
      std::fprintf(stderr, "gradcheck: %s exceeded %g (err %.3e, instance seed %llu)\n",
                   r.name.c_str(), kGradTol, r.max_rel_err,
                   static_cast<unsigned long long>(r.worst_seed));
    }
    std::printf("%-18s %7d %14.3e  %s\n", r.name.c_str(), r.trials, r.max_rel_err, status);
  }
  return all_pass ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(calib::kToolName) + " " + calib::kToolVersion +
               " - train-time and post-hoc calibration toolkit"};
  app.require_subcommand(1);
  app.footer(kExitCodeHelp);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate calibration of a logits/labels file pair");
  eval->add_option("--logits", eval_args.logits, "logits CSV (header l0,...)")->required();
  eval->add_option("--labels", eval_args.labels, "labels CSV (header label)")->required();
  eval->add_option("--bins", eval_args.bins, "number of confidence bins")->default_val(10);
  auto* temp_opt = eval->add_option("--temperature", eval_args.temperature,
                                    "divide logits by this before the softmax");
  eval->add_option("--out", eval_args.out, "also write the JSON report here");

  FitTempArgs fit_args;
  auto* fit = app.add_subcommand("fit-temp", "Fit a temperature by NLL minimization");
  fit->add_option("--logits", fit_args.logits, "validation logits CSV")->required();
  fit->add_option("--labels", fit_args.labels, "validation labels CSV")->required();
  fit->add_option("--bins", fit_args.bins, "bins for the ECE echo")->default_val(10);
  fit->add_option("--out", fit_args.out, "also write the JSON report here");

  ReliabilityArgs rel_args;
  auto* rel = app.add_subcommand("reliability", "Export reliability-diagram bin data as CSV");
  rel->add_option("--logits", rel_args.logits, "logits CSV")->required();
  rel->add_option("--labels", rel_args.labels, "labels CSV")->required();
  rel->add_option("--bins", rel_args.bins, "number of confidence bins")->default_val(10);
  rel->add_option("--out", rel_args.out, "output CSV path")->required();

  TrainDemoArgs demo_args;
  auto* demo = app.add_subcommand(
      "train-demo", "Train on synthetic ordinal data and report calibration before/after");
  demo->add_option("--loss", demo_args.loss, "ce | focal | ce+mdca | ce+mdca+ts")
      ->default_val("ce");
  demo->add_option("--alpha", demo_args.alpha, "cross-entropy weight");
  demo->add_option("--beta", demo_args.beta, "mdca weight");
  demo->add_option("--gamma", demo_args.gamma, "ordinal-loss weight");
  demo->add_option("--focal-gamma", demo_args.focal_gamma, "focal exponent")->default_val(2.0);
  demo->add_flag("--temp-scale", demo_args.temp_scale, "fit a temperature on the val split");
  demo->add_option("--arch", demo_args.arch, "linear | mlp1")
      ->check(CLI::IsMember({"linear", "mlp1"}))
      ->default_val("linear");
  demo->add_option("--hidden", demo_args.train.hidden, "mlp1 hidden width")->default_val(16);
  demo->add_option("--epochs", demo_args.train.epochs)->default_val(200);
  demo->add_option("--batch-size", demo_args.train.batch_size)->default_val(128);
  demo->add_option("--learning-rate", demo_args.train.learning_rate)->default_val(0.05);
  demo->add_option("--momentum", demo_args.train.momentum)->default_val(0.8);
  demo->add_option("--seed", demo_args.synth.seed, "seed for data, init and shuffling")
      ->default_val(42);
  demo->add_option("--bins", demo_args.bins)->default_val(10);
  demo->add_option("--classes", demo_args.synth.k)->default_val(4);
  demo->add_option("--dim", demo_args.synth.d)->default_val(8);
  demo->add_option("--n-train", demo_args.synth.n_train)->default_val(613);
  demo->add_option("--n-test", demo_args.synth.n_test)->default_val(315);
  demo->add_option("--separation", demo_args.synth.separation)->default_val(1.5);
  demo->add_option("--val-fraction", demo_args.val_fraction,
                   "tail fraction of the train split held out for temperature fitting")
      ->default_val(0.15);
  demo->add_option("--out", demo_args.out, "also write the JSON report here");

  GradCheckArgs grad_args;
  auto* grad = app.add_subcommand("gradcheck",
                                  "Check analytic gradients against finite differences");
  grad->add_option("--trials", grad_args.trials)->default_val(100);
  grad->add_option("--seed", grad_args.seed)->default_val(42);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (app.got_subcommand(eval)) {
      eval_args.has_temperature = temp_opt->count() > 0;
      return run_eval(eval_args);
    }
    if (app.got_subcommand(fit)) return run_fit_temp(fit_args);
    if (app.got_subcommand(rel)) return run_reliability(rel_args);
    if (app.got_subcommand(demo)) return run_train_demo(demo_args);
    if (app.got_subcommand(grad)) return run_gradcheck(grad_args);
  } catch (const calib::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
