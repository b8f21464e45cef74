// uqnet: uncertainty estimation for trained networks from the command line.
//
// stdout carries the JSON/CSV payload only; diagnostics go to stderr.
// Exit codes: 0 ok, 1 I/O, 2 format or usage, 3 shape, 4 numeric.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "uq/adf.hpp"
#include "uq/calibrate.hpp"
#include "uq/dataset.hpp"
#include "uq/error.hpp"
#include "uq/metrics.hpp"
#include "uq/model.hpp"
#include "uq/oracle.hpp"
#include "uq/predict.hpp"
#include "uq/synthetic.hpp"
#include "uq/tensor_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace uq;

namespace {

enum ExitCode { kOk = 0, kIo = 1, kFormat = 2, kShape = 3, kNumeric = 4 };

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return kIo;
    case ErrorKind::parse:
    case ErrorKind::version:
    case ErrorKind::weights:
    case ErrorKind::argument: return kFormat;
    case ErrorKind::shape:
    case ErrorKind::mask: return kShape;
    case ErrorKind::numeric: return kNumeric;
  }
  return kFormat;
}

std::uint64_t parse_u64(const std::string& text, const char* what) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (text.empty() || text.front() == '-') throw std::invalid_argument(text);
    v = std::stoull(text, &used, 0);
  } catch (const std::exception&) {
    throw Error(ErrorKind::argument, std::string("invalid ") + what + ": '" + text + "'");
  }
  if (used != text.size()) throw Error(ErrorKind::argument, std::string("invalid ") + what + ": '" + text + "'");
  return v;
}

std::optional<double> parse_double(const std::string& text) {
  std::size_t used = 0;
  try {
    double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto v = parse_double(item);
    if (!v) throw Error(ErrorKind::argument, std::string("invalid ") + what + ": '" + text + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw Error(ErrorKind::argument, std::string("empty ") + what);
  return out;
}

// Options shared by most subcommands.
struct Common {
  std::string model;
  std::string noise = "0";
  double rate = 0.0;
  std::size_t samples = kDefaultSamples;
  std::optional<std::string> seed;
  std::size_t workers = 1;

  std::uint64_t resolved_seed() const {
    if (seed) return parse_u64(*seed, "--seed");
    if (const char* env = std::getenv("MF_SEED"); env && *env) return parse_u64(env, "MF_SEED");
    return 0;
  }

  // Scalar noise broadcasts over the input; anything else names an NTSR file.
  Tensor noise_for(const Shape& input_shape) const {
    if (auto v = parse_double(noise)) {
      if (!(*v >= 0.0)) throw Error(ErrorKind::argument, "--noise must be >= 0");
      return Tensor(input_shape, *v);
    }
    Tensor t = read_tensor_file(noise);
    if (t.shape() != input_shape)
      throw Error(ErrorKind::shape, "noise tensor shape " + shape_string(t.shape()) + " does not match input " +
                                        shape_string(input_shape));
    return t;
  }
};

void add_model(CLI::App* cmd, Common& c) {
  cmd->add_option("model", c.model, "Model manifest (.json, weights in the sibling .bin)")->required();
}

void add_noise_rate_seed(CLI::App* cmd, Common& c) {
  cmd->add_option("--noise", c.noise, "Input noise variance: a scalar or an NTSR tensor file");
  cmd->add_option("--rate", c.rate, "Dropout rate");
  cmd->add_option("--seed", c.seed, "Seed (falls back to MF_SEED, then 0)");
  cmd->add_option("--workers", c.workers, "Worker threads");
}

void add_sampling(CLI::App* cmd, Common& c) {
  add_noise_rate_seed(cmd, c);
  cmd->add_option("--samples,-T", c.samples, "Monte-Carlo samples T");
}

json tensor_json(const Tensor& t) { return json(t.values()); }

void check_samples(std::size_t samples) {
  if (samples < 2) throw Error(ErrorKind::argument, "T ≥ 2 required");
}

int cmd_infer(const Common& c, const std::string& input) {
  check_samples(c.samples);
  const NetworkGraph g = load_model_files(c.model);
  const Tensor x = read_tensor_file(input);
  const auto est =
      estimate_uncertainty(g, x, c.noise_for(x.shape()), DropoutConfig(c.rate), c.samples, c.resolved_seed(), c.workers);
  json out;
  out["shape"] = est.mean.shape();
  out["mean"] = tensor_json(est.mean);
  out["sigma_tot"] = tensor_json(est.sigma_tot);
  out["data_part"] = tensor_json(est.data_part);
  out["model_part"] = tensor_json(est.model_part);
  out["rate"] = c.rate;
  out["samples"] = est.samples;
  out["seed"] = est.seed;
  std::cout << out.dump(2) << '\n';
  return kOk;
}

std::vector<double> parse_grid(const std::string& text) {
  const auto parts = parse_double_list(text, "--grid");
  if (parts.size() != 3) throw Error(ErrorKind::argument, "--grid expects n,lo,hi");
  if (parts[0] < 2 || parts[0] != static_cast<double>(static_cast<std::size_t>(parts[0])))
    throw Error(ErrorKind::argument, "--grid n must be an integer >= 2");
  return dropout_grid(static_cast<std::size_t>(parts[0]), parts[1], parts[2]);
}

int cmd_calibrate(const Common& c, const std::string& dir, const std::string& grid_text, bool categorical) {
  check_samples(c.samples);
  const auto grid = parse_grid(grid_text);
  const NetworkGraph g = load_model_files(c.model);
  const Dataset data = load_dataset_dir(dir);
  const auto objective = categorical ? CalibrationObjective::categorical : CalibrationObjective::gaussian;
  const auto result =
      calibrate_phi(g, data, c.noise_for(g.input_shape()), c.samples, grid, c.resolved_seed(), objective, c.workers);
  std::cout << result.to_json() << '\n';
  return kOk;
}

MetricReport evaluate_regression(const NetworkGraph& g, const Dataset& data, const Common& c) {
  const Tensor v0 = c.noise_for(g.input_shape());
  const DropoutConfig cfg(c.rate);
  const std::uint64_t seed = c.resolved_seed();
  std::vector<double> gt, pred;
  double nll = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto est = estimate_uncertainty(g, data[i].x, v0, cfg, c.samples, sample_seed(seed, i), c.workers);
    if (est.mean.size() != data[i].y.size())
      throw Error(ErrorKind::shape, "label " + data[i].id + " has " + std::to_string(data[i].y.size()) +
                                        " components, model outputs " + std::to_string(est.mean.size()));
    nll += sample_nll(est, data[i].y);
    gt.insert(gt.end(), data[i].y.values().begin(), data[i].y.values().end());
    pred.insert(pred.end(), est.mean.values().begin(), est.mean.values().end());
  }
  MetricReport r;
  r.count = data.size();
  r.values["rmse"] = rmse(gt, pred);
  r.values["eva"] = eva(gt, pred);
  r.values["nll"] = nll / static_cast<double>(data.size());
  return r;
}

MetricReport evaluate_flow(const NetworkGraph& g, const Dataset& data, const Common& c) {
  const Tensor v0 = c.noise_for(g.input_shape());
  const DropoutConfig cfg(c.rate);
  const std::uint64_t seed = c.resolved_seed();
  std::vector<Vec2> gt_vectors, pred_vectors;
  double epe_sum = 0.0, nll = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& y = data[i].y;
    if (y.shape().size() != 3 || y.shape()[2] != 2)
      throw Error(ErrorKind::shape, "flow label " + data[i].id + " must be H x W x 2, got " + shape_string(y.shape()));
    const auto est = estimate_uncertainty(g, data[i].x, v0, cfg, c.samples, sample_seed(seed, i), c.workers);
    if (est.mean.size() != y.size())
      throw Error(ErrorKind::shape, "model output does not match flow label " + data[i].id);
    const Tensor pred = est.mean.reshaped(y.shape());
    epe_sum += epe(y, pred);
    nll += sample_nll(est, y.reshaped(est.mean.shape()));
    for (std::size_t k = 0; k < y.size(); k += 2) {
      gt_vectors.push_back({y[k], y[k + 1]});
      pred_vectors.push_back({pred[k], pred[k + 1]});
    }
  }
  MetricReport r;
  r.count = data.size();
  r.values["epe"] = epe_sum / static_cast<double>(data.size());
  r.values["kl"] = kl_fitted_gaussians(pred_vectors, gt_vectors);
  r.values["nll"] = nll / static_cast<double>(data.size());
  return r;
}

MetricReport evaluate_classification(const NetworkGraph& g, const Dataset& data, const Common& c,
                                     std::size_t draws) {
  const Tensor v0 = c.noise_for(g.input_shape());
  const DropoutConfig cfg(c.rate);
  const std::uint64_t seed = c.resolved_seed();
  std::vector<Tensor> logits;
  std::vector<std::size_t> labels;
  double nll = 0.0;
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& y = data[i].y;
    if (y.size() != 1) throw Error(ErrorKind::shape, "class label " + data[i].id + " must hold one class index");
    const double label = y[0];
    const auto est = estimate_uncertainty(g, data[i].x, v0, cfg, c.samples, sample_seed(seed, i), c.workers);
    if (!(label >= 0.0) || label != static_cast<double>(static_cast<std::size_t>(label)) ||
        static_cast<std::size_t>(label) >= est.mean.size())
      throw Error(ErrorKind::shape, "class label " + data[i].id + " out of range");
    const auto cat = categorical_nll(est, static_cast<std::size_t>(label), draws, sample_seed(seed, i));
    nll += cat.nll;
    clamped += cat.clamped;
    logits.push_back(est.mean);
    labels.push_back(static_cast<std::size_t>(label));
  }
  if (clamped > 0) std::cerr << "warning: " << clamped << " class probabilities clamped to 1e-12\n";
  MetricReport r;
  r.count = data.size();
  r.values["accuracy"] = accuracy(logits, labels);
  r.values["nll"] = nll / static_cast<double>(data.size());
  return r;
}

int cmd_evaluate(const Common& c, const std::string& dir, const std::string& task, std::size_t draws) {
  if (task != "regression" && task != "flow" && task != "classification")
    throw Error(ErrorKind::argument, "unknown task '" + task + "' (expected regression, flow or classification)");
  check_samples(c.samples);
  const NetworkGraph g = load_model_files(c.model);
  const Dataset data = load_dataset_dir(dir);
  MetricReport r;
  if (task == "regression")
    r = evaluate_regression(g, data, c);
  else if (task == "flow")
    r = evaluate_flow(g, data, c);
  else
    r = evaluate_classification(g, data, c, draws);
  std::cout << r.to_json() << '\n';
  return kOk;
}

int cmd_bench(const Common& c, const std::string& dir, const std::string& samples_text, std::size_t repeat) {
  if (repeat == 0) throw Error(ErrorKind::argument, "--repeat must be >= 1");
  std::vector<std::size_t> ts;
  for (double t : parse_double_list(samples_text, "--samples")) {
    if (t < 1 || t != static_cast<double>(static_cast<std::size_t>(t)))
      throw Error(ErrorKind::argument, "--samples entries must be positive integers");
    ts.push_back(static_cast<std::size_t>(t));
  }
  const NetworkGraph g = load_model_files(c.model);
  const Dataset data = load_dataset_dir(dir);
  const Tensor v0 = c.noise_for(g.input_shape());
  const DropoutConfig cfg(c.rate);
  const std::uint64_t seed = c.resolved_seed();
  std::cout << "T,wall_time,nll\n";
  for (std::size_t t : ts) {
    double nll = std::numeric_limits<double>::quiet_NaN();
    double seconds = 0.0;
    for (std::size_t r = 0; r < repeat; ++r) {
      const auto start = std::chrono::steady_clock::now();
      if (t >= 2) {
        nll = dataset_nll(g, data, v0, cfg, t, seed, CalibrationObjective::gaussian, c.workers);
      } else {
        // A single pass has no model part; score the lone ADF output.
        double sum = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
          const auto mask = regenerate_mask(g, cfg, sample_seed(seed, i), 0);
          const auto out = adf_forward(g, data[i].x, v0, mask, cfg);
          sum += nll_gaussian(data[i].y.values(), out.mean.values(), out.var.values()) *
                 static_cast<double>(out.mean.size());
        }
        nll = sum / static_cast<double>(data.size());
      }
      seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    char line[128];
    std::snprintf(line, sizeof line, "%zu,%.6f,%.17g\n", t, seconds / static_cast<double>(repeat), nll);
    std::cout << line;
  }
  return kOk;
}

int cmd_oracle(const Common& c, const std::string& input, std::size_t draws, const std::string& tolerances) {
  const auto tol = parse_double_list(tolerances, "--tolerances");
  if (tol.size() != 2 || !(tol[0] >= 0.0) || !(tol[1] >= 0.0))
    throw Error(ErrorKind::argument, "--tolerances expects two non-negative numbers m,v");
  const NetworkGraph g = load_model_files(c.model);
  const Tensor x = read_tensor_file(input);
  const Tensor v0 = c.noise_for(x.shape());
  const DropoutConfig cfg(c.rate);
  const std::uint64_t seed = c.resolved_seed();
  const auto oracle = mc_total_oracle(g, x, v0, cfg, draws, seed, c.workers);
  ComparisonReport report;
  if (c.rate == 0.0) {
    report = compare(adf_forward(g, x, v0), oracle, tol[0], tol[1]);
  } else {
    check_samples(c.samples);
    report = compare(estimate_uncertainty(g, x, v0, cfg, c.samples, seed, c.workers), oracle, tol[0], tol[1]);
  }
  std::cout << report.to_json() << '\n';
  return kOk;
}

int cmd_synth(const std::string& out_dir, const std::string& task, std::uint64_t seed, double noise) {
  RegressionTaskConfig cfg;
  cfg.seed = seed;
  cfg.noise_var = noise;
  if (task == "regression") {
    cfg.labels = TaskLabels::regression;
  } else if (task == "classification") {
    cfg.labels = TaskLabels::classification;
    cfg.widths = {4, 16, 16, 3};
  } else if (task == "flow") {
    cfg.labels = TaskLabels::flow;
    cfg.widths = {4, 16, 16, 8};
  } else {
    throw Error(ErrorKind::argument, "unknown task '" + task + "' (expected regression, flow or classification)");
  }
  const auto t = make_regression_task(cfg);
  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + root.string() + ": " + ec.message());
  save_model_files(t.model, root / "model.json");
  save_dataset_dir(root / "calibration", t.calibration);
  save_dataset_dir(root / "test", t.test);
  write_tensor_file(root / "input.ntsr", t.test.front().x);
  json out{{"model", (root / "model.json").string()},
           {"calibration", (root / "calibration").string()},
           {"test", (root / "test").string()},
           {"input", (root / "input.ntsr").string()},
           {"noise", noise},
           {"seed", seed}};
  std::cout << out.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty estimation for trained networks (ADF + Monte-Carlo dropout)"};
  app.require_subcommand(1);

  Common c;
  std::string input, dir, grid = "20,0.001,0.5", task = "regression", bench_samples = "1,2,5,10,20,50";
  std::string tolerances = "0.005,0.02", out_dir;
  std::size_t draws = 0, repeat = 1, synth_seed = 1;
  bool categorical = false;
  double synth_noise = 0.01;

  auto* infer = app.add_subcommand("infer", "Predict mean and total variance for one input");
  add_model(infer, c);
  infer->add_option("input", input, "Input tensor (NTSR)")->required();
  add_sampling(infer, c);

  auto* calibrate = app.add_subcommand("calibrate", "Grid-search the dropout rate on held-out data");
  add_model(calibrate, c);
  calibrate->add_option("dataset", dir, "Dataset directory")->required();
  add_sampling(calibrate, c);
  calibrate->add_option("--grid", grid, "Log-spaced grid n,lo,hi");
  calibrate->add_flag("--categorical", categorical, "Score class labels with the categorical NLL");

  auto* evaluate = app.add_subcommand("evaluate", "Task metrics on a labelled dataset");
  add_model(evaluate, c);
  evaluate->add_option("dataset", dir, "Dataset directory")->required();
  add_sampling(evaluate, c);
  evaluate->add_option("--task", task, "regression, flow or classification");
  evaluate->add_option("--draws", draws, "Softmax draws for classification")->default_val(kDefaultSoftmaxDraws);

  auto* bench = app.add_subcommand("bench", "NLL and wall time against the number of samples");
  add_model(bench, c);
  bench->add_option("dataset", dir, "Held-out dataset directory")->required();
  add_noise_rate_seed(bench, c);
  bench->add_option("--samples,-T", bench_samples, "Comma-separated sample counts");
  bench->add_option("--repeat", repeat, "Timing repeats per T");

  auto* oracle = app.add_subcommand("oracle", "Compare the estimate with a brute-force Monte-Carlo oracle");
  add_model(oracle, c);
  oracle->add_option("input", input, "Input tensor (NTSR)")->required();
  add_sampling(oracle, c);
  oracle->add_option("--draws,-N", draws, "Oracle draws")->default_val(100000);
  oracle->add_option("--tolerances", tolerances, "Relative tolerances m,v");

  auto* synth = app.add_subcommand("synth", "Write a synthetic teacher/student task to a directory");
  synth->add_option("out", out_dir, "Output directory")->required();
  synth->add_option("--task", task, "regression, flow or classification");
  synth->add_option("--seed", synth_seed, "Task seed");
  synth->add_option("--noise", synth_noise, "Injected input noise variance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kFormat;
  }

  try {
    if (*infer) return cmd_infer(c, input);
    if (*calibrate) return cmd_calibrate(c, dir, grid, categorical);
    if (*evaluate) return cmd_evaluate(c, dir, task, draws);
    if (*bench) return cmd_bench(c, dir, bench_samples, repeat);
    if (*oracle) return cmd_oracle(c, input, draws, tolerances);
    if (*synth) return cmd_synth(out_dir, task, synth_seed, synth_noise);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
  return kFormat;
}
