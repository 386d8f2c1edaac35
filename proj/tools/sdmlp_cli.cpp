// Command-line front end: synth, train, evaluate, predict, gradcheck.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error. Lines of the form
// key=value on standard output are stable for scripting.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sdmlp/sdmlp.hpp"

namespace fs = std::filesystem;
using namespace sdmlp;

namespace {

struct Size2 {
  std::size_t width = 64;
  std::size_t height = 64;
};

// "WxH" with both sides >= 1.
Size2 parse_size(const std::string& text) {
  const auto x = text.find('x');
  Size2 s;
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    s.width = std::stoul(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    s.height = std::stoul(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument(text);
  } catch (const std::logic_error&) {
    throw CLI::ValidationError("--size", "expected WxH, got '" + text + "'");
  }
  if (s.width == 0 || s.height == 0) {
    throw CLI::ValidationError("--size", "width and height must be >= 1, got '" + text + "'");
  }
  return s;
}

void print_kv(const std::string& key, double v) {
  std::cout << key << '=' << format_number(v, 17) << '\n';
}

struct SplitFlags {
  std::size_t train_frames = 20;
  std::vector<std::size_t> train_indices;

  void add(CLI::App* cmd) {
    cmd->add_option("--train-frames", train_frames, "Number of leading frames used for training")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--train-indices", train_indices,
                    "Explicit training frame indices (overrides --train-frames)")
        ->delimiter(',');
  }
  void apply(TrainConfig& cfg) const {
    cfg.n_train = train_frames;
    if (!train_indices.empty()) cfg.train_indices = train_indices;
  }
};

struct TrainFlags {
  fs::path data_dir;
  fs::path out;
  fs::path losses;
  SplitFlags split;
  TrainConfig cfg;
  std::string optimizer = "adadelta";
  bool zero_bias = false;
  bool timing = false;
};

struct EvalFlags {
  fs::path data_dir;
  fs::path model;
  fs::path records = "eval_records.csv";
  fs::path hist = "eval_hist.csv";
  SplitFlags split;
  std::size_t bins = 20;
  bool conventional = false;
  std::size_t threads = 1;
};

struct PredictFlags {
  fs::path data_dir;
  fs::path model;
  std::size_t frame = 0;
  fs::path out_ply;
  fs::path gt_ply;
  fs::path depth_png;
  bool mask_by_gt = false;
};

struct SynthFlags {
  std::size_t frames = 8;
  std::string size = "64x64";
  std::uint64_t seed = 42;
  std::string generator = "linear";
  fs::path out;
  double invalid_fraction = 0.0;
  std::string format = "png";
};

struct GradcheckFlags {
  std::uint64_t seed = 42;
  std::size_t batch = 8;
  double eps = 1e-5;
  double tolerance = 1e-6;
  bool sabotage = false;
};

int run_train(const TrainFlags& f) {
  TrainConfig cfg = f.cfg;
  f.split.apply(cfg);
  cfg.optimizer = f.optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::adadelta;
  cfg.bias_init = f.zero_bias ? BiasInit::zero : BiasInit::glorot;
  TrainResult result = train(cfg, f.data_dir);
  save_checkpoint(result.net, f.out);
  write_csv_losses(result.report, f.losses, f.timing);
  const auto& r = result.report;
  for (std::size_t e = 0; e < r.epoch_mse.size(); ++e) {
    std::cerr << "epoch " << (e + 1) << " mse " << format_number(r.epoch_mse[e], 8) << " l2 "
              << format_number(r.epoch_l2[e], 8) << " (" << format_number(r.wall_ms[e], 6)
              << " ms)\n";
  }
  print_kv("final_mse", r.epoch_mse.back());
  print_kv("final_l2", r.epoch_l2.back());
  return 0;
}

int run_evaluate(const EvalFlags& f) {
  TrainConfig cfg;
  f.split.apply(cfg);
  const Network net = load_checkpoint(f.model);
  const std::size_t n_frames = count_frames(f.data_dir);
  const DatasetSplit split = make_split(n_frames, cfg);
  EvalOptions opt;
  opt.n_bins = f.bins;
  opt.conventional_rmse = f.conventional;
  opt.threads = f.threads;
  const EvalResult res = evaluate(net, split, f.data_dir, opt);
  for (std::size_t idx : res.skipped) {
    std::cerr << "frame " << idx << ": no valid ground-truth pixels, skipped\n";
  }
  write_csv_eval(res.records, res.histogram, f.records, f.hist);
  print_kv("mean_rmse", res.mean_rmse);
  print_kv("mean_rmse_mean_distance", res.mean_rmse_mean_distance);
  print_kv("mean_rmse_conventional", res.mean_rmse_conventional);
  std::cout << "frames=" << res.records.size() << '\n' << "skipped=" << res.skipped.size() << '\n';
  return 0;
}

int run_predict(const PredictFlags& f) {
  const Network net = load_checkpoint(f.model);
  const std::size_t n_frames = count_frames(f.data_dir);
  if (f.frame >= n_frames) {
    throw InvalidArgument("frame " + std::to_string(f.frame) + " out of range (dataset has " +
                          std::to_string(n_frames) + " frames)");
  }
  const StereoFrame frame = load_dataset_frame(f.data_dir, f.frame);
  FramePrediction pred = predict_frame(net, frame);
  std::optional<DepthMap> gt;
  if (f.mask_by_gt || !f.gt_ply.empty()) {
    gt = load_dataset_depth(f.data_dir, f.frame, frame.width(), frame.height());
  }
  PointCloud cloud = f.mask_by_gt ? masked_cloud(frame, pred.depth, gt->valid) : pred.cloud;
  write_ply(cloud, f.out_ply);
  if (!f.gt_ply.empty()) write_ply(masked_cloud(frame, *gt, gt->valid), f.gt_ply);
  if (!f.depth_png.empty()) write_depth_png(pred.depth, f.depth_png);
  std::cout << "points=" << cloud.points.size() << '\n';
  return 0;
}

int run_synth(const SynthFlags& f) {
  const Size2 size = parse_size(f.size);
  SynthOptions opt;
  opt.n_frames = f.frames;
  opt.width = size.width;
  opt.height = size.height;
  opt.generator = f.generator == "radial" ? SynthGenerator::radial : SynthGenerator::linear;
  opt.invalid_fraction = f.invalid_fraction;
  const auto frames = synth_dataset(SeededRng(f.seed), opt);
  write_dataset(f.out, frames, "." + f.format);

  std::cout << "generator=" << f.generator << '\n';
  for (std::size_t r = 0; r < 3; ++r) {
    std::cout << "A" << r << '=';
    for (std::size_t k = 0; k < 6; ++k) {
      std::cout << (k ? "," : "") << format_number(kSynthA[r][k], 17);
    }
    std::cout << '\n';
  }
  std::cout << "c=" << format_number(kSynthC[0], 17) << ',' << format_number(kSynthC[1], 17)
            << ',' << format_number(kSynthC[2], 17) << '\n';
  if (opt.generator == SynthGenerator::radial) print_kv("radial_z", kSynthRadial);
  std::cout << "frames=" << f.frames << '\n'
            << "size=" << size.width << 'x' << size.height << '\n'
            << "seed=" << f.seed << '\n';
  return 0;
}

int run_gradcheck(const GradcheckFlags& f) {
  const SeededRng master(f.seed);
  SeededRng init = master.derive(kInitStream);
  SeededRng data = master.derive(3);
  const std::size_t dims[] = {6, 5, 3};
  Network net = make_mlp(dims, init);
  const Vector xs = uniform_sample(data, 0.0, 1.0, 6 * f.batch);
  const Vector ys = uniform_sample(data, -1.0, 1.0, 3 * f.batch);
  const Matrix x(6, f.batch, std::vector<double>(xs.values().begin(), xs.values().end()));
  const Matrix y(3, f.batch, std::vector<double>(ys.values().begin(), ys.values().end()));
  const GradCheckResult res = gradient_check(net, x, y, f.eps, f.sabotage);
  print_kv("max_rel_err", res.max_rel_err);
  std::cout << "checked=" << res.checked << '\n';
  if (res.max_rel_err < f.tolerance) return 0;
  std::cerr << "gradient check failed: dense layer " << res.layer << ' ' << res.tensor << '['
            << res.index << "] analytic " << format_number(res.analytic, 17) << " numeric "
            << format_number(res.numeric, 17) << '\n';
  return 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stereo pixel-to-XYZ regression with a six-layer dense network"};
  app.require_subcommand(1);

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Train on a dataset directory");
  train_cmd->add_option("--data-dir", tf.data_dir, "Dataset directory")->required();
  train_cmd->add_option("--out", tf.out, "Checkpoint output path")->required();
  train_cmd->add_option("--losses", tf.losses, "Per-epoch loss CSV output path")->required();
  tf.split.add(train_cmd);
  train_cmd->add_option("--epochs", tf.cfg.epochs)->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch-size", tf.cfg.batch_size)->check(CLI::PositiveNumber);
  train_cmd->add_option("--dropout", tf.cfg.dropout_rate)->check(CLI::Range(0.0, 0.999999));
  train_cmd->add_option("--l2", tf.cfg.l2_lambda)->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--seed", tf.cfg.seed);
  train_cmd->add_option("--optimizer", tf.optimizer)
      ->check(CLI::IsMember({"adadelta", "sgd"}));
  train_cmd->add_option("--rho", tf.cfg.rho, "Adadelta decay")->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--eps", tf.cfg.eps, "Adadelta epsilon")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tf.cfg.learning_rate, "SGD learning rate")
      ->check(CLI::PositiveNumber);
  train_cmd->add_flag("--zero-bias-init", tf.zero_bias, "Initialize biases to zero");
  train_cmd->add_flag("--timing", tf.timing, "Write measured wall_ms into the loss CSV");

  EvalFlags ef;
  auto* eval_cmd = app.add_subcommand("evaluate", "Per-image error on the test frames");
  eval_cmd->add_option("--data-dir", ef.data_dir)->required();
  eval_cmd->add_option("--model", ef.model)->required();
  eval_cmd->add_option("--records", ef.records, "Per-frame CSV output path");
  eval_cmd->add_option("--hist", ef.hist, "Histogram CSV output path");
  ef.split.add(eval_cmd);
  eval_cmd->add_option("--bins", ef.bins)->check(CLI::PositiveNumber);
  eval_cmd->add_flag("--conventional-rmse", ef.conventional,
                     "Report sqrt(mean squared distance) instead of mean distance");
  eval_cmd->add_option("--threads", ef.threads)->check(CLI::PositiveNumber);

  PredictFlags pf;
  auto* predict_cmd = app.add_subcommand("predict", "Point cloud and depth preview for one frame");
  predict_cmd->add_option("--data-dir", pf.data_dir)->required();
  predict_cmd->add_option("--model", pf.model)->required();
  predict_cmd->add_option("--frame", pf.frame)->required();
  predict_cmd->add_option("--out-ply", pf.out_ply)->required();
  predict_cmd->add_option("--gt-ply", pf.gt_ply, "Also write the ground-truth cloud");
  predict_cmd->add_option("--depth-png", pf.depth_png, "Grayscale preview of predicted Z");
  predict_cmd->add_flag("--mask-by-gt", pf.mask_by_gt, "Keep only pixels with valid ground truth");

  SynthFlags sf;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset");
  synth_cmd->add_option("--frames", sf.frames)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--size", sf.size, "WxH")->check([](const std::string& s) {
    try {
      parse_size(s);
    } catch (const CLI::ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  });
  synth_cmd->add_option("--seed", sf.seed);
  synth_cmd->add_option("--generator", sf.generator)->check(CLI::IsMember({"linear", "radial"}));
  synth_cmd->add_option("--out", sf.out)->required();
  synth_cmd->add_option("--invalid-fraction", sf.invalid_fraction)->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--format", sf.format)->check(CLI::IsMember({"png", "ppm"}));

  GradcheckFlags gf;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of backprop");
  grad_cmd->add_option("--seed", gf.seed);
  grad_cmd->add_option("--batch", gf.batch)->check(CLI::PositiveNumber);
  grad_cmd->add_option("--eps", gf.eps)->check(CLI::PositiveNumber);
  grad_cmd->add_flag("--sabotage", gf.sabotage, "Perturb one analytic gradient (must fail)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train_cmd) return run_train(tf);
    if (*eval_cmd) return run_evaluate(ef);
    if (*predict_cmd) return run_predict(pf);
    if (*synth_cmd) return run_synth(sf);
    if (*grad_cmd) return run_gradcheck(gf);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
