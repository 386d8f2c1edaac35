// Library walkthrough without the CLI: make a small synthetic dataset, train
// the six-layer network on its first frames, evaluate the rest and export a
// point cloud of one test frame.
//
//   synthetic_roundtrip <out_dir> [epochs]

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "sdmlp/sdmlp.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: synthetic_roundtrip <out_dir> [epochs]\n";
    return 2;
  }
  const std::filesystem::path out = argv[1];
  const std::filesystem::path data = out / "data";
  std::filesystem::create_directories(data);

  sdmlp::SynthOptions synth;
  synth.n_frames = 6;
  synth.width = 48;
  synth.height = 32;
  synth.invalid_fraction = 0.05;
  sdmlp::write_dataset(data, sdmlp::synth_dataset(sdmlp::SeededRng(7), synth));

  sdmlp::TrainConfig cfg;
  cfg.n_train = 4;
  cfg.epochs = argc > 2 ? std::stoul(argv[2]) : 5;
  cfg.dropout_rate = 0.0;
  cfg.l2_lambda = 0.0;
  auto result = sdmlp::train(cfg, data);
  for (std::size_t e = 0; e < result.report.epoch_mse.size(); ++e) {
    std::cout << "epoch " << e + 1 << " mse " << result.report.epoch_mse[e] << '\n';
  }
  sdmlp::save_checkpoint(result.net, out / "model.bin");

  const auto split = sdmlp::make_split(synth.n_frames, cfg);
  const auto eval = sdmlp::evaluate(result.net, split, data);
  for (const auto& r : eval.records) {
    std::cout << "frame " << r.frame_index << " rmse " << r.rmse << '\n';
  }
  std::cout << "mean rmse " << eval.mean_rmse << '\n';

  const auto frame = sdmlp::load_dataset_frame(data, split.test.front());
  sdmlp::write_ply(sdmlp::predict_frame(result.net, frame).cloud, out / "test_frame.ply");
  return EXIT_SUCCESS;
}
