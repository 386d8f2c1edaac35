#pragma once

// Training / evaluation protocol and model checkpoints.
//
// Randomness of a run descends from TrainConfig::seed:
//   SeededRng(seed).derive(kInitStream)    -> weight and bias initialization;
//                                             dropout layers derive from that
//   SeededRng(seed).derive(kShuffleStream) -> per-epoch sample shuffling

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "sdmlp/data.hpp"
#include "sdmlp/errors.hpp"
#include "sdmlp/metrics.hpp"
#include "sdmlp/nn.hpp"
#include "sdmlp/numerics.hpp"
#include "sdmlp/optim.hpp"

namespace sdmlp {

inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kShuffleStream = 2;

enum class OptimizerKind { adadelta, sgd };

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  double dropout_rate = 0.5;
  double l2_lambda = 1e-4;
  std::uint64_t seed = 42;
  OptimizerKind optimizer = OptimizerKind::adadelta;
  double rho = 0.95;
  double eps = 1e-6;
  double learning_rate = 0.01;
  std::size_t n_train = 20;
  std::optional<std::vector<std::size_t>> train_indices;
  BiasInit bias_init = BiasInit::glorot;

  void validate() const {
    if (epochs == 0) throw InvalidArgument("TrainConfig: epochs must be >= 1");
    if (batch_size == 0) throw InvalidArgument("TrainConfig: batch_size must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw InvalidArgument("TrainConfig: dropout rate must be in [0, 1)");
    }
    if (!(l2_lambda >= 0.0)) throw InvalidArgument("TrainConfig: l2 lambda must be >= 0");
    if (optimizer == OptimizerKind::sgd && !(learning_rate > 0.0)) {
      throw InvalidArgument("TrainConfig: learning rate must be > 0");
    }
  }
};

struct TrainReport {
  std::vector<double> epoch_mse; // sample-weighted mean batch MSE, L2 excluded
  std::vector<double> epoch_l2;  // sample-weighted mean L2 penalty
  std::vector<double> wall_ms;
};

struct TrainResult {
  TrainReport report;
  Network net;
};

struct SampleBatch {
  Matrix x; // 6 x B
  Matrix y; // 3 x B
};

inline SampleBatch gather(std::span<const Sample> samples, std::span<const std::size_t> idx) {
  SampleBatch b{Matrix(6, idx.size()), Matrix(3, idx.size())};
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const Sample& s = samples[idx[j]];
    for (std::size_t k = 0; k < 6; ++k) b.x(k, j) = s.x[k];
    for (std::size_t k = 0; k < 3; ++k) b.y(k, j) = s.target[k];
  }
  return b;
}

// Mini-batch training of `net` on in-memory samples.
// 
// Every epoch reshuffles the sample order with `shuffle_rng`, then for each
// batch of up to batch_size samples: training-mode forward, MSE, backward,
// L2 penalty, optimizer step. Optimizer state lives for the whole call.
inline TrainReport fit(Network& net, std::span<const Sample> samples, const TrainConfig& cfg,
                       SeededRng& shuffle_rng) {
  cfg.validate();
  if (samples.empty()) throw NoValidPixels("fit: empty training pool");
  net.set_mode(Mode::training);

  std::variant<AdadeltaState, SgdConfig> optimizer =
      cfg.optimizer == OptimizerKind::adadelta
          ? std::variant<AdadeltaState, SgdConfig>(
                AdadeltaState(net.parameters(), cfg.rho, cfg.eps))
          : std::variant<AdadeltaState, SgdConfig>(SgdConfig{cfg.learning_rate});

  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainReport report;
  const auto n = static_cast<double>(samples.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double mse_sum = 0.0;
    double l2_sum = 0.0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - first);
      SampleBatch batch = gather(samples, std::span(order).subspan(first, count));
      const Matrix pred = net.forward(batch.x);
      MseResult loss = mse(pred, batch.y);
      net.backward(loss.grad);
      const double penalty = l2_penalty(net, cfg.l2_lambda);
      const auto params = net.parameters();
      if (auto* ada = std::get_if<AdadeltaState>(&optimizer)) {
        adadelta_step(params, *ada);
      } else {
        sgd_step(params, std::get<SgdConfig>(optimizer));
      }
      mse_sum += loss.value * static_cast<double>(count);
      l2_sum += penalty * static_cast<double>(count);
    }
    report.epoch_mse.push_back(mse_sum / n);
    report.epoch_l2.push_back(l2_sum / n);
    report.wall_ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count());
  }
  net.clear_caches();
  net.set_mode(Mode::inference);
  return report;
}

inline DatasetSplit make_split(std::size_t n_frames, const TrainConfig& cfg) {
  return cfg.train_indices ? split_frames(n_frames, *cfg.train_indices)
                           : split_frames(n_frames, cfg.n_train);
}

// Samples of the given frames, pooled in frame order.
inline std::vector<Sample> load_samples(const std::filesystem::path& data_dir,
                                        std::span<const std::size_t> frames) {
  std::vector<Sample> pool;
  for (std::size_t idx : frames) {
    StereoFrame f = load_dataset_frame(data_dir, idx);
    DepthMap d = load_dataset_depth(data_dir, idx, f.width(), f.height());
    auto s = extract_samples(f, d);
    pool.insert(pool.end(), s.begin(), s.end());
  }
  return pool;
}

// Builds the six-layer network and trains it on the training frames of
// `data_dir`.
inline TrainResult train(const TrainConfig& cfg, const std::filesystem::path& data_dir) {
  cfg.validate();
  const std::size_t n_frames = count_frames(data_dir);
  if (n_frames == 0) throw IoError("no frames found in " + data_dir.string());
  const DatasetSplit split = make_split(n_frames, cfg);
  const std::vector<Sample> pool = load_samples(data_dir, split.train);
  if (pool.empty()) throw NoValidPixels("training frames contain no valid ground-truth pixels");

  const SeededRng master(cfg.seed);
  SeededRng init_rng = master.derive(kInitStream);
  SeededRng shuffle_rng = master.derive(kShuffleStream);
  TrainResult result{{}, build_stereo_network(init_rng, cfg.dropout_rate, cfg.bias_init)};
  result.report = fit(result.net, pool, cfg, shuffle_rng);
  return result;
}

// ---------------------------------------------------------------------------
// Prediction

struct PointCloud {
  std::vector<std::array<double, 3>> points;
  std::vector<std::array<std::uint8_t, 3>> colors; // empty, or one per point
};

struct FramePrediction {
  DepthMap depth; // every pixel valid
  PointCloud cloud;
};

inline constexpr std::size_t kPredictChunk = 4096;

// Runs every pixel through the network in inference mode, kPredictChunk
// pixels at a time. Points are in reading order and colored from the left image.
inline FramePrediction predict_frame(const Network& net, const StereoFrame& frame) {
  if (net.input_dim() != 6 || net.output_dim() != 3) {
    throw InvalidArgument("predict_frame: network must map 6 inputs to 3 outputs");
  }
  const std::size_t n_pix = frame.width() * frame.height();
  FramePrediction out{DepthMap(frame.width(), frame.height()), {}};
  out.cloud.points.reserve(n_pix);
  out.cloud.colors.reserve(n_pix);
  for (std::size_t first = 0; first < n_pix; first += kPredictChunk) {
    const std::size_t count = std::min(kPredictChunk, n_pix - first);
    Matrix x(6, count);
    for (std::size_t j = 0; j < count; ++j) {
      const std::size_t p = first + j;
      const auto v = intensity_vector(frame, p / frame.width(), p % frame.width());
      for (std::size_t k = 0; k < 6; ++k) x(k, j) = v[k];
    }
    const Matrix y = net.infer(x);
    for (std::size_t j = 0; j < count; ++j) {
      const std::size_t p = first + j;
      const std::array<double, 3> pt{y(0, j), y(1, j), y(2, j)};
      out.depth.set(p, pt);
      out.cloud.points.push_back(pt);
      out.cloud.colors.push_back({frame.left.pixels[p * 3], frame.left.pixels[p * 3 + 1],
                                  frame.left.pixels[p * 3 + 2]});
    }
  }
  return out;
}

// Colored cloud of the pixels of `depth` whose `mask` entry is set.
inline PointCloud masked_cloud(const StereoFrame& frame, const DepthMap& depth,
                               std::span<const std::uint8_t> mask) {
  if (mask.size() != depth.pixel_count() || depth.width != frame.width() ||
      depth.height != frame.height()) {
    throw InvalidArgument("masked_cloud: frame, depth and mask sizes differ");
  }
  PointCloud c;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    c.points.push_back({depth.xyz[p * 3], depth.xyz[p * 3 + 1], depth.xyz[p * 3 + 2]});
    c.colors.push_back({frame.left.pixels[p * 3], frame.left.pixels[p * 3 + 1],
                        frame.left.pixels[p * 3 + 2]});
  }
  return c;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalOptions {
  std::size_t n_bins = 20;
  bool conventional_rmse = false; // report sqrt(mean squared distance) instead
  std::size_t threads = 1;
};

struct EvalResult {
  std::vector<EvalRecord> records;   // ascending frame index
  std::vector<std::size_t> skipped;  // test frames without valid pixels
  double mean_rmse = 0.0;            // of the reported metric
  double mean_rmse_mean_distance = 0.0;
  double mean_rmse_conventional = 0.0;
  Histogram histogram;
};

// Evaluates `predict` (6 x N intensities -> 3 x N points) on every test frame
// of `split`. Training frames are never opened. Frames are distributed over
// `threads` workers; records are merged by frame index.
template <typename Predictor>
EvalResult evaluate_with(Predictor&& predict, const DatasetSplit& split,
                         const std::filesystem::path& data_dir, const EvalOptions& opt = {}) {
  const std::size_t n = split.test.size();
  std::vector<std::optional<EvalRecord>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        const std::size_t idx = split.test[k];
        StereoFrame f = load_dataset_frame(data_dir, idx);
        DepthMap d = load_dataset_depth(data_dir, idx, f.width(), f.height());
        const auto samples = extract_samples(f, d);
        if (samples.empty()) continue;
        std::vector<std::size_t> all(samples.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        const SampleBatch b = gather(samples, all);
        const Matrix pred = predict(b.x);
        EvalRecord r;
        r.frame_index = idx;
        r.n_pixels = samples.size();
        r.rmse_mean_distance = rmse_per_image(pred, b.y);
        r.rmse_conventional = rmse_conventional(pred, b.y);
        r.rmse = opt.conventional_rmse ? r.rmse_conventional : r.rmse_mean_distance;
        slots[k] = r;
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };

  const std::size_t n_threads = std::max<std::size_t>(1, std::min(opt.threads, n));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EvalResult res;
  for (std::size_t k = 0; k < n; ++k) {
    if (slots[k]) {
      res.records.push_back(*slots[k]);
    } else {
      res.skipped.push_back(split.test[k]);
    }
  }
  if (res.records.empty()) throw NoValidPixels("evaluate: no test frame has valid pixels");
  std::sort(res.records.begin(), res.records.end(),
            [](const EvalRecord& a, const EvalRecord& b) { return a.frame_index < b.frame_index; });
  std::vector<double> reported;
  double sum_a = 0.0;
  double sum_b = 0.0;
  for (const auto& r : res.records) {
    reported.push_back(r.rmse);
    sum_a += r.rmse_mean_distance;
    sum_b += r.rmse_conventional;
  }
  const auto m = static_cast<double>(res.records.size());
  res.mean_rmse_mean_distance = sum_a / m;
  res.mean_rmse_conventional = sum_b / m;
  res.mean_rmse = opt.conventional_rmse ? res.mean_rmse_conventional
                                        : res.mean_rmse_mean_distance;
  res.histogram = histogram(reported, opt.n_bins);
  return res;
}

inline EvalResult evaluate(const Network& net, const DatasetSplit& split,
                           const std::filesystem::path& data_dir, const EvalOptions& opt = {}) {
  return evaluate_with([&net](const Matrix& x) { return net.infer(x); }, split, data_dir, opt);
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Little-endian throughout:
//   "SDMLP"  u32 version (=1)  u32 layer_count
//   per layer: u8 kind
//     kind 0 (dense):   u32 out_dim, u32 in_dim, u8 activation (0 linear, 1 relu),
//                       f64 W[out_dim * in_dim] row-major, f64 b[out_dim]
//     kind 1 (dropout): f64 rate

inline constexpr char kCheckpointMagic[5] = {'S', 'D', 'M', 'L', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 4; ++s) buf_.push_back(static_cast<unsigned char>(v >> (8 * s)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int s = 0; s < 8; ++s) buf_.push_back(static_cast<unsigned char>(bits >> (8 * s)));
  }
  const std::vector<unsigned char>& data() const noexcept { return buf_; }

private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
public:
  explicit ByteReader(std::vector<unsigned char> data) : buf_(std::move(data)) {}
  const unsigned char* take(std::size_t n) {
    if (buf_.size() - pos_ < n) throw FormatError("checkpoint: truncated");
    const unsigned char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8() { return *take(1); }
  std::uint32_t u32() {
    const unsigned char* p = take(4);
    std::uint32_t v = 0;
    for (int s = 0; s < 4; ++s) v |= std::uint32_t(p[s]) << (8 * s);
    return v;
  }
  double f64() {
    const unsigned char* p = take(8);
    std::uint64_t v = 0;
    for (int s = 0; s < 8; ++s) v |= std::uint64_t(p[s]) << (8 * s);
    return std::bit_cast<double>(v);
  }
  bool at_end() const noexcept { return pos_ == buf_.size(); }
  std::size_t remaining() const noexcept { return buf_.size() - pos_; }

private:
  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
};

} // namespace detail

inline std::vector<unsigned char> serialize_checkpoint(const Network& net) {
  detail::ByteWriter w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& layer : net.layers()) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      w.u8(0);
      w.u32(static_cast<std::uint32_t>(d->out_dim()));
      w.u32(static_cast<std::uint32_t>(d->in_dim()));
      w.u8(static_cast<std::uint8_t>(d->activation));
      for (double v : d->w.values()) w.f64(v);
      for (double v : d->b.values()) w.f64(v);
    } else {
      w.u8(1);
      w.f64(std::get<DropoutLayer>(layer).rate);
    }
  }
  return w.data();
}

inline void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(net);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

// The returned network is in inference mode. Dropout layers get generators
// derived from seed 0, which only matters if the network is trained further.
inline Network deserialize_checkpoint(std::vector<unsigned char> bytes) {
  detail::ByteReader r(std::move(bytes));
  if (std::memcmp(r.take(sizeof kCheckpointMagic), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t n_layers = r.u32();
  std::vector<Layer> layers;
  std::uint64_t dropout_index = 0;
  const SeededRng dropout_root(0);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const std::uint8_t kind = r.u8();
    if (kind == 0) {
      const std::uint32_t out_dim = r.u32();
      const std::uint32_t in_dim = r.u32();
      const std::uint8_t act = r.u8();
      if (act > 1) throw FormatError("checkpoint: unknown activation " + std::to_string(act));
      if (out_dim == 0 || in_dim == 0) throw FormatError("checkpoint: empty dense layer");
      if (r.remaining() / 8 < std::size_t(out_dim) * (std::size_t(in_dim) + 1)) {
        throw FormatError("checkpoint: truncated");
      }
      std::vector<double> w(std::size_t(out_dim) * in_dim);
      for (double& v : w) v = r.f64();
      std::vector<double> b(out_dim);
      for (double& v : b) v = r.f64();
      layers.emplace_back(std::in_place_type<DenseLayer>, Matrix(out_dim, in_dim, std::move(w)),
                          Vector(std::move(b)), static_cast<Activation>(act));
    } else if (kind == 1) {
      const double rate = r.f64();
      if (!(rate >= 0.0 && rate < 1.0)) throw FormatError("checkpoint: bad dropout rate");
      layers.emplace_back(std::in_place_type<DropoutLayer>, rate,
                          dropout_root.derive(kDropoutStreamBase + dropout_index++));
    } else {
      throw FormatError("checkpoint: unknown layer kind " + std::to_string(kind));
    }
  }
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes");
  Network net;
  try {
    net = Network(std::move(layers));
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  net.set_mode(Mode::inference);
  return net;
}

inline Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return deserialize_checkpoint(std::move(bytes));
}

} // namespace sdmlp
