#include "actbench/mnist.hpp"

#include "actbench/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <numeric>
#include <ostream>
#include <zlib.h>

namespace actbench::mnist {
namespace {

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in, const std::string& name) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw std::runtime_error("zlib init failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  int rc = Z_OK;
  do {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw LengthError(fmt::format("{}: corrupt or truncated gzip stream", name));
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
  } while (rc != Z_STREAM_END && (zs.avail_in > 0 || zs.avail_out == 0));
  inflateEnd(&zs);
  if (rc != Z_STREAM_END) throw LengthError(fmt::format("{}: truncated gzip stream", name));
  return out;
}

void require_magic(std::uint32_t found, std::uint32_t expected, std::string_view what) {
  if (found != expected) {
    throw FormatError(fmt::format("{}: expected IDX magic 0x{:08x}, found 0x{:08x}", what,
                                  expected, found));
  }
}

}  // namespace

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& rows) const {
  LabeledDataset out;
  out.images.resize(static_cast<Eigen::Index>(rows.size()), images.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.images.row(static_cast<Eigen::Index>(i)) = images.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (raw.size() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b) return gunzip(raw, path.string());
  return raw;
}

LabeledDataset parse_idx(const std::vector<std::uint8_t>& images,
                         const std::vector<std::uint8_t>& labels) {
  if (images.size() < 16) throw LengthError(fmt::format("image file: {} bytes, header needs 16", images.size()));
  if (labels.size() < 8) throw LengthError(fmt::format("label file: {} bytes, header needs 8", labels.size()));
  require_magic(be32(images, 0), kImageMagic, "image file");
  require_magic(be32(labels, 0), kLabelMagic, "label file");

  const std::size_t count = be32(images, 4);
  const std::size_t rows = be32(images, 8);
  const std::size_t cols = be32(images, 12);
  if (rows != kImageSide || cols != kImageSide) {
    throw FormatError(fmt::format("image file: expected 28x28 images, found {}x{}", rows, cols));
  }
  const std::size_t label_count = be32(labels, 4);
  if (label_count != count) {
    throw ConsistencyError(fmt::format("image file holds {} items, label file {}", count, label_count));
  }
  if (images.size() < 16 + count * kPixels) {
    throw LengthError(fmt::format("image file: {} bytes, expected {}", images.size(), 16 + count * kPixels));
  }
  if (labels.size() < 8 + count) {
    throw LengthError(fmt::format("label file: {} bytes, expected {}", labels.size(), 8 + count));
  }

  LabeledDataset out;
  out.images.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(kPixels));
  const std::uint8_t* px = images.data() + 16;
  float* dst = out.images.data();
  for (std::size_t i = 0; i < count * kPixels; ++i) dst[i] = static_cast<float>(px[i]) / 255.0f;
  out.labels.assign(labels.begin() + 8, labels.begin() + 8 + static_cast<std::ptrdiff_t>(count));
  for (std::size_t i = 0; i < count; ++i) {
    if (out.labels[i] >= kClasses) {
      throw FormatError(fmt::format("label file: item {} has label {}", i, out.labels[i]));
    }
  }
  return out;
}

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  return parse_idx(read_file(images_path), read_file(labels_path));
}

LabeledDataset load_training_set(const std::filesystem::path& dir) {
  for (const char* suffix : {"", ".gz"}) {
    const auto img = dir / (std::string("train-images-idx3-ubyte") + suffix);
    const auto lbl = dir / (std::string("train-labels-idx1-ubyte") + suffix);
    if (std::filesystem::exists(img) && std::filesystem::exists(lbl)) return load_idx(img, lbl);
  }
  throw std::runtime_error("no train-images-idx3-ubyte[.gz] / train-labels-idx1-ubyte[.gz] pair in " +
                           dir.string());
}

TrainValidationSplit split(const LabeledDataset& data, std::size_t validation_size,
                           std::uint64_t seed, std::optional<std::size_t> train_limit) {
  if (validation_size >= data.size()) {
    throw std::invalid_argument(fmt::format("validation size {} leaves no training data out of {}",
                                            validation_size, data.size()));
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t train_end = data.size() - validation_size;
  std::vector<std::size_t> val(order.begin() + static_cast<std::ptrdiff_t>(train_end), order.end());
  std::size_t train_count = train_end;
  if (train_limit) train_count = std::min(train_count, *train_limit);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
  return {data.subset(train), data.subset(val)};
}

double accuracy_from_outputs(const Matrix<float>& outputs, const std::vector<std::uint8_t>& labels) {
  if (static_cast<std::size_t>(outputs.rows()) != labels.size()) {
    throw std::invalid_argument("accuracy: output rows and label count differ");
  }
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < outputs.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < outputs.cols(); ++c) {
      if (outputs(r, c) > outputs(r, best)) best = c;
    }
    if (static_cast<std::size_t>(best) == labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

template <typename T>
double accuracy(const DenseNetwork<T>& net, const LabeledDataset& data) {
  if (net.output_dim() != kClasses) {
    throw std::invalid_argument(fmt::format("accuracy needs 10 outputs, network has {}", net.output_dim()));
  }
  if (data.size() == 0) return 0.0;
  constexpr Eigen::Index kChunk = 2048;
  Rng rng(0);
  ForwardWorkspace<T> ws;
  Matrix<float> outputs(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(kClasses));
  const Matrix<T> images = data.images.template cast<T>();
  for (Eigen::Index off = 0; off < images.rows(); off += kChunk) {
    const Eigen::Index len = std::min(kChunk, images.rows() - off);
    const Matrix<T>& out = forward_into<T>(net, images.middleRows(off, len), EvalMode::Eval, rng, ws);
    outputs.middleRows(off, len) = out.template cast<float>();
  }
  return accuracy_from_outputs(outputs, data.labels);
}

TrainResult train_to_threshold(const NetworkConfig& config, const TrainValidationSplit& data,
                               const TrainOptions& options, const TrainHooks& hooks) {
  if (config.input_dim != kPixels || config.output_dim != kClasses) {
    throw std::invalid_argument("train_to_threshold needs a 784 -> ... -> 10 network");
  }
  if (data.train.size() == 0 || data.validation.size() == 0) {
    throw std::invalid_argument("train_to_threshold needs non-empty train and validation splits");
  }
  if (options.batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  const Clock clock = hooks.clock ? hooks.clock : Clock(steady_seconds);

  TrainResult result;
  result.function = config.hidden_activation.kind;
  const std::size_t n_train = data.train.size();
  const auto width = static_cast<Eigen::Index>(kPixels);

  for (std::size_t run = 0; run < options.runs; ++run) {
    NetworkConfig c = config;
    c.seed = mix_seed(config.seed, run);
    DenseNetwork<float> net = init_network<float>(c);
    OptimizerState<float> opt = make_optimizer(OptimizerSettings::sgd(options.learning_rate), net);
    Rng rng(mix_seed(options.seed, run));
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    RunOutcome outcome;
    Matrix<float> x;
    Matrix<float> y;
    for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      {
        MeasurementGuard guard;
        const double t0 = clock();
        for (std::size_t off = 0; off < n_train && outcome.failure_reason.empty(); off += options.batch_size) {
          const std::size_t len = std::min(options.batch_size, n_train - off);
          x.resize(static_cast<Eigen::Index>(len), width);
          y.setZero(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(kClasses));
          for (std::size_t i = 0; i < len; ++i) {
            const std::size_t src = order[off + i];
            x.row(static_cast<Eigen::Index>(i)) = data.train.images.row(static_cast<Eigen::Index>(src));
            y(static_cast<Eigen::Index>(i), data.train.labels[src]) = 1.0f;
          }
          const Gradients<float> g = backward(net, x, y, options.loss, EvalMode::Train, rng);
          if (!std::isfinite(g.loss)) {
            outcome.failure_reason = fmt::format("non-finite loss in epoch {}", epoch);
          } else if (optimizer_step(opt, net, g.layers) == StepStatus::Diverged) {
            outcome.failure_reason = fmt::format("parameters diverged in epoch {}", epoch);
          }
        }
        const double t1 = clock();
        outcome.train_seconds += t1 - t0;
      }
      outcome.epochs_used = epoch;
      if (!outcome.failure_reason.empty()) break;
      if (hooks.before_validation) hooks.before_validation(epoch);
      outcome.final_accuracy = accuracy(net, data.validation);
      if (outcome.final_accuracy > options.threshold) {
        outcome.reached_target = true;
        break;
      }
    }
    if (!outcome.reached_target && outcome.failure_reason.empty()) {
      outcome.failure_reason = fmt::format("accuracy {} not above {} after {} epochs", outcome.final_accuracy,
                                           options.threshold, outcome.epochs_used);
    }
    result.runs.push_back(std::move(outcome));
  }

  std::vector<double> seconds;
  for (const auto& r : result.runs) {
    seconds.push_back(r.train_seconds);
    if (!r.reached_target) result.any_run_failed = true;
  }
  result.mean_seconds = harness::mean_of(seconds);
  result.sd_seconds = harness::sample_sd(seconds);
  return result;
}

void write_runs_csv(std::ostream& os, const std::vector<TrainResult>& results) {
  os << kRunsCsvHeader << '\n';
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.runs.size(); ++i) {
      const auto& run = r.runs[i];
      os << name_of(r.function) << ',' << i << ',' << run.epochs_used << ','
         << (run.reached_target ? "true" : "false") << ',' << fmt::format("{}", run.train_seconds) << '\n';
    }
  }
}

void write_summary_csv(std::ostream& os, const std::vector<TrainResult>& results) {
  os << "function,mean_s,sd_s,failed\n";
  for (const auto& r : results) {
    os << name_of(r.function) << ',' << fmt::format("{}", r.mean_seconds) << ','
       << fmt::format("{}", r.sd_seconds) << ',' << (r.any_run_failed ? "true" : "false") << '\n';
  }
}

template double accuracy<float>(const DenseNetwork<float>&, const LabeledDataset&);
template double accuracy<double>(const DenseNetwork<double>&, const LabeledDataset&);

}  // namespace actbench::mnist
