#pragma once

#include "actbench/nncore.hpp"
#include "actbench/timing.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace actbench::mnist {

inline constexpr std::uint32_t kImageMagic = 0x00000803;
inline constexpr std::uint32_t kLabelMagic = 0x00000801;
inline constexpr std::size_t kImageSide = 28;
inline constexpr std::size_t kPixels = kImageSide * kImageSide;
inline constexpr std::size_t kClasses = 10;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class LengthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LabeledDataset {
  Matrix<float> images;  // [m x 784], pixels / 255
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  LabeledDataset subset(const std::vector<std::size_t>& rows) const;
};

/// File contents, gunzipped when the file starts with 0x1f 0x8b.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

LabeledDataset parse_idx(const std::vector<std::uint8_t>& images,
                         const std::vector<std::uint8_t>& labels);

/// Big-endian IDX image + label files (optionally gzip-compressed).
LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path);

/// Finds the training pair in `dir` under the usual file names, with or
/// without ".gz". Throws std::runtime_error naming the directory if absent.
LabeledDataset load_training_set(const std::filesystem::path& dir);

struct TrainValidationSplit {
  LabeledDataset train;
  LabeledDataset validation;
};

/// Seeded shuffle, then the last `validation_size` examples are held out. If
/// train_limit is set, only that many of the remaining examples are kept.
TrainValidationSplit split(const LabeledDataset& data, std::size_t validation_size,
                           std::uint64_t seed, std::optional<std::size_t> train_limit = {});

/// Fraction of rows whose argmax output (ties to the lowest index) equals the
/// label.
double accuracy_from_outputs(const Matrix<float>& outputs, const std::vector<std::uint8_t>& labels);

template <typename T>
double accuracy(const DenseNetwork<T>& net, const LabeledDataset& data);

struct TrainOptions {
  double threshold = 0.90;
  std::size_t max_epochs = 100;
  std::size_t runs = 3;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  LossKind loss = LossKind::BinaryCrossEntropy;
  std::uint64_t seed = 0;
};

struct RunOutcome {
  std::size_t epochs_used = 0;
  bool reached_target = false;
  double train_seconds = 0;
  double final_accuracy = 0;
  std::string failure_reason;
};

struct TrainResult {
  ActivationKind function = ActivationKind::Identity;
  std::vector<RunOutcome> runs;
  double mean_seconds = 0;
  double sd_seconds = 0;
  bool any_run_failed = false;
};

struct TrainHooks {
  Clock clock = steady_seconds;
  /// Called immediately before each validation pass, with the clock stopped.
  std::function<void(std::size_t epoch)> before_validation;
};

/// Trains fresh networks (one per run, seeded from config.seed + run) with
/// mini-batch SGD until validation accuracy exceeds the threshold or
/// max_epochs is reached. Only forward, backward and update time is counted.
TrainResult train_to_threshold(const NetworkConfig& config, const TrainValidationSplit& data,
                               const TrainOptions& options, const TrainHooks& hooks = {});

inline constexpr std::string_view kRunsCsvHeader = "function,run,epochs,reached,seconds";

void write_runs_csv(std::ostream& os, const std::vector<TrainResult>& results);
/// Bar-chart data: function, mean, sd, failed flag.
void write_summary_csv(std::ostream& os, const std::vector<TrainResult>& results);

}  // namespace actbench::mnist
