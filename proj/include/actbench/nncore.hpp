#pragma once

#include "actbench/activations.hpp"
#include "actbench/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace actbench {

struct NetworkConfig {
  std::size_t input_dim = 64;
  std::size_t hidden_layers = 4;
  std::size_t hidden_width = 1024;
  std::size_t output_dim = 16;
  Activation hidden_activation = ActivationKind::ReLU;
  // Identity means the final affine layer stays linear.
  Activation output_activation = ActivationKind::Identity;
  std::uint64_t seed = 0;

  /// 64 -> 4 x 1024 -> 16, linear output. Timing subject for inference runs.
  static NetworkConfig benchmark_preset(Activation hidden, std::uint64_t seed = 0);
  /// 784 -> 4 x 1024 -> 10, sigmoid output. Train-to-threshold subject.
  static NetworkConfig mnist_preset(Activation hidden, std::uint64_t seed = 0);
};

template <typename T>
struct DenseLayer {
  Matrix<T> weights;  // [in x out]
  RowVector<T> bias;  // [out]
};

template <typename T>
struct DenseNetwork {
  std::vector<DenseLayer<T>> layers;
  Activation hidden_activation;
  Activation output_activation = ActivationKind::Identity;

  std::size_t input_dim() const { return static_cast<std::size_t>(layers.front().weights.rows()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(layers.back().weights.cols()); }
  std::size_t max_width() const;
  std::size_t parameter_count() const;
  bool all_finite() const;
  /// Throws std::invalid_argument when adjacent layer shapes do not chain.
  void check_shapes() const;
};

template <typename T>
DenseNetwork<T> init_network(const NetworkConfig& config);

template <typename T>
Matrix<T> forward(const DenseNetwork<T>& net, const Matrix<T>& batch, EvalMode mode, Rng& rng);

/// Reusable buffers for repeated forward passes of the same batch size. After
/// the first pass no further allocation happens.
template <typename T>
struct ForwardWorkspace {
  std::array<Matrix<T>, 2> hidden;
  Matrix<T> output;
};

/// Forward pass into `ws`; returns a reference to ws.output.
template <typename T>
const Matrix<T>& forward_into(const DenseNetwork<T>& net,
                              const Eigen::Ref<const Matrix<T>>& batch, EvalMode mode,
                              Rng& rng, ForwardWorkspace<T>& ws);

enum class LossKind { MeanSquaredError, BinaryCrossEntropy };

template <typename T>
struct Gradients {
  std::vector<DenseLayer<T>> layers;
  T loss = T(0);
};

/// Loss is the mean over every element of the [n x output_dim] output.
template <typename T>
T evaluate_loss(const DenseNetwork<T>& net, const Matrix<T>& batch, const Matrix<T>& targets,
                LossKind loss, EvalMode mode, Rng& rng);

template <typename T>
Gradients<T> backward(const DenseNetwork<T>& net, const Matrix<T>& batch,
                      const Matrix<T>& targets, LossKind loss, EvalMode mode, Rng& rng);

enum class OptimizerKind { Adam, SGD };

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerSettings adam(double lr = 1e-3) { return {OptimizerKind::Adam, lr}; }
  static OptimizerSettings sgd(double lr = 0.01) { return {OptimizerKind::SGD, lr}; }
};

template <typename T>
struct OptimizerState {
  OptimizerSettings settings;
  std::size_t step_count = 0;
  std::vector<DenseLayer<T>> first_moment;   // Adam only
  std::vector<DenseLayer<T>> second_moment;  // Adam only
};

template <typename T>
OptimizerState<T> make_optimizer(const OptimizerSettings& settings, const DenseNetwork<T>& net);

enum class StepStatus { Applied, Diverged };

/// Applies one update in place. A non-finite gradient leaves net and state
/// untouched and returns Diverged; an update that overflows the parameters is
/// applied and also reported as Diverged.
template <typename T>
StepStatus optimizer_step(OptimizerState<T>& state, DenseNetwork<T>& net,
                          const std::vector<DenseLayer<T>>& gradients);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

struct PretrainOptions {
  std::size_t batch_size = 64;
  LossKind loss = LossKind::MeanSquaredError;
  OptimizerSettings optimizer = OptimizerSettings::adam();
};

/// One Adam step per epoch against a freshly drawn uniform(-1, 1) input and
/// target batch. Throws TrainingDiverged (with the 1-based epoch) on
/// non-finite parameters.
template <typename T>
DenseNetwork<T> pretrain_random(DenseNetwork<T> net, std::size_t epochs, Rng& rng,
                                const PretrainOptions& options = {});

}  // namespace actbench
