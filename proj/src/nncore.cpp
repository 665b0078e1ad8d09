#include "actbench/nncore.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace actbench {
namespace {

// Uniform on the open interval (-bound, bound), independent of the standard
// library's distribution implementations.
template <typename T>
T open_uniform(Rng& rng, double bound) {
  const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;  // (0, 1)
  T v = static_cast<T>(bound * (2.0 * u - 1.0));
  while (std::abs(static_cast<double>(v)) >= bound) v = std::nextafter(v, T(0));
  return v;
}

template <typename T, typename Derived>
void fill_open_uniform(Eigen::MatrixBase<Derived>& m, Rng& rng, double bound) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = open_uniform<T>(rng, bound);
}

template <typename T>
bool finite(const Matrix<T>& m) {
  return m.allFinite();
}

template <typename T>
void check_batch(const DenseNetwork<T>& net, Eigen::Index cols, const char* what) {
  if (net.layers.empty()) throw std::invalid_argument("network has no layers");
  if (static_cast<std::size_t>(cols) != net.input_dim()) {
    throw std::invalid_argument(fmt::format("{}: batch width {} does not match input_dim {}", what,
                                            cols, net.input_dim()));
  }
}

template <typename T>
void add_bias(Matrix<T>& z, const RowVector<T>& b) {
  z.rowwise() += b;
}

template <typename T>
T loss_and_gradient(const Matrix<T>& out, const Matrix<T>& targets, LossKind loss,
                    Matrix<T>* grad) {
  const T n = static_cast<T>(out.size());
  if (loss == LossKind::MeanSquaredError) {
    const Matrix<T> diff = out - targets;
    if (grad) *grad = diff * (T(2) / n);
    return diff.squaredNorm() / n;
  }
  // Per-node binary cross-entropy; logs clamped at -100 as frameworks do.
  T total = 0;
  if (grad) grad->resize(out.rows(), out.cols());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const T y = out.data()[i];
    const T t = targets.data()[i];
    const T log_y = std::max(std::log(y), T(-100));
    const T log_1my = std::max(std::log1p(-y), T(-100));
    total -= t * log_y + (T(1) - t) * log_1my;
    if (grad) {
      const T denom = std::max(y * (T(1) - y), T(1e-12));
      grad->data()[i] = (y - t) / denom / n;
    }
  }
  return total / n;
}

}  // namespace

NetworkConfig NetworkConfig::benchmark_preset(Activation hidden, std::uint64_t seed) {
  NetworkConfig c;
  c.input_dim = 64;
  c.hidden_layers = 4;
  c.hidden_width = 1024;
  c.output_dim = 16;
  c.hidden_activation = hidden;
  c.output_activation = ActivationKind::Identity;
  c.seed = seed;
  return c;
}

NetworkConfig NetworkConfig::mnist_preset(Activation hidden, std::uint64_t seed) {
  NetworkConfig c;
  c.input_dim = 784;
  c.hidden_layers = 4;
  c.hidden_width = 1024;
  c.output_dim = 10;
  c.hidden_activation = hidden;
  c.output_activation = ActivationKind::Sigmoid;
  c.seed = seed;
  return c;
}

template <typename T>
std::size_t DenseNetwork<T>::max_width() const {
  std::size_t w = 0;
  for (const auto& l : layers) w = std::max<std::size_t>(w, l.weights.cols());
  return w;
}

template <typename T>
std::size_t DenseNetwork<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

template <typename T>
bool DenseNetwork<T>::all_finite() const {
  return std::all_of(layers.begin(), layers.end(), [](const DenseLayer<T>& l) {
    return l.weights.allFinite() && l.bias.allFinite();
  });
}

template <typename T>
void DenseNetwork<T>::check_shapes() const {
  if (layers.empty()) throw std::invalid_argument("network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].bias.size() != layers[i].weights.cols()) {
      throw std::invalid_argument(fmt::format("layer {}: bias size {} != weight columns {}", i,
                                              layers[i].bias.size(), layers[i].weights.cols()));
    }
    if (i + 1 < layers.size() && layers[i].weights.cols() != layers[i + 1].weights.rows()) {
      throw std::invalid_argument(fmt::format("layers {} and {} do not chain ({} vs {})", i,
                                              i + 1, layers[i].weights.cols(),
                                              layers[i + 1].weights.rows()));
    }
  }
}

template <typename T>
DenseNetwork<T> init_network(const NetworkConfig& config) {
  if (config.input_dim == 0 || config.hidden_layers == 0 || config.hidden_width == 0 ||
      config.output_dim == 0) {
    throw std::invalid_argument(fmt::format(
        "network dimensions must be >= 1 (input {}, hidden layers {}, hidden width {}, output {})",
        config.input_dim, config.hidden_layers, config.hidden_width, config.output_dim));
  }
  DenseNetwork<T> net;
  net.hidden_activation = config.hidden_activation;
  net.output_activation = config.output_activation;

  std::vector<std::size_t> dims{config.input_dim};
  for (std::size_t i = 0; i < config.hidden_layers; ++i) dims.push_back(config.hidden_width);
  dims.push_back(config.output_dim);

  Rng rng(config.seed);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(dims[i]);
    const auto out = static_cast<Eigen::Index>(dims[i + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DenseLayer<T> layer{Matrix<T>(in, out), RowVector<T>(out)};
    fill_open_uniform<T>(layer.weights, rng, bound);
    fill_open_uniform<T>(layer.bias, rng, bound);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

template <typename T>
const Matrix<T>& forward_into(const DenseNetwork<T>& net,
                              const Eigen::Ref<const Matrix<T>>& batch, EvalMode mode,
                              Rng& rng, ForwardWorkspace<T>& ws) {
  check_batch(net, batch.cols(), "forward");
  const std::size_t last = net.layers.size() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    const DenseLayer<T>& layer = net.layers[i];
    Matrix<T>& dst = i == last ? ws.output : ws.hidden[i % 2];
    dst.resize(batch.rows(), layer.weights.cols());
    if (i == 0) {
      dst.noalias() = batch * layer.weights;
    } else {
      dst.noalias() = ws.hidden[(i - 1) % 2] * layer.weights;
    }
    add_bias(dst, layer.bias);
    apply_inplace(i == last ? net.output_activation : net.hidden_activation, dst, mode, rng);
  }
  return ws.output;
}

template <typename T>
Matrix<T> forward(const DenseNetwork<T>& net, const Matrix<T>& batch, EvalMode mode, Rng& rng) {
  ForwardWorkspace<T> ws;
  forward_into<T>(net, batch, mode, rng, ws);
  return std::move(ws.output);
}

template <typename T>
T evaluate_loss(const DenseNetwork<T>& net, const Matrix<T>& batch, const Matrix<T>& targets,
                LossKind loss, EvalMode mode, Rng& rng) {
  const Matrix<T> out = forward(net, batch, mode, rng);
  if (targets.rows() != out.rows() || targets.cols() != out.cols()) {
    throw std::invalid_argument("evaluate_loss: targets shape does not match output");
  }
  return loss_and_gradient<T>(out, targets, loss, nullptr);
}

template <typename T>
Gradients<T> backward(const DenseNetwork<T>& net, const Matrix<T>& batch,
                      const Matrix<T>& targets, LossKind loss, EvalMode mode, Rng& rng) {
  check_batch(net, batch.cols(), "backward");
  if (targets.rows() != batch.rows() ||
      static_cast<std::size_t>(targets.cols()) != net.output_dim()) {
    throw std::invalid_argument(fmt::format("backward: targets are {}x{}, expected {}x{}",
                                            targets.rows(), targets.cols(), batch.rows(),
                                            net.output_dim()));
  }
  const std::size_t count = net.layers.size();
  // inputs[i] feeds layer i; saved[i] is the activation state after layer i.
  std::vector<Matrix<T>> inputs(count + 1);
  std::vector<Matrix<T>> saved(count);
  inputs[0] = batch;
  for (std::size_t i = 0; i < count; ++i) {
    Matrix<T> z = inputs[i] * net.layers[i].weights;
    add_bias(z, net.layers[i].bias);
    const Activation& act = i + 1 == count ? net.output_activation : net.hidden_activation;
    apply_for_backprop(act, z, mode, rng, saved[i]);
    inputs[i + 1] = std::move(z);
  }

  Gradients<T> grads;
  grads.layers.resize(count);
  Matrix<T> delta;
  // Not fused with a sigmoid output: as in frameworks, the clamped BCE
  // gradient goes through y(1 - y), so fully saturated outputs pass no gradient.
  grads.loss = loss_and_gradient<T>(inputs[count], targets, loss, &delta);
  backprop_inplace(net.output_activation, saved[count - 1], delta);
  for (std::size_t i = count; i-- > 0;) {
    grads.layers[i].weights.noalias() = inputs[i].transpose() * delta;
    grads.layers[i].bias = delta.colwise().sum();
    if (i == 0) break;
    Matrix<T> prev = delta * net.layers[i].weights.transpose();
    backprop_inplace(net.hidden_activation, saved[i - 1], prev);
    delta = std::move(prev);
  }
  return grads;
}

template <typename T>
OptimizerState<T> make_optimizer(const OptimizerSettings& settings, const DenseNetwork<T>& net) {
  OptimizerState<T> state;
  state.settings = settings;
  if (settings.kind == OptimizerKind::Adam) {
    for (const auto& l : net.layers) {
      DenseLayer<T> zero{Matrix<T>::Zero(l.weights.rows(), l.weights.cols()),
                         RowVector<T>::Zero(l.bias.size())};
      state.first_moment.push_back(zero);
      state.second_moment.push_back(std::move(zero));
    }
  }
  return state;
}

template <typename T>
StepStatus optimizer_step(OptimizerState<T>& state, DenseNetwork<T>& net,
                          const std::vector<DenseLayer<T>>& gradients) {
  if (gradients.size() != net.layers.size()) {
    throw std::invalid_argument(fmt::format("optimizer_step: {} gradient layers for {} layers",
                                            gradients.size(), net.layers.size()));
  }
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    const auto& g = gradients[i];
    const auto& p = net.layers[i];
    if (g.weights.rows() != p.weights.rows() || g.weights.cols() != p.weights.cols() ||
        g.bias.size() != p.bias.size()) {
      throw std::invalid_argument(fmt::format("optimizer_step: gradient shape mismatch at layer {}", i));
    }
    if (!g.weights.allFinite() || !g.bias.allFinite()) return StepStatus::Diverged;
  }
  const OptimizerSettings& s = state.settings;
  if (s.kind == OptimizerKind::SGD) {
    const T lr = static_cast<T>(s.learning_rate);
    for (std::size_t i = 0; i < gradients.size(); ++i) {
      net.layers[i].weights -= lr * gradients[i].weights;
      net.layers[i].bias -= lr * gradients[i].bias;
    }
  } else {
    if (state.first_moment.size() != net.layers.size()) {
      throw std::invalid_argument("optimizer_step: Adam state was built for a different network");
    }
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(s.beta1, t);
    const double bc2 = 1.0 - std::pow(s.beta2, t);
    const T b1 = static_cast<T>(s.beta1), b2 = static_cast<T>(s.beta2);
    const T step = static_cast<T>(s.learning_rate / bc1);
    const T sqrt_bc2 = static_cast<T>(std::sqrt(bc2));
    const T eps = static_cast<T>(s.epsilon);
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = b1 * m + (T(1) - b1) * g;
      v.array() = b2 * v.array() + (T(1) - b2) * g.array().square();
      param.array() -= step * m.array() / (v.array().sqrt() / sqrt_bc2 + eps);
    };
    for (std::size_t i = 0; i < gradients.size(); ++i) {
      update(net.layers[i].weights, state.first_moment[i].weights, state.second_moment[i].weights,
             gradients[i].weights);
      update(net.layers[i].bias, state.first_moment[i].bias, state.second_moment[i].bias,
             gradients[i].bias);
    }
  }
  return net.all_finite() ? StepStatus::Applied : StepStatus::Diverged;
}

template <typename T>
DenseNetwork<T> pretrain_random(DenseNetwork<T> net, std::size_t epochs, Rng& rng,
                                const PretrainOptions& options) {
  if (epochs == 0) return net;
  if (options.batch_size == 0) throw std::invalid_argument("pretrain batch size must be >= 1");
  OptimizerState<T> state = make_optimizer(options.optimizer, net);
  const auto rows = static_cast<Eigen::Index>(options.batch_size);
  Matrix<T> x(rows, static_cast<Eigen::Index>(net.input_dim()));
  Matrix<T> y(rows, static_cast<Eigen::Index>(net.output_dim()));
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    fill_open_uniform<T>(x, rng, 1.0);
    fill_open_uniform<T>(y, rng, 1.0);
    const Gradients<T> g = backward(net, x, y, options.loss, EvalMode::Train, rng);
    if (!std::isfinite(static_cast<double>(g.loss)) ||
        optimizer_step(state, net, g.layers) == StepStatus::Diverged) {
      throw TrainingDiverged(epoch + 1,
                             fmt::format("random pretraining diverged at epoch {}", epoch + 1));
    }
  }
  return net;
}

#define ACTBENCH_INSTANTIATE(T)                                                               \
  template struct DenseNetwork<T>;                                                           \
  template DenseNetwork<T> init_network<T>(const NetworkConfig&);                            \
  template Matrix<T> forward<T>(const DenseNetwork<T>&, const Matrix<T>&, EvalMode, Rng&);   \
  template const Matrix<T>& forward_into<T>(const DenseNetwork<T>&,                          \
                                            const Eigen::Ref<const Matrix<T>>&, EvalMode,    \
                                            Rng&, ForwardWorkspace<T>&);                     \
  template T evaluate_loss<T>(const DenseNetwork<T>&, const Matrix<T>&, const Matrix<T>&,    \
                              LossKind, EvalMode, Rng&);                                     \
  template Gradients<T> backward<T>(const DenseNetwork<T>&, const Matrix<T>&,                \
                                    const Matrix<T>&, LossKind, EvalMode, Rng&);             \
  template OptimizerState<T> make_optimizer<T>(const OptimizerSettings&,                     \
                                               const DenseNetwork<T>&);                      \
  template StepStatus optimizer_step<T>(OptimizerState<T>&, DenseNetwork<T>&,                \
                                        const std::vector<DenseLayer<T>>&);                  \
  template DenseNetwork<T> pretrain_random<T>(DenseNetwork<T>, std::size_t, Rng&,            \
                                              const PretrainOptions&);

ACTBENCH_INSTANTIATE(float)
ACTBENCH_INSTANTIATE(double)
#undef ACTBENCH_INSTANTIATE

}  // namespace actbench
