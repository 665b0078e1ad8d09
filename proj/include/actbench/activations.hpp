#pragma once

#include "actbench/tensor.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace actbench {

// Declaration order is the row order of the appendix-style timing tables:
// activations, then dropouts, then the identity baseline.
enum class ActivationKind : std::uint8_t {
  CELU,
  ELU,
  GELU,
  Hardshrink,
  Hardtanh,
  LeakyReLU,
  LogSigmoid,
  LogSoftmax,
  PReLU,
  RReLU,
  ReLU,
  ReLU6,
  SELU,
  Sigmoid,
  Softmax,
  Softmin,
  Softplus,
  Softshrink,
  Softsign,
  Tanh,
  Tanhshrink,
  AlphaDropout,
  Dropout,
  Dropout2d,
  Dropout3d,
  Identity,
};

inline constexpr std::size_t kActivationKindCount = 26;

enum class FunctionGroup : std::uint8_t { Activation, Dropout, IdentityGroup };

enum class EvalMode : std::uint8_t { Train, Eval };

inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
inline constexpr double kSeluScale = 1.0507009873554804934193349852946;

// Fixed hyperparameters. Defaults follow the usual framework defaults.
struct ActivationParams {
  double alpha = 1.0;             // ELU, CELU
  double negative_slope = 0.01;   // LeakyReLU
  double lambda = 0.5;            // Hardshrink, Softshrink
  double hardtanh_min = -1.0;
  double hardtanh_max = 1.0;
  double prelu_weight = 0.25;
  double rrelu_lower = 1.0 / 8.0;
  double rrelu_upper = 1.0 / 3.0;
  double dropout_p = 0.5;
  double softplus_threshold = 20.0;
};

struct Activation {
  ActivationKind kind = ActivationKind::Identity;
  ActivationParams params{};

  Activation() = default;
  Activation(ActivationKind k) : kind(k) {}  // NOLINT(google-explicit-constructor)
  Activation(ActivationKind k, ActivationParams p) : kind(k), params(p) {}
};

/// All 26 kinds in table row order.
std::span<const ActivationKind> all_activation_kinds() noexcept;

std::string_view name_of(ActivationKind kind);
std::string_view group_name(FunctionGroup group) noexcept;
FunctionGroup group_of(ActivationKind kind);

/// Case-insensitive lookup ("relu", "ReLU", "logsoftmax").
std::optional<ActivationKind> find_activation(std::string_view name) noexcept;

/// Like find_activation, but throws std::invalid_argument listing every
/// valid name when the lookup fails.
ActivationKind parse_activation(std::string_view name);

/// Comma-separated valid names, in table order.
std::string valid_activation_names();

/// Softmax, Softmin and LogSoftmax reduce over each row.
bool is_row_wise(ActivationKind kind) noexcept;
bool is_dropout(ActivationKind kind) noexcept;

/// Points where the function is not differentiable. derivative() returns the
/// right-hand derivative there.
std::vector<double> kinks(const Activation& act);

/// Slope RReLU applies to negative inputs outside training:
/// the midpoint of its sampling interval.
double eval_slope(const Activation& act);
double rrelu_eval_slope(double lower, double upper) noexcept;

template <typename T>
void apply_inplace(const Activation& act, Matrix<T>& x, EvalMode mode, Rng& rng);

template <typename T>
Matrix<T> apply(const Activation& act, const Matrix<T>& x, EvalMode mode, Rng& rng) {
  Matrix<T> out = x;
  apply_inplace(act, out, mode, rng);
  return out;
}

/// Elementwise derivative with eval-mode semantics (dropouts are pass-through,
/// RReLU uses its eval slope). For the row-wise kinds this is the diagonal of
/// each row's Jacobian; see row_jacobians for the full matrices.
template <typename T>
Matrix<T> derivative(const Activation& act, const Matrix<T>& x);

/// Full d x d Jacobian per row, J[i][j] = d out_i / d in_j.
template <typename T>
std::vector<Matrix<T>> row_jacobians(const Activation& act, const Matrix<T>& x);

/// Forward pass that also records what backprop_inplace needs: the local
/// elementwise derivative (including sampled dropout masks and RReLU slopes)
/// or, for the row-wise kinds, the output itself.
template <typename T>
void apply_for_backprop(const Activation& act, Matrix<T>& x, EvalMode mode, Rng& rng,
                        Matrix<T>& saved);

/// grad <- J^T grad, using the state saved by apply_for_backprop.
template <typename T>
void backprop_inplace(const Activation& act, const Matrix<T>& saved, Matrix<T>& grad);

}  // namespace actbench
