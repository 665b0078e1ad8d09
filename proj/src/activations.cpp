#include "actbench/activations.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace actbench {
namespace {

constexpr std::array<ActivationKind, kActivationKindCount> kAllKinds = {
    ActivationKind::CELU,       ActivationKind::ELU,          ActivationKind::GELU,
    ActivationKind::Hardshrink, ActivationKind::Hardtanh,     ActivationKind::LeakyReLU,
    ActivationKind::LogSigmoid, ActivationKind::LogSoftmax,   ActivationKind::PReLU,
    ActivationKind::RReLU,      ActivationKind::ReLU,         ActivationKind::ReLU6,
    ActivationKind::SELU,       ActivationKind::Sigmoid,      ActivationKind::Softmax,
    ActivationKind::Softmin,    ActivationKind::Softplus,     ActivationKind::Softshrink,
    ActivationKind::Softsign,   ActivationKind::Tanh,         ActivationKind::Tanhshrink,
    ActivationKind::AlphaDropout, ActivationKind::Dropout,    ActivationKind::Dropout2d,
    ActivationKind::Dropout3d,  ActivationKind::Identity,
};

constexpr std::array<std::string_view, kActivationKindCount> kNames = {
    "CELU",       "ELU",        "GELU",      "Hardshrink", "Hardtanh",     "LeakyReLU",
    "LogSigmoid", "LogSoftmax", "PReLU",     "RReLU",      "ReLU",         "ReLU6",
    "SELU",       "Sigmoid",    "Softmax",   "Softmin",    "Softplus",     "Softshrink",
    "Softsign",   "Tanh",       "Tanhshrink", "AlphaDropout", "Dropout",   "Dropout2d",
    "Dropout3d",  "Identity",
};

std::size_t index_of(ActivationKind kind) {
  const auto i = static_cast<std::size_t>(kind);
  if (i >= kActivationKindCount) {
    throw std::invalid_argument("unknown activation kind " + std::to_string(i));
  }
  return i;
}

bool iequals(std::string_view a, std::string_view b) noexcept {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

// ---- scalar kernels --------------------------------------------------------

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T softplus(T x, T threshold) {
  if (x > threshold) return x;
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T gelu(T x) {
  return x * T(0.5) * std::erfc(-x * T(M_SQRT1_2));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * std::erfc(-x * T(M_SQRT1_2));
  const T pdf = std::exp(T(-0.5) * x * x) * T(0.3989422804014327);
  return cdf + x * pdf;
}

template <typename T, typename F>
void transform(Matrix<T>& x, F f) {
  T* p = x.data();
  const Eigen::Index n = x.size();
  for (Eigen::Index i = 0; i < n; ++i) p[i] = f(p[i]);
}

template <typename T, typename F>
Matrix<T> map(const Matrix<T>& x, F f) {
  Matrix<T> out(x.rows(), x.cols());
  const T* src = x.data();
  T* dst = out.data();
  const Eigen::Index n = x.size();
  for (Eigen::Index i = 0; i < n; ++i) dst[i] = f(src[i]);
  return out;
}

template <typename T>
void softmax_rows(Matrix<T>& x, bool negate) {
  if (x.cols() == 0) throw std::invalid_argument("softmax over an empty feature axis");
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    if (negate) row = -row;
    const T mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

template <typename T>
void log_softmax_rows(Matrix<T>& x) {
  if (x.cols() == 0) throw std::invalid_argument("log-softmax over an empty feature axis");
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    const T mx = row.maxCoeff();
    const T lse = std::log((row.array() - mx).exp().sum());
    row = row.array() - mx - lse;
  }
}

void check_probability(double prob) {
  if (!(prob >= 0.0 && prob <= 1.0)) {
    throw std::invalid_argument("dropout probability must lie in [0, 1], got " + std::to_string(prob));
  }
}

// Dropout draws one keep decision per element; Dropout2d/3d see each column
// of a flat [n x d] batch as its own channel, so they share this path.
template <typename T>
void dropout_train(const ActivationParams& p, Matrix<T>& x, Rng& rng, Matrix<T>* saved) {
  const double prob = p.dropout_p;
  check_probability(prob);
  if (saved) saved->resize(x.rows(), x.cols());
  if (prob >= 1.0) {
    x.setZero();
    if (saved) saved->setZero();
    return;
  }
  const T scale = T(1.0 / (1.0 - prob));
  std::bernoulli_distribution keep(1.0 - prob);
  T* px = x.data();
  T* ps = saved ? saved->data() : nullptr;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const T m = keep(rng) ? scale : T(0);
    px[i] *= m;
    if (ps) ps[i] = m;
  }
}

// Self-normalising variant: dropped units are set to the SELU negative
// saturation value, then an affine map restores zero mean and unit variance.
template <typename T>
void alpha_dropout_train(const ActivationParams& p, Matrix<T>& x, Rng& rng, Matrix<T>* saved) {
  const double prob = p.dropout_p;
  check_probability(prob);
  if (saved) saved->resize(x.rows(), x.cols());
  if (prob >= 1.0) {
    x.setZero();
    if (saved) saved->setZero();
    return;
  }
  const double sat = -kSeluAlpha * kSeluScale;
  const double a = 1.0 / std::sqrt((sat * sat * prob + 1.0) * (1.0 - prob));
  const double b = -a * sat * prob;
  std::bernoulli_distribution keep(1.0 - prob);
  T* px = x.data();
  T* ps = saved ? saved->data() : nullptr;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const bool k = keep(rng);
    px[i] = k ? T(a * px[i] + b) : T(a * sat + b);
    if (ps) ps[i] = k ? T(a) : T(0);
  }
}

template <typename T>
void rrelu_train(const ActivationParams& p, Matrix<T>& x, Rng& rng, Matrix<T>* saved) {
  if (!(p.rrelu_lower <= p.rrelu_upper)) throw std::invalid_argument("RReLU bounds must satisfy lower <= upper");
  std::uniform_real_distribution<double> slope(p.rrelu_lower, p.rrelu_upper);
  if (saved) saved->resize(x.rows(), x.cols());
  T* px = x.data();
  T* ps = saved ? saved->data() : nullptr;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    T s = T(1);
    if (px[i] < T(0)) {
      s = T(slope(rng));
      px[i] *= s;
    }
    if (ps) ps[i] = s;
  }
}

// Deterministic elementwise kinds: value and right-hand derivative.
template <typename T>
void elementwise_apply(const Activation& act, Matrix<T>& x) {
  const ActivationParams& p = act.params;
  switch (act.kind) {
    case ActivationKind::CELU: {
      const T a = T(p.alpha);
      transform(x, [a](T v) { return v > T(0) ? v : a * std::expm1(v / a); });
      break;
    }
    case ActivationKind::ELU: {
      const T a = T(p.alpha);
      transform(x, [a](T v) { return v > T(0) ? v : a * std::expm1(v); });
      break;
    }
    case ActivationKind::GELU:
      transform(x, [](T v) { return gelu(v); });
      break;
    case ActivationKind::Hardshrink: {
      const T l = T(p.lambda);
      transform(x, [l](T v) { return std::abs(v) <= l ? T(0) : v; });
      break;
    }
    case ActivationKind::Hardtanh: {
      const T lo = T(p.hardtanh_min), hi = T(p.hardtanh_max);
      transform(x, [lo, hi](T v) { return v < lo ? lo : (v > hi ? hi : v); });
      break;
    }
    case ActivationKind::LeakyReLU: {
      const T s = T(p.negative_slope);
      transform(x, [s](T v) { return v < T(0) ? s * v : v; });
      break;
    }
    case ActivationKind::LogSigmoid:
      transform(x, [](T v) { return std::min(v, T(0)) - std::log1p(std::exp(-std::abs(v))); });
      break;
    case ActivationKind::PReLU: {
      const T w = T(p.prelu_weight);
      transform(x, [w](T v) { return v < T(0) ? w * v : v; });
      break;
    }
    case ActivationKind::RReLU: {
      const T s = T(rrelu_eval_slope(p.rrelu_lower, p.rrelu_upper));
      transform(x, [s](T v) { return v < T(0) ? s * v : v; });
      break;
    }
    case ActivationKind::ReLU:
      transform(x, [](T v) { return std::max(v, T(0)); });
      break;
    case ActivationKind::ReLU6:
      transform(x, [](T v) { return std::min(std::max(v, T(0)), T(6)); });
      break;
    case ActivationKind::SELU: {
      const T a = T(kSeluAlpha), s = T(kSeluScale);
      transform(x, [a, s](T v) { return s * (v > T(0) ? v : a * std::expm1(v)); });
      break;
    }
    case ActivationKind::Sigmoid:
      transform(x, [](T v) { return sigmoid(v); });
      break;
    case ActivationKind::Softplus: {
      const T t = T(p.softplus_threshold);
      transform(x, [t](T v) { return softplus(v, t); });
      break;
    }
    case ActivationKind::Softshrink: {
      const T l = T(p.lambda);
      transform(x, [l](T v) { return std::abs(v) <= l ? T(0) : v - std::copysign(l, v); });
      break;
    }
    case ActivationKind::Softsign:
      transform(x, [](T v) { return v / (T(1) + std::abs(v)); });
      break;
    // Eigen's packet tanh vectorises the float path.
    case ActivationKind::Tanh:
      x.array() = x.array().tanh();
      break;
    case ActivationKind::Tanhshrink:
      x.array() -= x.array().tanh();
      break;
    default:
      throw std::logic_error("not an elementwise kind");
  }
}

template <typename T>
Matrix<T> elementwise_derivative(const Activation& act, const Matrix<T>& x) {
  const ActivationParams& p = act.params;
  switch (act.kind) {
    case ActivationKind::CELU: {
      const T a = T(p.alpha);
      return map(x, [a](T v) { return v >= T(0) ? T(1) : std::exp(v / a); });
    }
    case ActivationKind::ELU: {
      const T a = T(p.alpha);
      return map(x, [a](T v) { return v >= T(0) ? T(1) : a * std::exp(v); });
    }
    case ActivationKind::GELU:
      return map(x, [](T v) { return gelu_grad(v); });
    case ActivationKind::Hardshrink: {
      const T l = T(p.lambda);
      return map(x, [l](T v) { return (v >= l || v < -l) ? T(1) : T(0); });
    }
    case ActivationKind::Hardtanh: {
      const T lo = T(p.hardtanh_min), hi = T(p.hardtanh_max);
      return map(x, [lo, hi](T v) { return (v >= lo && v < hi) ? T(1) : T(0); });
    }
    case ActivationKind::LeakyReLU: {
      const T s = T(p.negative_slope);
      return map(x, [s](T v) { return v < T(0) ? s : T(1); });
    }
    case ActivationKind::LogSigmoid:
      return map(x, [](T v) { return sigmoid(-v); });
    case ActivationKind::PReLU: {
      const T w = T(p.prelu_weight);
      return map(x, [w](T v) { return v < T(0) ? w : T(1); });
    }
    case ActivationKind::RReLU: {
      const T s = T(rrelu_eval_slope(p.rrelu_lower, p.rrelu_upper));
      return map(x, [s](T v) { return v < T(0) ? s : T(1); });
    }
    case ActivationKind::ReLU:
      return map(x, [](T v) { return v >= T(0) ? T(1) : T(0); });
    case ActivationKind::ReLU6:
      return map(x, [](T v) { return (v >= T(0) && v < T(6)) ? T(1) : T(0); });
    case ActivationKind::SELU: {
      const T a = T(kSeluAlpha), s = T(kSeluScale);
      return map(x, [a, s](T v) { return v >= T(0) ? s : s * a * std::exp(v); });
    }
    case ActivationKind::Sigmoid:
      return map(x, [](T v) {
        const T s = sigmoid(v);
        return s * (T(1) - s);
      });
    case ActivationKind::Softplus: {
      const T t = T(p.softplus_threshold);
      return map(x, [t](T v) { return v > t ? T(1) : sigmoid(v); });
    }
    case ActivationKind::Softshrink: {
      const T l = T(p.lambda);
      return map(x, [l](T v) { return (v >= l || v < -l) ? T(1) : T(0); });
    }
    case ActivationKind::Softsign:
      return map(x, [](T v) {
        const T d = T(1) + std::abs(v);
        return T(1) / (d * d);
      });
    case ActivationKind::Tanh:
      return map(x, [](T v) {
        const T t = std::tanh(v);
        return T(1) - t * t;
      });
    case ActivationKind::Tanhshrink:
      return map(x, [](T v) {
        const T t = std::tanh(v);
        return t * t;
      });
    default:
      throw std::logic_error("not an elementwise kind");
  }
}

}  // namespace

std::span<const ActivationKind> all_activation_kinds() noexcept { return kAllKinds; }

std::string_view name_of(ActivationKind kind) { return kNames[index_of(kind)]; }

std::string_view group_name(FunctionGroup group) noexcept {
  switch (group) {
    case FunctionGroup::Activation:
      return "activation";
    case FunctionGroup::Dropout:
      return "dropout";
    case FunctionGroup::IdentityGroup:
      return "identity";
  }
  return "?";
}

FunctionGroup group_of(ActivationKind kind) {
  index_of(kind);
  if (kind == ActivationKind::Identity) return FunctionGroup::IdentityGroup;
  if (is_dropout(kind)) return FunctionGroup::Dropout;
  return FunctionGroup::Activation;
}

std::optional<ActivationKind> find_activation(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kActivationKindCount; ++i) {
    if (iequals(kNames[i], name)) return kAllKinds[i];
  }
  return std::nullopt;
}

ActivationKind parse_activation(std::string_view name) {
  if (auto kind = find_activation(name)) return *kind;
  throw std::invalid_argument("unknown activation function '" + std::string(name) +
                              "'; valid names: " + valid_activation_names());
}

std::string valid_activation_names() {
  std::string out;
  for (auto n : kNames) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

bool is_row_wise(ActivationKind kind) noexcept {
  return kind == ActivationKind::Softmax || kind == ActivationKind::Softmin ||
         kind == ActivationKind::LogSoftmax;
}

bool is_dropout(ActivationKind kind) noexcept {
  return kind == ActivationKind::AlphaDropout || kind == ActivationKind::Dropout ||
         kind == ActivationKind::Dropout2d || kind == ActivationKind::Dropout3d;
}

std::vector<double> kinks(const Activation& act) {
  const ActivationParams& p = act.params;
  switch (act.kind) {
    case ActivationKind::ReLU:
    case ActivationKind::LeakyReLU:
    case ActivationKind::PReLU:
    case ActivationKind::RReLU:
    case ActivationKind::SELU:
      return {0.0};
    case ActivationKind::CELU:
    case ActivationKind::ELU:
      // Only C1 when alpha == 1, but listed anyway.
      return {0.0};
    case ActivationKind::ReLU6:
      return {0.0, 6.0};
    case ActivationKind::Hardtanh:
      return {p.hardtanh_min, p.hardtanh_max};
    case ActivationKind::Hardshrink:
    case ActivationKind::Softshrink:
      return {-p.lambda, p.lambda};
    case ActivationKind::Softplus:
      return {p.softplus_threshold};
    default:
      return {};
  }
}

double rrelu_eval_slope(double lower, double upper) noexcept { return (lower + upper) / 2.0; }

double eval_slope(const Activation& act) {
  if (act.kind != ActivationKind::RReLU) {
    throw std::invalid_argument("eval_slope is defined for RReLU only, got " +
                                std::string(name_of(act.kind)));
  }
  return rrelu_eval_slope(act.params.rrelu_lower, act.params.rrelu_upper);
}

template <typename T>
void apply_inplace(const Activation& act, Matrix<T>& x, EvalMode mode, Rng& rng) {
  index_of(act.kind);
  switch (act.kind) {
    case ActivationKind::Identity:
      return;
    case ActivationKind::Dropout:
    case ActivationKind::Dropout2d:
    case ActivationKind::Dropout3d:
      if (mode == EvalMode::Train) dropout_train<T>(act.params, x, rng, nullptr);
      return;
    case ActivationKind::AlphaDropout:
      if (mode == EvalMode::Train) alpha_dropout_train<T>(act.params, x, rng, nullptr);
      return;
    case ActivationKind::RReLU:
      if (mode == EvalMode::Train) {
        rrelu_train<T>(act.params, x, rng, nullptr);
      } else {
        elementwise_apply(act, x);
      }
      return;
    case ActivationKind::Softmax:
      softmax_rows(x, false);
      return;
    case ActivationKind::Softmin:
      softmax_rows(x, true);
      return;
    case ActivationKind::LogSoftmax:
      log_softmax_rows(x);
      return;
    default:
      elementwise_apply(act, x);
  }
}

template <typename T>
Matrix<T> derivative(const Activation& act, const Matrix<T>& x) {
  index_of(act.kind);
  if (act.kind == ActivationKind::Identity || is_dropout(act.kind)) {
    return Matrix<T>::Ones(x.rows(), x.cols());
  }
  if (is_row_wise(act.kind)) {
    Matrix<T> out(x.rows(), x.cols());
    const auto jac = row_jacobians(act, x);
    for (Eigen::Index r = 0; r < x.rows(); ++r) out.row(r) = jac[r].diagonal().transpose();
    return out;
  }
  return elementwise_derivative(act, x);
}

template <typename T>
std::vector<Matrix<T>> row_jacobians(const Activation& act, const Matrix<T>& x) {
  std::vector<Matrix<T>> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  const Eigen::Index d = x.cols();
  if (!is_row_wise(act.kind)) {
    const Matrix<T> diag = derivative(act, x);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      out.emplace_back(diag.row(r).asDiagonal());
    }
    return out;
  }
  Matrix<T> s = x;
  if (act.kind == ActivationKind::Softmin) {
    softmax_rows(s, true);
  } else {
    softmax_rows(s, false);
  }
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const RowVector<T> sr = s.row(r);
    Matrix<T> j(d, d);
    switch (act.kind) {
      case ActivationKind::Softmax:
        j = -sr.transpose() * sr;
        j.diagonal() += sr.transpose();
        break;
      case ActivationKind::Softmin:
        j = sr.transpose() * sr;
        j.diagonal() -= sr.transpose();
        break;
      default:  // LogSoftmax: d(x_i - lse)/dx_j = delta_ij - s_j
        j = -RowVector<T>::Ones(d).transpose() * sr;
        j.diagonal().array() += T(1);
        break;
    }
    out.push_back(std::move(j));
  }
  return out;
}

template <typename T>
void apply_for_backprop(const Activation& act, Matrix<T>& x, EvalMode mode, Rng& rng,
                        Matrix<T>& saved) {
  index_of(act.kind);
  const bool train = mode == EvalMode::Train;
  switch (act.kind) {
    case ActivationKind::Identity:
      saved.setOnes(x.rows(), x.cols());
      return;
    case ActivationKind::Dropout:
    case ActivationKind::Dropout2d:
    case ActivationKind::Dropout3d:
      if (train) {
        dropout_train<T>(act.params, x, rng, &saved);
      } else {
        saved.setOnes(x.rows(), x.cols());
      }
      return;
    case ActivationKind::AlphaDropout:
      if (train) {
        alpha_dropout_train<T>(act.params, x, rng, &saved);
      } else {
        saved.setOnes(x.rows(), x.cols());
      }
      return;
    case ActivationKind::RReLU:
      if (train) {
        rrelu_train<T>(act.params, x, rng, &saved);
        return;
      }
      break;
    default:
      break;
  }
  if (is_row_wise(act.kind)) {
    apply_inplace(act, x, mode, rng);
    saved = x;
    return;
  }
  saved = elementwise_derivative(act, x);
  elementwise_apply(act, x);
}

template <typename T>
void backprop_inplace(const Activation& act, const Matrix<T>& saved, Matrix<T>& grad) {
  if (saved.rows() != grad.rows() || saved.cols() != grad.cols()) {
    throw std::invalid_argument("backprop_inplace: saved state and gradient shapes differ");
  }
  switch (act.kind) {
    case ActivationKind::Softmax:
    case ActivationKind::Softmin: {
      // saved = s (softmax of x or of -x).
      const T sign = act.kind == ActivationKind::Softmax ? T(1) : T(-1);
      for (Eigen::Index r = 0; r < grad.rows(); ++r) {
        const T dot = grad.row(r).dot(saved.row(r));
        grad.row(r) = sign * (saved.row(r).array() * (grad.row(r).array() - dot)).matrix();
      }
      return;
    }
    case ActivationKind::LogSoftmax:
      // saved = log s.
      for (Eigen::Index r = 0; r < grad.rows(); ++r) {
        const T total = grad.row(r).sum();
        grad.row(r) = (grad.row(r).array() - saved.row(r).array().exp() * total).matrix();
      }
      return;
    default:
      grad.array() *= saved.array();
  }
}

#define ACTBENCH_INSTANTIATE(T)                                                            \
  template void apply_inplace<T>(const Activation&, Matrix<T>&, EvalMode, Rng&);          \
  template Matrix<T> derivative<T>(const Activation&, const Matrix<T>&);                  \
  template std::vector<Matrix<T>> row_jacobians<T>(const Activation&, const Matrix<T>&);  \
  template void apply_for_backprop<T>(const Activation&, Matrix<T>&, EvalMode, Rng&,      \
                                      Matrix<T>&);                                        \
  template void backprop_inplace<T>(const Activation&, const Matrix<T>&, Matrix<T>&);

ACTBENCH_INSTANTIATE(float)
ACTBENCH_INSTANTIATE(double)
#undef ACTBENCH_INSTANTIATE

}  // namespace actbench
