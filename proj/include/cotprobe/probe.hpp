#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cotprobe/error.hpp"
#include "cotprobe/random.hpp"

namespace cotprobe {

/// Parameters of p = sigmoid(ReLU(e W1 + b1) W2 + b2).
///
/// With d == 0 the hidden layer is absent and the probe is logistic
/// regression, p = sigmoid(e W + b); `w1` then holds W (length m) and `b2`
/// holds b, while `b1` and `w2` stay empty.
template <typename Real>
struct BasicProbeParams {
  std::size_t m = 0;
  std::size_t d = 0;
  std::vector<Real> w1;  // m x d row-major, or W when linear
  std::vector<Real> b1;  // d
  std::vector<Real> w2;  // d (the d x 1 column)
  Real b2 = 0;

  bool linear() const { return d == 0; }

  std::size_t parameter_count() const { return linear() ? m + 1 : m * d + 2 * d + 1; }

  static BasicProbeParams zeros(std::size_t m, std::size_t d) {
    BasicProbeParams p;
    p.m = m;
    p.d = d;
    p.w1.assign(d == 0 ? m : m * d, Real(0));
    p.b1.assign(d, Real(0));
    p.w2.assign(d, Real(0));
    return p;
  }

  /// Per-layer uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static BasicProbeParams random_init(std::size_t m, std::size_t d, Rng& rng) {
    auto p = zeros(m, d);
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(m, 1)));
    for (auto& v : p.w1) v = static_cast<Real>(rng.uniform(-in_bound, in_bound));
    if (d == 0) {
      p.b2 = static_cast<Real>(rng.uniform(-in_bound, in_bound));
      return p;
    }
    for (auto& v : p.b1) v = static_cast<Real>(rng.uniform(-in_bound, in_bound));
    const double hidden_bound = 1.0 / std::sqrt(static_cast<double>(d));
    for (auto& v : p.w2) v = static_cast<Real>(rng.uniform(-hidden_bound, hidden_bound));
    p.b2 = static_cast<Real>(rng.uniform(-hidden_bound, hidden_bound));
    return p;
  }

  template <typename Other>
  BasicProbeParams<Other> cast() const {
    BasicProbeParams<Other> out;
    out.m = m;
    out.d = d;
    out.w1.assign(w1.begin(), w1.end());
    out.b1.assign(b1.begin(), b1.end());
    out.w2.assign(w2.begin(), w2.end());
    out.b2 = static_cast<Other>(b2);
    return out;
  }

  /// Visits every scalar parameter in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    for (auto& v : w1) f(v);
    for (auto& v : b1) f(v);
    for (auto& v : w2) f(v);
    f(b2);
  }

  template <typename F>
  void for_each(F&& f) const {
    for (const auto& v : w1) f(v);
    for (const auto& v : b1) f(v);
    for (const auto& v : w2) f(v);
    f(b2);
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](Real v) { ok = ok && std::isfinite(static_cast<double>(v)); });
    return ok;
  }

  void check_shape() const {
    const bool ok = linear() ? (w1.size() == m && b1.empty() && w2.empty())
                             : (w1.size() == m * d && b1.size() == d && w2.size() == d);
    if (!ok || m == 0) throw Error(ErrorCode::kShapeError, "probe parameter shapes are inconsistent with m/d");
  }

  bool operator==(const BasicProbeParams&) const = default;
};

using ProbeParams = BasicProbeParams<float>;

struct LabeledVector {
  std::span<const float> embedding;
  bool label = false;
};

inline constexpr double kProbabilityEpsilon = 1e-7;

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

namespace detail {

template <typename Real>
void check_input(const BasicProbeParams<Real>& params, std::span<const float> e) {
  if (e.size() != params.m)
    throw Error(ErrorCode::kShapeError,
                "embedding has " + std::to_string(e.size()) + " components, probe expects " + std::to_string(params.m));
}

// Pre-sigmoid logit; fills `hidden_pre` with e W1 + b1 when non-null.
template <typename Real>
double logit(const BasicProbeParams<Real>& params, std::span<const float> e, std::vector<double>* hidden_pre) {
  const std::size_t m = params.m;
  const std::size_t d = params.d;
  if (d == 0) {
    double z = static_cast<double>(params.b2);
    for (std::size_t j = 0; j < m; ++j) z += static_cast<double>(e[j]) * static_cast<double>(params.w1[j]);
    return z;
  }
  std::vector<double> local;
  std::vector<double>& pre = hidden_pre ? *hidden_pre : local;
  pre.assign(params.b1.begin(), params.b1.end());
  for (std::size_t j = 0; j < m; ++j) {
    const double ej = e[j];
    if (ej == 0.0) continue;
    const Real* row = params.w1.data() + j * d;
    for (std::size_t k = 0; k < d; ++k) pre[k] += ej * static_cast<double>(row[k]);
  }
  double z = static_cast<double>(params.b2);
  for (std::size_t k = 0; k < d; ++k)
    if (pre[k] > 0.0) z += pre[k] * static_cast<double>(params.w2[k]);
  return z;
}

}  // namespace detail

template <typename Real>
double forward_logit(const BasicProbeParams<Real>& params, std::span<const float> e) {
  detail::check_input(params, e);
  return detail::logit(params, e, nullptr);
}

/// Probability that the answer represented by `e` is correct.
template <typename Real>
double forward(const BasicProbeParams<Real>& params, std::span<const float> e) {
  return sigmoid(forward_logit(params, e));
}

inline double clamp_probability(double p) {
  return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

/// Ratio of negative to positive labels.
inline double imbalance_weight(const std::vector<bool>& labels) {
  std::size_t pos = 0;
  for (bool y : labels) pos += y ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw Error(ErrorCode::kDegenerateLabels, "labels contain a single class");
  return static_cast<double>(neg) / static_cast<double>(pos);
}

/// The two sums of the weighted BCE, each already divided by N, so that
/// loss = positive + negative.
struct LossTerms {
  double positive = 0.0;
  double negative = 0.0;

  double total() const { return positive + negative; }
};

template <typename Real>
LossTerms loss_terms(const BasicProbeParams<Real>& params, std::span<const LabeledVector> batch, double w,
                     double alpha) {
  LossTerms terms;
  if (batch.empty()) throw Error(ErrorCode::kDataError, "loss of an empty batch");
  for (const auto& s : batch) {
    const double p = clamp_probability(forward(params, s.embedding));
    if (s.label)
      terms.positive -= w * alpha * std::log(p);
    else
      terms.negative -= std::log(1.0 - p);
  }
  const double n = static_cast<double>(batch.size());
  terms.positive /= n;
  terms.negative /= n;
  return terms;
}

/// Weighted binary cross-entropy averaged over the batch.
template <typename Real>
double loss(const BasicProbeParams<Real>& params, std::span<const LabeledVector> batch, double w, double alpha) {
  return loss_terms(params, batch, w, alpha).total();
}

/// Exact gradient of `loss` (including its probability clamp, which has
/// zero slope where it binds). The ReLU subgradient at 0 is 0.
template <typename Real>
BasicProbeParams<Real> gradients(const BasicProbeParams<Real>& params, std::span<const LabeledVector> batch, double w,
                                 double alpha) {
  if (batch.empty()) throw Error(ErrorCode::kDataError, "gradient of an empty batch");
  const std::size_t m = params.m;
  const std::size_t d = params.d;
  std::vector<double> gw1(params.w1.size(), 0.0), gb1(d, 0.0), gw2(d, 0.0);
  double gb2 = 0.0;
  std::vector<double> pre;
  std::vector<double> dh(d, 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  for (const auto& s : batch) {
    detail::check_input(params, s.embedding);
    const double z = detail::logit(params, s.embedding, &pre);
    const double p = sigmoid(z);
    if (p < kProbabilityEpsilon || p > 1.0 - kProbabilityEpsilon) continue;
    const double dz = (s.label ? w * alpha * (p - 1.0) : p) * inv_n;
    gb2 += dz;
    if (d == 0) {
      for (std::size_t j = 0; j < m; ++j) gw1[j] += dz * s.embedding[j];
      continue;
    }
    for (std::size_t k = 0; k < d; ++k) {
      dh[k] = 0.0;
      if (pre[k] <= 0.0) continue;
      gw2[k] += dz * pre[k];
      dh[k] = dz * static_cast<double>(params.w2[k]);
      gb1[k] += dh[k];
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double ej = s.embedding[j];
      if (ej == 0.0) continue;
      double* row = gw1.data() + j * d;
      for (std::size_t k = 0; k < d; ++k) row[k] += dh[k] * ej;
    }
  }

  BasicProbeParams<Real> g;
  g.m = m;
  g.d = d;
  g.w1.assign(gw1.begin(), gw1.end());
  g.b1.assign(gb1.begin(), gb1.end());
  g.w2.assign(gw2.begin(), gw2.end());
  g.b2 = static_cast<Real>(gb2);
  return g;
}

}  // namespace cotprobe
