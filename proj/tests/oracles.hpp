#pragma once

// Reference computations for the tests. Each one takes the slow, obvious
// route and shares no code with the implementation it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "cotprobe/dataset.hpp"
#include "cotprobe/probe.hpp"

namespace oracle {

/// P(score_pos > score_neg) + 0.5 P(tie), over every positive/negative pair.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

/// ECE by scanning every bin's interval [b/n, (b+1)/n) (last bin closed).
inline double naive_ece(const std::vector<double>& scores, const std::vector<bool>& labels, std::size_t n_bins) {
  double total = 0.0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double lo = static_cast<double>(b) / static_cast<double>(n_bins);
    const double hi = static_cast<double>(b + 1) / static_cast<double>(n_bins);
    double count = 0.0, conf = 0.0, hits = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool inside = scores[i] >= lo && (b + 1 == n_bins ? scores[i] <= hi : scores[i] < hi);
      if (!inside) continue;
      count += 1.0;
      conf += scores[i];
      hits += labels[i] ? 1.0 : 0.0;
    }
    if (count > 0.0) total += (count / static_cast<double>(scores.size())) * std::abs(hits / count - conf / count);
  }
  return total;
}

inline double naive_brier(const std::vector<double>& scores, const std::vector<bool>& labels) {
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double y = labels[i] ? 1.0 : 0.0;
    sum += (scores[i] - y) * (scores[i] - y);
  }
  return sum / static_cast<double>(scores.size());
}

/// Weighted BCE straight from its definition, evaluated in double.
inline double direct_loss(const cotprobe::BasicProbeParams<double>& p, std::span<const cotprobe::LabeledVector> batch,
                          double w, double alpha) {
  double total = 0.0;
  for (const auto& s : batch) {
    double z = p.b2;
    if (p.d == 0) {
      for (std::size_t j = 0; j < p.m; ++j) z += s.embedding[j] * p.w1[j];
    } else {
      for (std::size_t k = 0; k < p.d; ++k) {
        double a = p.b1[k];
        for (std::size_t j = 0; j < p.m; ++j) a += s.embedding[j] * p.w1[j * p.d + k];
        z += std::max(a, 0.0) * p.w2[k];
      }
    }
    double prob = 1.0 / (1.0 + std::exp(-z));
    prob = std::min(std::max(prob, 1e-7), 1.0 - 1e-7);
    const double y = s.label ? 1.0 : 0.0;
    total += w * alpha * y * std::log(prob) + (1.0 - y) * std::log(1.0 - prob);
  }
  return -total / static_cast<double>(batch.size());
}

/// Central finite differences of `direct_loss` for every parameter, in the
/// params' for_each order.
inline std::vector<double> finite_difference_gradient(const cotprobe::BasicProbeParams<double>& params,
                                                      std::span<const cotprobe::LabeledVector> batch, double w,
                                                      double alpha, double h = 1e-4) {
  std::vector<double> out;
  auto probe = params;
  std::vector<double*> slots;
  probe.for_each([&](double& v) { slots.push_back(&v); });
  for (double* slot : slots) {
    const double saved = *slot;
    *slot = saved + h;
    const double up = direct_loss(probe, batch, w, alpha);
    *slot = saved - h;
    const double down = direct_loss(probe, batch, w, alpha);
    *slot = saved;
    out.push_back((up - down) / (2.0 * h));
  }
  return out;
}

/// One random (params, batch, w, alpha) draw for gradient checking. Draws
/// with a ReLU pre-activation within `kink_margin` of zero are resampled so
/// finite differences never straddle the kink.
struct GradientDraw {
  cotprobe::BasicProbeParams<double> params;
  std::vector<std::vector<float>> rows;
  std::vector<cotprobe::LabeledVector> batch;
  double w = 1.0;
  double alpha = 1.0;
};

inline GradientDraw gradient_draw(std::mt19937_64& gen, std::size_t m, std::size_t d, double kink_margin = 1e-3) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> batch_size(1, 12);
  while (true) {
    GradientDraw g;
    g.params = cotprobe::BasicProbeParams<double>::zeros(m, d);
    g.params.for_each([&](double& v) { v = unit(gen); });
    const std::size_t n = batch_size(gen);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<float> row(m);
      for (auto& v : row) v = static_cast<float>(unit(gen));
      g.rows.push_back(std::move(row));
    }
    bool near_kink = false;
    for (std::size_t i = 0; i < n; ++i) {
      g.batch.push_back({g.rows[i], gen() % 2 == 0});
      for (std::size_t k = 0; k < d; ++k) {
        double a = g.params.b1[k];
        for (std::size_t j = 0; j < m; ++j) a += g.rows[i][j] * g.params.w1[j * d + k];
        near_kink = near_kink || std::abs(a) < kink_margin;
      }
    }
    if (near_kink) continue;
    g.w = 0.2 + 4.8 * (unit(gen) + 1.0) / 2.0;
    g.alpha = 0.3 + 2.7 * (unit(gen) + 1.0) / 2.0;
    return g;
  }
}

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline std::optional<std::size_t> first_hit(const std::vector<double>& confidences, double threshold) {
  for (std::size_t i = 0; i < confidences.size(); ++i)
    if (confidences[i] >= threshold) return i;
  return std::nullopt;
}

/// Two isotropic Gaussian clusters in `dim` dimensions whose means sit at
/// +-separation/2 along a random unit direction. `positive_share` of the
/// points are positives. Each point is its own source problem.
inline cotprobe::ProbingDataset gaussian_clusters(std::size_t n, std::size_t dim, double separation,
                                                  double positive_share, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> direction(dim);
  double norm = 0.0;
  for (auto& v : direction) {
    v = normal(gen);
    norm += v * v;
  }
  for (auto& v : direction) v /= std::sqrt(norm);

  cotprobe::ProbingDataset ds;
  ds.m = dim;
  const auto n_pos = static_cast<std::size_t>(std::llround(positive_share * static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i) {
    const bool positive = i < n_pos;
    const double offset = positive ? separation / 2.0 : -separation / 2.0;
    cotprobe::ProbingExample e;
    e.embedding.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) e.embedding[j] = static_cast<float>(normal(gen) + offset * direction[j]);
    e.label = positive;
    e.trace_id = "p" + std::to_string(i);
    e.token_count = 100;
    ds.examples.push_back(std::move(e));
  }
  std::shuffle(ds.examples.begin(), ds.examples.end(), gen);
  return ds;
}

}  // namespace oracle
