#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotprobe/dataset.hpp"
#include "cotprobe/error.hpp"
#include "cotprobe/probe.hpp"

namespace cotprobe {

struct ScoredSet {
  std::vector<double> scores;
  std::vector<bool> labels;

  std::size_t size() const { return scores.size(); }

  void validate() const {
    if (scores.size() != labels.size()) throw Error(ErrorCode::kDataError, "scores and labels differ in length");
    for (double s : scores)
      if (!std::isfinite(s) || s < 0.0 || s > 1.0) throw Error(ErrorCode::kDataError, "score outside [0, 1]");
  }
};

/// Scores a dataset with a probe.
inline ScoredSet score_dataset(const ProbeParams& params, const ProbingDataset& ds) {
  ScoredSet set;
  set.scores.reserve(ds.size());
  for (const auto& e : ds.examples) {
    set.scores.push_back(forward(params, e.embedding));
    set.labels.push_back(e.label);
  }
  return set;
}

/// Mann-Whitney U with midranks for ties.
inline double roc_auc(const ScoredSet& set) {
  set.validate();
  const std::size_t n = set.size();
  std::size_t pos = 0;
  for (bool y : set.labels) pos += y ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw Error(ErrorCode::kDegenerateLabels, "ROC-AUC needs both classes");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return set.scores[a] < set.scores[b]; });
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && set.scores[order[j]] == set.scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (set.labels[order[k]]) positive_rank_sum += midrank;
    i = j;
  }
  const double p = static_cast<double>(pos);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

struct ReliabilityBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double empirical_accuracy = 0.0;
};

using ReliabilityTable = std::vector<ReliabilityBin>;

/// Index of the equal-width bin holding `x`: [b/n, (b+1)/n), with the last
/// bin closed on the right.
inline std::size_t bin_index(double x, std::size_t n_bins) {
  const double n = static_cast<double>(n_bins);
  auto b = static_cast<std::size_t>(std::clamp(std::floor(x * n), 0.0, n - 1.0));
  while (b > 0 && x < static_cast<double>(b) / n) --b;
  while (b + 1 < n_bins && x >= static_cast<double>(b + 1) / n) ++b;
  return b;
}

inline ReliabilityTable reliability_table(const ScoredSet& set, std::size_t n_bins = 10) {
  set.validate();
  if (n_bins < 1) throw Error(ErrorCode::kConfigError, "n_bins must be >= 1");
  ReliabilityTable table(n_bins);
  std::vector<double> conf(n_bins, 0.0), hits(n_bins, 0.0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::size_t b = bin_index(set.scores[i], n_bins);
    table[b].count += 1;
    conf[b] += set.scores[i];
    hits[b] += set.labels[i] ? 1.0 : 0.0;
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    table[b].lower = static_cast<double>(b) / static_cast<double>(n_bins);
    table[b].upper = static_cast<double>(b + 1) / static_cast<double>(n_bins);
    if (table[b].count > 0) {
      table[b].mean_confidence = conf[b] / static_cast<double>(table[b].count);
      table[b].empirical_accuracy = hits[b] / static_cast<double>(table[b].count);
    }
  }
  return table;
}

/// Expected calibration error over equal-width bins.
inline double ece(const ScoredSet& set, std::size_t n_bins = 10) {
  if (set.size() == 0) throw Error(ErrorCode::kDataError, "ECE of an empty set");
  const auto table = reliability_table(set, n_bins);
  double total = 0.0;
  for (const auto& bin : table) {
    if (bin.count == 0) continue;
    total += static_cast<double>(bin.count) * std::abs(bin.empirical_accuracy - bin.mean_confidence);
  }
  return total / static_cast<double>(set.size());
}

inline double brier(const ScoredSet& set) {
  set.validate();
  if (set.size() == 0) throw Error(ErrorCode::kDataError, "Brier score of an empty set");
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double r = set.scores[i] - (set.labels[i] ? 1.0 : 0.0);
    total += r * r;
  }
  return total / static_cast<double>(set.size());
}

struct ConfusionMetrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double macro_f1 = 0.0;
};

/// Thresholded metrics; any ratio with a zero denominator is 0.
inline ConfusionMetrics confusion_metrics(const ScoredSet& set, double threshold = 0.5) {
  set.validate();
  if (set.size() == 0) throw Error(ErrorCode::kDataError, "confusion metrics of an empty set");
  ConfusionMetrics c;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const bool predicted = set.scores[i] >= threshold;
    if (predicted && set.labels[i]) ++c.tp;
    else if (predicted) ++c.fp;
    else if (set.labels[i]) ++c.fn;
    else ++c.tn;
  }
  auto ratio = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  c.accuracy = (tp + tn) / static_cast<double>(set.size());
  c.precision = ratio(tp, tp + fp);
  c.recall = ratio(tp, tp + fn);
  const double f1_pos = ratio(2.0 * tp, 2.0 * tp + fp + fn);
  const double f1_neg = ratio(2.0 * tn, 2.0 * tn + fn + fp);
  c.macro_f1 = 0.5 * (f1_pos + f1_neg);
  return c;
}

struct BucketMetrics {
  std::size_t bucket = 0;  // 1-based
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double accuracy = 0.0;
  std::optional<double> roc_auc;  // absent when the bucket holds one class
  double ece = 0.0;
  double brier = 0.0;
};

/// 1-based bucket for a positional fraction in (0, 1]: ((b-1)/n, b/n].
inline std::size_t fraction_bucket(double fraction, std::size_t buckets) {
  const double n = static_cast<double>(buckets);
  auto b = static_cast<std::size_t>(std::clamp(std::ceil(fraction * n), 1.0, n));
  while (b > 1 && fraction <= static_cast<double>(b - 1) / n) --b;
  while (b < buckets && fraction > static_cast<double>(b) / n) ++b;
  return b;
}

/// Per-bucket metrics for scored look-ahead examples. Empty buckets are
/// omitted.
inline std::vector<BucketMetrics> lookahead_curve(const std::vector<double>& fractions, const ScoredSet& set,
                                                  std::size_t buckets = 10) {
  set.validate();
  if (buckets < 1) throw Error(ErrorCode::kConfigError, "buckets must be >= 1");
  if (fractions.size() != set.size()) throw Error(ErrorCode::kDataError, "fractions and scores differ in length");
  std::vector<ScoredSet> parts(buckets);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::size_t b = fraction_bucket(fractions[i], buckets);
    parts[b - 1].scores.push_back(set.scores[i]);
    parts[b - 1].labels.push_back(set.labels[i]);
  }
  std::vector<BucketMetrics> out;
  for (std::size_t b = 0; b < buckets; ++b) {
    const auto& part = parts[b];
    if (part.size() == 0) continue;
    BucketMetrics m;
    m.bucket = b + 1;
    m.lower = static_cast<double>(b) / static_cast<double>(buckets);
    m.upper = static_cast<double>(b + 1) / static_cast<double>(buckets);
    m.count = part.size();
    m.accuracy = confusion_metrics(part).accuracy;
    const bool both = std::any_of(part.labels.begin(), part.labels.end(), [](bool y) { return y; }) &&
                      std::any_of(part.labels.begin(), part.labels.end(), [](bool y) { return !y; });
    if (both) m.roc_auc = roc_auc(part);
    m.ece = ece(part);
    m.brier = brier(part);
    out.push_back(m);
  }
  return out;
}

inline std::vector<BucketMetrics> lookahead_curve(const ProbingDataset& dataset, const ProbeParams& params,
                                                  std::size_t buckets = 10) {
  std::vector<double> fractions;
  fractions.reserve(dataset.size());
  for (const auto& e : dataset.examples) {
    if (!e.fraction) throw Error(ErrorCode::kDataError, "look-ahead curve needs positional fractions");
    fractions.push_back(*e.fraction);
  }
  return lookahead_curve(fractions, score_dataset(params, dataset), buckets);
}

// --- reports ---------------------------------------------------------------

struct EvalReport {
  std::size_t n = 0;
  std::optional<double> roc_auc;
  double ece = 0.0;
  double brier = 0.0;
  ConfusionMetrics confusion;
  ReliabilityTable reliability;
};

inline EvalReport evaluate(const ScoredSet& set, std::size_t n_bins = 10, double threshold = 0.5) {
  EvalReport r;
  r.n = set.size();
  std::size_t pos = 0;
  for (bool y : set.labels) pos += y ? 1 : 0;
  if (pos > 0 && pos < set.size()) r.roc_auc = roc_auc(set);
  r.ece = ece(set, n_bins);
  r.brier = brier(set);
  r.confusion = confusion_metrics(set, threshold);
  r.reliability = reliability_table(set, n_bins);
  return r;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["roc_auc"] = r.roc_auc ? nlohmann::ordered_json(*r.roc_auc) : nlohmann::ordered_json(nullptr);
  j["ece"] = r.ece;
  j["brier"] = r.brier;
  j["accuracy"] = r.confusion.accuracy;
  j["precision"] = r.confusion.precision;
  j["recall"] = r.confusion.recall;
  j["macro_f1"] = r.confusion.macro_f1;
  j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
  auto bins = nlohmann::ordered_json::array();
  for (const auto& b : r.reliability)
    bins.push_back({{"lower", b.lower},
                    {"upper", b.upper},
                    {"count", b.count},
                    {"mean_confidence", b.mean_confidence},
                    {"empirical_accuracy", b.empirical_accuracy}});
  j["reliability"] = bins;
  return j;
}

inline std::string reliability_csv(const ReliabilityTable& table) {
  std::ostringstream out;
  out.precision(17);
  out << "lower,upper,count,mean_confidence,empirical_accuracy\n";
  for (const auto& b : table)
    out << b.lower << ',' << b.upper << ',' << b.count << ',' << b.mean_confidence << ',' << b.empirical_accuracy
        << '\n';
  return out.str();
}

inline nlohmann::ordered_json to_json(const std::vector<BucketMetrics>& curve) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& m : curve) {
    nlohmann::ordered_json j;
    j["bucket"] = m.bucket;
    j["lower"] = m.lower;
    j["upper"] = m.upper;
    j["count"] = m.count;
    j["accuracy"] = m.accuracy;
    j["roc_auc"] = m.roc_auc ? nlohmann::ordered_json(*m.roc_auc) : nlohmann::ordered_json(nullptr);
    j["ece"] = m.ece;
    j["brier"] = m.brier;
    arr.push_back(j);
  }
  return arr;
}

inline std::string lookahead_csv(const std::vector<BucketMetrics>& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "bucket,lower,upper,count,accuracy,roc_auc,ece,brier\n";
  for (const auto& m : curve) {
    out << m.bucket << ',' << m.lower << ',' << m.upper << ',' << m.count << ',' << m.accuracy << ',';
    if (m.roc_auc) out << *m.roc_auc;
    out << ',' << m.ece << ',' << m.brier << '\n';
  }
  return out.str();
}

}  // namespace cotprobe
