#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotprobe/dataset.hpp"
#include "cotprobe/error.hpp"
#include "cotprobe/probe.hpp"
#include "cotprobe/random.hpp"

namespace cotprobe {

struct TrainConfig {
  double learning_rate = 1e-3;
  double alpha = 1.0;
  double weight_decay = 0.01;
  std::size_t hidden_size = 0;
  std::size_t max_epochs = 200;
  std::size_t batch_size = 64;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  // Replaces the negative/positive ratio; used for unweighted baselines.
  std::optional<double> imbalance_weight_override;

  void validate() const {
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::kConfigError, "learning_rate must be > 0");
    if (!(alpha > 0.0)) throw Error(ErrorCode::kConfigError, "alpha must be > 0");
    if (weight_decay < 0.0) throw Error(ErrorCode::kConfigError, "weight_decay must be >= 0");
    if (max_epochs == 0) throw Error(ErrorCode::kConfigError, "max_epochs must be >= 1");
    if (batch_size == 0) throw Error(ErrorCode::kConfigError, "batch_size must be >= 1");
    if (imbalance_weight_override && !(*imbalance_weight_override > 0.0))
      throw Error(ErrorCode::kConfigError, "imbalance weight override must be > 0");
  }

  bool operator==(const TrainConfig&) const = default;
};

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["alpha"] = c.alpha;
  j["weight_decay"] = c.weight_decay;
  j["hidden_size"] = c.hidden_size;
  j["max_epochs"] = c.max_epochs;
  j["batch_size"] = c.batch_size;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  if (c.imbalance_weight_override) j["imbalance_weight_override"] = *c.imbalance_weight_override;
  return j;
}

/// Missing keys keep their defaults.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
  try {
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("hidden_size")) c.hidden_size = j.at("hidden_size").get<std::size_t>();
    if (j.contains("max_epochs")) c.max_epochs = j.at("max_epochs").get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("patience")) c.patience = j.at("patience").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("imbalance_weight_override") && !j.at("imbalance_weight_override").is_null())
      c.imbalance_weight_override = j.at("imbalance_weight_override").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("bad train config: ") + e.what());
  }
  c.validate();
  return c;
}

struct TrainedProbe {
  ProbeParams params;
  TrainConfig config;
  double val_accuracy = 0.0;
  double val_loss = 0.0;
  std::size_t best_epoch = 0;  // 1-based
  std::size_t epochs_run = 0;
  double imbalance_weight = 1.0;
  std::size_t run_index = 0;  // position in grid enumeration
  std::vector<double> val_loss_history;
};

/// Adam with decoupled weight decay on weight matrices (biases are not decayed).
class AdamW {
 public:
  AdamW(const ProbeParams& shape, double learning_rate, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
    first_ = shape.cast<double>();
    first_.for_each([](double& v) { v = 0.0; });
    second_ = first_;
  }

  void step(ProbeParams& params, const ProbeParams& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    update(params.w1, grads.w1, first_.w1, second_.w1, true, c1, c2);
    update(params.b1, grads.b1, first_.b1, second_.b1, false, c1, c2);
    update(params.w2, grads.w2, first_.w2, second_.w2, true, c1, c2);
    update_one(params.b2, grads.b2, first_.b2, second_.b2, false, c1, c2);
  }

 private:
  void update_one(float& p, float g, double& m, double& v, bool decay, double c1, double c2) const {
    double value = p;
    if (decay) value *= 1.0 - lr_ * wd_;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * static_cast<double>(g) * g;
    value -= lr_ * (m / c1) / (std::sqrt(v / c2) + eps_);
    p = static_cast<float>(value);
  }

  void update(std::vector<float>& p, const std::vector<float>& g, std::vector<double>& m, std::vector<double>& v,
              bool decay, double c1, double c2) const {
    for (std::size_t i = 0; i < p.size(); ++i) update_one(p[i], g[i], m[i], v[i], decay, c1, c2);
  }

  double lr_, wd_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  BasicProbeParams<double> first_;
  BasicProbeParams<double> second_;
};

inline std::vector<LabeledVector> labeled_vectors(const ProbingDataset& ds) {
  std::vector<LabeledVector> out;
  out.reserve(ds.size());
  for (const auto& e : ds.examples) out.push_back({e.embedding, e.label});
  return out;
}

/// Fraction of examples where (p >= threshold) equals the label.
inline double probe_accuracy(const ProbeParams& params, std::span<const LabeledVector> samples,
                             double threshold = 0.5) {
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : samples) hits += ((forward(params, s.embedding) >= threshold) == s.label) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

/// Mini-batch AdamW on the weighted BCE. Stops once validation loss has not
/// improved for `patience` epochs and returns the best-validation-loss
/// parameters. Deterministic given the config seed.
inline TrainedProbe train(const ProbingDataset& train_set, const ProbingDataset& val_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty() || val_set.empty()) throw Error(ErrorCode::kDataError, "train and val sets must be non-empty");
  if (train_set.m != val_set.m) throw Error(ErrorCode::kShapeError, "train and val dimensions differ");
  if (train_set.m == 0) throw Error(ErrorCode::kShapeError, "dataset dimension is zero");
  const double natural_weight = imbalance_weight(train_set.labels());
  const double w = config.imbalance_weight_override.value_or(natural_weight);

  const auto train_samples = labeled_vectors(train_set);
  const auto val_samples = labeled_vectors(val_set);

  Rng rng(config.seed);
  ProbeParams params = ProbeParams::random_init(train_set.m, config.hidden_size, rng);
  AdamW optimizer(params, config.learning_rate, config.weight_decay);

  TrainedProbe result;
  result.config = config;
  result.imbalance_weight = w;
  result.params = params;
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<LabeledVector> batch;
  batch.reserve(config.batch_size);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto order = rng.permutation(train_samples.size());
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_samples[order[i]]);
      optimizer.step(params, gradients(params, std::span<const LabeledVector>(batch), w, config.alpha));
    }
    const double val = loss(params, std::span<const LabeledVector>(val_samples), w, config.alpha);
    result.val_loss_history.push_back(val);
    result.epochs_run = epoch;
    if (!std::isfinite(val)) throw Error(ErrorCode::kDataError, "validation loss diverged");
    if (val < best) {
      best = val;
      since_best = 0;
      result.params = params;
      result.best_epoch = epoch;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  result.val_loss = best;
  result.val_accuracy = probe_accuracy(result.params, val_samples);
  return result;
}

struct GridSpace {
  std::vector<double> learning_rates{1e-3, 1e-4, 1e-5};
  std::vector<double> alphas{0.3, 0.5, 0.7, 0.9, 1.0, 1.5, 2.0, 3.0};
  std::vector<double> weight_decays{0.001, 0.01, 0.1};
  std::vector<std::size_t> hidden_sizes{0, 16, 32};

  std::size_t size() const {
    return learning_rates.size() * alphas.size() * weight_decays.size() * hidden_sizes.size();
  }

  void validate() const {
    if (size() == 0) throw Error(ErrorCode::kConfigError, "every grid axis needs at least one value");
  }

  /// Cartesian product; learning rate varies slowest, hidden size fastest.
  std::vector<TrainConfig> enumerate(const TrainConfig& base) const {
    std::vector<TrainConfig> out;
    out.reserve(size());
    for (double lr : learning_rates)
      for (double a : alphas)
        for (double wd : weight_decays)
          for (std::size_t d : hidden_sizes) {
            TrainConfig c = base;
            c.learning_rate = lr;
            c.alpha = a;
            c.weight_decay = wd;
            c.hidden_size = d;
            out.push_back(c);
          }
    return out;
  }
};

inline GridSpace grid_space_from_json(const nlohmann::json& j) {
  GridSpace s;
  try {
    if (j.contains("learning_rates")) s.learning_rates = j.at("learning_rates").get<std::vector<double>>();
    if (j.contains("alphas")) s.alphas = j.at("alphas").get<std::vector<double>>();
    if (j.contains("weight_decays")) s.weight_decays = j.at("weight_decays").get<std::vector<double>>();
    if (j.contains("hidden_sizes")) s.hidden_sizes = j.at("hidden_sizes").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("bad grid space: ") + e.what());
  }
  s.validate();
  return s;
}

struct GridFailure {
  std::size_t run_index = 0;
  TrainConfig config;
  std::string message;
};

struct GridResult {
  std::vector<TrainedProbe> runs;  // successful runs, enumeration order
  std::vector<GridFailure> failures;
};

/// Trains every configuration of `space` on one shared seeded split.
/// `jobs` > 1 runs configurations concurrently; output order and content do
/// not depend on it.
inline GridResult grid_search(const ProbingDataset& dataset, const GridSpace& space, std::uint64_t seed,
                              std::size_t jobs = 1, const TrainConfig& base = {}) {
  space.validate();
  const auto split = split_train_val(dataset, seed);
  TrainConfig seeded = base;
  seeded.seed = seed;
  const auto configs = space.enumerate(seeded);

  std::vector<std::optional<TrainedProbe>> slots(configs.size());
  std::vector<std::string> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        auto run = train(split.train, split.val, configs[i]);
        run.run_index = i;
        slots[i] = std::move(run);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, configs.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  GridResult result;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (slots[i])
      result.runs.push_back(std::move(*slots[i]));
    else
      result.failures.push_back({i, configs[i], errors[i]});
  }
  if (result.runs.empty())
    throw Error(ErrorCode::kGridError,
                "all " + std::to_string(configs.size()) + " grid runs failed; first: " + errors.front());
  return result;
}

/// Among the ten runs with the highest validation accuracy, picks the one
/// with the smallest hidden size. Remaining ties: higher accuracy, lower
/// validation loss, earlier enumeration.
inline const TrainedProbe& select_probe(const std::vector<TrainedProbe>& runs, std::size_t top_k = 10) {
  if (runs.empty()) throw Error(ErrorCode::kGridError, "no runs to select from");
  std::vector<std::size_t> order(runs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (runs[a].val_accuracy != runs[b].val_accuracy) return runs[a].val_accuracy > runs[b].val_accuracy;
    return runs[a].run_index < runs[b].run_index;
  });
  order.resize(std::min(top_k, order.size()));
  const auto better = [&](std::size_t a, std::size_t b) {
    const auto& x = runs[a];
    const auto& y = runs[b];
    if (x.config.hidden_size != y.config.hidden_size) return x.config.hidden_size < y.config.hidden_size;
    if (x.val_accuracy != y.val_accuracy) return x.val_accuracy > y.val_accuracy;
    if (x.val_loss != y.val_loss) return x.val_loss < y.val_loss;
    return x.run_index < y.run_index;
  };
  return runs[*std::min_element(order.begin(), order.end(), better)];
}

}  // namespace cotprobe
