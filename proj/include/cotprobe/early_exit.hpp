#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotprobe/error.hpp"

namespace cotprobe {

struct ExitChunk {
  double confidence = 0.0;
  bool label = false;
  std::size_t token_count = 0;
};

/// A recorded trace with probe confidences for each labeled chunk.
struct TraceRecord {
  std::string trace_id;
  std::vector<ExitChunk> chunks;
  bool final_answer_correct = false;
  std::size_t total_tokens = 0;

  void validate() const {
    if (chunks.empty()) throw Error(ErrorCode::kDataError, "trace '" + trace_id + "' has no chunks");
    std::size_t sum = 0;
    for (const auto& c : chunks) sum += c.token_count;
    if (total_tokens < sum)
      throw Error(ErrorCode::kDataError, "trace '" + trace_id + "' total_tokens is below its chunk token sum");
  }
};

/// First index whose confidence reaches `threshold`, if any.
inline std::optional<std::size_t> confidence_exit(std::span<const double> confidences, double threshold) {
  if (confidences.empty()) throw Error(ErrorCode::kDataError, "no confidences");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorCode::kConfigError, "threshold must lie in [0, 1]");
  for (std::size_t i = 0; i < confidences.size(); ++i)
    if (confidences[i] >= threshold) return i;
  return std::nullopt;
}

/// Exit after the m-th chunk; with fewer than m chunks this is the last one.
inline std::size_t static_exit(std::size_t k, std::size_t m) {
  if (k < 1 || m < 1) throw Error(ErrorCode::kConfigError, "static exit needs k >= 1 and m >= 1");
  return m <= k ? m - 1 : k - 1;
}

struct NoExit {};
struct ConfidenceExit {
  double threshold = 0.9;
};
struct StaticExit {
  std::size_t m = 1;
};
using ExitStrategy = std::variant<NoExit, ConfidenceExit, StaticExit>;

struct ExitDecision {
  std::size_t exit_chunk_index = 0;
  bool exited_early = false;
  bool answer_correct = false;
  std::size_t tokens_used = 0;
};

/// Early exit charges the think-span prefix up to and including the exit
/// chunk; no exit charges the whole generation and uses the final answer.
inline ExitDecision decide(const TraceRecord& record, const ExitStrategy& strategy) {
  record.validate();
  const std::size_t k = record.chunks.size();
  std::optional<std::size_t> exit;
  if (const auto* c = std::get_if<ConfidenceExit>(&strategy)) {
    std::vector<double> conf;
    conf.reserve(k);
    for (const auto& ch : record.chunks) conf.push_back(ch.confidence);
    exit = confidence_exit(conf, c->threshold);
  } else if (const auto* s = std::get_if<StaticExit>(&strategy)) {
    if (s->m <= k) exit = static_exit(k, s->m);
  }

  ExitDecision d;
  if (!exit) {
    d.exit_chunk_index = k - 1;
    d.exited_early = false;
    d.answer_correct = record.final_answer_correct;
    d.tokens_used = record.total_tokens;
    return d;
  }
  d.exit_chunk_index = *exit;
  d.exited_early = true;
  d.answer_correct = record.chunks[*exit].label;
  for (std::size_t i = 0; i <= *exit; ++i) d.tokens_used += record.chunks[i].token_count;
  return d;
}

struct SimulationResult {
  double accuracy = 0.0;
  double mean_tokens = 0.0;
  std::vector<ExitDecision> decisions;
};

inline SimulationResult simulate(const std::vector<TraceRecord>& records, const ExitStrategy& strategy,
                                 std::size_t jobs = 1) {
  if (records.empty()) throw Error(ErrorCode::kDataError, "no trace records to simulate");
  SimulationResult result;
  result.decisions.resize(records.size());
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, records.size());
  if (n_threads == 1) {
    for (std::size_t i = 0; i < records.size(); ++i) result.decisions[i] = decide(records[i], strategy);
  } else {
    std::vector<std::exception_ptr> errors(n_threads);
    {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < n_threads; ++t)
        pool.emplace_back([&, t] {
          try {
            for (std::size_t i = t; i < records.size(); i += n_threads)
              result.decisions[i] = decide(records[i], strategy);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  double correct = 0.0, tokens = 0.0;
  for (const auto& d : result.decisions) {
    correct += d.answer_correct ? 1.0 : 0.0;
    tokens += static_cast<double>(d.tokens_used);
  }
  const double n = static_cast<double>(records.size());
  result.accuracy = correct / n;
  result.mean_tokens = tokens / n;
  return result;
}

struct CurvePoint {
  std::string strategy;  // "none", "confidence", "static"
  double setting = 0.0;
  double accuracy = 0.0;
  double mean_tokens = 0.0;
  double token_reduction = 0.0;
};

using SweepCurve = std::vector<CurvePoint>;

namespace detail {
inline CurvePoint curve_point(std::string strategy, double setting, const SimulationResult& r, double baseline) {
  return {std::move(strategy), setting, r.accuracy, r.mean_tokens,
          baseline > 0.0 ? 1.0 - r.mean_tokens / baseline : 0.0};
}
}  // namespace detail

inline CurvePoint baseline_point(const std::vector<TraceRecord>& records, std::size_t jobs = 1) {
  const auto r = simulate(records, NoExit{}, jobs);
  return detail::curve_point("none", 0.0, r, r.mean_tokens);
}

/// One confidence-exit simulation per threshold, in the given order.
inline SweepCurve sweep(const std::vector<TraceRecord>& records, const std::vector<double>& thresholds,
                        std::size_t jobs = 1) {
  if (thresholds.empty()) throw Error(ErrorCode::kConfigError, "no thresholds to sweep");
  for (double t : thresholds)
    if (!(t >= 0.0 && t <= 1.0))
      throw Error(ErrorCode::kConfigError, "threshold " + std::to_string(t) + " outside [0, 1]");
  const double baseline = simulate(records, NoExit{}, jobs).mean_tokens;
  SweepCurve curve;
  for (double t : thresholds)
    curve.push_back(detail::curve_point("confidence", t, simulate(records, ConfidenceExit{t}, jobs), baseline));
  return curve;
}

inline SweepCurve sweep_static(const std::vector<TraceRecord>& records, const std::vector<std::size_t>& ms,
                               std::size_t jobs = 1) {
  if (ms.empty()) throw Error(ErrorCode::kConfigError, "no chunk counts to sweep");
  for (std::size_t m : ms)
    if (m < 1) throw Error(ErrorCode::kConfigError, "static chunk count must be >= 1");
  const double baseline = simulate(records, NoExit{}, jobs).mean_tokens;
  SweepCurve curve;
  for (std::size_t m : ms)
    curve.push_back(
        detail::curve_point("static", static_cast<double>(m), simulate(records, StaticExit{m}, jobs), baseline));
  return curve;
}

/// "none", "thr=<threshold>" or "m=<chunks>".
inline std::string setting_label(const CurvePoint& p) {
  if (p.strategy == "none") return "none";
  std::ostringstream out;
  if (p.strategy == "static") {
    out << "m=" << static_cast<std::size_t>(p.setting);
  } else {
    out << "thr=" << p.setting;
  }
  return out.str();
}

inline std::string curve_csv(const SweepCurve& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "setting,accuracy,mean_tokens,token_reduction\n";
  for (const auto& p : curve)
    out << setting_label(p) << ',' << p.accuracy << ',' << p.mean_tokens << ',' << p.token_reduction << '\n';
  return out.str();
}

inline nlohmann::ordered_json to_json(const SweepCurve& curve) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : curve)
    arr.push_back({{"strategy", p.strategy},
                   {"setting", p.setting},
                   {"accuracy", p.accuracy},
                   {"mean_tokens", p.mean_tokens},
                   {"token_reduction", p.token_reduction}});
  return arr;
}

}  // namespace cotprobe
