#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cotprobe/embedding.hpp"
#include "cotprobe/error.hpp"
#include "cotprobe/judge.hpp"
#include "cotprobe/random.hpp"
#include "cotprobe/trace.hpp"
#include "cotprobe/trace_parser.hpp"

namespace cotprobe {

/// A reasoning-path segment that ends in an intermediate answer.
struct LabeledChunk {
  std::string text;
  std::string intermediate_answer;
  bool label = false;
  std::size_t token_count = 0;
  std::size_t first_paragraph = 0;
  std::size_t paragraph_count = 0;
  std::size_t first_raw_chunk = 0;
  std::size_t raw_chunk_count = 0;
};

/// Folds every answer-less chunk into its nearest answered neighbour by
/// index distance; equidistant chunks go to the following one. Returns an
/// empty list when no chunk is answered.
inline std::vector<LabeledChunk> merge_unanswered(const std::vector<RawChunk>& chunks,
                                                  const std::vector<Judgment>& judgments,
                                                  std::string_view delimiter = "\n\n") {
  if (chunks.size() != judgments.size())
    throw Error(ErrorCode::kAlignmentError, "judgments do not align with chunks");
  const std::size_t n = chunks.size();
  std::vector<std::size_t> answered;
  for (std::size_t i = 0; i < n; ++i)
    if (judgments[i].has_answer()) answered.push_back(i);
  if (answered.empty()) return {};

  // owner[i] = position in `answered` that chunk i merges into
  std::vector<std::size_t> owner(n);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (next < answered.size() && answered[next] < i) ++next;
    if (next < answered.size() && answered[next] == i) {
      owner[i] = next;
      continue;
    }
    if (next == answered.size()) {
      owner[i] = answered.size() - 1;
    } else if (next == 0) {
      owner[i] = 0;
    } else {
      const std::size_t forward = answered[next] - i;
      const std::size_t backward = i - answered[next - 1];
      owner[i] = forward <= backward ? next : next - 1;
    }
  }

  std::vector<LabeledChunk> out(answered.size());
  std::vector<std::vector<std::string>> texts(answered.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = out[owner[i]];
    if (dst.raw_chunk_count == 0) {
      dst.first_raw_chunk = i;
      dst.first_paragraph = chunks[i].first_paragraph;
    }
    dst.raw_chunk_count += 1;
    dst.paragraph_count += chunks[i].paragraph_count;
    dst.token_count += chunks[i].token_count;
    texts[owner[i]].push_back(chunks[i].text);
  }
  for (std::size_t k = 0; k < answered.size(); ++k) {
    const auto& j = judgments[answered[k]];
    out[k].text = join(texts[k], delimiter);
    out[k].intermediate_answer = *j.intermediate_answer;
    out[k].label = j.correctness.value_or(false);
  }
  return out;
}

enum class DatasetMode { kIntermediate, kLookahead, kFinal };

inline const char* to_string(DatasetMode mode) {
  switch (mode) {
    case DatasetMode::kIntermediate: return "intermediate";
    case DatasetMode::kLookahead: return "lookahead";
    case DatasetMode::kFinal: return "final";
  }
  return "intermediate";
}

inline DatasetMode parse_dataset_mode(std::string_view name) {
  if (name == "intermediate") return DatasetMode::kIntermediate;
  if (name == "lookahead") return DatasetMode::kLookahead;
  if (name == "final") return DatasetMode::kFinal;
  throw Error(ErrorCode::kConfigError, "unknown dataset mode '" + std::string(name) + "'");
}

struct ProbingExample {
  std::vector<float> embedding;
  bool label = false;
  std::string trace_id;
  std::size_t chunk_index = 0;
  std::size_t token_count = 0;
  std::optional<double> fraction;  // position within the chunk, look-ahead only

  bool operator==(const ProbingExample&) const = default;
};

struct ProbingDataset {
  std::vector<ProbingExample> examples;
  std::size_t m = 0;
  DatasetMode mode = DatasetMode::kIntermediate;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }

  std::vector<bool> labels() const {
    std::vector<bool> out;
    out.reserve(examples.size());
    for (const auto& e : examples) out.push_back(e.label);
    return out;
  }

  bool operator==(const ProbingDataset&) const = default;
};

namespace detail {

struct RowBlock {
  const ReasoningTrace* trace = nullptr;
  std::size_t first_row = 0;
};

// Lays out which rows belong to which trace and checks every count against
// what the traces themselves imply.
template <typename UnitCount>
std::vector<RowBlock> align_rows(const std::vector<ReasoningTrace>& traces, const EmbeddingMatrix& embeddings,
                                 const AlignmentIndex& alignment, UnitCount unit_count) {
  if (!alignment.counts.empty() && alignment.counts.size() != alignment.trace_order.size())
    throw Error(ErrorCode::kAlignmentError, "alignment counts do not match trace_order length");
  std::unordered_map<std::string, const ReasoningTrace*> by_id;
  for (const auto& t : traces) by_id.emplace(t.id, &t);

  std::vector<const ReasoningTrace*> order;
  if (alignment.trace_order.empty()) {
    for (const auto& t : traces) order.push_back(&t);
  } else {
    std::unordered_set<std::string> listed;
    for (const auto& id : alignment.trace_order) {
      auto it = by_id.find(id);
      if (it == by_id.end())
        throw Error(ErrorCode::kAlignmentError, "trace '" + id + "' in alignment is missing from the traces");
      if (!listed.insert(id).second)
        throw Error(ErrorCode::kAlignmentError, "trace '" + id + "' listed twice in alignment");
      order.push_back(it->second);
    }
    for (const auto& t : traces)
      if (!listed.count(t.id) && unit_count(t) > 0)
        throw Error(ErrorCode::kAlignmentError, "trace '" + t.id + "' has no rows in the alignment");
  }

  std::vector<RowBlock> blocks;
  std::size_t row = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t expected = unit_count(*order[i]);
    if (!alignment.counts.empty() && alignment.counts[i] != expected)
      throw Error(ErrorCode::kAlignmentError, "trace '" + order[i]->id + "' has " + std::to_string(expected) +
                                                  " units but alignment declares " +
                                                  std::to_string(alignment.counts[i]));
    blocks.push_back({order[i], row});
    row += expected;
  }
  if (row != embeddings.rows())
    throw Error(ErrorCode::kAlignmentError, "expected " + std::to_string(row) + " embedding rows, found " +
                                                std::to_string(embeddings.rows()));
  if (!embeddings.all_finite()) throw Error(ErrorCode::kDataError, "embedding matrix contains NaN or Inf");
  return blocks;
}

inline std::vector<float> copy_row(const EmbeddingMatrix& m, std::size_t r) {
  const auto row = m.row(r);
  return {row.begin(), row.end()};
}

inline void warn_skipped(std::size_t skipped, std::string_view why) {
  if (skipped > 0) warn("skipped " + std::to_string(skipped) + " trace(s) " + std::string(why));
}

}  // namespace detail

/// One example per labeled chunk.
inline ProbingDataset build_probing_dataset(const std::vector<ReasoningTrace>& traces,
                                            const EmbeddingMatrix& embeddings, const AlignmentIndex& alignment) {
  const auto blocks = detail::align_rows(traces, embeddings, alignment,
                                         [](const ReasoningTrace& t) { return t.labeled_chunk_count(); });
  ProbingDataset ds;
  ds.m = embeddings.cols();
  ds.mode = DatasetMode::kIntermediate;
  std::size_t skipped = 0;
  for (const auto& block : blocks) {
    std::size_t row = block.first_row;
    std::size_t ordinal = 0;
    if (block.trace->labeled_chunk_count() == 0) ++skipped;
    for (const auto& chunk : block.trace->chunks) {
      if (!chunk.labeled()) continue;
      ds.examples.push_back({detail::copy_row(embeddings, row++), *chunk.label, block.trace->id, ordinal++,
                             chunk.token_count, std::nullopt});
    }
  }
  detail::warn_skipped(skipped, "with no labeled chunks");
  return ds;
}

/// One example per paragraph of every labeled chunk, labeled with that
/// chunk's correctness and tagged with its position inside the chunk.
inline ProbingDataset build_lookahead_dataset(const std::vector<ReasoningTrace>& traces,
                                              const EmbeddingMatrix& paragraph_embeddings,
                                              const AlignmentIndex& alignment) {
  const auto blocks = detail::align_rows(traces, paragraph_embeddings, alignment,
                                         [](const ReasoningTrace& t) { return t.labeled_paragraph_count(); });
  ProbingDataset ds;
  ds.m = paragraph_embeddings.cols();
  ds.mode = DatasetMode::kLookahead;
  std::size_t skipped = 0;
  for (const auto& block : blocks) {
    std::size_t row = block.first_row;
    std::size_t ordinal = 0;
    if (block.trace->labeled_chunk_count() == 0) ++skipped;
    for (const auto& chunk : block.trace->chunks) {
      if (!chunk.labeled()) continue;
      const std::size_t n = chunk.paragraph_count;
      for (std::size_t p = 0; p < n; ++p) {
        const double fraction = static_cast<double>(p + 1) / static_cast<double>(n);
        ds.examples.push_back({detail::copy_row(paragraph_embeddings, row++), *chunk.label, block.trace->id, ordinal,
                               chunk.token_count, fraction});
      }
      ++ordinal;
    }
  }
  detail::warn_skipped(skipped, "with no labeled chunks");
  return ds;
}

/// Final-answer correctness of a trace: the recorded flag when present,
/// otherwise the rule comparison against the ground truth.
inline std::optional<bool> final_answer_label(const ReasoningTrace& trace) {
  if (trace.final_answer_correct) return trace.final_answer_correct;
  if (trace.final_answer && !normalize_answer(*trace.final_answer).empty())
    return answers_match(*trace.final_answer, trace.ground_truth);
  return std::nullopt;
}

inline ProbingDataset build_final_answer_dataset(const std::vector<ReasoningTrace>& traces,
                                                 const EmbeddingMatrix& final_embeddings,
                                                 const AlignmentIndex& alignment = {}) {
  const auto blocks =
      detail::align_rows(traces, final_embeddings, alignment, [](const ReasoningTrace&) { return std::size_t{1}; });
  ProbingDataset ds;
  ds.m = final_embeddings.cols();
  ds.mode = DatasetMode::kFinal;
  std::size_t skipped = 0;
  for (const auto& block : blocks) {
    const auto label = final_answer_label(*block.trace);
    if (!label) {
      ++skipped;
      continue;
    }
    ds.examples.push_back({detail::copy_row(final_embeddings, block.first_row), *label, block.trace->id, 0,
                           block.trace->total_tokens, std::nullopt});
  }
  detail::warn_skipped(skipped, "without a final answer");
  return ds;
}

/// Keeps every example of at most `max_source_problems` distinct traces,
/// chosen uniformly without replacement. Example order is preserved.
inline ProbingDataset downsample(const ProbingDataset& dataset, std::size_t max_source_problems, std::uint64_t seed) {
  if (max_source_problems < 1) throw Error(ErrorCode::kConfigError, "max_source_problems must be >= 1");
  std::vector<std::string> ids;
  std::unordered_set<std::string> seen;
  for (const auto& e : dataset.examples)
    if (seen.insert(e.trace_id).second) ids.push_back(e.trace_id);
  if (ids.size() <= max_source_problems) return dataset;

  Rng rng(seed);
  for (std::size_t i = 0; i < max_source_problems; ++i) std::swap(ids[i], ids[i + rng.index(ids.size() - i)]);
  const std::unordered_set<std::string> keep(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(max_source_problems));

  ProbingDataset out;
  out.m = dataset.m;
  out.mode = dataset.mode;
  for (const auto& e : dataset.examples)
    if (keep.count(e.trace_id)) out.examples.push_back(e);
  return out;
}

struct TrainValSplit {
  ProbingDataset train;
  ProbingDataset val;
};

/// Random example-level split; the train share is round(n * train / (train + val)).
inline TrainValSplit split_train_val(const ProbingDataset& dataset, std::uint64_t seed, std::size_t train_parts = 8,
                                     std::size_t val_parts = 2) {
  const std::size_t n = dataset.size();
  if (n < 5) throw Error(ErrorCode::kDataError, "need at least 5 examples to split, have " + std::to_string(n));
  if (train_parts == 0 || val_parts == 0) throw Error(ErrorCode::kConfigError, "split ratio parts must be positive");
  const std::size_t total = train_parts + val_parts;
  const std::size_t n_train = (2 * n * train_parts + total) / (2 * total);

  Rng rng(seed);
  auto order = rng.permutation(n);
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  TrainValSplit split;
  split.train.m = split.val.m = dataset.m;
  split.train.mode = split.val.mode = dataset.mode;
  for (std::size_t i = 0; i < n; ++i)
    (i < n_train ? split.train : split.val).examples.push_back(dataset.examples[order[i]]);
  return split;
}

struct DatasetStats {
  std::size_t n_examples = 0;  // distinct source problems
  std::size_t n_chunks = 0;
  double positive_fraction = 0.0;
  double mean_chunk_token_length = 0.0;

  bool operator==(const DatasetStats&) const = default;
};

inline DatasetStats dataset_stats(const ProbingDataset& dataset) {
  DatasetStats stats;
  if (dataset.empty()) return stats;
  std::unordered_set<std::string> ids;
  std::size_t positives = 0;
  double tokens = 0.0;
  for (const auto& e : dataset.examples) {
    ids.insert(e.trace_id);
    positives += e.label ? 1 : 0;
    tokens += static_cast<double>(e.token_count);
  }
  stats.n_examples = ids.size();
  stats.n_chunks = dataset.size();
  stats.positive_fraction = static_cast<double>(positives) / static_cast<double>(dataset.size());
  stats.mean_chunk_token_length = tokens / static_cast<double>(dataset.size());
  return stats;
}

/// Rebuilds raw chunks (with paragraph ranges) from stored trace chunks.
inline std::vector<RawChunk> raw_chunks_of(const ReasoningTrace& trace) {
  std::vector<RawChunk> out;
  std::size_t paragraph = 0;
  for (std::size_t i = 0; i < trace.chunks.size(); ++i) {
    RawChunk c;
    c.index = i;
    c.first_paragraph = paragraph;
    c.paragraph_count = trace.chunks[i].paragraph_count;
    c.text = trace.chunks[i].text;
    c.starts_new_path = i > 0;
    c.token_count = trace.chunks[i].token_count;
    paragraph += c.paragraph_count;
    out.push_back(std::move(c));
  }
  return out;
}

inline std::vector<TraceChunk> to_trace_chunks(const std::vector<LabeledChunk>& chunks) {
  std::vector<TraceChunk> out;
  out.reserve(chunks.size());
  for (const auto& c : chunks) out.push_back({c.text, c.paragraph_count, c.token_count, c.intermediate_answer, c.label});
  return out;
}

}  // namespace cotprobe
