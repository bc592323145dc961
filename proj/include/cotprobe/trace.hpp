#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cotprobe {

/// One chunk as stored in a trace file. Parsed chunks carry no answer or
/// label; judged chunks carry both.
struct TraceChunk {
  std::string text;
  std::size_t paragraph_count = 0;
  std::size_t token_count = 0;
  std::optional<std::string> intermediate_answer;
  std::optional<bool> label;

  bool labeled() const { return intermediate_answer.has_value() && label.has_value(); }

  bool operator==(const TraceChunk&) const = default;
};

/// One problem's full generation.
struct ReasoningTrace {
  std::string id;
  std::string question;
  std::string ground_truth;
  std::string trace_text;
  std::optional<std::string> final_answer;
  std::optional<bool> final_answer_correct;
  std::size_t total_tokens = 0;
  std::vector<TraceChunk> chunks;
  // Fields present in the source record that this schema does not know.
  nlohmann::json extra = nlohmann::json::object();

  std::size_t labeled_chunk_count() const {
    std::size_t n = 0;
    for (const auto& c : chunks) n += c.labeled() ? 1 : 0;
    return n;
  }

  std::size_t labeled_paragraph_count() const {
    std::size_t n = 0;
    for (const auto& c : chunks) n += c.labeled() ? c.paragraph_count : 0;
    return n;
  }

  bool operator==(const ReasoningTrace&) const = default;
};

}  // namespace cotprobe
