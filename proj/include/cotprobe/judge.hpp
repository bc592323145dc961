#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cotprobe/error.hpp"
#include "cotprobe/trace_parser.hpp"

namespace cotprobe {

enum class TaskKind { kBoxed, kChoice };

inline TaskKind parse_task_kind(std::string_view name) {
  if (name == "boxed") return TaskKind::kBoxed;
  if (name == "choice") return TaskKind::kChoice;
  throw Error(ErrorCode::kConfigError, "unknown task kind '" + std::string(name) + "'");
}

struct Judgment {
  std::size_t chunk_index = 0;
  std::optional<std::string> intermediate_answer;
  std::optional<bool> correctness;  // present iff intermediate_answer is

  bool has_answer() const { return intermediate_answer.has_value(); }
};

/// Trim, drop '$', collapse internal whitespace, lowercase.
inline std::string normalize_answer(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  for (char c : raw) {
    if (c == '$') continue;
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

namespace detail {
inline std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}
}  // namespace detail

inline bool answers_match(std::string_view answer, std::string_view truth) {
  const std::string a = normalize_answer(answer);
  const std::string b = normalize_answer(truth);
  if (a == b) return true;
  const auto na = detail::parse_number(a);
  const auto nb = detail::parse_number(b);
  return na && nb && *na == *nb;
}

/// Content of the last well-formed \boxed{...} in the text.
inline std::optional<std::string> extract_last_boxed(std::string_view text) {
  static constexpr std::string_view kOpen = "\\boxed{";
  std::size_t search_end = text.size();
  while (true) {
    const auto at = text.rfind(kOpen, search_end);
    if (at == std::string_view::npos) return std::nullopt;
    std::size_t depth = 1;
    std::size_t i = at + kOpen.size();
    for (; i < text.size() && depth > 0; ++i) {
      if (text[i] == '{') ++depth;
      else if (text[i] == '}') --depth;
    }
    if (depth == 0) {
      const std::size_t begin = at + kOpen.size();
      return std::string(text.substr(begin, i - 1 - begin));
    }
    if (at == 0) return std::nullopt;
    search_end = at - 1;
  }
}

/// Last standalone option letter (A-H) in the text. A capital followed by a
/// space and a lowercase word is read as prose ("A cat"), not an option.
inline std::optional<std::string> extract_last_choice(std::string_view text) {
  if (auto boxed = extract_last_boxed(text)) {
    const std::string norm = normalize_answer(*boxed);
    if (norm.size() == 1 && norm[0] >= 'a' && norm[0] <= 'h')
      return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(norm[0]))));
  }
  auto is_alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (std::size_t i = text.size(); i-- > 0;) {
    const char c = text[i];
    if (c < 'A' || c > 'H') continue;
    if (i > 0 && (is_alnum(text[i - 1]) || text[i - 1] == '\\')) continue;
    if (i + 1 < text.size() && is_alnum(text[i + 1])) continue;
    if (i + 2 < text.size() && text[i + 1] == ' ' && std::islower(static_cast<unsigned char>(text[i + 2])))
      continue;
    return std::string(1, c);
  }
  return std::nullopt;
}

inline std::optional<std::string> extract_answer(std::string_view text, TaskKind kind) {
  return kind == TaskKind::kBoxed ? extract_last_boxed(text) : extract_last_choice(text);
}

/// Offline deterministic judge.
inline std::vector<Judgment> judge_chunks_rule(const std::vector<RawChunk>& chunks, std::string_view ground_truth,
                                               TaskKind kind) {
  if (normalize_answer(ground_truth).empty())
    throw Error(ErrorCode::kDataError, "ground truth is empty");
  std::vector<Judgment> out;
  out.reserve(chunks.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    Judgment j;
    j.chunk_index = i;
    if (auto answer = extract_answer(chunks[i].text, kind)) {
      j.correctness = answers_match(*answer, ground_truth);
      j.intermediate_answer = std::move(answer);
    }
    out.push_back(std::move(j));
  }
  return out;
}

inline std::vector<Judgment> judge_chunks_rule(const std::vector<RawChunk>& chunks, std::string_view ground_truth,
                                               std::string_view task_kind) {
  return judge_chunks_rule(chunks, ground_truth, parse_task_kind(task_kind));
}

}  // namespace cotprobe
