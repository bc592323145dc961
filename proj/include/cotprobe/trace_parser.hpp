#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotprobe/error.hpp"

namespace cotprobe {

/// Phrases that open a new reasoning path.
inline const std::vector<std::string>& default_keywords() {
  static const std::vector<std::string> keywords = {
      "wait", "double-check", "alternatively", "make sure", "another way", "verify", "to confirm"};
  return keywords;
}

struct ParserConfig {
  std::vector<std::string> keywords = default_keywords();
  std::string delimiter = "\n\n";
  std::string think_open = "<think>";
  std::string think_close = "</think>";

  void validate() const {
    if (keywords.empty()) throw Error(ErrorCode::kConfigError, "keyword list is empty");
    if (delimiter.empty()) throw Error(ErrorCode::kConfigError, "delimiter is empty");
    if (think_open.empty() || think_close.empty())
      throw Error(ErrorCode::kConfigError, "think markers must be non-empty");
  }
};

/// Reads a config document. Missing fields keep their defaults; keywords
/// are lowercased on load.
inline ParserConfig parser_config_from_json(const nlohmann::json& doc) {
  ParserConfig config;
  if (!doc.is_object()) throw Error(ErrorCode::kConfigError, "parser config must be a JSON object");
  try {
    if (doc.contains("keywords")) {
      config.keywords.clear();
      for (const auto& kw : doc.at("keywords")) {
        std::string lowered = kw.get<std::string>();
        std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        config.keywords.push_back(std::move(lowered));
      }
    }
    if (doc.contains("delimiter")) config.delimiter = doc.at("delimiter").get<std::string>();
    if (doc.contains("think_open")) config.think_open = doc.at("think_open").get<std::string>();
    if (doc.contains("think_close")) config.think_close = doc.at("think_close").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("bad parser config: ") + e.what());
  }
  config.validate();
  return config;
}

inline ParserConfig load_parser_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open parser config " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kConfigError, path + ": " + e.what());
  }
  return parser_config_from_json(doc);
}

struct Paragraph {
  std::size_t index = 0;
  std::string text;
  std::pair<std::size_t, std::size_t> char_span{0, 0};  // [start, end) into the think text
};

struct RawChunk {
  std::size_t index = 0;
  std::size_t first_paragraph = 0;
  std::size_t paragraph_count = 0;
  std::string text;
  bool starts_new_path = false;
  std::size_t token_count = 0;  // filled from extraction output when known

  std::size_t end_paragraph() const { return first_paragraph + paragraph_count; }
};

/// Returns the reasoning span of a model output. Outputs without markers
/// are returned whole. An output carrying only the closing marker (the
/// opening one was part of the prompt) yields everything before it.
inline std::string extract_think_span(std::string_view raw_output, const ParserConfig& config) {
  const auto open = raw_output.find(config.think_open);
  if (open == std::string_view::npos) {
    const auto close = raw_output.find(config.think_close);
    if (close == std::string_view::npos) return std::string(raw_output);
    return std::string(raw_output.substr(0, close));
  }
  const auto body = open + config.think_open.size();
  const auto close = raw_output.find(config.think_close, body);
  if (close == std::string_view::npos)
    throw Error(ErrorCode::kMalformedTrace, "think_open without matching think_close");
  return std::string(raw_output.substr(body, close - body));
}

/// Text following the reasoning span, or empty when there is none.
inline std::string extract_post_think(std::string_view raw_output, const ParserConfig& config) {
  const auto open = raw_output.find(config.think_open);
  const auto from = open == std::string_view::npos ? 0 : open + config.think_open.size();
  const auto close = raw_output.find(config.think_close, from);
  if (close == std::string_view::npos) return {};
  return std::string(raw_output.substr(close + config.think_close.size()));
}

namespace detail {
inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
}  // namespace detail

inline std::vector<Paragraph> split_paragraphs(std::string_view think_text, const ParserConfig& config) {
  if (think_text.empty()) throw Error(ErrorCode::kEmptyTrace, "think text is empty");
  std::vector<Paragraph> out;
  std::size_t pos = 0;
  while (pos <= think_text.size()) {
    auto next = think_text.find(config.delimiter, pos);
    if (next == std::string_view::npos) next = think_text.size();
    std::size_t start = pos;
    std::size_t end = next;
    while (start < end && detail::is_space(think_text[start])) ++start;
    while (end > start && detail::is_space(think_text[end - 1])) --end;
    if (start < end) {
      Paragraph p;
      p.index = out.size();
      p.text = std::string(think_text.substr(start, end - start));
      p.char_span = {start, end};
      out.push_back(std::move(p));
    }
    if (next == think_text.size()) break;
    pos = next + config.delimiter.size();
  }
  if (out.empty()) throw Error(ErrorCode::kEmptyTrace, "think text contains only whitespace");
  return out;
}

/// Case-insensitive substring match against the configured keywords.
inline bool detect_path_start(const Paragraph& paragraph, const ParserConfig& config) {
  std::string lowered = paragraph.text;
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return std::any_of(config.keywords.begin(), config.keywords.end(), [&](const std::string& kw) {
    return !kw.empty() && lowered.find(kw) != std::string::npos;
  });
}

inline std::string join(const std::vector<std::string>& parts, std::string_view delimiter) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += delimiter;
    out += parts[i];
  }
  return out;
}

inline std::vector<RawChunk> group_chunks(const std::vector<Paragraph>& paragraphs, const ParserConfig& config) {
  std::vector<RawChunk> chunks;
  std::vector<std::string> texts;
  auto flush = [&] {
    if (texts.empty()) return;
    chunks.back().text = join(texts, config.delimiter);
    texts.clear();
  };
  for (std::size_t i = 0; i < paragraphs.size(); ++i) {
    const bool boundary = detect_path_start(paragraphs[i], config);
    if (i == 0 || boundary) {
      flush();
      RawChunk chunk;
      chunk.index = chunks.size();
      chunk.first_paragraph = i;
      chunk.starts_new_path = boundary;
      chunks.push_back(std::move(chunk));
    }
    chunks.back().paragraph_count += 1;
    texts.push_back(paragraphs[i].text);
  }
  flush();
  return chunks;
}

/// Full segmentation: think span, paragraphs, chunks.
inline std::vector<RawChunk> segment_trace(std::string_view raw_output, const ParserConfig& config) {
  return group_chunks(split_paragraphs(extract_think_span(raw_output, config), config), config);
}

}  // namespace cotprobe
