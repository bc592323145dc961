#pragma once

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "httplib.h"

#include "cotprobe/error.hpp"
#include "cotprobe/judge.hpp"
#include "cotprobe/trace_parser.hpp"

namespace cotprobe {

/// Evaluation prompt; must match assets/judge_prompt.txt byte for byte.
inline constexpr std::string_view kJudgePromptTemplate =
    "Given several chunks of a reasoning trace, along with a ground-truth answer, independently evaluate each chunk. "
    "If a chunk reaches a result at the end, return the intermediate result; otherwise, return None if the chunk does "
    "not contain an intermediate result (e.g., pure reflections).\n"
    "Then, if an intermediate answer exists, compare it to the ground-truth answer. If the intermediate result in the "
    "chunk equals the ground-truth answer, return True; if the intermediate result in the chunk does not equal the "
    "ground-truth answer, return False; if no intermediate answer exists, return None.\n"
    "Output in JSON format:\n"
    "[\n"
    "  {\"id\": \"1\", \"result\": \"6 + 9i\" / None, \"correctness\": True / False / None},\n"
    "  ...\n"
    "]\n"
    "Input chunks: {reasoning_trace}\n"
    "Ground-truth answer: {answer}\n";

/// An OpenAI-compatible chat-completions service.
struct JudgeEndpoint {
  std::string base_url;  // e.g. https://host/v1
  std::string api_key_env = "JUDGE_API_KEY";
  std::string model;
  double timeout_seconds = 60.0;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Sends one request body, returns the response; throws on transport failure.
using JudgeTransport = std::function<HttpResponse(const std::string& request_body)>;

struct RetryPolicy {
  std::vector<std::chrono::milliseconds> backoff{std::chrono::seconds(1), std::chrono::seconds(4),
                                                 std::chrono::seconds(16)};
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

/// Numbers the chunks 1..k in the form the judge is asked to echo back.
inline std::string format_chunks_for_judge(const std::vector<RawChunk>& chunks) {
  std::string out;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    out += "\n[Chunk " + std::to_string(i + 1) + "]\n";
    out += chunks[i].text;
    out += '\n';
  }
  return out;
}

inline std::string render_judge_prompt(std::string_view tmpl, const std::vector<RawChunk>& chunks,
                                       std::string_view answer) {
  std::string out(tmpl);
  auto replace = [&out](std::string_view key, const std::string& value) {
    const auto at = out.find(key);
    if (at == std::string::npos) throw Error(ErrorCode::kConfigError, "prompt template lacks " + std::string(key));
    out.replace(at, key.size(), value);
  };
  // {answer} first so a chunk that happens to contain "{answer}" is not touched.
  replace("{answer}", std::string(answer));
  replace("{reasoning_trace}", format_chunks_for_judge(chunks));
  return out;
}

inline nlohmann::json judge_request_body(const JudgeEndpoint& endpoint, const std::string& prompt) {
  return {{"model", endpoint.model},
          {"temperature", 0},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
}

namespace detail {

// Rewrites the Python literals None/True/False outside string literals.
inline std::string jsonify_python_literals(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  auto word_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < text.size()) out.push_back(text[++i]);
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    bool replaced = false;
    if (i == 0 || !word_char(text[i - 1])) {
      for (auto [py, js] : {std::pair<std::string_view, std::string_view>{"None", "null"},
                            {"True", "true"},
                            {"False", "false"}}) {
        if (text.substr(i, py.size()) == py && (i + py.size() == text.size() || !word_char(text[i + py.size()]))) {
          out += js;
          i += py.size() - 1;
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out.push_back(c);
  }
  return out;
}

inline bool is_none_token(const nlohmann::json& v) {
  if (v.is_null()) return true;
  if (!v.is_string()) return false;
  std::string s = normalize_answer(v.get<std::string>());
  return s == "none" || s == "null" || s.empty();
}

inline std::optional<bool> read_correctness(const nlohmann::json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const std::string s = normalize_answer(v.get<std::string>());
    if (s == "true") return true;
    if (s == "false") return false;
    if (s == "none" || s == "null" || s.empty()) return std::nullopt;
  }
  if (v.is_null()) return std::nullopt;
  throw Error(ErrorCode::kJudgeParseError, "unrecognised correctness value " + v.dump());
}

inline std::size_t read_id(const nlohmann::json& v) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer() && v.get<long long>() > 0) return static_cast<std::size_t>(v.get<long long>());
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    std::size_t id = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
    if (ec == std::errc() && ptr == s.data() + s.size()) return id;
  }
  throw Error(ErrorCode::kJudgeParseError, "unusable chunk id " + v.dump());
}

}  // namespace detail

/// Parses the judge's JSON array for `chunk_count` chunks. Accepts a
/// fenced code block and Python-style None/True/False.
inline std::vector<Judgment> parse_judge_output(std::string_view content, std::size_t chunk_count) {
  const auto open = content.find('[');
  const auto close = content.rfind(']');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open)
    throw Error(ErrorCode::kJudgeParseError, "judge output contains no JSON array");
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(detail::jsonify_python_literals(content.substr(open, close - open + 1)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kJudgeParseError, e.what());
  }
  if (!arr.is_array()) throw Error(ErrorCode::kJudgeParseError, "judge output is not an array");

  std::vector<std::optional<Judgment>> slots(chunk_count);
  for (const auto& rec : arr) {
    if (!rec.is_object() || !rec.contains("id"))
      throw Error(ErrorCode::kJudgeParseError, "judge record without id: " + rec.dump());
    const std::size_t id = detail::read_id(rec.at("id"));
    if (id < 1 || id > chunk_count || slots[id - 1])
      throw Error(ErrorCode::kJudgeAlignmentError, "judge returned unexpected or repeated id " + std::to_string(id));
    Judgment j;
    j.chunk_index = id - 1;
    const auto result = rec.value("result", nlohmann::json(nullptr));
    const auto correctness = detail::read_correctness(rec.value("correctness", nlohmann::json(nullptr)));
    if (!detail::is_none_token(result)) {
      if (correctness) {
        j.intermediate_answer = result.is_string() ? result.get<std::string>() : result.dump();
        j.correctness = correctness;
      } else {
        warn("judge gave a result without correctness for chunk " + std::to_string(id) + "; treating as no answer");
      }
    }
    slots[id - 1] = std::move(j);
  }
  if (arr.size() != chunk_count)
    throw Error(ErrorCode::kJudgeAlignmentError, "judge returned " + std::to_string(arr.size()) + " records for " +
                                                     std::to_string(chunk_count) + " chunks");
  std::vector<Judgment> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// Pulls choices[0].message.content out of a chat-completions response.
inline std::string judge_response_content(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kJudgeParseError, std::string("unexpected response envelope: ") + e.what());
  }
}

/// Judges every chunk of one trace in a single request. Transport failures,
/// 429 and 5xx responses are retried per `retry`.
inline std::vector<Judgment> judge_chunks_remote(const std::vector<RawChunk>& chunks, std::string_view ground_truth,
                                                 const JudgeEndpoint& endpoint, const JudgeTransport& transport,
                                                 const RetryPolicy& retry = {},
                                                 std::string_view prompt_template = kJudgePromptTemplate) {
  if (chunks.empty()) throw Error(ErrorCode::kDataError, "no chunks to judge");
  const std::string body = judge_request_body(endpoint, render_judge_prompt(prompt_template, chunks, ground_truth)).dump();
  std::string last_error;
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      const auto response = transport(body);
      if (response.status >= 200 && response.status < 300)
        return parse_judge_output(judge_response_content(response.body), chunks.size());
      last_error = "HTTP " + std::to_string(response.status);
      if (response.status != 429 && response.status < 500)
        throw Error(ErrorCode::kJudgeUnavailable, last_error + ": " + response.body.substr(0, 200));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      last_error = e.what();
    }
    if (attempt >= retry.backoff.size())
      throw Error(ErrorCode::kJudgeUnavailable,
                  "judge failed after " + std::to_string(attempt + 1) + " attempt(s): " + last_error);
    retry.sleep(retry.backoff[attempt]);
  }
}

/// HTTP transport for `endpoint`; the bearer token comes from the
/// environment variable it names.
inline JudgeTransport http_transport(const JudgeEndpoint& endpoint) {
  const std::string& url = endpoint.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::kConfigError, "judge base URL needs a scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? std::string{} : url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (url.rfind("https://", 0) == 0)
    throw Error(ErrorCode::kConfigError, "this build has no TLS support; use an http:// judge endpoint");
#endif
  std::string api_key;
  if (const char* key = std::getenv(endpoint.api_key_env.c_str())) api_key = key;
  const auto timeout = std::chrono::duration<double>(endpoint.timeout_seconds);

  return [origin, path = prefix + "/chat/completions", api_key, timeout](const std::string& body) {
    httplib::Client client(origin);
    const auto secs = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
    client.set_connection_timeout(secs);
    client.set_read_timeout(secs);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) throw std::runtime_error("transport error: " + httplib::to_string(res.error()));
    return HttpResponse{res->status, res->body};
  };
}

}  // namespace cotprobe
