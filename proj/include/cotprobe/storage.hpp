#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotprobe/dataset.hpp"
#include "cotprobe/embedding.hpp"
#include "cotprobe/error.hpp"
#include "cotprobe/trace.hpp"
#include "cotprobe/train.hpp"

namespace cotprobe {

inline constexpr int kFormatVersion = 1;

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "short write to " + path.string());
}

inline nlohmann::json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

inline std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0x0000FF00u) | ((v << 8) & 0x00FF0000u) | (v << 24);
}

inline std::string encode_f32le(const std::vector<float>& values) {
  std::string bytes(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(values[i]);
    if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
    std::memcpy(bytes.data() + 4 * i, &bits, 4);
  }
  return bytes;
}

inline std::vector<float> decode_f32le(const std::string& bytes) {
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

/// The binary sibling of a manifest: same stem, ".bin" extension.
inline std::filesystem::path default_data_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  if (p == manifest) p += ".bin";
  return p;
}

inline std::filesystem::path resolve_data_path(const std::filesystem::path& manifest, const nlohmann::json& doc) {
  if (doc.contains("data_file")) return manifest.parent_path() / doc.at("data_file").get<std::string>();
  return default_data_path(manifest);
}

inline void check_version(const nlohmann::json& doc, const std::string& what) {
  if (!doc.contains("format_version") || !doc.at("format_version").is_number_integer() ||
      doc.at("format_version").get<int>() != kFormatVersion)
    throw Error(ErrorCode::kUnsupportedVersion, what + " format_version is not " + std::to_string(kFormatVersion));
}

template <typename T>
T get_field(const nlohmann::json& doc, const char* key, ErrorCode code, const std::string& where) {
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(code, where + ": field '" + key + "': " + e.what());
  }
}

}  // namespace detail

// --- trace files -------------------------------------------------------------

inline ReasoningTrace trace_from_json(const nlohmann::json& j, const std::string& where = "record") {
  static const std::set<std::string> known = {"id",           "question",   "ground_truth",
                                              "trace_text",   "final_answer", "final_answer_correct",
                                              "total_tokens", "chunks"};
  if (!j.is_object()) throw Error(ErrorCode::kParseError, where + ": record is not an object");
  ReasoningTrace t;
  try {
    t.id = j.at("id").get<std::string>();
    t.question = j.value("question", std::string{});
    t.ground_truth = j.value("ground_truth", std::string{});
    t.trace_text = j.value("trace_text", std::string{});
    if (j.contains("final_answer") && !j.at("final_answer").is_null())
      t.final_answer = j.at("final_answer").get<std::string>();
    if (j.contains("final_answer_correct") && !j.at("final_answer_correct").is_null())
      t.final_answer_correct = j.at("final_answer_correct").get<bool>();
    t.total_tokens = j.value("total_tokens", std::size_t{0});
    if (j.contains("chunks")) {
      for (const auto& c : j.at("chunks")) {
        TraceChunk chunk;
        chunk.text = c.at("text").get<std::string>();
        chunk.paragraph_count = c.value("paragraph_count", std::size_t{0});
        chunk.token_count = c.value("token_count", std::size_t{0});
        if (c.contains("intermediate_answer") && !c.at("intermediate_answer").is_null())
          chunk.intermediate_answer = c.at("intermediate_answer").get<std::string>();
        if (c.contains("label") && !c.at("label").is_null()) chunk.label = c.at("label").get<bool>();
        t.chunks.push_back(std::move(chunk));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, where + ": " + e.what());
  }
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) t.extra[key] = value;
  return t;
}

inline nlohmann::ordered_json to_json(const ReasoningTrace& t) {
  nlohmann::ordered_json j;
  j["id"] = t.id;
  j["question"] = t.question;
  j["ground_truth"] = t.ground_truth;
  j["trace_text"] = t.trace_text;
  if (t.final_answer) j["final_answer"] = *t.final_answer;
  if (t.final_answer_correct) j["final_answer_correct"] = *t.final_answer_correct;
  j["total_tokens"] = t.total_tokens;
  auto chunks = nlohmann::ordered_json::array();
  for (const auto& c : t.chunks) {
    nlohmann::ordered_json cj;
    cj["text"] = c.text;
    cj["paragraph_count"] = c.paragraph_count;
    cj["token_count"] = c.token_count;
    if (c.intermediate_answer) cj["intermediate_answer"] = *c.intermediate_answer;
    if (c.label) cj["label"] = *c.label;
    chunks.push_back(std::move(cj));
  }
  j["chunks"] = chunks;
  return j;
}

/// Reads a JSON-Lines trace file. Blank lines are skipped.
inline std::vector<ReasoningTrace> read_traces(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<ReasoningTrace> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + "line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kParseError, where + ": " + e.what());
    }
    auto trace = trace_from_json(j, where);
    if (!ids.insert(trace.id).second) throw Error(ErrorCode::kDuplicateId, where + ": duplicate id '" + trace.id + "'");
    out.push_back(std::move(trace));
  }
  return out;
}

inline std::string traces_to_jsonl(const std::vector<ReasoningTrace>& records) {
  std::string out;
  std::set<std::string> ids;
  std::size_t dropped = 0;
  for (const auto& r : records) {
    if (!ids.insert(r.id).second) throw Error(ErrorCode::kDuplicateId, "duplicate id '" + r.id + "'");
    dropped += r.extra.size();
    out += to_json(r).dump();
    out += '\n';
  }
  if (dropped > 0) warn("dropped " + std::to_string(dropped) + " unknown trace field(s) on write");
  return out;
}

inline void write_traces(const std::vector<ReasoningTrace>& records, const std::filesystem::path& path) {
  detail::write_file(path, traces_to_jsonl(records));
}

// --- embedding files ---------------------------------------------------------

inline nlohmann::ordered_json embedding_manifest(const EmbeddingMatrix& matrix, const EmbeddingMeta& meta,
                                                 const std::string& data_file) {
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["dtype"] = "f32le";
  j["rows"] = matrix.rows();
  j["cols"] = matrix.cols();
  j["alignment"] = to_string(meta.alignment);
  j["source_model"] = meta.source_model;
  j["layer"] = meta.layer;
  j["trace_order"] = meta.index.trace_order;
  if (!meta.index.counts.empty()) j["trace_counts"] = meta.index.counts;
  j["data_file"] = data_file;
  return j;
}

/// Writes `<manifest>` and its binary sibling (`<stem>.bin`).
inline void write_embeddings(const EmbeddingMatrix& matrix, const EmbeddingMeta& meta,
                             const std::filesystem::path& manifest_path) {
  const auto data_path = detail::default_data_path(manifest_path);
  detail::write_file(data_path, detail::encode_f32le(matrix.data()));
  detail::write_file(manifest_path, embedding_manifest(matrix, meta, data_path.filename().string()).dump(2) + "\n");
}

struct EmbeddingFile {
  EmbeddingMatrix matrix;
  EmbeddingMeta meta;
};

inline EmbeddingFile read_embeddings(const std::filesystem::path& manifest_path) {
  const auto doc = detail::parse_json_file(manifest_path);
  const std::string where = manifest_path.string();
  detail::check_version(doc, "embedding manifest");
  const auto dtype = detail::get_field<std::string>(doc, "dtype", ErrorCode::kUnsupportedFormat, where);
  if (dtype != "f32le") throw Error(ErrorCode::kUnsupportedFormat, where + ": dtype '" + dtype + "' is not f32le");
  const auto rows = detail::get_field<std::size_t>(doc, "rows", ErrorCode::kParseError, where);
  const auto cols = detail::get_field<std::size_t>(doc, "cols", ErrorCode::kParseError, where);

  EmbeddingFile file;
  file.meta.alignment = parse_alignment(doc.value("alignment", std::string("chunk")));
  file.meta.source_model = doc.value("source_model", std::string{});
  file.meta.layer = doc.value("layer", std::string("last"));
  try {
    if (doc.contains("trace_order")) file.meta.index.trace_order = doc.at("trace_order").get<std::vector<std::string>>();
    if (doc.contains("trace_counts")) file.meta.index.counts = doc.at("trace_counts").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, where + ": " + e.what());
  }

  const auto data_path = detail::resolve_data_path(manifest_path, doc);
  std::error_code ec;
  const auto size = std::filesystem::file_size(data_path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot stat " + data_path.string());
  const std::uintmax_t expected = static_cast<std::uintmax_t>(rows) * cols * 4;
  if (size != expected)
    throw Error(ErrorCode::kCorruptEmbedding, data_path.string() + " holds " + std::to_string(size) +
                                                  " bytes, manifest implies " + std::to_string(expected));
  file.matrix = EmbeddingMatrix(rows, cols, detail::decode_f32le(detail::read_file(data_path)));
  return file;
}

// --- probe checkpoints -------------------------------------------------------

namespace detail {
inline nlohmann::ordered_json float_array(const std::vector<float>& v) {
  auto arr = nlohmann::ordered_json::array();
  for (float x : v) arr.push_back(static_cast<double>(x));
  return arr;
}

inline std::vector<float> read_floats(const nlohmann::json& arr, const std::string& what) {
  if (!arr.is_array()) throw Error(ErrorCode::kShapeError, what + " is not an array");
  std::vector<float> out;
  for (const auto& v : arr) {
    if (!v.is_number()) throw Error(ErrorCode::kShapeError, what + " holds a non-number");
    out.push_back(static_cast<float>(v.get<double>()));
  }
  return out;
}
}  // namespace detail

inline nlohmann::ordered_json to_json(const TrainedProbe& probe) {
  const auto& p = probe.params;
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["mode"] = p.linear() ? "linear" : "mlp";
  j["m"] = p.m;
  j["d"] = p.d;
  nlohmann::ordered_json params;
  if (p.linear()) {
    params["W"] = detail::float_array(p.w1);
    params["b"] = static_cast<double>(p.b2);
  } else {
    auto w1 = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < p.m; ++r)
      w1.push_back(detail::float_array(std::vector<float>(p.w1.begin() + static_cast<std::ptrdiff_t>(r * p.d),
                                                          p.w1.begin() + static_cast<std::ptrdiff_t>((r + 1) * p.d))));
    auto w2 = nlohmann::ordered_json::array();
    for (float v : p.w2) w2.push_back(nlohmann::ordered_json::array({static_cast<double>(v)}));
    params["W1"] = w1;
    params["b1"] = detail::float_array(p.b1);
    params["W2"] = w2;
    params["b2"] = static_cast<double>(p.b2);
  }
  j["parameters"] = params;
  j["train_config"] = to_json(probe.config);
  j["metrics"] = {{"val_accuracy", probe.val_accuracy},
                  {"val_loss", probe.val_loss},
                  {"best_epoch", probe.best_epoch},
                  {"epochs_run", probe.epochs_run},
                  {"imbalance_weight", probe.imbalance_weight}};
  return j;
}

inline TrainedProbe probe_from_json(const nlohmann::json& j) {
  detail::check_version(j, "probe checkpoint");
  TrainedProbe probe;
  auto& p = probe.params;
  try {
    const auto mode = j.at("mode").get<std::string>();
    p.m = j.at("m").get<std::size_t>();
    p.d = j.at("d").get<std::size_t>();
    if ((mode == "linear") != (p.d == 0) || (mode != "linear" && mode != "mlp"))
      throw Error(ErrorCode::kShapeError, "mode '" + mode + "' is inconsistent with d=" + std::to_string(p.d));
    const auto& params = j.at("parameters");
    if (p.linear()) {
      p.w1 = detail::read_floats(params.at("W"), "W");
      p.b2 = static_cast<float>(params.at("b").get<double>());
    } else {
      const auto& w1 = params.at("W1");
      if (!w1.is_array() || w1.size() != p.m) throw Error(ErrorCode::kShapeError, "W1 must have m rows");
      for (const auto& row : w1) {
        const auto values = detail::read_floats(row, "W1 row");
        if (values.size() != p.d) throw Error(ErrorCode::kShapeError, "W1 rows must have d columns");
        p.w1.insert(p.w1.end(), values.begin(), values.end());
      }
      p.b1 = detail::read_floats(params.at("b1"), "b1");
      const auto& w2 = params.at("W2");
      if (!w2.is_array() || w2.size() != p.d) throw Error(ErrorCode::kShapeError, "W2 must have d rows");
      for (const auto& row : w2) {
        const auto values = detail::read_floats(row, "W2 row");
        if (values.size() != 1) throw Error(ErrorCode::kShapeError, "W2 rows must have one column");
        p.w2.push_back(values[0]);
      }
      p.b2 = static_cast<float>(params.at("b2").get<double>());
    }
    if (j.contains("train_config")) probe.config = train_config_from_json(j.at("train_config"));
    if (j.contains("metrics")) {
      const auto& m = j.at("metrics");
      probe.val_accuracy = m.value("val_accuracy", 0.0);
      probe.val_loss = m.value("val_loss", 0.0);
      probe.best_epoch = m.value("best_epoch", std::size_t{0});
      probe.epochs_run = m.value("epochs_run", std::size_t{0});
      probe.imbalance_weight = m.value("imbalance_weight", 1.0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("probe checkpoint: ") + e.what());
  }
  p.check_shape();
  if (!p.all_finite()) throw Error(ErrorCode::kDataError, "probe checkpoint holds non-finite parameters");
  return probe;
}

inline void write_probe(const TrainedProbe& probe, const std::filesystem::path& path) {
  detail::write_file(path, to_json(probe).dump(2) + "\n");
}

inline TrainedProbe read_probe(const std::filesystem::path& path) {
  return probe_from_json(detail::parse_json_file(path));
}

// --- probing dataset files ---------------------------------------------------

/// Manifest with per-example metadata plus a `<stem>.bin` matrix of embeddings.
inline void write_dataset(const ProbingDataset& ds, const std::filesystem::path& manifest_path) {
  std::vector<float> flat;
  flat.reserve(ds.size() * ds.m);
  for (const auto& e : ds.examples) {
    if (e.embedding.size() != ds.m) throw Error(ErrorCode::kShapeError, "example embedding length differs from m");
    flat.insert(flat.end(), e.embedding.begin(), e.embedding.end());
  }
  const auto data_path = detail::default_data_path(manifest_path);
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "probing_dataset";
  j["mode"] = to_string(ds.mode);
  j["dtype"] = "f32le";
  j["rows"] = ds.size();
  j["cols"] = ds.m;
  j["data_file"] = data_path.filename().string();
  auto examples = nlohmann::ordered_json::array();
  for (const auto& e : ds.examples) {
    nlohmann::ordered_json ej;
    ej["trace_id"] = e.trace_id;
    ej["chunk_index"] = e.chunk_index;
    ej["label"] = e.label;
    ej["token_count"] = e.token_count;
    if (e.fraction) ej["fraction"] = *e.fraction;
    examples.push_back(std::move(ej));
  }
  j["examples"] = examples;
  detail::write_file(data_path, detail::encode_f32le(flat));
  detail::write_file(manifest_path, j.dump(1) + "\n");
}

inline ProbingDataset read_dataset(const std::filesystem::path& manifest_path) {
  const auto doc = detail::parse_json_file(manifest_path);
  const std::string where = manifest_path.string();
  detail::check_version(doc, "dataset manifest");
  if (doc.value("dtype", std::string{}) != "f32le")
    throw Error(ErrorCode::kUnsupportedFormat, where + ": dtype is not f32le");
  ProbingDataset ds;
  const auto rows = detail::get_field<std::size_t>(doc, "rows", ErrorCode::kParseError, where);
  ds.m = detail::get_field<std::size_t>(doc, "cols", ErrorCode::kParseError, where);
  ds.mode = parse_dataset_mode(doc.value("mode", std::string("intermediate")));
  const auto data_path = detail::resolve_data_path(manifest_path, doc);
  const std::string bytes = detail::read_file(data_path);
  if (bytes.size() != rows * ds.m * 4)
    throw Error(ErrorCode::kCorruptEmbedding, data_path.string() + " length does not match the manifest shape");
  const auto flat = detail::decode_f32le(bytes);
  try {
    const auto& examples = doc.at("examples");
    if (examples.size() != rows) throw Error(ErrorCode::kAlignmentError, where + ": example count differs from rows");
    for (std::size_t i = 0; i < rows; ++i) {
      const auto& ej = examples[i];
      ProbingExample e;
      e.embedding.assign(flat.begin() + static_cast<std::ptrdiff_t>(i * ds.m),
                         flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * ds.m));
      e.trace_id = ej.at("trace_id").get<std::string>();
      e.chunk_index = ej.value("chunk_index", std::size_t{0});
      e.label = ej.at("label").get<bool>();
      e.token_count = ej.value("token_count", std::size_t{0});
      if (ej.contains("fraction") && !ej.at("fraction").is_null()) e.fraction = ej.at("fraction").get<double>();
      ds.examples.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, where + ": " + e.what());
  }
  return ds;
}

}  // namespace cotprobe
