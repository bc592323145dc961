#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cotprobe/error.hpp"

namespace cotprobe {

/// Row-major f32 matrix of hidden-state representations.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}
  EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw Error(ErrorCode::kShapeError, "matrix data does not match " + std::to_string(rows_) + "x" +
                                              std::to_string(cols_));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  bool all_finite() const {
    for (float v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

enum class Alignment { kChunk, kParagraph, kFinal };

inline const char* to_string(Alignment a) {
  switch (a) {
    case Alignment::kChunk: return "chunk";
    case Alignment::kParagraph: return "paragraph";
    case Alignment::kFinal: return "final";
  }
  return "chunk";
}

inline Alignment parse_alignment(std::string_view name) {
  if (name == "chunk") return Alignment::kChunk;
  if (name == "paragraph") return Alignment::kParagraph;
  if (name == "final") return Alignment::kFinal;
  throw Error(ErrorCode::kUnsupportedFormat, "unknown alignment '" + std::string(name) + "'");
}

/// Which trace each block of rows belongs to. `counts` is optional; when
/// empty the builders derive per-trace counts from the traces themselves.
struct AlignmentIndex {
  std::vector<std::string> trace_order;
  std::vector<std::size_t> counts;

  bool operator==(const AlignmentIndex&) const = default;
};

struct EmbeddingMeta {
  Alignment alignment = Alignment::kChunk;
  std::string source_model;
  std::string layer = "last";
  AlignmentIndex index;

  bool operator==(const EmbeddingMeta&) const = default;
};

}  // namespace cotprobe
