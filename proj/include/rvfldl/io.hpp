#pragma once

// Dataset ingestion (IDX, CSV), column normalization and one-hot labels.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "rvfldl/errors.hpp"
#include "rvfldl/linalg.hpp"
#include "rvfldl/solver.hpp"

namespace rvfldl {

struct LabeledDataset {
  Matrix data;              // d x N, one sample per column
  std::vector<int> labels;  // empty when the source has no labels
  int class_count = 0;
  int image_rows = 0;       // 0 when the samples are not images
  int image_cols = 0;

  bool has_labels() const { return !labels.empty(); }
};

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::kIo, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                               const std::string& path) {
  if (buf.size() < offset + 4) {
    throw DataError(DataError::Kind::kTruncated, "'" + path + "': header truncated at byte " +
                                                     std::to_string(buf.size()));
  }
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

inline std::string hex32(std::uint32_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) s += digits[(v >> shift) & 0xF];
  return s;
}

inline int class_count_of(const std::vector<int>& labels) {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Reads an IDX3 unsigned-byte image file into a (rows*cols) x N matrix.
inline Matrix load_idx_images(const std::string& path, int* rows_out = nullptr,
                              int* cols_out = nullptr) {
  const auto buf = detail::read_file(path);
  const std::uint32_t magic = detail::read_be32(buf, 0, path);
  if (magic != kIdxImageMagic) {
    throw DataError(DataError::Kind::kBadMagic, "'" + path + "': image magic " +
                                                    detail::hex32(magic) + ", expected " +
                                                    detail::hex32(kIdxImageMagic));
  }
  const std::uint64_t n = detail::read_be32(buf, 4, path);
  const std::uint64_t rows = detail::read_be32(buf, 8, path);
  const std::uint64_t cols = detail::read_be32(buf, 12, path);
  const std::uint64_t d = rows * cols;
  const std::uint64_t need = 16 + n * d;
  if (buf.size() < need) {
    throw DataError(DataError::Kind::kTruncated,
                    "'" + path + "': payload truncated (" + std::to_string(buf.size()) +
                        " bytes, header promises " + std::to_string(need) + ")");
  }
  Matrix out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  for (std::uint64_t j = 0; j < n; ++j) {
    const unsigned char* src = buf.data() + 16 + j * d;
    for (std::uint64_t i = 0; i < d; ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<double>(src[i]);
    }
  }
  if (rows_out) *rows_out = static_cast<int>(rows);
  if (cols_out) *cols_out = static_cast<int>(cols);
  return out;
}

inline std::vector<int> load_idx_labels(const std::string& path) {
  const auto buf = detail::read_file(path);
  const std::uint32_t magic = detail::read_be32(buf, 0, path);
  if (magic != kIdxLabelMagic) {
    throw DataError(DataError::Kind::kBadMagic, "'" + path + "': label magic " +
                                                    detail::hex32(magic) + ", expected " +
                                                    detail::hex32(kIdxLabelMagic));
  }
  const std::uint64_t n = detail::read_be32(buf, 4, path);
  if (buf.size() < 8 + n) {
    throw DataError(DataError::Kind::kTruncated,
                    "'" + path + "': payload truncated (" + std::to_string(buf.size()) +
                        " bytes, header promises " + std::to_string(8 + n) + ")");
  }
  return std::vector<int>(buf.begin() + 8, buf.begin() + 8 + static_cast<std::ptrdiff_t>(n));
}

/// Images plus labels. An empty labels path yields an unlabeled dataset.
inline LabeledDataset load_idx(const std::string& path_images, const std::string& path_labels) {
  LabeledDataset ds;
  ds.data = load_idx_images(path_images, &ds.image_rows, &ds.image_cols);
  if (!path_labels.empty()) {
    ds.labels = load_idx_labels(path_labels);
    if (static_cast<Eigen::Index>(ds.labels.size()) != ds.data.cols()) {
      throw DataError(DataError::Kind::kCountMismatch,
                      "'" + path_images + "' has " + std::to_string(ds.data.cols()) +
                          " images but '" + path_labels + "' has " +
                          std::to_string(ds.labels.size()) + " labels");
    }
    ds.class_count = detail::class_count_of(ds.labels);
  }
  return ds;
}

/// Parses comma-separated rows (LF or CRLF). One sample per row; with
/// `has_label_column` the last cell of each row is an integer label.
inline LabeledDataset parse_csv_matrix(std::string_view text, bool has_label_column,
                                       const std::string& source = "<csv>") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t width = 0;
  std::size_t row_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                         : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (width == 0) {
      width = cells.size();
      if (has_label_column && width < 2) {
        throw DataError(DataError::Kind::kParse, source + ": row " + std::to_string(row_no) +
                                                     " needs at least one feature and a label");
      }
    } else if (cells.size() != width) {
      throw DataError(DataError::Kind::kParse,
                      source + ": row " + std::to_string(row_no) + " has " +
                          std::to_string(cells.size()) + " cells, expected " + std::to_string(width));
    }

    const std::size_t features = has_label_column ? width - 1 : width;
    std::vector<double> values(features);
    for (std::size_t c = 0; c < width; ++c) {
      std::string_view cell = cells[c];
      while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
      while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      auto fail = [&]() {
        throw DataError(DataError::Kind::kParse,
                        source + ": cannot parse '" + std::string(cell) + "' at row " +
                            std::to_string(row_no) + ", column " + std::to_string(c + 1));
      };
      if (cell.empty()) fail();
      if (c < features) {
        auto [ptr, ec] = std::from_chars(first, last, values[c]);
        if (ec != std::errc() || ptr != last || !std::isfinite(values[c])) fail();
      } else {
        int label = 0;
        auto [ptr, ec] = std::from_chars(first, last, label);
        if (ec != std::errc() || ptr != last || label < 0) fail();
        labels.push_back(label);
      }
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError(DataError::Kind::kParse, source + ": no data rows");

  LabeledDataset ds;
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  ds.data.resize(d, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (Eigen::Index i = 0; i < d; ++i) ds.data(i, static_cast<Eigen::Index>(j)) = rows[j][static_cast<std::size_t>(i)];
  }
  ds.labels = std::move(labels);
  ds.class_count = detail::class_count_of(ds.labels);
  return ds;
}

inline LabeledDataset load_csv_matrix(const std::string& path, bool has_label_column) {
  const auto buf = detail::read_file(path);
  return parse_csv_matrix(std::string_view(reinterpret_cast<const char*>(buf.data()), buf.size()),
                          has_label_column, "'" + path + "'");
}

/// Scales every column to unit l2 norm.
inline Matrix normalize_columns(const Matrix& y) {
  Matrix out = y;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double n = out.col(j).norm();
    if (!(n > 0.0)) {
      throw DataError(DataError::Kind::kInvalidValue,
                      "normalize_columns: column " + std::to_string(j) + " is all zeros");
    }
    out.col(j) /= n;
  }
  return out;
}

enum class Normalization { kUnitL2, kPixel, kNone };

inline constexpr double kPixelRange = 255.0;

inline const char* to_string(Normalization n) {
  switch (n) {
    case Normalization::kUnitL2: return "l2";
    case Normalization::kPixel: return "pixel";
    case Normalization::kNone: return "none";
  }
  return "?";
}

inline Normalization normalization_from_string(const std::string& s) {
  if (s == "l2") return Normalization::kUnitL2;
  if (s == "pixel") return Normalization::kPixel;
  if (s == "none") return Normalization::kNone;
  throw ConfigError("unknown normalization '" + s + "' (expected l2, pixel or none)");
}

/// l2: unit columns. pixel: divide by 255 so 8-bit data lands in [0,1].
inline Matrix apply_normalization(const Matrix& y, Normalization mode) {
  switch (mode) {
    case Normalization::kUnitL2: return normalize_columns(y);
    case Normalization::kPixel: return y / kPixelRange;
    case Normalization::kNone: return y;
  }
  return y;
}

inline LabelMatrix one_hot(std::span<const int> labels, int classes) {
  if (classes < 1) throw ConfigError("one_hot: class count must be >= 1");
  LabelMatrix h{Matrix::Zero(classes, static_cast<Eigen::Index>(labels.size()))};
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 0 || labels[j] >= classes) {
      throw DataError(DataError::Kind::kInvalidValue,
                      "one_hot: label " + std::to_string(labels[j]) + " at position " +
                          std::to_string(j) + " is outside [0, " + std::to_string(classes) + ")");
    }
    h.values(labels[j], static_cast<Eigen::Index>(j)) = 1.0;
  }
  return h;
}

}  // namespace rvfldl
