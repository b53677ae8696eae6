#pragma once

// Binary model files: magic, JSON header, little-endian float64 payload.
// Byte layout in docs/formats.md.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "rvfldl/errors.hpp"
#include "rvfldl/training.hpp"

namespace rvfldl {

inline constexpr char kModelMagic[9] = "RVFLDL1\n";
inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kLibraryVersion = "1.0.0";

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline void put_matrix(std::string& out, const Matrix& m) {
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
  }
}

class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& buf, std::string path) : buf_(buf), path_(std::move(path)) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > buf_.size()) {
      throw DataError(DataError::Kind::kTruncated, "'" + path_ + "': truncated while reading " + what);
    }
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{buf_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t{buf_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += 8;
    double v = 0.0;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  Matrix matrix(const char* what) {
    const std::uint32_t rows = u32(what);
    const std::uint32_t cols = u32(what);
    const std::uint64_t count = std::uint64_t{rows} * cols;
    need(static_cast<std::size_t>(count * 8), what);
    Matrix m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = f64();
    }
    return m;
  }

  bool at_end() const { return pos_ == buf_.size(); }

 private:
  const std::vector<unsigned char>& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

inline nlohmann::ordered_json model_header(const TrainedModel& m) {
  const TrainConfig& c = m.config;
  nlohmann::ordered_json h;
  h["format"] = "rvfldl-model";
  h["version"] = kModelFormatVersion;
  h["dims"] = {{"d", m.input_dim}, {"K", c.K}, {"L", c.nodes()}, {"c", m.class_count}};
  h["hyperparameters"] = {{"tau", c.tau},         {"sigma2", c.sigma2},
                          {"eta", c.eta},         {"mu1", c.mu1},
                          {"mu2", c.mu2},         {"mu3", c.mu3},
                          {"runs_r", c.runs_r},   {"folds_T", c.folds_T},
                          {"dict_init", to_string(c.dict_init)},
                          {"normalize", to_string(c.normalize)}};
  nlohmann::ordered_json jobs = nlohmann::ordered_json::array();
  for (const auto& r : m.provenance) {
    jobs.push_back({{"fold", r.fold},
                    {"run", r.run},
                    {"seed", r.seed},
                    {"train_samples", r.train_samples},
                    {"objective_dictionary", r.objective_dictionary},
                    {"objective_refit", r.objective_refit},
                    {"objective_joint", r.objective_joint},
                    {"objective_joint_zero_w", r.objective_joint_zero_w}});
  }
  h["seeds"] = {{"master", c.master_seed}, {"jobs", jobs}};
  h["activation"] = to_string(m.enhancement.activation());
  h["created_by"] = std::string("rvfldl ") + kLibraryVersion;
  return h;
}

inline void expect_dims(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what,
                        const std::string& path) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DataError(DataError::Kind::kDimensionMismatch,
                    "'" + path + "': " + what + " payload is " + shape(m.rows(), m.cols()) +
                        " but the header implies " + shape(rows, cols));
  }
}

}  // namespace detail

/// Serialized bytes of a model. Deterministic: no timestamps or host data.
inline std::string serialize_model(const TrainedModel& m) {
  const std::string header = detail::model_header(m).dump();
  std::string out(kModelMagic, 8);
  detail::put_u32(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  detail::put_matrix(out, m.dictionary.values);
  if (m.supervised()) {
    detail::put_matrix(out, m.classifier.values);
  } else {
    detail::put_matrix(out, Matrix(0, m.dictionary.values.cols()));
  }
  detail::put_matrix(out, m.enhancement.weights());
  detail::put_matrix(out, m.enhancement.biases());
  return out;
}

inline void save_model(const TrainedModel& m, const std::string& path) {
  const std::string bytes = serialize_model(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataError::Kind::kIo, "cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(DataError::Kind::kIo, "write failed for '" + path + "'");
}

inline TrainedModel deserialize_model(const std::vector<unsigned char>& buf, const std::string& path) {
  detail::ByteReader in(buf, path);
  const std::string magic = in.bytes(8, "magic");
  if (magic != std::string(kModelMagic, 8)) {
    if (magic.compare(0, 6, "RVFLDL") == 0) {
      throw DataError(DataError::Kind::kVersionMismatch,
                      "'" + path + "': unsupported model format revision '" + magic.substr(6, 1) + "'");
    }
    throw DataError(DataError::Kind::kBadMagic, "'" + path + "': not an rvfldl model file");
  }
  const std::uint32_t header_len = in.u32("header length");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(in.bytes(header_len, "header"));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(DataError::Kind::kParse, "'" + path + "': header is not valid JSON: " + e.what());
  }

  TrainedModel m;
  Eigen::Index d = 0, k = 0, l = 0, c = 0;
  try {
    if (h.at("version").get<int>() != kModelFormatVersion) {
      throw DataError(DataError::Kind::kVersionMismatch,
                      "'" + path + "': model version " + h.at("version").dump() + ", expected " +
                          std::to_string(kModelFormatVersion));
    }
    const auto& dims = h.at("dims");
    d = dims.at("d").get<Eigen::Index>();
    k = dims.at("K").get<Eigen::Index>();
    l = dims.at("L").get<Eigen::Index>();
    c = dims.at("c").get<Eigen::Index>();
    const auto& hp = h.at("hyperparameters");
    TrainConfig& cfg = m.config;
    cfg.K = static_cast<int>(k);
    cfg.L = static_cast<int>(l);
    cfg.tau = hp.at("tau").get<double>();
    cfg.sigma2 = hp.at("sigma2").get<double>();
    cfg.eta = hp.at("eta").get<double>();
    cfg.mu1 = hp.at("mu1").get<double>();
    cfg.mu2 = hp.at("mu2").get<double>();
    cfg.mu3 = hp.at("mu3").get<double>();
    cfg.runs_r = hp.at("runs_r").get<int>();
    cfg.folds_T = hp.at("folds_T").get<int>();
    cfg.dict_init = dict_init_from_string(hp.at("dict_init").get<std::string>());
    cfg.normalize = normalization_from_string(hp.at("normalize").get<std::string>());
    cfg.master_seed = h.at("seeds").at("master").get<std::uint64_t>();
    for (const auto& j : h.at("seeds").at("jobs")) {
      JobRecord r;
      r.fold = j.at("fold").get<int>();
      r.run = j.at("run").get<int>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.train_samples = j.at("train_samples").get<Eigen::Index>();
      r.objective_dictionary = j.at("objective_dictionary").get<double>();
      r.objective_refit = j.at("objective_refit").get<double>();
      r.objective_joint = j.at("objective_joint").get<double>();
      r.objective_joint_zero_w = j.at("objective_joint_zero_w").get<double>();
      m.provenance.push_back(r);
    }
    m.input_dim = static_cast<int>(d);
    m.class_count = static_cast<int>(c);
    m.enhancement = EnhancementMap(Matrix(), Vector(),
                                   activation_from_string(h.at("activation").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataError::Kind::kParse, "'" + path + "': malformed header: " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(DataError::Kind::kParse, "'" + path + "': " + e.what());
  }

  const Matrix d1 = in.matrix("D1");
  detail::expect_dims(d1, d, k + l, "D1", path);
  Matrix w = in.matrix("W");
  detail::expect_dims(w, c, k + l, "W", path);
  Matrix weights = in.matrix("enhancement weights");
  detail::expect_dims(weights, l, k, "enhancement weights", path);
  const Matrix biases = in.matrix("enhancement biases");
  detail::expect_dims(biases, l, 1, "enhancement biases", path);
  if (!in.at_end()) {
    throw DataError(DataError::Kind::kDimensionMismatch, "'" + path + "': trailing bytes after payload");
  }
  m.dictionary.values = d1;
  m.classifier.values = std::move(w);
  m.enhancement = EnhancementMap(std::move(weights), biases.col(0), m.enhancement.activation());
  return m;
}

inline TrainedModel load_model(const std::string& path) {
  return deserialize_model(detail::read_file(path), path);
}

}  // namespace rvfldl
