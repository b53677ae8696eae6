#pragma once

// JSON run configuration for the rvfldl command-line tool. Unknown keys
// are rejected at every level; relative paths resolve against the
// directory of the config file.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "rvfldl/rvfldl.hpp"

namespace rvfldl::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct DatasetSpec {
  std::string format = "idx";  // idx | csv
  std::string images;
  std::string labels;          // optional for idx
  std::string path;            // csv
  bool has_labels = true;      // csv
  long offset = 0;
  long limit = -1;             // -1: everything after offset
  double dynamic_range = 255.0;
};

struct SweepGrid {
  std::vector<double> mu1, mu2, mu3;
  std::vector<int> degree;
  std::vector<double> reg_C;
  std::vector<std::uint64_t> seeds;
};

struct RunConfig {
  std::string task;
  TrainConfig train;
  bool has_K = false;
  std::optional<DatasetSpec> train_data;
  std::optional<DatasetSpec> test_data;
  std::string model_path;
  std::string out_dir = "rvfldl-out";
  bool dump_pgm = false;
  long pgm_limit = 16;
  bool ssim_windowed = false;
  std::string classifier = "svc";  // svc | argmax
  SVCOptions svc;
  unsigned threads = 1;
  std::optional<SweepGrid> sweep;
};

namespace detail {

/// Walks a JSON object, remembering which keys were consumed so the rest
/// can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key) {
    const json& v = at(key);
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type (" + v.dump() + ")");
    }
  }

  template <typename T>
  void maybe(const std::string& key, T& out) {
    if (has(key)) out = get<T>(key);
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path q(p);
  return q.is_absolute() ? p : (base / q).lexically_normal().string();
}

inline DatasetSpec parse_dataset(const json& j, const std::string& where, const fs::path& base) {
  Section s(j, where);
  DatasetSpec d;
  s.maybe("format", d.format);
  if (d.format == "idx") {
    d.images = resolve(base, s.get<std::string>("images"));
    if (s.has("labels")) d.labels = resolve(base, s.get<std::string>("labels"));
  } else if (d.format == "csv") {
    d.path = resolve(base, s.get<std::string>("path"));
    s.maybe("has_labels", d.has_labels);
  } else {
    throw ConfigError(s.path("format") + ": expected 'idx' or 'csv', got '" + d.format + "'");
  }
  s.maybe("offset", d.offset);
  s.maybe("limit", d.limit);
  s.maybe("dynamic_range", d.dynamic_range);
  if (d.offset < 0) throw ConfigError(s.path("offset") + " must be >= 0");
  if (d.limit < -1 || d.limit == 0) throw ConfigError(s.path("limit") + " must be >= 1");
  if (!(d.dynamic_range > 0.0)) throw ConfigError(s.path("dynamic_range") + " must be > 0");
  s.finish();
  return d;
}

template <typename T>
std::vector<T> parse_list(Section& s, const std::string& key) {
  std::vector<T> v = s.get<std::vector<T>>(key);
  if (v.empty()) throw ConfigError(s.path(key) + ": empty grid");
  return v;
}

}  // namespace detail

inline const std::set<std::string>& known_tasks() {
  static const std::set<std::string> t{"train-unsup", "train-sup", "classify", "reconstruct", "eval", "sweep"};
  return t;
}

/// Parses a config document. `base` is the directory relative paths
/// resolve against.
inline RunConfig parse_run_config(const json& root, const fs::path& base) {
  detail::Section s(root, "config");
  RunConfig rc;
  s.maybe("task", rc.task);
  if (!rc.task.empty() && !known_tasks().count(rc.task)) {
    throw ConfigError("config.task: unknown task '" + rc.task + "'");
  }

  if (s.has("data")) {
    detail::Section d(s.at("data"), "config.data");
    if (d.has("train")) rc.train_data = detail::parse_dataset(d.at("train"), "config.data.train", base);
    if (d.has("test")) rc.test_data = detail::parse_dataset(d.at("test"), "config.data.test", base);
    d.finish();
  }

  if (s.has("model")) {
    detail::Section m(s.at("model"), "config.model");
    if (m.has("K")) {
      rc.train.K = m.get<int>("K");
      rc.has_K = true;
    }
    m.maybe("L", rc.train.L);
    m.maybe("tau", rc.train.tau);
    m.maybe("sigma2", rc.train.sigma2);
    m.maybe("eta", rc.train.eta);
    m.maybe("mu1", rc.train.mu1);
    m.maybe("mu2", rc.train.mu2);
    m.maybe("mu3", rc.train.mu3);
    m.maybe("runs_r", rc.train.runs_r);
    m.maybe("folds_T", rc.train.folds_T);
    m.maybe("seed", rc.train.master_seed);
    if (m.has("dict_init")) rc.train.dict_init = dict_init_from_string(m.get<std::string>("dict_init"));
    if (m.has("normalize")) rc.train.normalize = normalization_from_string(m.get<std::string>("normalize"));
    m.finish();
  }

  if (s.has("svc")) {
    detail::Section v(s.at("svc"), "config.svc");
    v.maybe("degree", rc.svc.degree);
    v.maybe("reg_C", rc.svc.reg_C);
    v.maybe("tol", rc.svc.tol);
    v.maybe("max_pair_updates", rc.svc.max_pair_updates);
    v.finish();
  }

  s.maybe("classifier", rc.classifier);
  if (rc.classifier != "svc" && rc.classifier != "argmax") {
    throw ConfigError("config.classifier: expected 'svc' or 'argmax', got '" + rc.classifier + "'");
  }
  if (s.has("model_path")) rc.model_path = detail::resolve(base, s.get<std::string>("model_path"));
  s.maybe("threads", rc.threads);

  if (s.has("output")) {
    detail::Section o(s.at("output"), "config.output");
    if (o.has("dir")) rc.out_dir = detail::resolve(base, o.get<std::string>("dir"));
    o.maybe("dump_pgm", rc.dump_pgm);
    o.maybe("pgm_limit", rc.pgm_limit);
    o.finish();
  }

  if (s.has("ssim")) {
    const std::string mode = s.get<std::string>("ssim");
    if (mode != "global" && mode != "windowed") {
      throw ConfigError("config.ssim: expected 'global' or 'windowed', got '" + mode + "'");
    }
    rc.ssim_windowed = mode == "windowed";
  }

  if (s.has("sweep")) {
    detail::Section g(s.at("sweep"), "config.sweep");
    SweepGrid grid;
    if (g.has("mu1")) grid.mu1 = detail::parse_list<double>(g, "mu1");
    if (g.has("mu2")) grid.mu2 = detail::parse_list<double>(g, "mu2");
    if (g.has("mu3")) grid.mu3 = detail::parse_list<double>(g, "mu3");
    if (g.has("degree")) grid.degree = detail::parse_list<int>(g, "degree");
    if (g.has("reg_C")) grid.reg_C = detail::parse_list<double>(g, "reg_C");
    if (g.has("seeds")) grid.seeds = detail::parse_list<std::uint64_t>(g, "seeds");
    g.finish();
    rc.sweep = grid;
  }
  s.finish();
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(root, fs::absolute(fs::path(path)).parent_path());
}

}  // namespace rvfldl::cli
