#pragma once

// The verbs of the rvfldl tool. Every verb writes its deterministic
// outputs (model, reports, CSVs) into the output directory and puts
// timings into metadata.json, the only file allowed to differ between
// identical runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "rvfldl/rvfldl.hpp"
#include "run_config.hpp"

namespace rvfldl::cli {

using ordered_json = nlohmann::ordered_json;

/// Formats a double so it round-trips exactly.
inline std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Stopwatch {
 public:
  void lap(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    stages_[stage] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  double total() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  const std::map<std::string, double>& stages() const { return stages_; }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  std::chrono::steady_clock::time_point last_ = start_;
  std::map<std::string, double> stages_;
};

struct Context {
  RunConfig cfg;
  std::string verb;
  Stopwatch clock;
  ordered_json extra_metadata = ordered_json::object();
};

inline void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw DataError(DataError::Kind::kIo, "cannot create output directory '" + dir + "'");
  }
}

inline void write_text(const std::string& dir, const std::string& name, const std::string& text) {
  const std::string path = (fs::path(dir) / name).string();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataError::Kind::kIo, "cannot write '" + path + "'");
  out << text;
  if (!out) throw DataError(DataError::Kind::kIo, "write failed for '" + path + "'");
}

inline void write_json(const std::string& dir, const std::string& name, const ordered_json& j) {
  write_text(dir, name, j.dump(2) + "\n");
}

inline void write_metadata(Context& ctx) {
  ordered_json m;
  m["verb"] = ctx.verb;
  m["tool_version"] = kLibraryVersion;
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  m["finished_utc"] = stamp;
  m["threads"] = ctx.cfg.threads;
  m["wall_seconds"] = ctx.clock.total();
  m["stage_seconds"] = ctx.clock.stages();
  for (auto it = ctx.extra_metadata.begin(); it != ctx.extra_metadata.end(); ++it) m[it.key()] = it.value();
  write_json(ctx.cfg.out_dir, "metadata.json", m);
}

inline LabeledDataset load_dataset(const DatasetSpec& spec, const std::string& role) {
  auto require_file = [&](const std::string& p) {
    if (!fs::exists(p)) throw ConfigError(role + " dataset: file not found '" + p + "'");
  };
  LabeledDataset ds;
  if (spec.format == "idx") {
    require_file(spec.images);
    if (!spec.labels.empty()) require_file(spec.labels);
    ds = load_idx(spec.images, spec.labels);
  } else {
    require_file(spec.path);
    ds = load_csv_matrix(spec.path, spec.has_labels);
  }
  const Eigen::Index n = ds.data.cols();
  if (spec.offset >= n) {
    throw DataError(DataError::Kind::kInvalidValue,
                    role + " dataset: offset " + std::to_string(spec.offset) + " is past its " +
                        std::to_string(n) + " samples");
  }
  const Eigen::Index take = spec.limit < 0 ? n - spec.offset : std::min<Eigen::Index>(spec.limit, n - spec.offset);
  if (spec.offset != 0 || take != n) {
    ds.data = ds.data.middleCols(spec.offset, take).eval();
    if (ds.has_labels()) {
      ds.labels = std::vector<int>(ds.labels.begin() + spec.offset, ds.labels.begin() + spec.offset + take);
    }
  }
  return ds;
}

inline const DatasetSpec& need_dataset(const std::optional<DatasetSpec>& d, const char* key) {
  if (!d) throw ConfigError(std::string("config.data.") + key + " is required for this task");
  return *d;
}

inline std::string model_path(const RunConfig& cfg) {
  return cfg.model_path.empty() ? (fs::path(cfg.out_dir) / "model.rvfldl").string() : cfg.model_path;
}

inline TrainedModel load_model_checked(const RunConfig& cfg) {
  const std::string path = model_path(cfg);
  if (!fs::exists(path)) throw ConfigError("model file not found '" + path + "'");
  return load_model(path);
}

// ---- train -----------------------------------------------------------------

inline ordered_json job_json(const JobRecord& r) {
  return {{"fold", r.fold},
          {"run", r.run},
          {"seed", r.seed},
          {"train_samples", r.train_samples},
          {"objective_dictionary", r.objective_dictionary},
          {"objective_refit", r.objective_refit},
          {"objective_joint", r.objective_joint},
          {"objective_joint_zero_w", r.objective_joint_zero_w}};
}

inline int cmd_train(Context& ctx) {
  RunConfig& cfg = ctx.cfg;
  if (cfg.task != "train-sup" && cfg.task != "train-unsup") {
    throw ConfigError("train: config.task must be 'train-sup' or 'train-unsup'");
  }
  if (!cfg.has_K) throw ConfigError("config.model.K is required for training");
  const bool supervised = cfg.task == "train-sup";
  const LabeledDataset ds = load_dataset(need_dataset(cfg.train_data, "train"), "train");
  if (supervised && !ds.has_labels()) throw DataError(DataError::Kind::kInvalidValue, "train-sup needs labels");
  ensure_out_dir(cfg.out_dir);
  ctx.clock.lap("load");

  TrainOptions opts;
  opts.threads = cfg.threads;
  const TrainedModel model = supervised ? train_supervised(ds.data, ds.labels, cfg.train, opts)
                                        : train_unsupervised(ds.data, cfg.train, opts);
  ctx.clock.lap("train");

  save_model(model, model_path(cfg));
  std::string prov;
  ordered_json job_times = ordered_json::array();
  for (const auto& r : model.provenance) {
    prov += job_json(r).dump() + "\n";
    job_times.push_back({{"fold", r.fold}, {"run", r.run}, {"wall_seconds", r.wall_seconds}});
  }
  write_text(cfg.out_dir, "provenance.jsonl", prov);
  ctx.extra_metadata["job_seconds"] = job_times;

  ordered_json report;
  report["task"] = cfg.task;
  report["n_train"] = ds.data.cols();
  report["d"] = model.input_dim;
  report["K"] = model.config.K;
  report["L"] = model.config.nodes();
  report["classes"] = model.class_count;
  report["runs_r"] = model.config.runs_r;
  report["folds_T"] = model.config.folds_T;
  report["master_seed"] = model.config.master_seed;
  report["model_file"] = fs::path(model_path(cfg)).filename().string();
  report["train_relative_reconstruction_error"] = reconstruct(model, ds.data).relative_error;
  if (supervised) {
    report["train_accuracy_argmax"] = accuracy(predict_argmax(model, ds.data).labels, ds.labels);
  }
  write_json(cfg.out_dir, "train_report.json", report);
  ctx.clock.lap("report");
  return 0;
}

// ---- classify --------------------------------------------------------------

struct ClassifyOutcome {
  std::vector<int> labels;
  Matrix scores;
};

inline ClassifyOutcome run_classifier(const RunConfig& cfg, const TrainedModel& model,
                                      const LabeledDataset* train, const Matrix& queries,
                                      const SVCOptions& svc_opts) {
  if (cfg.classifier == "argmax") {
    auto p = predict_argmax(model, queries);
    return {std::move(p.labels), std::move(p.scores)};
  }
  if (train == nullptr) throw ConfigError("classifier 'svc' needs config.data.train to fit the SVC");
  if (!train->has_labels()) throw DataError(DataError::Kind::kInvalidValue, "SVC training data has no labels");
  const SVCModel svc = fit_svc(model, train->data, train->labels, svc_opts);
  auto p = predict_svc(model, svc, queries);
  return {std::move(p.labels), std::move(p.scores)};
}

inline int cmd_classify(Context& ctx) {
  RunConfig& cfg = ctx.cfg;
  const TrainedModel model = load_model_checked(cfg);
  const LabeledDataset test = load_dataset(need_dataset(cfg.test_data, "test"), "test");
  std::optional<LabeledDataset> train;
  if (cfg.classifier == "svc") train = load_dataset(need_dataset(cfg.train_data, "train"), "train");
  ensure_out_dir(cfg.out_dir);
  ctx.clock.lap("load");

  const ClassifyOutcome out = run_classifier(cfg, model, train ? &*train : nullptr, test.data, cfg.svc);
  ctx.clock.lap("classify");

  std::string csv = "index,predicted";
  for (Eigen::Index c = 0; c < out.scores.rows(); ++c) csv += ",score_" + std::to_string(c);
  csv += "\n";
  for (std::size_t j = 0; j < out.labels.size(); ++j) {
    csv += std::to_string(j) + "," + std::to_string(out.labels[j]);
    for (Eigen::Index c = 0; c < out.scores.rows(); ++c) csv += "," + fmt_real(out.scores(c, static_cast<Eigen::Index>(j)));
    csv += "\n";
  }
  write_text(cfg.out_dir, "predictions.csv", csv);

  ordered_json report;
  report["task"] = "classify";
  report["classifier"] = cfg.classifier;
  report["n_queries"] = test.data.cols();
  if (cfg.classifier == "svc") {
    report["svc"] = {{"degree", cfg.svc.degree}, {"reg_C", cfg.svc.reg_C}};
  }
  if (test.has_labels()) report["accuracy"] = accuracy(out.labels, test.labels);
  write_json(cfg.out_dir, "classify_report.json", report);
  return 0;
}

// ---- reconstruct -----------------------------------------------------------

inline void write_pgm(const std::string& path, const ImageBuffer& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataError::Kind::kIo, "cannot write '" + path + "'");
  out << "P5\n" << img.pixels.cols() << " " << img.pixels.rows() << "\n255\n";
  for (Eigen::Index r = 0; r < img.pixels.rows(); ++r) {
    for (Eigen::Index c = 0; c < img.pixels.cols(); ++c) {
      const double v = img.pixels(r, c) / img.dynamic_range * 255.0;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 255.0)))));
    }
  }
}

inline int cmd_reconstruct(Context& ctx) {
  RunConfig& cfg = ctx.cfg;
  const TrainedModel model = load_model_checked(cfg);
  const DatasetSpec& spec = need_dataset(cfg.test_data, "test");
  const LabeledDataset test = load_dataset(spec, "test");
  ensure_out_dir(cfg.out_dir);
  ctx.clock.lap("load");

  const Reconstruction rec = reconstruct(model, test.data);
  ctx.clock.lap("reconstruct");

  const Eigen::Index h = test.image_rows > 0 ? test.image_rows : 1;
  const Eigen::Index w = test.image_rows > 0 ? test.image_cols : test.data.rows();
  std::string csv = "index,ssim\n";
  double total = 0.0;
  double worst = 1.0;
  for (Eigen::Index j = 0; j < test.data.cols(); ++j) {
    const ImageBuffer orig = ImageBuffer::from_column(test.data.col(j), h, w, spec.dynamic_range);
    const ImageBuffer approx =
        ImageBuffer::from_column(rec.raw.col(j), h, w, spec.dynamic_range).clamped();
    const double s = ssim(orig, approx, cfg.ssim_windowed);
    total += s;
    worst = std::min(worst, s);
    csv += std::to_string(j) + "," + fmt_real(s) + "\n";
    if (cfg.dump_pgm && j < cfg.pgm_limit) {
      char name[32];
      std::snprintf(name, sizeof name, "recon_%05ld.pgm", static_cast<long>(j));
      write_pgm((fs::path(cfg.out_dir) / name).string(), approx);
    }
  }
  write_text(cfg.out_dir, "ssim.csv", csv);
  ctx.clock.lap("ssim");

  ordered_json report;
  report["task"] = "reconstruct";
  report["n_images"] = test.data.cols();
  report["ssim_mode"] = cfg.ssim_windowed ? "windowed" : "global";
  report["mean_ssim"] = total / static_cast<double>(test.data.cols());
  report["min_ssim"] = worst;
  report["relative_reconstruction_error"] = rec.relative_error;
  write_json(cfg.out_dir, "reconstruct_report.json", report);
  return 0;
}

// ---- eval ------------------------------------------------------------------

inline int cmd_eval(Context& ctx) {
  RunConfig& cfg = ctx.cfg;
  const TrainedModel model = load_model_checked(cfg);
  const LabeledDataset test = load_dataset(need_dataset(cfg.test_data, "test"), "test");
  ensure_out_dir(cfg.out_dir);
  ctx.clock.lap("load");

  const SparsityReport s = sparsity_report(model, test.data);
  ctx.clock.lap("eval");

  ordered_json report;
  report["task"] = "eval";
  report["n_samples"] = test.data.cols();
  report["K"] = model.config.K;
  report["L"] = model.config.nodes();
  report["sparsity_without_enhancement"] = s.without_enhancement;
  report["sparsity_with_enhancement"] = s.with_enhancement;
  report["sparsity_ratio"] = s.ratio;
  report["relative_reconstruction_error"] = s.relative_reconstruction_error;
  write_json(cfg.out_dir, "eval_report.json", report);
  return 0;
}

// ---- sweep -----------------------------------------------------------------

template <typename T>
std::vector<T> dedup_axis(std::vector<T> values, const std::string& axis) {
  std::vector<T> out;
  for (const T& v : values) {
    if (std::find(out.begin(), out.end(), v) == out.end()) {
      out.push_back(v);
    } else {
      log_warning("sweep: duplicate " + axis + " value dropped");
    }
  }
  return out;
}

inline int cmd_sweep(Context& ctx) {
  RunConfig& cfg = ctx.cfg;
  if (!cfg.sweep) throw ConfigError("config.sweep is required for the sweep task");
  if (!cfg.has_K) throw ConfigError("config.model.K is required for the sweep task");
  const SweepGrid& g = *cfg.sweep;
  if (g.mu1.empty() && g.mu2.empty() && g.mu3.empty() && g.degree.empty() && g.reg_C.empty()) {
    throw ConfigError("config.sweep: empty grid (give at least one of mu1, mu2, mu3, degree, reg_C)");
  }
  const auto mu1 = dedup_axis(g.mu1.empty() ? std::vector<double>{cfg.train.mu1} : g.mu1, "mu1");
  const auto mu2 = dedup_axis(g.mu2.empty() ? std::vector<double>{cfg.train.mu2} : g.mu2, "mu2");
  const auto mu3 = dedup_axis(g.mu3.empty() ? std::vector<double>{cfg.train.mu3} : g.mu3, "mu3");
  const auto degree = dedup_axis(g.degree.empty() ? std::vector<int>{cfg.svc.degree} : g.degree, "degree");
  const auto reg_c = dedup_axis(g.reg_C.empty() ? std::vector<double>{cfg.svc.reg_C} : g.reg_C, "reg_C");
  const auto seeds = dedup_axis(g.seeds.empty() ? std::vector<std::uint64_t>{cfg.train.master_seed} : g.seeds, "seed");

  const LabeledDataset train = load_dataset(need_dataset(cfg.train_data, "train"), "train");
  const LabeledDataset test = load_dataset(need_dataset(cfg.test_data, "test"), "test");
  if (!train.has_labels() || !test.has_labels()) {
    throw DataError(DataError::Kind::kInvalidValue, "sweep needs labeled train and test data");
  }
  ensure_out_dir(cfg.out_dir);
  ctx.clock.lap("load");

  TrainOptions opts;
  opts.threads = cfg.threads;
  std::string csv = "mu1,mu2,mu3,degree,reg_C,accuracy_mean,accuracy_std,n_seeds\n";
  ordered_json rows = ordered_json::array();
  for (double m1 : mu1) {
    for (double m2 : mu2) {
      for (double m3 : mu3) {
        std::vector<TrainedModel> models;
        for (std::uint64_t seed : seeds) {
          TrainConfig tc = cfg.train;
          tc.mu1 = m1;
          tc.mu2 = m2;
          tc.mu3 = m3;
          tc.master_seed = seed;
          models.push_back(train_supervised(train.data, train.labels, tc, opts));
        }
        for (int deg : degree) {
          for (double c : reg_c) {
            SVCOptions so = cfg.svc;
            so.degree = deg;
            so.reg_C = c;
            std::vector<double> acc;
            for (const auto& model : models) {
              acc.push_back(accuracy(run_classifier(cfg, model, &train, test.data, so).labels, test.labels));
            }
            double mean = 0.0;
            for (double a : acc) mean += a;
            mean /= static_cast<double>(acc.size());
            double var = 0.0;
            for (double a : acc) var += (a - mean) * (a - mean);
            const double sd = acc.size() > 1 ? std::sqrt(var / static_cast<double>(acc.size() - 1)) : 0.0;
            csv += fmt_real(m1) + "," + fmt_real(m2) + "," + fmt_real(m3) + "," + std::to_string(deg) +
                   "," + fmt_real(c) + "," + fmt_real(mean) + "," + fmt_real(sd) + "," +
                   std::to_string(acc.size()) + "\n";
            rows.push_back({{"mu1", m1}, {"mu2", m2}, {"mu3", m3}, {"degree", deg}, {"reg_C", c},
                            {"accuracy_mean", mean}, {"accuracy_std", sd}, {"n_seeds", acc.size()}});
          }
        }
      }
    }
  }
  ctx.clock.lap("sweep");
  write_text(cfg.out_dir, "sweep.csv", csv);
  ordered_json report;
  report["task"] = "sweep";
  report["classifier"] = cfg.classifier;
  report["grid_points"] = rows.size();
  report["rows"] = rows;
  write_json(cfg.out_dir, "sweep_report.json", report);
  return 0;
}

}  // namespace rvfldl::cli
