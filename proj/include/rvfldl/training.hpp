#pragma once

// Unsupervised and supervised training pipelines with T-fold, r-run
// averaging, plus the test-time helpers that pair a trained model with
// new data (query coding, argmax/SVC classification, reconstruction and
// sparsity reporting).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "rvfldl/enhance.hpp"
#include "rvfldl/errors.hpp"
#include "rvfldl/horseshoe.hpp"
#include "rvfldl/io.hpp"
#include "rvfldl/linalg.hpp"
#include "rvfldl/random.hpp"
#include "rvfldl/solver.hpp"
#include "rvfldl/svc.hpp"

namespace rvfldl {

/// Reserved fold index for streams that are not tied to a (fold, run) job.
inline constexpr std::uint32_t kSharedFold = kMaxJobIndex - 1;
inline constexpr std::uint32_t kFoldAssignmentRun = 0;
inline constexpr std::uint32_t kCodingRun = 1;

struct TrainConfig {
  int K = 0;
  int L = -1;  // < 0 means L = K
  double tau = 1.0;
  double sigma2 = 1.0;
  double eta = kDefaultEta;
  double mu1 = 0.2;
  double mu2 = 0.2;
  double mu3 = 0.1;
  int runs_r = 5;
  int folds_T = 3;
  std::uint64_t master_seed = 0;
  DictInit dict_init = DictInit::kGaussian;
  Normalization normalize = Normalization::kUnitL2;

  int nodes() const { return L < 0 ? K : L; }

  RidgeParams ridge() const { return {mu1, mu2, mu3, eta}; }

  void validate() const {
    if (K < 1) throw ConfigError("K must be >= 1");
    if (nodes() < 1) throw ConfigError("L must be >= 1");
    if (runs_r < 1) throw ConfigError("runs_r must be >= 1");
    if (folds_T < 1) throw ConfigError("folds_T must be >= 1");
    if (runs_r >= static_cast<int>(kMaxJobIndex) || folds_T >= static_cast<int>(kSharedFold)) {
      throw ConfigError("runs_r and folds_T must be < 65535");
    }
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be > 0");
    ridge().validate();
  }
};

inline const char* to_string(DictInit d) {
  return d == DictInit::kGaussian ? "gaussian" : "data_subset";
}

inline DictInit dict_init_from_string(const std::string& s) {
  if (s == "gaussian") return DictInit::kGaussian;
  if (s == "data_subset") return DictInit::kDataSubset;
  throw ConfigError("unknown dict_init '" + s + "' (expected gaussian or data_subset)");
}

struct JobRecord {
  int fold = 0;
  int run = 0;
  std::uint64_t seed = 0;
  Eigen::Index train_samples = 0;
  double objective_dictionary = 0.0;  // ||Y - D X1||^2 + mu1 ||D||^2 right after the D solve
  double objective_refit = 0.0;       // unsupervised: same objective at the dual-ridge codes
  double objective_joint = 0.0;       // supervised: joint objective after the W solve
  double objective_joint_zero_w = 0.0;
  double wall_seconds = 0.0;          // not serialized; varies between runs
  Matrix dictionary;                  // kept only with TrainOptions::keep_job_matrices
  Matrix classifier;
};

struct TrainedModel {
  LearnedDictionary dictionary;
  ClassifierMatrix classifier;  // 0 rows when unsupervised
  EnhancementMap enhancement{Matrix(), Vector()};
  TrainConfig config;
  int input_dim = 0;
  int class_count = 0;
  std::vector<JobRecord> provenance;

  bool supervised() const { return !classifier.empty(); }
};

struct TrainOptions {
  unsigned threads = 1;
  bool keep_job_matrices = false;
};

/// Shuffled partition of N samples into T near-equal folds. Returns the
/// fold index of every sample.
inline std::vector<int> assign_folds(Eigen::Index n, int folds, RandomStream& stream) {
  if (folds < 1) throw ConfigError("assign_folds: folds_T must be >= 1");
  if (folds > n) {
    throw ConfigError("assign_folds: folds_T=" + std::to_string(folds) + " exceeds N=" +
                      std::to_string(n));
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(stream.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (Eigen::Index p = 0; p < n; ++p) {
    fold[static_cast<std::size_t>(order[static_cast<std::size_t>(p)])] = static_cast<int>(p % folds);
  }
  return fold;
}

/// Columns used to train fold t: its complement, or everything when T = 1.
inline std::vector<Eigen::Index> training_columns(std::span<const int> folds, int t, int folds_T) {
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < folds.size(); ++j) {
    if (folds_T == 1 || folds[j] != t) cols.push_back(static_cast<Eigen::Index>(j));
  }
  return cols;
}

inline Matrix select_columns(const Matrix& m, const std::vector<Eigen::Index>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
  return out;
}

/// Initial dictionary and Horseshoe codes for the whole training set,
/// drawn from the shared coding stream of the master seed.
inline CoefficientMatrix initial_codes(const Matrix& y_normalized, const TrainConfig& cfg) {
  cfg.validate();
  RandomStream stream(child_seed(cfg.master_seed, kSharedFold, kCodingRun));
  const Matrix dict = init_dictionary(y_normalized.rows(), cfg.K, stream, cfg.dict_init, &y_normalized);
  HSCodeOptions opts;
  opts.tau = cfg.tau;
  opts.sigma2 = cfg.sigma2;
  opts.eta = cfg.eta;
  return hs_sparse_code(y_normalized, dict, stream, opts);
}

inline std::vector<int> default_folds(Eigen::Index n, const TrainConfig& cfg) {
  RandomStream stream(child_seed(cfg.master_seed, kSharedFold, kFoldAssignmentRun));
  return assign_folds(n, cfg.folds_T, stream);
}

namespace detail {

class JobTimer {
 public:
  explicit JobTimer(double& sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}
  ~JobTimer() {
    sink_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  double& sink_;
  std::chrono::steady_clock::time_point start_;
};

struct JobResult {
  JobRecord record;
  Matrix dictionary;
  Matrix classifier;
};

template <typename Fn>
void run_parallel(std::size_t jobs, unsigned threads, Fn&& fn) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs)));
  if (workers == 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(jobs);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Mean over runs within each fold, then mean over folds, in job order.
inline Matrix fold_run_mean(const std::vector<JobResult>& results, int folds_T, int runs_r,
                            Matrix JobResult::*field) {
  Matrix total;
  for (int t = 0; t < folds_T; ++t) {
    Matrix fold_sum;
    for (int l = 0; l < runs_r; ++l) {
      const Matrix& m = results[static_cast<std::size_t>(t * runs_r + l)].*field;
      if (l == 0) fold_sum = m; else fold_sum += m;
    }
    fold_sum /= static_cast<double>(runs_r);
    if (t == 0) total = fold_sum; else total += fold_sum;
  }
  return total / static_cast<double>(folds_T);
}

inline void check_folds(std::span<const int> folds, Eigen::Index n, int folds_T) {
  if (static_cast<Eigen::Index>(folds.size()) != n) {
    throw DimensionError("fold assignment has " + std::to_string(folds.size()) +
                         " entries for " + std::to_string(n) + " samples");
  }
  std::vector<Eigen::Index> sizes(static_cast<std::size_t>(folds_T), 0);
  for (int f : folds) {
    if (f < 0 || f >= folds_T) {
      throw ConfigError("fold index " + std::to_string(f) + " outside [0, " +
                        std::to_string(folds_T) + ")");
    }
    ++sizes[static_cast<std::size_t>(f)];
  }
  for (int t = 0; t < folds_T; ++t) {
    if (sizes[static_cast<std::size_t>(t)] == 0) throw DataError(DataError::Kind::kInvalidValue, "fold " + std::to_string(t) + " is empty");
    if (folds_T > 1 && sizes[static_cast<std::size_t>(t)] == n) {
      throw DataError(DataError::Kind::kInvalidValue,
                      "fold " + std::to_string(t) + " holds every sample, its training complement is empty");
    }
  }
}

inline TrainedModel finish_model(std::vector<JobResult>& results, const TrainConfig& cfg,
                                 Eigen::Index d, int classes, bool supervised,
                                 const TrainOptions& opts) {
  TrainedModel model;
  model.config = cfg;
  model.input_dim = static_cast<int>(d);
  model.class_count = supervised ? classes : 0;
  model.dictionary.values = fold_run_mean(results, cfg.folds_T, cfg.runs_r, &JobResult::dictionary);
  if (supervised) {
    model.classifier.values = fold_run_mean(results, cfg.folds_T, cfg.runs_r, &JobResult::classifier);
  } else {
    model.classifier.values = Matrix(0, model.dictionary.values.cols());
  }
  RandomStream first(child_seed(cfg.master_seed, 0, 0));
  model.enhancement = init_enhancement(cfg.K, cfg.nodes(), first);
  for (auto& r : results) {
    if (opts.keep_job_matrices) {
      r.record.dictionary = std::move(r.dictionary);
      r.record.classifier = std::move(r.classifier);
    }
    model.provenance.push_back(std::move(r.record));
  }
  return model;
}

inline void check_inputs(const Matrix& y, const Matrix& codes, const TrainConfig& cfg) {
  cfg.validate();
  if (y.size() == 0) throw DimensionError("training data is empty");
  if (codes.rows() != cfg.K || codes.cols() != y.cols()) {
    throw DimensionError("codes are " + shape(codes.rows(), codes.cols()) + ", expected " +
                         shape(cfg.K, y.cols()));
  }
}

}  // namespace detail

/// Unsupervised pipeline on prepared inputs: `y` already normalized,
/// `codes` the K x N sparse codes of y, `folds` one fold index per column.
inline TrainedModel train_unsupervised_with_codes(const Matrix& y, const Matrix& codes,
                                                  std::span<const int> folds,
                                                  const TrainConfig& cfg,
                                                  const TrainOptions& opts = {}) {
  detail::check_inputs(y, codes, cfg);
  detail::check_folds(folds, y.cols(), cfg.folds_T);
  const std::size_t jobs = static_cast<std::size_t>(cfg.folds_T) * static_cast<std::size_t>(cfg.runs_r);
  std::vector<detail::JobResult> results(jobs);
  detail::run_parallel(jobs, opts.threads, [&](std::size_t i) {
    const detail::JobTimer timer(results[i].record.wall_seconds);
    const int t = static_cast<int>(i) / cfg.runs_r;
    const int l = static_cast<int>(i) % cfg.runs_r;
    auto& out = results[i];
    out.record.fold = t;
    out.record.run = l;
    out.record.seed = child_seed(cfg.master_seed, static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(l));
    const auto cols = training_columns(folds, t, cfg.folds_T);
    const Matrix y_t = select_columns(y, cols);
    out.record.train_samples = y_t.cols();

    RandomStream stream(out.record.seed);
    const EnhancementMap map = init_enhancement(cfg.K, cfg.nodes(), stream);
    const Matrix x1 = enhance(select_columns(codes, cols), map).values;
    LearnedDictionary d1 = solve_dictionary(y_t, x1, cfg.mu1, {cfg.eta, true});
    out.record.objective_dictionary = objective_unsupervised(y_t, d1, x1, cfg.mu1);
    const Matrix refit = dual_ridge_coefficients(y_t, d1, cfg.mu1, {cfg.eta, true});
    out.record.objective_refit = objective_unsupervised(y_t, d1, refit, cfg.mu1);
    out.dictionary = std::move(d1.values);
  });
  return detail::finish_model(results, cfg, y.rows(), 0, false, opts);
}

inline TrainedModel train_unsupervised(const Matrix& y_raw, const TrainConfig& cfg,
                                       const TrainOptions& opts = {}) {
  cfg.validate();
  if (y_raw.size() == 0) throw DimensionError("train_unsupervised: data is empty");
  const Matrix y = apply_normalization(y_raw, cfg.normalize);
  const std::vector<int> folds = default_folds(y.cols(), cfg);
  const CoefficientMatrix codes = initial_codes(y, cfg);
  return train_unsupervised_with_codes(y, codes.values, folds, cfg, opts);
}

/// Supervised pipeline on prepared inputs. Per (fold, run) job: enhance
/// the codes, solve D and a preliminary W, update the codes with the
/// label term, solve the final W. Dictionaries and classifiers are
/// averaged over runs, then over folds.
inline TrainedModel train_supervised_with_codes(const Matrix& y, const Matrix& codes,
                                                std::span<const int> labels,
                                                std::span<const int> folds,
                                                const TrainConfig& cfg,
                                                const TrainOptions& opts = {}) {
  detail::check_inputs(y, codes, cfg);
  if (static_cast<Eigen::Index>(labels.size()) != y.cols()) {
    throw DimensionError("train_supervised: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(y.cols()) + " samples");
  }
  detail::check_folds(folds, y.cols(), cfg.folds_T);
  int classes = 0;
  for (int v : labels) {
    if (v < 0) throw DataError(DataError::Kind::kInvalidValue, "negative label " + std::to_string(v));
    classes = std::max(classes, v + 1);
  }
  if (classes < 2) throw ConfigError("train_supervised: need at least 2 classes");
  const Matrix h = one_hot(labels, classes).values;

  for (int t = 0; t < cfg.folds_T; ++t) {
    std::vector<bool> seen(static_cast<std::size_t>(classes), false);
    for (Eigen::Index j : training_columns(folds, t, cfg.folds_T)) seen[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] = true;
    for (int c = 0; c < classes; ++c) {
      if (!seen[static_cast<std::size_t>(c)]) {
        throw DataError(DataError::Kind::kInvalidValue,
                        "class " + std::to_string(c) + " is absent from the training set of fold " +
                            std::to_string(t));
      }
    }
  }

  const RidgeParams ridge = cfg.ridge();
  const RidgeSolveOptions solve_opts{cfg.eta, true};
  const std::size_t jobs = static_cast<std::size_t>(cfg.folds_T) * static_cast<std::size_t>(cfg.runs_r);
  std::vector<detail::JobResult> results(jobs);
  detail::run_parallel(jobs, opts.threads, [&](std::size_t i) {
    const detail::JobTimer timer(results[i].record.wall_seconds);
    const int t = static_cast<int>(i) / cfg.runs_r;
    const int l = static_cast<int>(i) % cfg.runs_r;
    auto& out = results[i];
    out.record.fold = t;
    out.record.run = l;
    out.record.seed = child_seed(cfg.master_seed, static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(l));
    const auto cols = training_columns(folds, t, cfg.folds_T);
    const Matrix y_t = select_columns(y, cols);
    const Matrix h_t = select_columns(h, cols);
    out.record.train_samples = y_t.cols();

    RandomStream stream(out.record.seed);
    const EnhancementMap map = init_enhancement(cfg.K, cfg.nodes(), stream);
    const Matrix x1 = enhance(select_columns(codes, cols), map).values;
    LearnedDictionary d1 = solve_dictionary(y_t, x1, cfg.mu1, solve_opts);
    out.record.objective_dictionary = objective_unsupervised(y_t, d1, x1, cfg.mu1);
    const ClassifierMatrix w0 = solve_classifier(h_t, x1, cfg.mu2, solve_opts);
    const Matrix x1u = update_coefficients(y_t, h_t, d1, w0, ridge);
    ClassifierMatrix w = solve_classifier(h_t, x1u, cfg.mu2, solve_opts);
    out.record.objective_joint = objective_joint(y_t, h_t, d1, w, x1u, ridge);
    const ClassifierMatrix zero{Matrix::Zero(w.values.rows(), w.values.cols())};
    out.record.objective_joint_zero_w = objective_joint(y_t, h_t, d1, zero, x1u, ridge);
    out.dictionary = std::move(d1.values);
    out.classifier = std::move(w.values);
  });
  return detail::finish_model(results, cfg, y.rows(), classes, true, opts);
}

inline TrainedModel train_supervised(const Matrix& y_raw, std::span<const int> labels,
                                     const TrainConfig& cfg, const TrainOptions& opts = {}) {
  cfg.validate();
  if (y_raw.size() == 0) throw DimensionError("train_supervised: data is empty");
  if (static_cast<Eigen::Index>(labels.size()) != y_raw.cols()) {
    throw DimensionError("train_supervised: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(y_raw.cols()) + " samples");
  }
  const Matrix y = apply_normalization(y_raw, cfg.normalize);
  const std::vector<int> folds = default_folds(y.cols(), cfg);
  const CoefficientMatrix codes = initial_codes(y, cfg);
  return train_supervised_with_codes(y, codes.values, labels, folds, cfg, opts);
}

// ---- test time -------------------------------------------------------------

inline Matrix prepare_queries(const TrainedModel& model, const Matrix& y_raw) {
  if (y_raw.rows() != model.input_dim) {
    throw DimensionError("query dimension " + std::to_string(y_raw.rows()) +
                         " does not match model dimension " + std::to_string(model.input_dim));
  }
  return apply_normalization(y_raw, model.config.normalize);
}

/// Label-free codes of raw samples against the model (K+L) x N.
inline Matrix model_codes(const TrainedModel& model, const Matrix& y_raw) {
  return code_queries(prepare_queries(model, y_raw), model.dictionary, model.classifier,
                      model.config.ridge());
}

struct ArgmaxPrediction {
  std::vector<int> labels;
  Matrix scores;  // c x N, W x_q
};

inline ArgmaxPrediction predict_argmax(const TrainedModel& model, const Matrix& y_raw) {
  if (!model.supervised()) throw ConfigError("argmax classification needs a supervised model");
  ArgmaxPrediction out;
  out.scores = model.classifier.values * model_codes(model, y_raw);
  out.labels.resize(static_cast<std::size_t>(out.scores.cols()));
  for (Eigen::Index j = 0; j < out.scores.cols(); ++j) {
    out.labels[static_cast<std::size_t>(j)] = static_cast<int>(argmax_lowest(out.scores.col(j)));
  }
  return out;
}

/// SVC fitted on the label-free codes of a labeled training set, so that
/// training and query codes come from the same map.
inline SVCModel fit_svc(const TrainedModel& model, const Matrix& y_raw, std::span<const int> labels,
                        const SVCOptions& opts = {}) {
  return svc_train(model_codes(model, y_raw), labels, opts);
}

struct SvcPrediction {
  std::vector<int> labels;
  Matrix scores;  // classes x N decision values
};

inline SvcPrediction predict_svc(const TrainedModel& model, const SVCModel& svc, const Matrix& y_raw) {
  SvcPrediction out;
  out.scores = svc_decision_values(svc, model_codes(model, y_raw));
  out.labels.resize(static_cast<std::size_t>(out.scores.cols()));
  for (Eigen::Index j = 0; j < out.scores.cols(); ++j) {
    out.labels[static_cast<std::size_t>(j)] = svc.class_ids[static_cast<std::size_t>(argmax_lowest(out.scores.col(j)))];
  }
  return out;
}

struct Reconstruction {
  Matrix normalized;  // D1 x in the model's normalized space
  Matrix raw;         // mapped back to the input scale
  double relative_error = 0.0;  // in the normalized space
};

/// Codes queries with the label term off (mu3 = 0) and reconstructs D1 x.
inline Reconstruction reconstruct(const TrainedModel& model, const Matrix& y_raw) {
  const Matrix y = prepare_queries(model, y_raw);
  RidgeParams ridge = model.config.ridge();
  ridge.mu3 = 0.0;
  const Matrix x = code_queries(y, model.dictionary, ClassifierMatrix{}, ridge);
  Reconstruction out;
  out.normalized = model.dictionary.values * x;
  const double ynorm = y.norm();
  out.relative_error = ynorm > 0.0 ? (y - out.normalized).norm() / ynorm : out.normalized.norm();
  switch (model.config.normalize) {
    case Normalization::kUnitL2:
      out.raw = out.normalized * y_raw.colwise().norm().asDiagonal();
      break;
    case Normalization::kPixel:
      out.raw = out.normalized * kPixelRange;
      break;
    case Normalization::kNone:
      out.raw = out.normalized;
      break;
  }
  return out;
}

struct SparsityReport {
  double without_enhancement = 0.0;
  double with_enhancement = 0.0;
  double ratio = 0.0;
  double relative_reconstruction_error = 0.0;
};

/// Recomputes the Horseshoe codes of `y_raw` exactly as training would
/// (same coding stream and initial dictionary), enhances them with the
/// model's map and counts effective nonzeros per column before and after.
/// The plain codes use the global 1e-3 * max|X| cut; the enhanced codes
/// use a per-column cut relative to each column's maximum.
inline SparsityReport sparsity_report(const TrainedModel& model, const Matrix& y_raw) {
  const Matrix y = prepare_queries(model, y_raw);
  const CoefficientMatrix x = initial_codes(y, model.config);
  const Matrix x1 = enhance(x.values, model.enhancement).values;
  SparsityReport r;
  r.without_enhancement = effective_sparsity(x);
  r.with_enhancement = effective_sparsity_columnwise(x1);
  r.ratio = r.with_enhancement / r.without_enhancement;
  r.relative_reconstruction_error = reconstruct(model, y_raw).relative_error;
  return r;
}

}  // namespace rvfldl
