#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "rfkit/common.hpp"
#include "rfkit/data.hpp"
#include "rfkit/features.hpp"
#include "rfkit/io.hpp"
#include "rfkit/selection.hpp"
#include "rfkit/solver.hpp"

namespace rfkit {

enum class Method { Ksvm, RfsvmUnif, RfsvmOpt };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Ksvm: return "ksvm";
    case Method::RfsvmUnif: return "rfsvm-unif";
    case Method::RfsvmOpt: return "rfsvm-opt";
  }
  return "?";
}

inline Method method_from_string(std::string_view s) {
  if (s == "ksvm") return Method::Ksvm;
  if (s == "rfsvm-unif" || s == "unif") return Method::RfsvmUnif;
  if (s == "rfsvm-opt" || s == "opt") return Method::RfsvmOpt;
  throw validation_error("unknown method: '" + std::string(s) + "'");
}

inline std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int e = -7; e <= 1; ++e) grid.push_back(std::pow(10.0, e));
  return grid;
}

/// One experiment description; every number the run needs lives here, and the
/// whole output is a pure function of it (wall_ms excepted).
struct ExperimentConfig {
  std::string task = "sweep";  // sweep | curve
  std::vector<Method> methods{Method::Ksvm, Method::RfsvmUnif, Method::RfsvmOpt};
  std::vector<int> m_grid{1000};
  std::vector<double> lambda_grid = default_lambda_grid();
  int n_features = 20;              // fixed N; 0 switches to the ln^2 rule
  double features_log_sq_coeff = 2.0;  // N = ceil(c ln^2 m)
  double pool_factor = 100.0;          // M = ceil(pool_factor * N)
  double probe_fraction = 0.3;         // L = ceil(probe_fraction * m)
  double ridge = 0.0;                  // selection mu; <= 0 means 1/m
  int repeats = 10;
  int test_size = 100000;
  std::uint64_t seed = 1;
  SyntheticSpec data;
  int epochs = 20;
  double tolerance = 1e-6;
  double gamma = 0.0;  // <= 0: mean-distance heuristic per training set
  int bandwidth_cap = 1000;
  int threads = 0;  // 0: hardware concurrency
  double validation_fraction = 0.2;
  bool reweight = true;

  void validate() const {
    if (task != "sweep" && task != "curve")
      throw validation_error("experiment config: task must be 'sweep' or 'curve'");
    if (methods.empty()) throw validation_error("experiment config: methods must be non-empty");
    if (m_grid.empty()) throw validation_error("experiment config: m grid must be non-empty");
    for (int m : m_grid)
      if (m < 2) throw validation_error("experiment config: every m must be >= 2");
    if (task == "curve" && !std::is_sorted(m_grid.begin(), m_grid.end()))
      throw validation_error("experiment config: curve m grid must be increasing");
    if (lambda_grid.empty())
      throw validation_error("experiment config: lambda grid must be non-empty");
    for (double l : lambda_grid)
      if (!(l > 0.0)) throw validation_error("experiment config: lambdas must be positive");
    if (n_features < 0) throw validation_error("experiment config: n_features must be >= 0");
    if (n_features == 0 && !(features_log_sq_coeff > 0.0))
      throw validation_error("experiment config: ln^2 rule needs a positive coefficient");
    if (repeats < 1) throw validation_error("experiment config: repeats must be >= 1");
    if (test_size < 1) throw validation_error("experiment config: test_size must be >= 1");
    if (!(pool_factor >= 1.0))
      throw validation_error("experiment config: pool_factor must be >= 1");
    if (!(probe_fraction > 0.0 && probe_fraction <= 1.0))
      throw validation_error("experiment config: probe_fraction must lie in (0, 1]");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw validation_error("experiment config: validation_fraction must lie in (0, 1)");
    data.validate();
  }

  int features_for(int m) const {
    if (n_features > 0) return n_features;
    double lg = std::log(double(m));
    return static_cast<int>(std::ceil(features_log_sq_coeff * lg * lg));
  }

  double ridge_for(int m) const { return ridge > 0.0 ? ridge : 1.0 / double(m); }

  double bayes_risk() const { return data.flip_prob; }
};

struct RepeatOutcome {
  int repeat = 0;
  double lambda = 0.0;
  double accuracy = 0.0;
  double excess_risk = 0.0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
};

/// One experiment cell: a (method, lambda) column of a sweep or a
/// (method, m) point of a learning curve, aggregated over repeats.
struct RunResult {
  Method method = Method::RfsvmUnif;
  int m = 0;
  int n_features = 0;
  double lambda = 0.0;  // curve cells: 0, the per-repeat choice is in outcomes
  std::vector<RepeatOutcome> outcomes;
  double mean_accuracy = 0.0, std_accuracy = 0.0;
  double mean_excess = 0.0, std_excess = 0.0;
};

namespace detail {

inline void finalize_stats(RunResult& r) {
  const double n = double(r.outcomes.size());
  double sa = 0, se = 0;
  for (const auto& o : r.outcomes) {
    sa += o.accuracy;
    se += o.excess_risk;
  }
  r.mean_accuracy = sa / n;
  r.mean_excess = se / n;
  double va = 0, ve = 0;
  for (const auto& o : r.outcomes) {
    va += (o.accuracy - r.mean_accuracy) * (o.accuracy - r.mean_accuracy);
    ve += (o.excess_risk - r.mean_excess) * (o.excess_risk - r.mean_excess);
  }
  r.std_accuracy = n > 1 ? std::sqrt(va / (n - 1)) : 0.0;
  r.std_excess = n > 1 ? std::sqrt(ve / (n - 1)) : 0.0;
}

/// Accuracies of several random-feature weight vectors on one dataset,
/// sharing the embedding work across models.
inline std::vector<double> rf_accuracies(const FeatureSet& fs,
                                         const std::vector<Eigen::VectorXd>& weights,
                                         const LabeledDataset& data) {
  Eigen::MatrixXd w(fs.embedding_dim(), static_cast<Eigen::Index>(weights.size()));
  for (std::size_t k = 0; k < weights.size(); ++k) w.col(static_cast<Eigen::Index>(k)) = weights[k];
  std::vector<long long> correct(weights.size(), 0);
  const int block = 8192;
  for (int start = 0; start < data.size(); start += block) {
    int count = std::min(block, data.size() - start);
    Eigen::MatrixXd scores =
        embed_all(fs, data.points.middleRows(start, count)).transpose() * w;
    for (int i = 0; i < count; ++i)
      for (std::size_t k = 0; k < weights.size(); ++k)
        if (sign_label(scores(i, static_cast<Eigen::Index>(k))) == data.labels(start + i))
          ++correct[k];
  }
  std::vector<double> acc(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k)
    acc[k] = double(correct[k]) / double(data.size());
  return acc;
}

inline std::vector<double> ksvm_accuracies(const Eigen::MatrixXd& support, double gamma,
                                           const std::vector<Eigen::VectorXd>& alphas,
                                           const LabeledDataset& data) {
  Eigen::MatrixXd a(support.rows(), static_cast<Eigen::Index>(alphas.size()));
  for (std::size_t k = 0; k < alphas.size(); ++k) a.col(static_cast<Eigen::Index>(k)) = alphas[k];
  const Eigen::VectorXd support_sq = support.rowwise().squaredNorm();
  std::vector<long long> correct(alphas.size(), 0);
  const int block = 4096;
  for (int start = 0; start < data.size(); start += block) {
    int count = std::min(block, data.size() - start);
    auto chunk = data.points.middleRows(start, count);
    Eigen::MatrixXd d2 = (-2.0 * chunk * support.transpose()).rowwise() + support_sq.transpose();
    d2.colwise() += chunk.rowwise().squaredNorm();
    Eigen::MatrixXd scores =
        (-d2.cwiseMax(0.0) / (2.0 * gamma * gamma)).array().exp().matrix() * a;
    for (int i = 0; i < count; ++i)
      for (std::size_t k = 0; k < alphas.size(); ++k)
        if (sign_label(scores(i, static_cast<Eigen::Index>(k))) == data.labels(start + i))
          ++correct[k];
  }
  std::vector<double> acc(alphas.size());
  for (std::size_t k = 0; k < alphas.size(); ++k)
    acc[k] = double(correct[k]) / double(data.size());
  return acc;
}

template <typename Job>
void run_jobs(int threads, int n_jobs, Job&& job) {
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, n_jobs));
  if (workers == 1) {
    for (int i = 0; i < n_jobs; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  auto worker = [&]() {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n_jobs) return;
      try {
        job(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct RepeatContext {
  LabeledDataset train;
  double gamma = 0.0;
  std::uint64_t train_seed = 0;
};

inline RepeatContext make_repeat_context(const ExperimentConfig& cfg, int m, int repeat) {
  RepeatContext ctx;
  ctx.train_seed = rng::derive(cfg.seed, rng::stream::train_set, std::uint64_t(m),
                               std::uint64_t(repeat));
  ctx.train = gen_circle_annulus(cfg.data, m, ctx.train_seed);
  ctx.gamma = cfg.gamma > 0.0
                  ? cfg.gamma
                  : bandwidth_heuristic(ctx.train.points, cfg.bandwidth_cap, ctx.train_seed);
  return ctx;
}

inline FeatureSet make_features(const ExperimentConfig& cfg, const RepeatContext& ctx, Method method,
                                int m, int repeat, int n) {
  const std::uint64_t fseed = rng::derive(cfg.seed, rng::stream::features,
                                          std::uint64_t(method), std::uint64_t(m),
                                          std::uint64_t(repeat));
  FeatureSpec spec = FeatureSpec::gaussian(cfg.data.dim, ctx.gamma);
  if (method == Method::RfsvmUnif) return sample_features(spec, n, fseed);
  SelectionConfig sel;
  sel.pool_size = static_cast<int>(std::ceil(cfg.pool_factor * n));
  sel.probe_count = std::min(m, static_cast<int>(std::ceil(cfg.probe_fraction * m)));
  sel.ridge = cfg.ridge_for(m);
  sel.target_count = n;
  sel.seed = rng::derive(cfg.seed, rng::stream::selection, std::uint64_t(m),
                         std::uint64_t(repeat));
  sel.reweight = cfg.reweight;
  return select_features(ctx.train.points, spec, sel).features;
}

inline TrainConfig make_train_config(const ExperimentConfig& cfg, double lambda, Method method,
                                     int m, int repeat, int lambda_idx) {
  TrainConfig tc;
  tc.lambda = lambda;
  tc.epochs = cfg.epochs;
  tc.tolerance = cfg.tolerance;
  tc.seed = rng::derive(cfg.seed, rng::stream::train,
                        std::uint64_t(method) * 1000003ull + std::uint64_t(repeat),
                        std::uint64_t(m), std::uint64_t(lambda_idx));
  return tc;
}

}  // namespace detail

/// Fixed-m sweep over the lambda grid: every (method, lambda, repeat) cell is
/// trained on the repeat's training set and scored on one shared test set.
inline std::vector<RunResult> run_sweep(const ExperimentConfig& cfg,
                                        const LabeledDataset* shared_test = nullptr) {
  cfg.validate();
  if (cfg.m_grid.size() != 1)
    throw validation_error("run_sweep: sweep expects a single m");
  const int m = cfg.m_grid[0];
  if (std::find(cfg.methods.begin(), cfg.methods.end(), Method::Ksvm) != cfg.methods.end() &&
      m > kKsvmSampleGuard)
    throw validation_error("run_sweep: ksvm method exceeds the Gram guard at m = " +
                           std::to_string(m));
  LabeledDataset local_test;
  if (!shared_test) {
    local_test = gen_circle_annulus(cfg.data, cfg.test_size,
                                    rng::derive(cfg.seed, rng::stream::test_set));
    shared_test = &local_test;
  }
  const double bayes = cfg.bayes_risk();
  const int n_lambda = static_cast<int>(cfg.lambda_grid.size());
  const int n_methods = static_cast<int>(cfg.methods.size());
  const int n = cfg.features_for(m);

  // One job per (method, repeat); it trains the whole lambda column so the
  // Gram matrix / embeddings are built once and test scoring is batched.
  struct JobOut {
    std::vector<double> accuracy;  // per lambda
    double wall_ms = 0.0;
    std::uint64_t seed = 0;
  };
  std::vector<JobOut> outs(static_cast<std::size_t>(n_methods * cfg.repeats));
  detail::run_jobs(cfg.threads, n_methods * cfg.repeats, [&](int job) {
    const int method_idx = job / cfg.repeats;
    const int repeat = job % cfg.repeats;
    const Method method = cfg.methods[static_cast<std::size_t>(method_idx)];
    auto t0 = std::chrono::steady_clock::now();
    detail::RepeatContext ctx = detail::make_repeat_context(cfg, m, repeat);
    JobOut out;
    out.seed = ctx.train_seed;
    if (method == Method::Ksvm) {
      std::vector<Eigen::VectorXd> alphas;
      for (int li = 0; li < n_lambda; ++li) {
        TrainConfig tc = detail::make_train_config(cfg, cfg.lambda_grid[static_cast<std::size_t>(li)],
                                                   method, m, repeat, li);
        alphas.push_back(train_ksvm(ctx.train, ctx.gamma, tc).alphas);
      }
      out.accuracy = detail::ksvm_accuracies(ctx.train.points, ctx.gamma, alphas, *shared_test);
    } else {
      FeatureSet fs = detail::make_features(cfg, ctx, method, m, repeat, n);
      std::vector<Eigen::VectorXd> weights;
      for (int li = 0; li < n_lambda; ++li) {
        TrainConfig tc = detail::make_train_config(cfg, cfg.lambda_grid[static_cast<std::size_t>(li)],
                                                   method, m, repeat, li);
        weights.push_back(train_rfsvm(ctx.train, fs, tc).weights);
      }
      out.accuracy = detail::rf_accuracies(fs, weights, *shared_test);
    }
    auto t1 = std::chrono::steady_clock::now();
    out.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    outs[static_cast<std::size_t>(job)] = std::move(out);
  });

  std::vector<RunResult> results;
  for (int method_idx = 0; method_idx < n_methods; ++method_idx) {
    for (int li = 0; li < n_lambda; ++li) {
      RunResult r;
      r.method = cfg.methods[static_cast<std::size_t>(method_idx)];
      r.m = m;
      r.n_features = r.method == Method::Ksvm ? 0 : n;
      r.lambda = cfg.lambda_grid[static_cast<std::size_t>(li)];
      for (int repeat = 0; repeat < cfg.repeats; ++repeat) {
        const JobOut& out = outs[static_cast<std::size_t>(method_idx * cfg.repeats + repeat)];
        RepeatOutcome o;
        o.repeat = repeat;
        o.lambda = r.lambda;
        o.accuracy = out.accuracy[static_cast<std::size_t>(li)];
        o.excess_risk = (1.0 - o.accuracy) - bayes;
        o.wall_ms = out.wall_ms;
        o.seed = out.seed;
        r.outcomes.push_back(o);
      }
      detail::finalize_stats(r);
      results.push_back(std::move(r));
    }
  }
  return results;
}

/// Learning curve: for each m, N = ceil(c ln^2 m) features, lambda picked per
/// repeat on a held-out validation split, final model retrained on the full
/// training set and scored on the shared test set. Excess risk is measured
/// against the analytic Bayes risk of the synthetic task.
inline std::vector<RunResult> run_learning_curve(const ExperimentConfig& cfg,
                                                 const LabeledDataset* shared_test = nullptr) {
  cfg.validate();
  LabeledDataset local_test;
  if (!shared_test) {
    local_test = gen_circle_annulus(cfg.data, cfg.test_size,
                                    rng::derive(cfg.seed, rng::stream::test_set));
    shared_test = &local_test;
  }
  const double bayes = cfg.bayes_risk();
  const int n_m = static_cast<int>(cfg.m_grid.size());
  const int n_methods = static_cast<int>(cfg.methods.size());
  const int n_lambda = static_cast<int>(cfg.lambda_grid.size());
  for (Method method : cfg.methods)
    if (method == Method::Ksvm)
      for (int m : cfg.m_grid)
        if (m > kKsvmSampleGuard)
          throw validation_error("run_learning_curve: ksvm exceeds the Gram guard at m = " +
                                 std::to_string(m));

  struct JobOut {
    RepeatOutcome outcome;
  };
  const int n_jobs = n_m * n_methods * cfg.repeats;
  std::vector<JobOut> outs(static_cast<std::size_t>(n_jobs));
  detail::run_jobs(cfg.threads, n_jobs, [&](int job) {
    const int mi = job / (n_methods * cfg.repeats);
    const int method_idx = (job / cfg.repeats) % n_methods;
    const int repeat = job % cfg.repeats;
    const int m = cfg.m_grid[static_cast<std::size_t>(mi)];
    const Method method = cfg.methods[static_cast<std::size_t>(method_idx)];
    const int n = cfg.features_for(m);
    auto t0 = std::chrono::steady_clock::now();
    detail::RepeatContext ctx = detail::make_repeat_context(cfg, m, repeat);
    auto [fit_part, val_part] =
        split(ctx.train, 1.0 - cfg.validation_fraction, ctx.train_seed);

    double best_lambda = cfg.lambda_grid[0];
    double best_acc = -1.0;
    if (method == Method::Ksvm) {
      std::vector<Eigen::VectorXd> alphas;
      for (int li = 0; li < n_lambda; ++li) {
        TrainConfig tc = detail::make_train_config(cfg, cfg.lambda_grid[static_cast<std::size_t>(li)],
                                                   method, m, repeat, li);
        alphas.push_back(train_ksvm(fit_part, ctx.gamma, tc).alphas);
      }
      auto val_acc = detail::ksvm_accuracies(fit_part.points, ctx.gamma, alphas, val_part);
      for (int li = 0; li < n_lambda; ++li)
        if (val_acc[static_cast<std::size_t>(li)] > best_acc) {
          best_acc = val_acc[static_cast<std::size_t>(li)];
          best_lambda = cfg.lambda_grid[static_cast<std::size_t>(li)];
        }
      TrainConfig tc = detail::make_train_config(cfg, best_lambda, method, m, repeat, n_lambda);
      KernelModel model = train_ksvm(ctx.train, ctx.gamma, tc);
      auto acc = detail::ksvm_accuracies(model.support, model.gamma, {model.alphas}, *shared_test);
      outs[static_cast<std::size_t>(job)].outcome.accuracy = acc[0];
    } else {
      FeatureSet fs = detail::make_features(cfg, ctx, method, m, repeat, n);
      std::vector<Eigen::VectorXd> weights;
      for (int li = 0; li < n_lambda; ++li) {
        TrainConfig tc = detail::make_train_config(cfg, cfg.lambda_grid[static_cast<std::size_t>(li)],
                                                   method, m, repeat, li);
        weights.push_back(train_rfsvm(fit_part, fs, tc).weights);
      }
      auto val_acc = detail::rf_accuracies(fs, weights, val_part);
      for (int li = 0; li < n_lambda; ++li)
        if (val_acc[static_cast<std::size_t>(li)] > best_acc) {
          best_acc = val_acc[static_cast<std::size_t>(li)];
          best_lambda = cfg.lambda_grid[static_cast<std::size_t>(li)];
        }
      TrainConfig tc = detail::make_train_config(cfg, best_lambda, method, m, repeat, n_lambda);
      Model model = train_rfsvm(ctx.train, fs, tc);
      auto acc = detail::rf_accuracies(fs, {model.weights}, *shared_test);
      outs[static_cast<std::size_t>(job)].outcome.accuracy = acc[0];
    }
    auto t1 = std::chrono::steady_clock::now();
    RepeatOutcome& o = outs[static_cast<std::size_t>(job)].outcome;
    o.repeat = repeat;
    o.lambda = best_lambda;
    o.excess_risk = (1.0 - o.accuracy) - bayes;
    o.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    o.seed = ctx.train_seed;
  });

  std::vector<RunResult> results;
  for (int mi = 0; mi < n_m; ++mi) {
    for (int method_idx = 0; method_idx < n_methods; ++method_idx) {
      RunResult r;
      r.method = cfg.methods[static_cast<std::size_t>(method_idx)];
      r.m = cfg.m_grid[static_cast<std::size_t>(mi)];
      r.n_features = r.method == Method::Ksvm ? 0 : cfg.features_for(r.m);
      r.lambda = 0.0;
      for (int repeat = 0; repeat < cfg.repeats; ++repeat)
        r.outcomes.push_back(
            outs[static_cast<std::size_t>((mi * n_methods + method_idx) * cfg.repeats + repeat)]
                .outcome);
      detail::finalize_stats(r);
      results.push_back(std::move(r));
    }
  }
  return results;
}

struct SummaryRow {
  Method method;
  int m = 0;
  int n_features = 0;
  double lambda = 0.0;
  double mean = 0.0, stddev = 0.0, min = 0.0, max = 0.0;  // accuracy
};

/// Mean / sample std (n-1) / min / max accuracy per cell, input order kept.
inline std::vector<SummaryRow> summarize(const std::vector<RunResult>& results) {
  if (results.empty()) throw validation_error("summarize: no results");
  std::vector<SummaryRow> rows;
  for (const auto& r : results) {
    SummaryRow row;
    row.method = r.method;
    row.m = r.m;
    row.n_features = r.n_features;
    row.lambda = r.lambda;
    row.mean = r.mean_accuracy;
    row.stddev = r.std_accuracy;
    double lo = r.outcomes[0].accuracy, hi = r.outcomes[0].accuracy;
    for (const auto& o : r.outcomes) {
      lo = std::min(lo, o.accuracy);
      hi = std::max(hi, o.accuracy);
    }
    row.min = lo;
    row.max = hi;
    rows.push_back(row);
  }
  return rows;
}

inline std::string results_to_csv(const std::vector<RunResult>& results) {
  std::string out = "method,m,n_features,lambda,repeat,accuracy,excess_risk,wall_ms,seed\n";
  for (const auto& r : results) {
    for (const auto& o : r.outcomes) {
      out += to_string(r.method);
      out += ',' + std::to_string(r.m);
      out += ',' + std::to_string(r.n_features);
      out += ',' + format_f64(o.lambda);
      out += ',' + std::to_string(o.repeat);
      out += ',' + format_f64(o.accuracy);
      out += ',' + format_f64(o.excess_risk);
      out += ',' + format_f64(o.wall_ms);
      out += ',' + std::to_string(o.seed);
      out += '\n';
    }
  }
  return out;
}

inline std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "method,m,n_features,lambda,mean_accuracy,std_accuracy,min_accuracy,max_accuracy\n";
  for (const auto& r : rows) {
    out += to_string(r.method);
    out += ',' + std::to_string(r.m);
    out += ',' + std::to_string(r.n_features);
    out += ',' + format_f64(r.lambda);
    out += ',' + format_f64(r.mean);
    out += ',' + format_f64(r.stddev);
    out += ',' + format_f64(r.min);
    out += ',' + format_f64(r.max);
    out += '\n';
  }
  return out;
}

namespace detail {

template <typename T>
T config_get(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw validation_error(std::string("config error at /") + key + ": wrong type");
  }
}

}  // namespace detail

/// Parse an experiment config document. Unknown keys are rejected so a typo
/// cannot silently fall back to a default.
inline ExperimentConfig experiment_config_from_json(const json& j) {
  static const char* known[] = {"task", "methods", "m", "m_grid", "lambda_grid", "n_features",
                                "features_log_sq_coeff", "pool_factor", "probe_fraction",
                                "ridge", "repeats", "test_size", "seed", "dim", "flip_prob",
                                "inner_radius", "annulus_lo", "annulus_hi", "mix", "epochs",
                                "tolerance", "gamma", "bandwidth_cap", "threads",
                                "validation_fraction", "reweight"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok) throw validation_error("config error at /" + it.key() + ": unknown key");
  }
  ExperimentConfig cfg;
  cfg.task = detail::config_get<std::string>(j, "task", cfg.task);
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& mj : j.at("methods")) cfg.methods.push_back(method_from_string(mj.get<std::string>()));
  }
  if (j.contains("m") && j.contains("m_grid"))
    throw validation_error("config error at /m: give either m or m_grid, not both");
  if (j.contains("m")) cfg.m_grid = {detail::config_get<int>(j, "m", 1000)};
  if (j.contains("m_grid")) cfg.m_grid = j.at("m_grid").get<std::vector<int>>();
  if (j.contains("lambda_grid")) cfg.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
  cfg.n_features = detail::config_get<int>(j, "n_features", cfg.n_features);
  cfg.features_log_sq_coeff =
      detail::config_get<double>(j, "features_log_sq_coeff", cfg.features_log_sq_coeff);
  cfg.pool_factor = detail::config_get<double>(j, "pool_factor", cfg.pool_factor);
  cfg.probe_fraction = detail::config_get<double>(j, "probe_fraction", cfg.probe_fraction);
  cfg.ridge = detail::config_get<double>(j, "ridge", cfg.ridge);
  cfg.repeats = detail::config_get<int>(j, "repeats", cfg.repeats);
  cfg.test_size = detail::config_get<int>(j, "test_size", cfg.test_size);
  cfg.seed = detail::config_get<std::uint64_t>(j, "seed", cfg.seed);
  cfg.data.dim = detail::config_get<int>(j, "dim", cfg.data.dim);
  cfg.data.flip_prob = detail::config_get<double>(j, "flip_prob", cfg.data.flip_prob);
  cfg.data.inner_radius = detail::config_get<double>(j, "inner_radius", cfg.data.inner_radius);
  cfg.data.annulus_lo = detail::config_get<double>(j, "annulus_lo", cfg.data.annulus_lo);
  cfg.data.annulus_hi = detail::config_get<double>(j, "annulus_hi", cfg.data.annulus_hi);
  cfg.data.mix = detail::config_get<double>(j, "mix", cfg.data.mix);
  cfg.epochs = detail::config_get<int>(j, "epochs", cfg.epochs);
  cfg.tolerance = detail::config_get<double>(j, "tolerance", cfg.tolerance);
  cfg.gamma = detail::config_get<double>(j, "gamma", cfg.gamma);
  cfg.bandwidth_cap = detail::config_get<int>(j, "bandwidth_cap", cfg.bandwidth_cap);
  cfg.threads = detail::config_get<int>(j, "threads", cfg.threads);
  cfg.validation_fraction =
      detail::config_get<double>(j, "validation_fraction", cfg.validation_fraction);
  cfg.reweight = detail::config_get<bool>(j, "reweight", cfg.reweight);
  cfg.validate();
  return cfg;
}

inline json experiment_config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["task"] = cfg.task;
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(to_string(m));
  j["methods"] = std::move(methods);
  j["m_grid"] = cfg.m_grid;
  j["lambda_grid"] = cfg.lambda_grid;
  j["n_features"] = cfg.n_features;
  j["features_log_sq_coeff"] = cfg.features_log_sq_coeff;
  j["pool_factor"] = cfg.pool_factor;
  j["probe_fraction"] = cfg.probe_fraction;
  j["ridge"] = cfg.ridge;
  j["repeats"] = cfg.repeats;
  j["test_size"] = cfg.test_size;
  j["seed"] = cfg.seed;
  j["dim"] = cfg.data.dim;
  j["flip_prob"] = cfg.data.flip_prob;
  j["inner_radius"] = cfg.data.inner_radius;
  j["annulus_lo"] = cfg.data.annulus_lo;
  j["annulus_hi"] = cfg.data.annulus_hi;
  j["mix"] = cfg.data.mix;
  j["epochs"] = cfg.epochs;
  j["tolerance"] = cfg.tolerance;
  j["gamma"] = cfg.gamma;
  j["bandwidth_cap"] = cfg.bandwidth_cap;
  j["threads"] = cfg.threads;
  j["validation_fraction"] = cfg.validation_fraction;
  j["reweight"] = cfg.reweight;
  return j;
}

/// Hash of every numeric result column except wall_ms, which is the one
/// value a re-run cannot reproduce.
inline std::uint64_t results_hash(const std::vector<RunResult>& results) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](double v) { h = fnv1a64(&v, sizeof(v), h); };
  for (const auto& r : results) {
    std::string_view name = to_string(r.method);
    h = fnv1a64(name.data(), name.size(), h);
    mix(double(r.m));
    mix(double(r.n_features));
    for (const auto& o : r.outcomes) {
      mix(double(o.repeat));
      mix(o.lambda);
      mix(o.accuracy);
      mix(o.excess_risk);
      mix(double(o.seed));
    }
  }
  return h;
}

/// Everything needed to re-run any cell in isolation: the echoed config (all
/// seeds derive from it), the shared test-set hash, and a hash of the
/// numeric results for comparing runs.
inline json experiment_manifest(const ExperimentConfig& cfg, const std::vector<RunResult>& results,
                                std::uint64_t test_set_hash) {
  json j;
  j["toolkit_version"] = RFKIT_VERSION;
  j["config"] = experiment_config_to_json(cfg);
  j["config_hash"] = fnv1a64(j["config"].dump());
  j["test_set_hash"] = test_set_hash;
  j["bayes_risk"] = cfg.bayes_risk();
  j["results_hash"] = results_hash(results);
  std::size_t rows = 0;
  for (const auto& r : results) rows += r.outcomes.size();
  j["rows"] = rows;
  return j;
}

}  // namespace rfkit
