#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rfkit/common.hpp"
#include "rfkit/features.hpp"

namespace rfkit {

/// Knobs for the reweighted feature-selection pass: sample an M-feature pool,
/// score it with ridge mu against L probe points, resample N features.
struct SelectionConfig {
  int pool_size = 0;     // M
  int probe_count = 0;   // L
  double ridge = 0.0;    // mu
  int target_count = 0;  // N
  std::uint64_t seed = 0;
  bool reweight = true;  // false reproduces the literal resampling step, no weights

  void validate() const {
    if (pool_size < 1) throw validation_error("selection: pool_size must be >= 1");
    if (probe_count < 1) throw validation_error("selection: probe_count must be >= 1");
    if (!(ridge > 0.0)) throw validation_error("selection: ridge must be positive");
    if (target_count < 1) throw validation_error("selection: target_count must be >= 1");
    if (target_count > pool_size)
      throw validation_error("selection: target_count must not exceed pool_size");
  }
};

/// Diagonal of Phi Phi^T (Phi Phi^T + mu I)^{-1}, one entry per row of Phi.
struct LeverageScores {
  std::vector<double> scores;
  double ridge = 0.0;
};

/// Column j = phi_M(x_j) / sqrt(L). Rows are the pool's embedding
/// coordinates: 2M (cos block then sin block) for gaussian-rff, M for walsh.
inline Eigen::MatrixXd build_probe_matrix(const FeatureSet& pool,
                                          const Eigen::MatrixXd& probe_points) {
  if (probe_points.rows() < 1)
    throw validation_error("build_probe_matrix: need at least one probe point");
  const double inv_sqrt_l = 1.0 / std::sqrt(double(probe_points.rows()));
  return embed_all(pool, probe_points) * inv_sqrt_l;
}

inline LeverageScores compute_leverage(const Eigen::MatrixXd& phi, double mu) {
  if (!(mu > 0.0)) throw validation_error("compute_leverage: mu must be positive");
  if (!phi.allFinite()) throw validation_error("compute_leverage: non-finite entries");
  const Eigen::Index rows = phi.rows();
  const Eigen::Index cols = phi.cols();
  LeverageScores lev;
  lev.ridge = mu;
  lev.scores.resize(static_cast<std::size_t>(rows));
  if (rows <= cols) {
    // S = Phi Phi^T, r_i = sum_k Q_ik^2 sigma_k / (sigma_k + mu).
    Eigen::MatrixXd s = phi * phi.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    Eigen::VectorXd sigma = eig.eigenvalues().cwiseMax(0.0);  // clip rounding underflow
    Eigen::VectorXd ratio = sigma.array() / (sigma.array() + mu);
    for (Eigen::Index i = 0; i < rows; ++i)
      lev.scores[static_cast<std::size_t>(i)] =
          eig.eigenvectors().row(i).array().square().matrix().dot(ratio);
  } else {
    // Same diagonal through the Gram side: r_i = phi_i^T (Phi^T Phi + mu I)^{-1} phi_i,
    // with the inverse applied through the eigenbasis of the cols x cols Gram.
    Eigen::MatrixXd gram = phi.transpose() * phi;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    Eigen::VectorXd sigma = eig.eigenvalues().cwiseMax(0.0);
    Eigen::VectorXd inv_sqrt = (sigma.array() + mu).rsqrt();
    Eigen::MatrixXd w = eig.eigenvectors() * inv_sqrt.asDiagonal();
    const Eigen::Index block = 8192;
    for (Eigen::Index start = 0; start < rows; start += block) {
      Eigen::Index count = std::min(block, rows - start);
      Eigen::MatrixXd t = phi.middleRows(start, count) * w;
      for (Eigen::Index i = 0; i < count; ++i)
        lev.scores[static_cast<std::size_t>(start + i)] = t.row(i).squaredNorm();
    }
  }
  return lev;
}

/// Empirical degrees of freedom: the trace sum of the scores.
inline double empirical_dof(const LeverageScores& lev) {
  double sum = 0.0;
  for (double r : lev.scores) sum += r;
  return sum;
}

/// Per-feature resampling distribution p_i = r_i / sum r. For gaussian-rff
/// pools the score vector has one entry per embedding row (cos and sin), so
/// the two rows of each feature are folded together first.
inline std::vector<double> resampling_probabilities(const FeatureSet& pool,
                                                    const LeverageScores& lev) {
  const std::size_t m = static_cast<std::size_t>(pool.size());
  std::vector<double> p(m, 0.0);
  if (lev.scores.size() == m) {
    p = lev.scores;
  } else if (lev.scores.size() == 2 * m) {
    for (std::size_t i = 0; i < m; ++i) p[i] = lev.scores[i] + lev.scores[m + i];
  } else {
    throw validation_error("resampling_probabilities: score length does not match pool");
  }
  double total = 0.0;
  for (double v : p) {
    if (v < 0.0) throw validation_error("resampling_probabilities: negative score");
    total += v;
  }
  if (!(total > 0.0))
    throw validation_error("resampling_probabilities: degenerate distribution (all scores zero)");
  for (double& v : p) v /= total;
  return p;
}

/// Draw n features with replacement under p. With reweighting, feature i
/// carries a_i = 1/sqrt(M p_i), which leaves the expected kernel equal to the
/// pool kernel; uniform scores reduce to plain sampling with unit weights.
inline FeatureSet resample_features(const FeatureSet& pool, const LeverageScores& lev, int n,
                                    std::uint64_t seed, bool reweight = true) {
  if (n < 1) throw validation_error("resample_features: n must be >= 1");
  const int m = pool.size();
  std::vector<double> p = resampling_probabilities(pool, lev);
  std::vector<double> cdf(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    cdf[i] = acc;
  }
  cdf.back() = 1.0;

  FeatureSet out;
  out.spec = pool.spec;
  out.spec.seed = seed;
  out.frequencies.resize(n, pool.frequencies.cols());
  out.weights.resize(n);
  std::mt19937_64 gen(rng::derive(seed, rng::stream::resample));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < n; ++k) {
    double u = unif(gen);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t i = std::min(static_cast<std::size_t>(it - cdf.begin()), p.size() - 1);
    out.frequencies.row(k) = pool.frequencies.row(static_cast<Eigen::Index>(i));
    out.weights(k) = reweight ? 1.0 / std::sqrt(double(m) * p[i])
                              : pool.weights(static_cast<Eigen::Index>(i));
  }
  return out;
}

/// Pick L distinct rows uniformly (partial Fisher-Yates over indices).
inline Eigen::MatrixXd sample_probe_points(const Eigen::MatrixXd& points, int count,
                                           std::uint64_t seed) {
  const int m = static_cast<int>(points.rows());
  if (count > m)
    throw validation_error("sample_probe_points: probe count exceeds available points");
  std::vector<int> idx(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 gen(rng::derive(seed, rng::stream::probe));
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> pick(i, m - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(gen))]);
  }
  Eigen::MatrixXd out(count, points.cols());
  for (int i = 0; i < count; ++i) out.row(i) = points.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

struct SelectionResult {
  FeatureSet features;
  FeatureSet pool;
  LeverageScores leverage;
  std::vector<double> probabilities;
};

/// The full pass: pool of M candidates, L uniform probe points, leverage
/// scores at the given ridge, importance resampling down to N features.
inline SelectionResult select_features(const Eigen::MatrixXd& train_points,
                                       const FeatureSpec& base_spec, const SelectionConfig& cfg) {
  cfg.validate();
  SelectionResult res;
  res.pool = sample_features(base_spec, cfg.pool_size,
                             rng::derive(cfg.seed, rng::stream::feature_pool));
  Eigen::MatrixXd probes = sample_probe_points(train_points, cfg.probe_count, cfg.seed);
  Eigen::MatrixXd phi = build_probe_matrix(res.pool, probes);
  res.leverage = compute_leverage(phi, cfg.ridge);
  res.probabilities = resampling_probabilities(res.pool, res.leverage);
  res.features =
      resample_features(res.pool, res.leverage, cfg.target_count, cfg.seed, cfg.reweight);
  return res;
}

}  // namespace rfkit
