#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rfkit/common.hpp"

namespace rfkit {

enum class FeatureKind { GaussianRff, WalshBasis };

inline const char* to_string(FeatureKind k) {
  return k == FeatureKind::GaussianRff ? "gaussian-rff" : "walsh-basis";
}

inline FeatureKind feature_kind_from_string(std::string_view s) {
  if (s == "gaussian-rff") return FeatureKind::GaussianRff;
  if (s == "walsh-basis") return FeatureKind::WalshBasis;
  throw validation_error("unknown feature kind: '" + std::string(s) + "'");
}

/// What to sample. Gaussian RFF keeps standard-normal frequencies and applies
/// the bandwidth at embedding time (omega . x / gamma), so one sampled set
/// serves any gamma. The Walsh map is the truncated orthonormal-basis
/// construction on [0,1]; inputs are affinely rescaled from [domain_lo,
/// domain_hi].
struct FeatureSpec {
  FeatureKind kind = FeatureKind::GaussianRff;
  int dim = 0;
  double bandwidth = 1.0;            // gaussian-rff
  int basis_size = 0;                // walsh-basis: truncation K
  std::vector<double> eigen_decay;   // walsh-basis: lambda_1 >= ... >= lambda_K > 0
  double domain_lo = 0.0;            // walsh-basis input rescale
  double domain_hi = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim < 1) throw validation_error("feature spec: dim must be positive");
    if (kind == FeatureKind::GaussianRff) {
      if (!(bandwidth > 0.0)) throw validation_error("feature spec: bandwidth must be positive");
    } else {
      if (dim != 1)
        throw validation_error("feature spec: walsh-basis is defined on scalar inputs (dim 1)");
      if (basis_size < 1) throw validation_error("feature spec: basis_size must be positive");
      if (static_cast<int>(eigen_decay.size()) != basis_size)
        throw validation_error("feature spec: eigen_decay must have basis_size entries");
      for (std::size_t j = 0; j < eigen_decay.size(); ++j) {
        if (!(eigen_decay[j] > 0.0))
          throw validation_error("feature spec: eigen_decay must be strictly positive");
        if (j > 0 && eigen_decay[j] > eigen_decay[j - 1])
          throw validation_error("feature spec: eigen_decay must be non-increasing");
      }
      if (!(domain_hi > domain_lo))
        throw validation_error("feature spec: domain_hi must exceed domain_lo");
    }
  }

  static FeatureSpec gaussian(int dim, double gamma, std::uint64_t seed = 0) {
    FeatureSpec s;
    s.kind = FeatureKind::GaussianRff;
    s.dim = dim;
    s.bandwidth = gamma;
    s.seed = seed;
    s.validate();
    return s;
  }

  // Default decay lambda_j = j^{-2}: summable, and steep enough that small
  // truncations carry most of the trace.
  static FeatureSpec walsh(int basis_size, std::vector<double> decay = {},
                           double lo = 0.0, double hi = 1.0, std::uint64_t seed = 0) {
    FeatureSpec s;
    s.kind = FeatureKind::WalshBasis;
    s.dim = 1;
    s.basis_size = basis_size;
    if (decay.empty() && basis_size >= 1) {
      decay.resize(static_cast<std::size_t>(basis_size));
      for (int j = 0; j < basis_size; ++j) decay[static_cast<std::size_t>(j)] = 1.0 / double((j + 1.0) * (j + 1.0));
    }
    s.eigen_decay = std::move(decay);
    s.domain_lo = lo;
    s.domain_hi = hi;
    s.seed = seed;
    s.validate();
    return s;
  }
};

/// N sampled frequencies with importance weights. Plain sets have all
/// weights 1; leverage-resampled sets carry a_i = 1/sqrt(M p_i), which keeps
/// the implied kernel estimator unbiased for the pool kernel.
struct FeatureSet {
  FeatureSpec spec;
  Eigen::MatrixXd frequencies;  // N x dim (walsh: N x 1, points in [0,1])
  Eigen::VectorXd weights;      // N positive reals

  int size() const { return static_cast<int>(frequencies.rows()); }

  /// Length of an embedded vector: 2N (cos block then sin block) or N.
  int embedding_dim() const {
    return spec.kind == FeatureKind::GaussianRff ? 2 * size() : size();
  }

  void validate() const {
    spec.validate();
    if (frequencies.rows() < 1) throw validation_error("feature set: must hold at least one feature");
    if (frequencies.rows() != weights.size())
      throw validation_error("feature set: frequencies/weights length mismatch");
    if (!frequencies.allFinite() || !weights.allFinite())
      throw validation_error("feature set: non-finite entries");
    if ((weights.array() <= 0.0).any())
      throw validation_error("feature set: weights must be strictly positive");
    int want_cols = spec.kind == FeatureKind::GaussianRff ? spec.dim : 1;
    if (frequencies.cols() != want_cols)
      throw validation_error("feature set: frequency dimension does not match spec");
  }
};

using FeatureVector = Eigen::VectorXd;

/// j-th Walsh function in Paley ordering at t in [0,1): the product of
/// Rademacher functions r_k(t) = (-1)^{floor(2^{k+1} t)} over the set bits
/// k of j. w_0 is identically 1.
inline int walsh_paley(unsigned j, double t) {
  int sign = 1;
  int k = 0;
  for (unsigned bits = j; bits != 0; bits >>= 1, ++k) {
    if (bits & 1u) {
      double scaled = std::ldexp(t, k + 1);
      if (static_cast<long long>(std::floor(scaled)) & 1ll) sign = -sign;
    }
  }
  return sign;
}

inline FeatureSet sample_features(FeatureSpec spec, int n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw validation_error("sample_features: n must be >= 1");
  spec.seed = seed;
  FeatureSet fs;
  fs.spec = spec;
  fs.weights = Eigen::VectorXd::Ones(n);
  std::mt19937_64 gen(rng::derive(seed, rng::stream::features));
  if (spec.kind == FeatureKind::GaussianRff) {
    std::normal_distribution<double> normal(0.0, 1.0);
    fs.frequencies.resize(n, spec.dim);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < spec.dim; ++c) fs.frequencies(i, c) = normal(gen);
  } else {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    fs.frequencies.resize(n, 1);
    for (int i = 0; i < n; ++i) fs.frequencies(i, 0) = unif(gen);
  }
  return fs;
}

namespace detail {

/// w_j(t) for j = 0..K-1, t already rescaled to [0,1].
inline Eigen::VectorXd walsh_basis_column(const FeatureSpec& spec, double t) {
  const int k = spec.basis_size;
  Eigen::VectorXd col(k);
  for (int j = 0; j < k; ++j)
    col(j) = static_cast<double>(walsh_paley(static_cast<unsigned>(j), t));
  return col;
}

inline Eigen::VectorXd sqrt_decay(const FeatureSpec& spec) {
  Eigen::VectorXd s(spec.basis_size);
  for (int j = 0; j < spec.basis_size; ++j)
    s(j) = std::sqrt(spec.eigen_decay[static_cast<std::size_t>(j)]);
  return s;
}

inline double walsh_rescale(const FeatureSpec& spec, double x) {
  double t = (x - spec.domain_lo) / (spec.domain_hi - spec.domain_lo);
  if (t < 0.0 || t > 1.0)
    throw validation_error("embed: input outside declared walsh domain");
  // Walsh functions live on [0,1); fold the right endpoint in.
  return t >= 1.0 ? std::nextafter(1.0, 0.0) : t;
}

}  // namespace detail

/// phi_N(x). Gaussian: (a_i cos(omega_i.x/gamma); a_i sin(omega_i.x/gamma)) / sqrt(N).
/// Walsh: entry i = a_i sum_j sqrt(lambda_j) w_j(x) w_j(omega_i) / sqrt(N).
inline FeatureVector embed(const FeatureSet& fs, const Eigen::VectorXd& x) {
  if (x.size() != fs.spec.dim)
    throw validation_error("embed: input dimension does not match feature spec");
  const int n = fs.size();
  const double inv_sqrt_n = 1.0 / std::sqrt(double(n));
  if (fs.spec.kind == FeatureKind::GaussianRff) {
    Eigen::VectorXd theta = fs.frequencies * x / fs.spec.bandwidth;
    FeatureVector out(2 * n);
    out.head(n) = fs.weights.array() * theta.array().cos() * inv_sqrt_n;
    out.tail(n) = fs.weights.array() * theta.array().sin() * inv_sqrt_n;
    return out;
  }
  const Eigen::VectorXd scaled_bx =
      detail::sqrt_decay(fs.spec).cwiseProduct(
          detail::walsh_basis_column(fs.spec, detail::walsh_rescale(fs.spec, x(0))));
  FeatureVector out(n);
  for (int i = 0; i < n; ++i) {
    double t = detail::walsh_rescale(fs.spec, fs.frequencies(i, 0));
    double acc = 0.0;
    for (int j = 0; j < fs.spec.basis_size; ++j)
      acc += scaled_bx(j) * static_cast<double>(walsh_paley(static_cast<unsigned>(j), t));
    out(i) = fs.weights(i) * acc * inv_sqrt_n;
  }
  return out;
}

/// Embeddings of many points at once, one column per point.
inline Eigen::MatrixXd embed_all(const FeatureSet& fs, const Eigen::MatrixXd& points) {
  if (points.cols() != fs.spec.dim)
    throw validation_error("embed_all: point dimension does not match feature spec");
  const int m = static_cast<int>(points.rows());
  const int n = fs.size();
  const double inv_sqrt_n = 1.0 / std::sqrt(double(n));
  Eigen::MatrixXd out(fs.embedding_dim(), m);
  if (fs.spec.kind == FeatureKind::GaussianRff) {
    // theta = Omega X^T / gamma, column per point
    Eigen::MatrixXd theta = fs.frequencies * points.transpose() / fs.spec.bandwidth;
    out.topRows(n) = (theta.array().cos().colwise() * fs.weights.array()) * inv_sqrt_n;
    out.bottomRows(n) = (theta.array().sin().colwise() * fs.weights.array()) * inv_sqrt_n;
    return out;
  }
  // Cache basis evaluations at the sampled points; they do not change per x.
  Eigen::MatrixXd basis_at_omega(n, fs.spec.basis_size);
  for (int i = 0; i < n; ++i)
    basis_at_omega.row(i) =
        detail::walsh_basis_column(fs.spec, detail::walsh_rescale(fs.spec, fs.frequencies(i, 0)))
            .transpose();
  const Eigen::VectorXd sqrt_decay = detail::sqrt_decay(fs.spec);
  for (int c = 0; c < m; ++c) {
    Eigen::VectorXd scaled_bx = sqrt_decay.cwiseProduct(
        detail::walsh_basis_column(fs.spec, detail::walsh_rescale(fs.spec, points(c, 0))));
    out.col(c) = (fs.weights.array() * (basis_at_omega * scaled_bx).array()) * inv_sqrt_n;
  }
  return out;
}

/// Gaussian kernel k_gamma(x, x') = exp(-|x - x'|^2 / (2 gamma^2)).
inline double kernel_exact(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double gamma) {
  if (x.size() != y.size()) throw validation_error("kernel_exact: dimension mismatch");
  if (!(gamma > 0.0)) throw validation_error("kernel_exact: gamma must be positive");
  return std::exp(-(x - y).squaredNorm() / (2.0 * gamma * gamma));
}

/// The kernel the finite feature map induces: phi_N(x) . phi_N(x').
inline double kernel_approx(const FeatureSet& fs, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& y) {
  return embed(fs, x).dot(embed(fs, y));
}

/// Mean pairwise distance over a seeded subsample of at most `cap` points;
/// the usual bandwidth pick for Gaussian kernels on unscaled data.
inline double bandwidth_heuristic(const Eigen::MatrixXd& points, int cap,
                                  std::uint64_t seed = 0) {
  const int m = static_cast<int>(points.rows());
  if (m < 2) throw validation_error("bandwidth_heuristic: need at least two points");
  if (cap < 2) throw validation_error("bandwidth_heuristic: cap must be at least 2");
  std::vector<int> idx(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
  int take = std::min(cap, m);
  if (take < m) {
    std::mt19937_64 gen(rng::derive(seed, rng::stream::subsample));
    for (int i = 0; i < take; ++i) {
      std::uniform_int_distribution<int> pick(i, m - 1);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(gen))]);
    }
  }
  double sum = 0.0;
  long long pairs = 0;
  for (int i = 0; i < take; ++i)
    for (int j = i + 1; j < take; ++j) {
      sum += (points.row(idx[static_cast<std::size_t>(i)]) -
              points.row(idx[static_cast<std::size_t>(j)]))
                 .norm();
      ++pairs;
    }
  double mean = sum / double(pairs);
  if (!(mean > 0.0))
    throw validation_error("bandwidth_heuristic: degenerate bandwidth (all points coincide)");
  return mean;
}

}  // namespace rfkit
