#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rfkit/common.hpp"

namespace rfkit {

/// Two concentric class regions: a ball of radius `inner_radius` (clean label
/// -1) and a shell [annulus_lo, annulus_hi] (clean label +1), labels flipped
/// independently with probability flip_prob. The gap between the regions is
/// the separation margin; the flip probability sets the Massart constant.
struct SyntheticSpec {
  int dim = 2;
  double inner_radius = 0.9;
  double annulus_lo = 1.1;
  double annulus_hi = 2.0;
  double flip_prob = 0.1;
  double mix = 0.5;  // probability of the inner class
  std::uint64_t seed = 0;

  void validate() const {
    if (dim < 2) throw validation_error("synthetic spec: dim must be >= 2");
    if (!(inner_radius > 0.0)) throw validation_error("synthetic spec: inner_radius must be positive");
    if (!(annulus_lo > inner_radius))
      throw validation_error("synthetic spec: annulus_lo must exceed inner_radius");
    if (!(annulus_hi > annulus_lo))
      throw validation_error("synthetic spec: annulus_hi must exceed annulus_lo");
    if (!(flip_prob >= 0.0 && flip_prob < 0.5))
      throw validation_error("synthetic spec: flip_prob must lie in [0, 0.5)");
    if (!(mix > 0.0 && mix < 1.0)) throw validation_error("synthetic spec: mix must lie in (0, 1)");
  }

  double separation() const { return annulus_lo - inner_radius; }
};

struct LabeledDataset {
  Eigen::MatrixXd points;  // m x d
  Eigen::VectorXi labels;  // entries in {-1, +1}
  std::string provenance;

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }

  void validate() const {
    if (points.rows() != labels.size())
      throw validation_error("dataset: points/labels length mismatch");
    if (!points.allFinite()) throw validation_error("dataset: non-finite coordinates");
    for (int i = 0; i < labels.size(); ++i)
      if (labels(i) != 1 && labels(i) != -1)
        throw validation_error("dataset: labels must be -1 or +1");
  }
};

/// sgn(E[y|x]) for the synthetic task: +1 at and outside the unit sphere.
inline int bayes_classify(const Eigen::VectorXd& x) { return x.norm() >= 1.0 ? 1 : -1; }

/// Massart constant V = 2 / (1 - 2 flip_prob); V = 2 means deterministic labels.
inline double massart_v(const SyntheticSpec& spec) {
  if (!(spec.flip_prob < 0.5))
    throw validation_error("massart_v: flip_prob must be below 0.5");
  return 2.0 / (1.0 - 2.0 * spec.flip_prob);
}

inline LabeledDataset gen_circle_annulus(SyntheticSpec spec, int m, std::uint64_t seed) {
  spec.validate();
  if (m < 0) throw validation_error("gen_circle_annulus: m must be >= 0");
  spec.seed = seed;
  LabeledDataset ds;
  ds.points.resize(m, spec.dim);
  ds.labels.resize(m);
  ds.provenance = std::string("circle-annulus(dim=") + std::to_string(spec.dim) +
                  ",flip=" + format_f64(spec.flip_prob) + ",seed=" + std::to_string(seed) + ")";
  std::mt19937_64 gen(rng::derive(seed, rng::stream::data_gen));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double d = double(spec.dim);
  for (int i = 0; i < m; ++i) {
    bool inner = unif(gen) < spec.mix;
    // Uniform direction from a normalized Gaussian, radius from the
    // inverse CDF of the uniform-in-volume law (density ~ r^{d-1}).
    Eigen::VectorXd dir(spec.dim);
    double norm = 0.0;
    do {
      for (int c = 0; c < spec.dim; ++c) dir(c) = normal(gen);
      norm = dir.norm();
    } while (!(norm > 0.0));
    dir /= norm;
    double u = unif(gen);
    double r;
    if (inner) {
      r = spec.inner_radius * std::pow(u, 1.0 / d);
    } else {
      double lo_d = std::pow(spec.annulus_lo, d);
      double hi_d = std::pow(spec.annulus_hi, d);
      r = std::pow(lo_d + u * (hi_d - lo_d), 1.0 / d);
    }
    ds.points.row(i) = (r * dir).transpose();
    int clean = inner ? -1 : 1;
    ds.labels(i) = unif(gen) < spec.flip_prob ? -clean : clean;
  }
  return ds;
}

/// Seeded shuffle then prefix split; train side gets floor(fraction * m).
inline std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data,
                                                       double train_fraction,
                                                       std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw validation_error("split: train_fraction must lie in (0, 1)");
  const int m = data.size();
  const int n_train = static_cast<int>(train_fraction * m);
  if (n_train < 1 || n_train >= m)
    throw validation_error("split: a side would be empty");
  std::vector<int> idx(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 gen(rng::derive(seed, rng::stream::shuffle));
  for (int i = m - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(gen))]);
  }
  auto take = [&](int begin, int count) {
    LabeledDataset part;
    part.points.resize(count, data.dim());
    part.labels.resize(count);
    for (int i = 0; i < count; ++i) {
      part.points.row(i) = data.points.row(idx[static_cast<std::size_t>(begin + i)]);
      part.labels(i) = data.labels(idx[static_cast<std::size_t>(begin + i)]);
    }
    part.provenance = data.provenance;
    return part;
  };
  return {take(0, n_train), take(n_train, m - n_train)};
}

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw io_error("truncated IDX file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

/// Big-endian IDX pair (images magic 0x00000803, labels 0x00000801).
/// Pixels are scaled to [0,1]; labels binarized as digit < threshold -> -1.
inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                               int binarize_threshold = 5) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw io_error("cannot open IDX image file: " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw io_error("cannot open IDX label file: " + labels_path);

  std::uint32_t img_magic = detail::read_be_u32(img, images_path);
  if (img_magic != 0x00000803u)
    throw validation_error("IDX format error: bad image magic in " + images_path);
  std::uint32_t lab_magic = detail::read_be_u32(lab, labels_path);
  if (lab_magic != 0x00000801u)
    throw validation_error("IDX format error: bad label magic in " + labels_path);

  std::uint32_t n_img = detail::read_be_u32(img, images_path);
  std::uint32_t rows = detail::read_be_u32(img, images_path);
  std::uint32_t cols = detail::read_be_u32(img, images_path);
  std::uint32_t n_lab = detail::read_be_u32(lab, labels_path);
  if (n_img != n_lab)
    throw validation_error("IDX consistency error: image count " + std::to_string(n_img) +
                           " != label count " + std::to_string(n_lab));

  const std::size_t pixels = std::size_t(rows) * std::size_t(cols);
  LabeledDataset ds;
  ds.points.resize(int(n_img), int(pixels));
  ds.labels.resize(int(n_img));
  std::vector<unsigned char> buf(pixels);
  for (std::uint32_t i = 0; i < n_img; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), std::streamsize(pixels));
    if (!img) throw io_error("truncated IDX file: " + images_path);
    for (std::size_t p = 0; p < pixels; ++p)
      ds.points(int(i), int(p)) = double(buf[p]) / 255.0;
    int digit = lab.get();
    if (digit == std::char_traits<char>::eof())
      throw io_error("truncated IDX file: " + labels_path);
    ds.labels(int(i)) = digit < binarize_threshold ? -1 : 1;
  }
  ds.provenance = "idx(" + images_path + ")";
  return ds;
}

}  // namespace rfkit
