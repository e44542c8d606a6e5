#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfkit/common.hpp"
#include "rfkit/data.hpp"
#include "rfkit/features.hpp"
#include "rfkit/solver.hpp"

namespace rfkit {

using json = nlohmann::json;

/// Write to a sibling temp file, then rename over the target. An interrupted
/// run never leaves a partially written declared output.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path dir = path.parent_path();
  if (!dir.empty()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + tmp.string());
    out.write(content.data(), std::streamsize(content.size()));
    out.flush();
    if (!out) throw io_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw io_error("cannot move output into place: " + path.string());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw io_error("read failed: " + path.string());
  return ss.str();
}

inline json feature_set_to_json(const FeatureSet& fs) {
  json j;
  j["kind"] = to_string(fs.spec.kind);
  j["dim"] = fs.spec.dim;
  j["seed"] = fs.spec.seed;
  if (fs.spec.kind == FeatureKind::GaussianRff) {
    j["gamma"] = fs.spec.bandwidth;
  } else {
    j["basis_size"] = fs.spec.basis_size;
    j["eigen_decay"] = fs.spec.eigen_decay;
    j["domain"] = {fs.spec.domain_lo, fs.spec.domain_hi};
  }
  json freqs = json::array();
  for (int i = 0; i < fs.size(); ++i) {
    json row = json::array();
    for (int c = 0; c < fs.frequencies.cols(); ++c) row.push_back(fs.frequencies(i, c));
    freqs.push_back(std::move(row));
  }
  j["frequencies"] = std::move(freqs);
  j["weights"] = std::vector<double>(fs.weights.data(), fs.weights.data() + fs.weights.size());
  return j;
}

inline FeatureSet feature_set_from_json(const json& j) {
  FeatureSet fs;
  try {
    fs.spec.kind = feature_kind_from_string(j.at("kind").get<std::string>());
    fs.spec.dim = j.at("dim").get<int>();
    fs.spec.seed = j.at("seed").get<std::uint64_t>();
    if (fs.spec.kind == FeatureKind::GaussianRff) {
      fs.spec.bandwidth = j.at("gamma").get<double>();
    } else {
      fs.spec.basis_size = j.at("basis_size").get<int>();
      fs.spec.eigen_decay = j.at("eigen_decay").get<std::vector<double>>();
      fs.spec.domain_lo = j.at("domain").at(0).get<double>();
      fs.spec.domain_hi = j.at("domain").at(1).get<double>();
    }
    const auto& freqs = j.at("frequencies");
    const auto& weights = j.at("weights");
    if (freqs.empty()) throw validation_error("feature set JSON: empty frequencies");
    fs.frequencies.resize(static_cast<Eigen::Index>(freqs.size()),
                          static_cast<Eigen::Index>(freqs.at(0).size()));
    for (std::size_t i = 0; i < freqs.size(); ++i)
      for (std::size_t c = 0; c < freqs.at(i).size(); ++c)
        fs.frequencies(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
            freqs.at(i).at(c).get<double>();
    fs.weights.resize(static_cast<Eigen::Index>(weights.size()));
    for (std::size_t i = 0; i < weights.size(); ++i)
      fs.weights(static_cast<Eigen::Index>(i)) = weights.at(i).get<double>();
  } catch (const json::exception& e) {
    throw validation_error(std::string("feature set JSON: ") + e.what());
  }
  fs.validate();
  return fs;
}

inline json model_to_json(const Model& model) {
  json j;
  j["type"] = "rfsvm";
  j["features"] = feature_set_to_json(model.features);
  j["weights"] =
      std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size());
  j["lambda"] = model.lambda;
  j["objective"] = model.objective;
  return j;
}

inline json model_to_json(const KernelModel& model) {
  json j;
  j["type"] = "ksvm";
  json support = json::array();
  for (int i = 0; i < model.support.rows(); ++i) {
    json row = json::array();
    for (int c = 0; c < model.support.cols(); ++c) row.push_back(model.support(i, c));
    support.push_back(std::move(row));
  }
  j["support"] = std::move(support);
  j["alphas"] =
      std::vector<double>(model.alphas.data(), model.alphas.data() + model.alphas.size());
  j["gamma"] = model.gamma;
  j["lambda"] = model.lambda;
  j["objective"] = model.objective;
  return j;
}

inline Model model_from_json(const json& j) {
  Model m;
  try {
    if (j.at("type").get<std::string>() != "rfsvm")
      throw validation_error("model JSON: not an rfsvm model");
    m.features = feature_set_from_json(j.at("features"));
    auto w = j.at("weights").get<std::vector<double>>();
    m.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    m.lambda = j.at("lambda").get<double>();
    m.objective = j.at("objective").get<double>();
  } catch (const json::exception& e) {
    throw validation_error(std::string("model JSON: ") + e.what());
  }
  if (m.weights.size() != m.features.embedding_dim())
    throw validation_error("model JSON: weight length does not match feature set");
  return m;
}

inline KernelModel kernel_model_from_json(const json& j) {
  KernelModel m;
  try {
    if (j.at("type").get<std::string>() != "ksvm")
      throw validation_error("model JSON: not a ksvm model");
    const auto& support = j.at("support");
    if (support.empty()) throw validation_error("model JSON: empty support");
    m.support.resize(static_cast<Eigen::Index>(support.size()),
                     static_cast<Eigen::Index>(support.at(0).size()));
    for (std::size_t i = 0; i < support.size(); ++i)
      for (std::size_t c = 0; c < support.at(i).size(); ++c)
        m.support(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
            support.at(i).at(c).get<double>();
    auto a = j.at("alphas").get<std::vector<double>>();
    m.alphas = Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
    m.gamma = j.at("gamma").get<double>();
    m.lambda = j.at("lambda").get<double>();
    m.objective = j.at("objective").get<double>();
  } catch (const json::exception& e) {
    throw validation_error(std::string("model JSON: ") + e.what());
  }
  if (m.alphas.size() != m.support.rows())
    throw validation_error("model JSON: alpha length does not match support");
  return m;
}

/// CSV with header y,x1,...,xd; labels are +-1 integers, coordinates are
/// shortest-round-trip binary64 text.
inline std::string dataset_to_csv(const LabeledDataset& data) {
  std::string out = "y";
  for (int c = 0; c < data.dim(); ++c) out += ",x" + std::to_string(c + 1);
  out += "\n";
  for (int i = 0; i < data.size(); ++i) {
    out += data.labels(i) > 0 ? "1" : "-1";
    for (int c = 0; c < data.dim(); ++c) {
      out += ',';
      out += format_f64(data.points(i, c));
    }
    out += '\n';
  }
  return out;
}

inline LabeledDataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw validation_error("dataset CSV: empty file");
  if (line.rfind("y", 0) != 0) throw validation_error("dataset CSV: missing y,x1,... header");
  int dim = 0;
  for (char ch : line)
    if (ch == ',') ++dim;
  if (dim < 1) throw validation_error("dataset CSV: no coordinate columns");
  std::vector<double> coords;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t pos = 0;
    int field = 0;
    while (pos <= line.size()) {
      std::size_t next = line.find(',', pos);
      if (next == std::string::npos) next = line.size();
      std::string_view tok(line.data() + pos, next - pos);
      if (field == 0) {
        long long y = parse_i64(tok);
        if (y != 1 && y != -1) throw validation_error("dataset CSV: label must be -1 or 1");
        labels.push_back(static_cast<int>(y));
      } else {
        coords.push_back(parse_f64(tok));
      }
      ++field;
      pos = next + 1;
      if (next == line.size()) break;
    }
    if (field != dim + 1)
      throw validation_error("dataset CSV: row has " + std::to_string(field) +
                             " fields, expected " + std::to_string(dim + 1));
  }
  LabeledDataset ds;
  const int m = static_cast<int>(labels.size());
  ds.points.resize(m, dim);
  ds.labels.resize(m);
  for (int i = 0; i < m; ++i) {
    ds.labels(i) = labels[static_cast<std::size_t>(i)];
    for (int c = 0; c < dim; ++c)
      ds.points(i, c) = coords[static_cast<std::size_t>(i) * static_cast<std::size_t>(dim) +
                               static_cast<std::size_t>(c)];
  }
  ds.provenance = "csv";
  return ds;
}

inline LabeledDataset load_dataset_csv(const std::filesystem::path& path) {
  LabeledDataset ds = dataset_from_csv(read_file(path));
  ds.provenance = "csv(" + path.string() + ")";
  return ds;
}

/// Content hash of a dataset (row order matters).
inline std::uint64_t dataset_hash(const LabeledDataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (int i = 0; i < data.size(); ++i) {
    double y = data.labels(i);
    h = fnv1a64(&y, sizeof(y), h);
    for (int c = 0; c < data.dim(); ++c) {
      double v = data.points(i, c);
      h = fnv1a64(&v, sizeof(v), h);
    }
  }
  return h;
}

}  // namespace rfkit
