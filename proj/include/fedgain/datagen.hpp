#pragma once

// Seeded synthetic data streams: per-agent, per-iteration batches drawn
// i.i.d. from the Gaussian model y = x^T w_true + eta. Batches are a pure
// function of (seed, agent, iteration) and can be generated in any order.

#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fedgain/regression.hpp"
#include "fedgain/rng.hpp"
#include "fedgain/types.hpp"

namespace fedgain {

struct StreamConfig {
  ProblemSpec spec;
  int batch_size = 1;    // N
  int num_agents = 1;    // m
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (num_agents < 1) throw ConfigError("num_agents must be >= 1");
  }
};

// Draws batches for one StreamConfig; the Cholesky factor of feature_cov is
// computed once. Stateless per call, safe to use from multiple threads.
class BatchSource {
 public:
  explicit BatchSource(StreamConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Eigen::LLT<Mat> llt(cfg_.spec.feature_cov);
    if (llt.info() != Eigen::Success)
      throw ConfigError("feature_cov has no Cholesky factor");
    chol_ = llt.matrixL();
  }

  const StreamConfig& config() const { return cfg_; }

  // Features: rows x = L z with z standard normal, so E[x x^T] = L L^T = C.
  // Labels: y = X w_true + noise_std * eta. Feature and noise draws live on
  // separate sub-streams, so zero-noise labels are exact and feature values
  // do not depend on whether noise was drawn.
  DataBatch draw(int agent, int iteration) const {
    if (agent < 0 || agent >= cfg_.num_agents)
      throw ConfigError("agent index out of range");
    if (iteration < 0) throw ConfigError("iteration must be >= 0");
    const int n = cfg_.spec.dim;
    const int rows = cfg_.batch_size;
    CounterRng feat(cfg_.seed, static_cast<std::uint32_t>(agent),
                    static_cast<std::uint32_t>(iteration),
                    StreamPurpose::kFeatures);
    DataBatch batch;
    batch.features.resize(rows, n);
    Vec z(n);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < n; ++j) z[j] = feat.next_gaussian();
      batch.features.row(i) = (chol_ * z).transpose();
    }
    batch.labels = batch.features * cfg_.spec.true_weights;
    if (cfg_.spec.noise_std > 0.0) {
      CounterRng noise(cfg_.seed, static_cast<std::uint32_t>(agent),
                       static_cast<std::uint32_t>(iteration),
                       StreamPurpose::kLabelNoise);
      for (int i = 0; i < rows; ++i)
        batch.labels[i] += cfg_.spec.noise_std * noise.next_gaussian();
    }
    return batch;
  }

 private:
  StreamConfig cfg_;
  Mat chol_;
};

inline DataBatch draw_batch(const StreamConfig& cfg, int agent,
                            int iteration) {
  return BatchSource(cfg).draw(agent, iteration);
}

// (1/N) sum_i x_i x_i^T, symmetric PSD by construction.
inline Mat empirical_second_moment(const DataBatch& batch) {
  batch.validate();
  const double n = static_cast<double>(batch.size());
  Mat m = batch.features.transpose() * batch.features / n;
  return 0.5 * (m + m.transpose());
}

// --- batch dump/load -------------------------------------------------------
// CSV schema: header "agent,iteration,sample,x0..x{n-1},y", one row per
// sample. Doubles are written shortest-round-trip, so load reproduces the
// exact bits.

inline void write_batch_csv_header(std::ostream& os, int dim) {
  os << "agent,iteration,sample";
  for (int j = 0; j < dim; ++j) os << ",x" << j;
  os << ",y\n";
}

inline void write_batch_csv_rows(std::ostream& os, const DataBatch& batch,
                                 int agent, int iteration) {
  for (int i = 0; i < batch.size(); ++i) {
    std::string line = std::to_string(agent);
    line += ',';
    line += std::to_string(iteration);
    line += ',';
    line += std::to_string(i);
    for (int j = 0; j < batch.features.cols(); ++j) {
      line += ',';
      line += fmt_double(batch.features(i, j));
    }
    line += ',';
    line += fmt_double(batch.labels[i]);
    os << line << '\n';
  }
}

// Loads every batch in the file, keyed by (agent, iteration). Rows of one
// batch must be contiguous and sample-ordered (as written).
inline std::map<std::pair<int, int>, DataBatch> load_batches_csv(
    std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("agent,iteration,sample", 0) != 0)
    throw ConfigError("batch CSV missing header");
  std::map<std::pair<int, int>, std::vector<std::vector<double>>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> toks;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) toks.push_back(tok);
    if (toks.size() < 5) throw ConfigError("batch CSV row too short");
    const int agent = std::stoi(toks[0]);
    const int iter = std::stoi(toks[1]);
    std::vector<double> vals;
    for (std::size_t i = 3; i < toks.size(); ++i)
      vals.push_back(parse_double(toks[i]));
    rows[{agent, iter}].push_back(std::move(vals));
  }
  std::map<std::pair<int, int>, DataBatch> out;
  for (auto& [key, rs] : rows) {
    const int n = static_cast<int>(rs.front().size()) - 1;
    DataBatch b;
    b.features.resize(static_cast<int>(rs.size()), n);
    b.labels.resize(static_cast<int>(rs.size()));
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (static_cast<int>(rs[i].size()) != n + 1)
        throw ConfigError("batch CSV rows have inconsistent width");
      for (int j = 0; j < n; ++j) b.features(static_cast<int>(i), j) = rs[i][j];
      b.labels[static_cast<int>(i)] = rs[i][n];
    }
    out.emplace(key, std::move(b));
  }
  return out;
}

}  // namespace fedgain
