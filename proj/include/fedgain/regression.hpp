#pragma once

// Closed-form quantities of the linear regression problem: expected
// prediction error, its gradient, stochastic gradients from data, and the
// spectral constants governing gradient-descent contraction.
//
// The closed forms hard-commit to the generative model
//
//     y = x^T w_true + eta,   x ~ N(0, C),   eta ~ N(0, sigma^2), eta indep x,
//
// under which
//
//     E(y - x^T w)^2 = E(x^T(w_true - w) + eta)^2
//                    = (w - w_true)^T C (w - w_true) + sigma^2
//
// because the cross term E[x^T(w_true-w) * eta] vanishes. Hence
//
//     J(w)      = 1/2 (w - w_true)^T C (w - w_true) + 1/2 sigma^2
//     grad J(w) = C w - E[x y] = C (w - w_true)           (E[x y] = C w_true).
//
// Labels drawn from any other model void these identities.

#include <algorithm>
#include <cmath>

#include "fedgain/types.hpp"

namespace fedgain {

// Ground-truth description of one regression problem: what the oracle knows.
struct ProblemSpec {
  int dim = 0;
  Vec true_weights;   // w_true
  Mat feature_cov;    // E[x x^T], symmetric positive definite
  double noise_std = 0.0;

  // Validates and symmetrizes. Rejects asymmetry beyond 1e-12 relative,
  // eigenvalues below 1e-12, negative noise.
  static ProblemSpec create(Vec true_weights, Mat feature_cov,
                            double noise_std) {
    ProblemSpec s;
    s.dim = static_cast<int>(true_weights.size());
    if (s.dim < 1) throw ConfigError("problem dimension must be >= 1");
    if (feature_cov.rows() != s.dim || feature_cov.cols() != s.dim)
      throw DimensionError("feature_cov must be dim x dim");
    const double scale = std::max(1e-300, feature_cov.cwiseAbs().maxCoeff());
    const double asym =
        (feature_cov - feature_cov.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale)
      throw ConfigError("feature_cov is not symmetric (relative asymmetry " +
                        std::to_string(asym / scale) + ")");
    s.feature_cov = 0.5 * (feature_cov + feature_cov.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(s.feature_cov);
    if (es.eigenvalues().minCoeff() < 1e-12)
      throw ConfigError("feature_cov must be positive definite "
                        "(min eigenvalue below 1e-12)");
    if (noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
    s.true_weights = std::move(true_weights);
    s.noise_std = noise_std;
    return s;
  }
};

// N feature/label pairs collected by one agent in one iteration.
struct DataBatch {
  Mat features;  // N x dim, one sample per row
  Vec labels;    // length N

  int size() const { return static_cast<int>(labels.size()); }
  void validate() const {
    if (features.rows() != labels.size())
      throw DimensionError("batch row count does not match label count");
    if (labels.size() < 1) throw DimensionError("batch must be nonempty");
  }
};

// Spectral quantities of the descent map w -> w - eps * grad J(w).
struct SpectralConstants {
  double contraction = 0.0;  // max_i (1 - eps * lambda_i(C))^2
  Mat half_moment;           // C / 2
  double max_step = 0.0;     // 2 / lambda_max(C): steps below this contract
  double eigen_min = 0.0;
  double eigen_max = 0.0;
  bool contractive = false;  // contraction < 1
};

inline void check_weights(const ProblemSpec& spec, const Vec& w) {
  require(w.size() == spec.dim, "weight vector length does not match dim");
}

// Expected squared prediction error J(w); see the model note above.
inline double objective(const ProblemSpec& spec, const Vec& w) {
  check_weights(spec, w);
  const Vec d = w - spec.true_weights;
  return 0.5 * d.dot(spec.feature_cov * d) +
         0.5 * spec.noise_std * spec.noise_std;
}

// grad J(w) = C (w - w_true).
inline Vec true_gradient(const ProblemSpec& spec, const Vec& w) {
  check_weights(spec, w);
  return spec.feature_cov * (w - spec.true_weights);
}

// Gradient of the empirical cost over one batch:
// (1/N) sum_i (x_i x_i^T w - x_i y_i), computed as (1/N) X^T (X w - y).
// O(N * dim); the dim x dim second-moment matrix is never formed.
inline Vec stochastic_gradient(const DataBatch& batch, const Vec& w) {
  batch.validate();
  require(batch.features.cols() == w.size(),
          "batch feature width does not match weight length");
  const double n = static_cast<double>(batch.size());
  return batch.features.transpose() * (batch.features * w - batch.labels) / n;
}

// Non-contractive step sizes are reported, not rejected: contractive=false
// simply means the convergence guarantees do not apply.
inline SpectralConstants spectral_constants(const ProblemSpec& spec,
                                            double step_size) {
  if (step_size <= 0.0) throw ConfigError("step size must be > 0");
  Eigen::SelfAdjointEigenSolver<Mat> es(spec.feature_cov);
  SpectralConstants out;
  out.eigen_min = es.eigenvalues().minCoeff();
  out.eigen_max = es.eigenvalues().maxCoeff();
  out.max_step = 2.0 / out.eigen_max;
  out.half_moment = 0.5 * spec.feature_cov;
  double rho = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double f = 1.0 - step_size * es.eigenvalues()[i];
    rho = std::max(rho, f * f);
  }
  out.contraction = rho;
  out.contractive = rho < 1.0;
  return out;
}

// Checks (I - eps*C)^T Sx (I - eps*C) <= rho * Sx in the PSD order, with
// Sx = C/2: all eigenvalues of the difference must be >= -1e-10.
inline bool contraction_check(const ProblemSpec& spec, double step_size) {
  const SpectralConstants sc = spectral_constants(spec, step_size);
  const Mat m =
      Mat::Identity(spec.dim, spec.dim) - step_size * spec.feature_cov;
  const Mat diff =
      sc.contraction * sc.half_moment - m.transpose() * sc.half_moment * m;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (diff + diff.transpose()));
  return es.eigenvalues().minCoeff() >= -1e-10;
}

}  // namespace fedgain
