#pragma once

// Shared fixtures for the unit suites.

#include <fedgain/regression.hpp>
#include <fedgain/rng.hpp>

namespace fedgain::test {

inline Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

inline Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

inline Mat diag2(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

// The two-dimensional problem used throughout the experiments:
// cov = diag(3, 1), w_true = [3, 5], unit noise.
inline ProblemSpec bench_problem() {
  return ProblemSpec::create(vec2(3, 5), diag2(3, 1), 1.0);
}

// Random SPD matrix: A^T A + 0.1 I for a square Gaussian A.
inline Mat random_spd(CounterRng& rng, int n) {
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.next_gaussian();
  Mat m = a.transpose() * a + 0.1 * Mat::Identity(n, n);
  return 0.5 * (m + m.transpose());
}

inline Vec random_vec(CounterRng& rng, int n, double scale = 1.0) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.next_gaussian();
  return v;
}

}  // namespace fedgain::test
