#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <stdexcept>
#include <string>

namespace fedgain {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Invalid experiment configuration (bad file, bad field, missing policy
// input). The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Mismatched vector/matrix dimensions between a problem and its inputs.
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what)
      : std::invalid_argument(what) {}
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

// Shortest text that parses back to the exact same double. All CSVs, traces
// and configs use this, so outputs are byte-stable and round-trips are
// bit-exact.
inline std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& tok) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw ConfigError("bad numeric token '" + tok + "'");
  return v;
}

}  // namespace fedgain
