#pragma once

// Flat key/value experiment configuration.
//
// Grammar: one `key = value` per line; `#` starts a comment; blank lines
// ignored. Keys are dotted paths. Values are typed on access:
//   scalar      42, 0.1, true, bench-n2
//   vector      3,5
//   matrix      3,0;0,1          (rows ';'-separated)  or  diag(3,1)
//   value list  0.1,0.5,1        or  log(lo,hi,k)  or  lin(lo,hi,k)
//
// Every key must be consumed; leftovers are reported with their line
// number, so typos fail loudly instead of silently using a default.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fedgain/types.hpp"

namespace fedgain {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) out.push_back(trim(tok));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

}  // namespace detail

class FlatConfig {
 public:
  static FlatConfig parse_string(const std::string& text,
                                 const std::string& origin = "<string>") {
    FlatConfig cfg;
    cfg.origin_ = origin;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected 'key = value'");
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": empty key");
      if (cfg.entries_.count(key))
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": duplicate key '" + key + "'");
      cfg.entries_[key] = Entry{value, lineno, false};
    }
    return cfg;
  }

  static FlatConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  void set(const std::string& key, const std::string& value) {
    entries_[key] = Entry{value, 0, false};
  }

  std::string get_string(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end())
      throw ConfigError(origin_ + ": missing required key '" + key + "'");
    it->second.consumed = true;
    return it->second.value;
  }

  std::string get_string(const std::string& key, const std::string& dflt) {
    return has(key) ? get_string(key) : dflt;
  }

  double get_double(const std::string& key) {
    return parse_or_rethrow<double>(key, [](const std::string& v) {
      return parse_double(v);
    });
  }
  double get_double(const std::string& key, double dflt) {
    return has(key) ? get_double(key) : dflt;
  }

  long get_long(const std::string& key) {
    return parse_or_rethrow<long>(key, [](const std::string& v) {
      std::size_t pos = 0;
      const long out = std::stol(v, &pos);
      if (pos != v.size()) throw ConfigError("trailing characters");
      return out;
    });
  }
  long get_long(const std::string& key, long dflt) {
    return has(key) ? get_long(key) : dflt;
  }

  std::uint64_t get_u64(const std::string& key) {
    return parse_or_rethrow<std::uint64_t>(key, [](const std::string& v) {
      std::size_t pos = 0;
      const unsigned long long out = std::stoull(v, &pos);
      if (pos != v.size()) throw ConfigError("trailing characters");
      return static_cast<std::uint64_t>(out);
    });
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t dflt) {
    return has(key) ? get_u64(key) : dflt;
  }

  bool get_bool(const std::string& key) {
    return parse_or_rethrow<bool>(key, [](const std::string& v) {
      if (v == "true" || v == "1") return true;
      if (v == "false" || v == "0") return false;
      throw ConfigError("expected true/false");
    });
  }
  bool get_bool(const std::string& key, bool dflt) {
    return has(key) ? get_bool(key) : dflt;
  }

  Vec get_vec(const std::string& key) {
    return parse_or_rethrow<Vec>(key, [](const std::string& v) {
      const auto toks = detail::split(v, ',');
      Vec out(static_cast<int>(toks.size()));
      for (std::size_t i = 0; i < toks.size(); ++i)
        out[static_cast<int>(i)] = parse_double(toks[i]);
      return out;
    });
  }

  // `diag(a,b,...)` or ';'-separated rows of ','-separated entries.
  Mat get_mat(const std::string& key) {
    return parse_or_rethrow<Mat>(key, [](const std::string& v) {
      if (v.rfind("diag(", 0) == 0 && v.back() == ')') {
        const auto toks =
            detail::split(v.substr(5, v.size() - 6), ',');
        Mat m = Mat::Zero(static_cast<int>(toks.size()),
                          static_cast<int>(toks.size()));
        for (std::size_t i = 0; i < toks.size(); ++i)
          m(static_cast<int>(i), static_cast<int>(i)) =
              parse_double(toks[i]);
        return m;
      }
      const auto rows = detail::split(v, ';');
      const auto first = detail::split(rows[0], ',');
      Mat m(static_cast<int>(rows.size()), static_cast<int>(first.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto cols = detail::split(rows[i], ',');
        if (cols.size() != first.size())
          throw ConfigError("ragged matrix rows");
        for (std::size_t j = 0; j < cols.size(); ++j)
          m(static_cast<int>(i), static_cast<int>(j)) =
              parse_double(cols[j]);
      }
      return m;
    });
  }

  // Value grids: explicit list, or log(lo,hi,k) / lin(lo,hi,k).
  std::vector<double> get_list(const std::string& key) {
    return parse_or_rethrow<std::vector<double>>(
        key, [](const std::string& v) {
          std::vector<double> out;
          const bool is_log = v.rfind("log(", 0) == 0;
          const bool is_lin = v.rfind("lin(", 0) == 0;
          if ((is_log || is_lin) && v.back() == ')') {
            const auto toks =
                detail::split(v.substr(4, v.size() - 5), ',');
            if (toks.size() != 3)
              throw ConfigError("expected (lo,hi,count)");
            const double lo = parse_double(toks[0]);
            const double hi = parse_double(toks[1]);
            const long count = std::stol(toks[2]);
            if (count < 1) throw ConfigError("count must be >= 1");
            if (is_log && (lo <= 0 || hi <= 0))
              throw ConfigError("log grid needs positive endpoints");
            for (long i = 0; i < count; ++i) {
              const double t =
                  count == 1 ? 0.0
                             : static_cast<double>(i) /
                                   static_cast<double>(count - 1);
              out.push_back(is_log
                                ? std::exp(std::log(lo) +
                                           t * (std::log(hi) - std::log(lo)))
                                : lo + t * (hi - lo));
            }
            return out;
          }
          for (const auto& tok : detail::split(v, ','))
            out.push_back(parse_double(tok));
          if (out.empty()) throw ConfigError("empty value list");
          return out;
        });
  }

  // Keys under `prefix.` (suffixes returned), e.g. sweep parameter paths.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [k, e] : entries_)
      if (k.rfind(prefix, 0) == 0) out.push_back(k.substr(prefix.size()));
    return out;
  }

  // Call after resolution: every key must have been read.
  void reject_unconsumed() const {
    for (const auto& [k, e] : entries_)
      if (!e.consumed)
        throw ConfigError(origin_ + ":" + std::to_string(e.line) +
                          ": unknown key '" + k + "'");
  }

 private:
  struct Entry {
    std::string value;
    int line = 0;
    bool consumed = false;
  };

  template <typename T, typename Fn>
  T parse_or_rethrow(const std::string& key, Fn&& fn) {
    const std::string raw = get_string(key);
    try {
      return fn(raw);
    } catch (const ConfigError& e) {
      throw ConfigError(origin_ + ": key '" + key + "': " + e.what() +
                        " (value '" + raw + "')");
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": key '" + key + "': cannot parse value '" +
                        raw + "'");
    }
  }

  std::string origin_;
  std::map<std::string, Entry> entries_;
};

}  // namespace fedgain
