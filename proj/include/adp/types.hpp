#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace adp {

using Vec = std::vector<double>;

// Error taxonomy. The CLI maps these onto exit codes; library code throws,
// it never exits.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct config_error : error {  // malformed problem or run configuration
  using error::error;
};
struct input_error : error {  // bad runtime argument (non-finite state, ...)
  using error::error;
};
struct model_error : error {  // dynamics/cost produced non-finite output
  using error::error;
};
struct io_error : error {  // file format or filesystem failure
  using error::error;
};
struct refusal_error : error {  // algorithm precondition not met
  using error::error;
};
struct budget_error : error {  // enumeration budget exceeded
  using error::error;
};

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double sup_norm(const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double sup_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Largest signed increase b - a; negative when b <= a everywhere.
inline double max_increase(const Vec& a, const Vec& b) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, b[i] - a[i]);
  return m;
}

inline double norm2(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// 17 significant digits round-trip an IEEE double exactly.
inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_vec(const Vec& v, const char* sep = ",") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += format_full(v[i]);
  }
  return s;
}

}  // namespace adp
