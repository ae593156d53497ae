#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <variant>

#include "adp/types.hpp"

namespace adp {

// Rectangular node lattice over a box. Nodes are flattened row-major with the
// last dimension fastest; the field file format pins the same order.
//
// Axis coordinates are precomputed once as lower + i*(upper-lower)/(nodes-1),
// so reading the same node twice always yields the same double. A coordinate
// that lands within rounding distance of zero is snapped to exactly 0.0 so
// that "value at the origin node" statements can be made exact.
class BoxGrid {
 public:
  BoxGrid() = default;

  BoxGrid(Vec lower, Vec upper, std::vector<int> nodes_per_dim)
      : lower_(std::move(lower)), upper_(std::move(upper)), nodes_(std::move(nodes_per_dim)) {
    const std::size_t n = lower_.size();
    if (n == 0 || upper_.size() != n || nodes_.size() != n)
      throw config_error("BoxGrid: dimension mismatch between lower/upper/nodes");
    if (!all_finite(lower_) || !all_finite(upper_))
      throw config_error("BoxGrid: non-finite bounds");
    for (std::size_t d = 0; d < n; ++d) {
      if (!(lower_[d] < upper_[d]))
        throw config_error("BoxGrid: lower must be strictly below upper in every dimension");
      if (nodes_[d] < 2) throw config_error("BoxGrid: need at least 2 nodes per dimension");
    }
    axes_.resize(n);
    for (std::size_t d = 0; d < n; ++d) {
      const double span = upper_[d] - lower_[d];
      const double step = span / static_cast<double>(nodes_[d] - 1);
      const double snap = 1e-12 * std::max(std::abs(lower_[d]), std::abs(upper_[d]));
      axes_[d].resize(nodes_[d]);
      for (int i = 0; i < nodes_[d]; ++i) {
        double c = (i == nodes_[d] - 1) ? upper_[d] : lower_[d] + i * step;
        if (std::abs(c) <= snap) c = 0.0;
        axes_[d][i] = c;
      }
    }
    strides_.assign(n, 1);
    for (int d = static_cast<int>(n) - 2; d >= 0; --d)
      strides_[d] = strides_[d + 1] * static_cast<std::size_t>(nodes_[d + 1]);
  }

  int dims() const { return static_cast<int>(lower_.size()); }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  const std::vector<int>& nodes_per_dim() const { return nodes_; }
  double coord(int dim, int i) const { return axes_[dim][i]; }
  double cell_width(int dim) const { return axes_[dim][1] - axes_[dim][0]; }

  std::size_t node_count() const {
    std::size_t c = 1;
    for (int k : nodes_) c *= static_cast<std::size_t>(k);
    return c;
  }

  std::size_t index_of(std::span<const int> multi) const {
    std::size_t flat = 0;
    for (int d = 0; d < dims(); ++d) flat += strides_[d] * static_cast<std::size_t>(multi[d]);
    return flat;
  }

  void multi_of(std::size_t flat, std::span<int> out) const {
    for (int d = 0; d < dims(); ++d) {
      out[d] = static_cast<int>(flat / strides_[d]);
      flat %= strides_[d];
    }
  }

  Vec coords_of(std::size_t flat) const {
    Vec x(dims());
    for (int d = 0; d < dims(); ++d) {
      x[d] = axes_[d][flat / strides_[d]];
      flat %= strides_[d];
    }
    return x;
  }

  void coords_of(std::size_t flat, Vec& out) const {
    out.resize(dims());
    for (int d = 0; d < dims(); ++d) {
      out[d] = axes_[d][flat / strides_[d]];
      flat %= strides_[d];
    }
  }

  // Index of the node whose coordinates are exactly zero, if there is one.
  std::optional<std::size_t> origin_node() const {
    std::size_t flat = 0;
    for (int d = 0; d < dims(); ++d) {
      int hit = -1;
      for (int i = 0; i < nodes_[d]; ++i)
        if (axes_[d][i] == 0.0) {
          hit = i;
          break;
        }
      if (hit < 0) return std::nullopt;
      flat += strides_[d] * static_cast<std::size_t>(hit);
    }
    return flat;
  }

  bool contains(const Vec& x) const {
    for (int d = 0; d < dims(); ++d)
      if (x[d] < lower_[d] || x[d] > upper_[d]) return false;
    return true;
  }

  friend bool operator==(const BoxGrid& a, const BoxGrid& b) {
    return a.lower_ == b.lower_ && a.upper_ == b.upper_ && a.nodes_ == b.nodes_;
  }

 private:
  Vec lower_, upper_;
  std::vector<int> nodes_;
  std::vector<std::size_t> strides_;
  std::vector<Vec> axes_;
};

struct ScalarField {
  BoxGrid grid;
  Vec values;

  static ScalarField zeros(const BoxGrid& g) { return {g, Vec(g.node_count(), 0.0)}; }
};

// Per-node control table. Controls are stored node-major: controls[node*m + j].
// Bounds, when attached, are the ControlSet box; interpolate_policy re-clamps
// into them. A field loaded from disk has no bounds until they are attached.
struct PolicyField {
  BoxGrid grid;
  int control_dim = 0;
  Vec controls;
  Vec bound_lower, bound_upper;  // empty when unbounded

  static PolicyField zeros(const BoxGrid& g, int m) {
    return {g, m, Vec(g.node_count() * static_cast<std::size_t>(m), 0.0), {}, {}};
  }

  std::span<const double> control_at(std::size_t node) const {
    return {controls.data() + node * static_cast<std::size_t>(control_dim),
            static_cast<std::size_t>(control_dim)};
  }
  std::span<double> control_at(std::size_t node) {
    return {controls.data() + node * static_cast<std::size_t>(control_dim),
            static_cast<std::size_t>(control_dim)};
  }
};

// Componentwise clamp into the grid box; flag is true iff any component moved.
inline std::pair<Vec, bool> clamp_to_domain(const BoxGrid& grid, const Vec& x) {
  Vec y = x;
  bool moved = false;
  for (int d = 0; d < grid.dims(); ++d) {
    if (y[d] < grid.lower()[d]) {
      y[d] = grid.lower()[d];
      moved = true;
    } else if (y[d] > grid.upper()[d]) {
      y[d] = grid.upper()[d];
      moved = true;
    }
  }
  return {std::move(y), moved};
}

inline void clamp_to_domain_inplace(const BoxGrid& grid, Vec& x, bool* moved = nullptr) {
  bool m = false;
  for (int d = 0; d < grid.dims(); ++d) {
    if (x[d] < grid.lower()[d]) {
      x[d] = grid.lower()[d];
      m = true;
    } else if (x[d] > grid.upper()[d]) {
      x[d] = grid.upper()[d];
      m = true;
    }
  }
  if (moved) *moved = m;
}

namespace detail {

constexpr int kMaxDims = 12;

// Locate the cell containing x[d] along each axis and the fractional offset
// within that cell. Exact at nodes: a query equal to a node coordinate yields
// a fraction of exactly 0 or 1.
struct CellLocator {
  std::array<int, kMaxDims> base;
  std::array<double, kMaxDims> frac;
};

inline void locate(const BoxGrid& g, const Vec& x, CellLocator& loc) {
  for (int d = 0; d < g.dims(); ++d) {
    const int n = g.nodes_per_dim()[d];
    double v = x[d];
    if (v < g.lower()[d]) v = g.lower()[d];
    if (v > g.upper()[d]) v = g.upper()[d];
    const double step = g.cell_width(d);
    int i = static_cast<int>((v - g.lower()[d]) / step);
    if (i > n - 2) i = n - 2;
    if (i < 0) i = 0;
    const double a = g.coord(d, i), b = g.coord(d, i + 1);
    loc.base[d] = i;
    loc.frac[d] = (v - a) / (b - a);
  }
}

}  // namespace detail

// Multilinear interpolation of the 2^n surrounding node values. Exact at
// nodes; never leaves the [min, max] hull of the enclosing cell's corners.
// Out-of-domain queries are clamped to the boundary.
inline double interpolate(const ScalarField& f, const Vec& x) {
  const BoxGrid& g = f.grid;
  if (static_cast<int>(x.size()) != g.dims())
    throw input_error("interpolate: state dimension mismatch");
  if (!all_finite(x)) throw input_error("interpolate: non-finite query point");
  if (g.dims() > detail::kMaxDims) throw config_error("interpolate: too many dimensions");

  detail::CellLocator loc;
  detail::locate(g, x, loc);

  const int n = g.dims();
  std::array<int, detail::kMaxDims> multi{};
  double acc = 0.0;
  for (unsigned corner = 0; corner < (1u << n); ++corner) {
    double w = 1.0;
    for (int d = 0; d < n; ++d) {
      const bool hi = (corner >> d) & 1u;
      w *= hi ? loc.frac[d] : 1.0 - loc.frac[d];
      multi[d] = loc.base[d] + (hi ? 1 : 0);
    }
    if (w == 0.0) continue;
    acc += w * f.values[g.index_of(std::span<const int>(multi.data(), n))];
  }
  return acc;
}

// Componentwise multilinear interpolation of stored controls, re-clamped into
// the attached control bounds.
inline Vec interpolate_policy(const PolicyField& h, const Vec& x) {
  const BoxGrid& g = h.grid;
  if (static_cast<int>(x.size()) != g.dims())
    throw input_error("interpolate_policy: state dimension mismatch");
  if (!all_finite(x)) throw input_error("interpolate_policy: non-finite query point");
  if (g.dims() > detail::kMaxDims) throw config_error("interpolate_policy: too many dimensions");

  detail::CellLocator loc;
  detail::locate(g, x, loc);

  const int n = g.dims();
  std::array<int, detail::kMaxDims> multi{};
  Vec u(h.control_dim, 0.0);
  for (unsigned corner = 0; corner < (1u << n); ++corner) {
    double w = 1.0;
    for (int d = 0; d < n; ++d) {
      const bool hi = (corner >> d) & 1u;
      w *= hi ? loc.frac[d] : 1.0 - loc.frac[d];
      multi[d] = loc.base[d] + (hi ? 1 : 0);
    }
    if (w == 0.0) continue;
    const auto uc = h.control_at(g.index_of(std::span<const int>(multi.data(), n)));
    for (int j = 0; j < h.control_dim; ++j) u[j] += w * uc[j];
  }
  if (!h.bound_lower.empty()) {
    for (int j = 0; j < h.control_dim; ++j)
      u[j] = std::min(std::max(u[j], h.bound_lower[j]), h.bound_upper[j]);
  }
  return u;
}

// ---------------------------------------------------------------------------
// Field persistence.
//
// UTF-8 CSV with a single header line:
//   # adp-field v1, dims=<n>, nodes=<k1,...,kn>, lower=<...>, upper=<...>, kind=<scalar|policy m=<m>>
// followed by one row per node in flattening order (row-major, last dimension
// fastest). Values carry 17 significant digits, so a round-trip is lossless.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string field_header(const BoxGrid& g, const std::string& kind) {
  std::string h = "# adp-field v1, dims=" + std::to_string(g.dims()) + ", nodes=";
  for (std::size_t d = 0; d < g.nodes_per_dim().size(); ++d) {
    if (d) h += ",";
    h += std::to_string(g.nodes_per_dim()[d]);
  }
  h += ", lower=" + format_vec(g.lower()) + ", upper=" + format_vec(g.upper());
  h += ", kind=" + kind;
  return h;
}

inline std::vector<std::string> split(const std::string& s, const std::string& sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = s.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(s.substr(pos));
      break;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + sep.size();
  }
  return out;
}

inline Vec parse_number_list(const std::string& s, const char* what) {
  Vec out;
  for (const std::string& tok : split(s, ",")) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
      throw io_error(std::string("field header: bad number in ") + what + ": '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

inline void save_field(const ScalarField& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw io_error("save_field: cannot open '" + path + "' for writing");
  os << detail::field_header(f.grid, "scalar") << "\n";
  for (double v : f.values) os << format_full(v) << "\n";
  if (!os) throw io_error("save_field: write failure on '" + path + "'");
}

inline void save_field(const PolicyField& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw io_error("save_field: cannot open '" + path + "' for writing");
  os << detail::field_header(f.grid, "policy m=" + std::to_string(f.control_dim)) << "\n";
  const std::size_t nodes = f.grid.node_count();
  for (std::size_t i = 0; i < nodes; ++i) {
    const auto u = f.control_at(i);
    for (int j = 0; j < f.control_dim; ++j) {
      if (j) os << ",";
      os << format_full(u[j]);
    }
    os << "\n";
  }
  if (!os) throw io_error("save_field: write failure on '" + path + "'");
}

using FieldVariant = std::variant<ScalarField, PolicyField>;

inline FieldVariant load_field(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("load_field: cannot open '" + path + "'");
  std::string header;
  if (!std::getline(is, header)) throw io_error("load_field: empty file '" + path + "'");

  const std::string magic = "# adp-field v1, ";
  if (header.rfind(magic, 0) != 0)
    throw io_error("load_field: '" + path + "' is not an adp-field v1 file");

  int dims = -1, m = -1;
  std::vector<int> nodes;
  Vec lower, upper;
  bool scalar = false, kind_seen = false;
  for (const std::string& tok : detail::split(header.substr(magic.size()), ", ")) {
    const std::size_t eq = tok.find('=');
    if (eq == std::string::npos) throw io_error("load_field: malformed header token '" + tok + "'");
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "dims") {
      dims = std::stoi(val);
    } else if (key == "nodes") {
      for (double v : detail::parse_number_list(val, "nodes")) nodes.push_back(static_cast<int>(v));
    } else if (key == "lower") {
      lower = detail::parse_number_list(val, "lower");
    } else if (key == "upper") {
      upper = detail::parse_number_list(val, "upper");
    } else if (key == "kind") {
      kind_seen = true;
      if (val == "scalar") {
        scalar = true;
      } else if (val.rfind("policy m=", 0) == 0) {
        scalar = false;
        m = std::stoi(val.substr(9));
      } else {
        throw io_error("load_field: unknown kind '" + val + "'");
      }
    } else {
      throw io_error("load_field: unknown header key '" + key + "'");
    }
  }
  if (dims <= 0 || !kind_seen || static_cast<int>(nodes.size()) != dims ||
      static_cast<int>(lower.size()) != dims || static_cast<int>(upper.size()) != dims)
    throw io_error("load_field: incomplete or inconsistent header in '" + path + "'");
  if (!scalar && m <= 0) throw io_error("load_field: policy field with m <= 0");

  BoxGrid grid(lower, upper, nodes);
  const std::size_t expect = grid.node_count();
  const int width = scalar ? 1 : m;

  Vec data;
  data.reserve(expect * static_cast<std::size_t>(width));
  std::string line;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ++row;
    const Vec vals = detail::parse_number_list(line, "row");
    if (static_cast<int>(vals.size()) != width)
      throw io_error("load_field: row " + std::to_string(row) + " has " +
                     std::to_string(vals.size()) + " values, expected " + std::to_string(width));
    for (double v : vals) {
      if (!std::isfinite(v))
        throw io_error("load_field: non-finite entry at row " + std::to_string(row));
      data.push_back(v);
    }
  }
  if (row != expect)
    throw io_error("load_field: '" + path + "' has " + std::to_string(row) + " rows, grid needs " +
                   std::to_string(expect));

  if (scalar) return ScalarField{std::move(grid), std::move(data)};
  return PolicyField{std::move(grid), m, std::move(data), {}, {}};
}

inline ScalarField load_scalar_field(const std::string& path) {
  FieldVariant f = load_field(path);
  if (auto* s = std::get_if<ScalarField>(&f)) return std::move(*s);
  throw io_error("load_scalar_field: '" + path + "' holds a policy field");
}

inline PolicyField load_policy_field(const std::string& path) {
  FieldVariant f = load_field(path);
  if (auto* p = std::get_if<PolicyField>(&f)) return std::move(*p);
  throw io_error("load_policy_field: '" + path + "' holds a scalar field");
}

}  // namespace adp
