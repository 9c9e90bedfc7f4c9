#include "cimtherm/thermal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdio>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>

#include "cimtherm/error.hpp"

namespace cimtherm {

ThermalGrid build_grid(int rows, int cols, const TechnologyParams& tech, const ThermalStack& stack,
                       int coalesce_factor) {
  if (rows <= 0 || cols <= 0) throw ValidationError("thermal grid: array dimensions must be positive");
  if (coalesce_factor < 1) throw ValidationError("thermal grid: coalesce factor must be >= 1");
  if (rows % coalesce_factor || cols % coalesce_factor)
    throw ValidationError("thermal grid: coalesce factor " + std::to_string(coalesce_factor) + " does not divide " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  tech.validate();
  stack.validate();
  ThermalGrid g;
  g.rows = rows;
  g.cols = cols;
  g.coalesce = coalesce_factor;
  g.nx = cols / coalesce_factor;
  g.ny = rows / coalesce_factor;
  g.dx = coalesce_factor * tech.cell_dx;
  g.dy = coalesce_factor * tech.cell_dy;
  g.dz_active = tech.cell_dz;
  g.stack = stack;
  return g;
}

NodeResistances node_resistances(const ThermalGrid& g) {
  const auto& s = g.stack;
  const double area = g.node_area();
  NodeResistances r;
  r.lateral_active_x = g.dx / (s.k_si * g.dy * g.dz_active);
  r.lateral_active_y = g.dy / (s.k_si * g.dx * g.dz_active);
  r.active_bulk = s.bulk_si_dz / (s.k_si * area);
  r.lateral_bulk_x = g.dx / (s.k_si * g.dy * s.bulk_si_dz);
  r.lateral_bulk_y = g.dy / (s.k_si * g.dx * s.bulk_si_dz);
  r.bulk_ambient = s.tim_dz / (s.k_tim * area) + s.cu_dz / (s.k_cu * area) +
                   static_cast<double>(g.nodes_per_layer()) * s.r_convective;
  return r;
}

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (int r = 0; r < n; ++r) {
    double acc = 0.0;
    for (auto k = row_ptr[r]; k < row_ptr[r + 1]; ++k) acc += val[k] * x[col[k]];
    y[r] = acc;
  }
}

double CsrMatrix::at(int r, int c) const {
  for (auto k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
    if (col[k] == c) return val[k];
  return 0.0;
}

ConductanceSystem assemble_conductance(const ThermalGrid& grid) {
  const auto r = node_resistances(grid);
  const double g_ax = 1.0 / r.lateral_active_x, g_ay = 1.0 / r.lateral_active_y;
  const double g_bx = 1.0 / r.lateral_bulk_x, g_by = 1.0 / r.lateral_bulk_y;
  const double g_ab = 1.0 / r.active_bulk, g_amb = 1.0 / r.bulk_ambient;

  ConductanceSystem sys;
  sys.grid = grid;
  sys.ambient_conductance.assign(static_cast<std::size_t>(grid.nodes()), 0.0);
  auto& m = sys.g;
  m.n = grid.nodes();
  m.row_ptr.reserve(static_cast<std::size_t>(m.n) + 1);
  m.col.reserve(static_cast<std::size_t>(m.n) * 6);
  m.val.reserve(static_cast<std::size_t>(m.n) * 6);
  m.row_ptr.push_back(0);

  // Row entries in ascending column order.
  for (int layer = 0; layer < 2; ++layer) {
    const double gx = layer == 0 ? g_ax : g_bx;
    const double gy = layer == 0 ? g_ay : g_by;
    for (int iy = 0; iy < grid.ny; ++iy) {
      for (int ix = 0; ix < grid.nx; ++ix) {
        const int self = layer == 0 ? grid.active(ix, iy) : grid.bulk(ix, iy);
        const int other = layer == 0 ? grid.bulk(ix, iy) : grid.active(ix, iy);
        struct Edge {
          int col;
          double g;
        };
        Edge edges[6];
        int ne = 0;
        if (layer == 1) edges[ne++] = {other, g_ab};
        if (iy > 0) edges[ne++] = {self - grid.nx, gy};
        if (ix > 0) edges[ne++] = {self - 1, gx};
        double diag = 0.0;
        for (int k = 0; k < ne; ++k) diag += edges[k].g;
        const int before = ne;
        if (ix + 1 < grid.nx) edges[ne++] = {self + 1, gx};
        if (iy + 1 < grid.ny) edges[ne++] = {self + grid.nx, gy};
        if (layer == 0) edges[ne++] = {other, g_ab};
        for (int k = before; k < ne; ++k) diag += edges[k].g;
        if (layer == 1) {
          diag += g_amb;
          sys.ambient_conductance[self] = g_amb;
        }
        for (int k = 0; k < before; ++k) {
          m.col.push_back(edges[k].col);
          m.val.push_back(-edges[k].g);
        }
        m.col.push_back(self);
        m.val.push_back(diag);
        for (int k = before; k < ne; ++k) {
          m.col.push_back(edges[k].col);
          m.val.push_back(-edges[k].g);
        }
        m.row_ptr.push_back(static_cast<std::int64_t>(m.val.size()));
      }
    }
  }
  return sys;
}

std::vector<double> node_power(const ThermalGrid& grid, const PowerMap& power) {
  if (power.rows != grid.rows || power.cols != grid.cols)
    throw ValidationError("power map " + std::to_string(power.rows) + "x" + std::to_string(power.cols) +
                          " does not match the thermal grid " + std::to_string(grid.rows) + "x" +
                          std::to_string(grid.cols));
  std::vector<double> p(static_cast<std::size_t>(grid.nodes_per_layer()), 0.0);
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) p[grid.active(c / grid.coalesce, r / grid.coalesce)] += power.at(r, c);
  return p;
}

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// y = G x written as sum_j g_ij (x_i - x_j) + g_amb,i x_i. Temperatures
/// carry a large common offset; differencing first keeps it from cancelling.
void apply_conductance(const ConductanceSystem& sys, std::span<const double> x, std::span<double> y) {
  const auto& m = sys.g;
  for (int r = 0; r < m.n; ++r) {
    const double xr = x[r];
    double acc = sys.ambient_conductance[r] * xr;
    for (auto k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k)
      if (m.col[k] != r) acc -= m.val[k] * (xr - x[m.col[k]]);
    y[r] = acc;
  }
}

/// Dense Cholesky factor for the coarsest level.
class DenseCholesky {
 public:
  explicit DenseCholesky(const CsrMatrix& a) : n_(a.n), l_(static_cast<std::size_t>(a.n) * a.n, 0.0) {
    for (int r = 0; r < n_; ++r)
      for (auto k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) l_[idx(r, a.col[k])] = a.val[k];
    for (int j = 0; j < n_; ++j) {
      double d = l_[idx(j, j)];
      for (int k = 0; k < j; ++k) d -= l_[idx(j, k)] * l_[idx(j, k)];
      if (!(d > 0.0)) throw SolverError("coarse conductance matrix is not positive definite");
      d = std::sqrt(d);
      l_[idx(j, j)] = d;
      for (int i = j + 1; i < n_; ++i) {
        double v = l_[idx(i, j)];
        for (int k = 0; k < j; ++k) v -= l_[idx(i, k)] * l_[idx(j, k)];
        l_[idx(i, j)] = v / d;
      }
    }
  }

  void solve(std::span<const double> b, std::span<double> x) const {
    for (int i = 0; i < n_; ++i) {
      double v = b[i];
      for (int k = 0; k < i; ++k) v -= l_[idx(i, k)] * x[k];
      x[i] = v / l_[idx(i, i)];
    }
    for (int i = n_ - 1; i >= 0; --i) {
      double v = x[i];
      for (int k = i + 1; k < n_; ++k) v -= l_[idx(k, i)] * x[k];
      x[i] = v / l_[idx(i, i)];
    }
  }

 private:
  std::size_t idx(int r, int c) const { return static_cast<std::size_t>(r) * n_ + c; }
  int n_;
  std::vector<double> l_;
};

/// Aggregation multigrid V-cycle: 2x2 blocks within each layer, Galerkin
/// coarse operators, damped Jacobi smoothing.
class Multigrid {
 public:
  explicit Multigrid(const ConductanceSystem& sys) : fine_(sys) {
    int nx = sys.grid.nx, ny = sys.grid.ny;
    const CsrMatrix* a = &sys.g;
    while (a->n > kCoarsest && (nx > 1 || ny > 1)) {
      Level lv;
      lv.inv_diag.resize(static_cast<std::size_t>(a->n));
      for (int i = 0; i < a->n; ++i) lv.inv_diag[i] = 1.0 / a->at(i, i);
      const int cx = (nx + 1) / 2, cy = (ny + 1) / 2;
      lv.agg.resize(static_cast<std::size_t>(a->n));
      for (int layer = 0; layer < 2; ++layer)
        for (int iy = 0; iy < ny; ++iy)
          for (int ix = 0; ix < nx; ++ix)
            lv.agg[layer * nx * ny + iy * nx + ix] = layer * cx * cy + (iy / 2) * cx + ix / 2;
      lv.coarse = galerkin(*a, lv.agg, 2 * cx * cy);
      levels_.push_back(std::move(lv));
      a = &levels_.back().coarse;
      nx = cx;
      ny = cy;
    }
    if (!levels_.empty()) {
      // Level 0 smooths with the fine operator; later levels use the previous coarse one.
      for (std::size_t l = 0; l < levels_.size(); ++l) levels_[l].op = l == 0 ? &sys.g : &levels_[l - 1].coarse;
      coarse_solver_.emplace(levels_.back().coarse);
    } else {
      coarse_solver_.emplace(sys.g);
    }
  }

  void apply(std::span<const double> r, std::span<double> z) const {
    if (levels_.empty()) {
      coarse_solver_->solve(r, z);
      return;
    }
    cycle(0, r, z);
  }

 private:
  static constexpr int kCoarsest = 256;
  static constexpr double kOmega = 2.0 / 3.0;

  struct Level {
    const CsrMatrix* op = nullptr;
    std::vector<double> inv_diag;
    std::vector<int> agg;
    CsrMatrix coarse;
  };

  static CsrMatrix galerkin(const CsrMatrix& a, const std::vector<int>& agg, int nc) {
    std::vector<std::vector<int>> members(static_cast<std::size_t>(nc));
    for (int i = 0; i < a.n; ++i) members[agg[i]].push_back(i);
    CsrMatrix c;
    c.n = nc;
    c.row_ptr.push_back(0);
    std::vector<double> acc(static_cast<std::size_t>(nc), 0.0);
    std::vector<char> used(static_cast<std::size_t>(nc), 0);
    std::vector<int> cols;
    for (int I = 0; I < nc; ++I) {
      cols.clear();
      for (int i : members[I])
        for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
          const int J = agg[a.col[k]];
          if (!used[J]) {
            used[J] = 1;
            cols.push_back(J);
          }
          acc[J] += a.val[k];
        }
      std::sort(cols.begin(), cols.end());
      for (int J : cols) {
        c.col.push_back(J);
        c.val.push_back(acc[J]);
        acc[J] = 0.0;
        used[J] = 0;
      }
      c.row_ptr.push_back(static_cast<std::int64_t>(c.val.size()));
    }
    return c;
  }

  void multiply(std::size_t l, std::span<const double> x, std::span<double> y) const {
    if (l == 0)
      apply_conductance(fine_, x, y);
    else
      levels_[l].op->multiply(x, y);
  }

  void cycle(std::size_t l, std::span<const double> r, std::span<double> z) const {
    const auto& lv = levels_[l];
    const std::size_t n = r.size();
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = kOmega * lv.inv_diag[i] * r[i];
    multiply(l, z, t);
    for (std::size_t i = 0; i < n; ++i) t[i] = r[i] - t[i];
    const auto nc = static_cast<std::size_t>(lv.coarse.n);
    std::vector<double> rc(nc, 0.0), zc(nc, 0.0);
    for (std::size_t i = 0; i < n; ++i) rc[lv.agg[i]] += t[i];
    if (l + 1 < levels_.size())
      cycle(l + 1, rc, zc);
    else
      coarse_solver_->solve(rc, zc);
    for (std::size_t i = 0; i < n; ++i) z[i] += zc[lv.agg[i]];
    multiply(l, z, t);
    for (std::size_t i = 0; i < n; ++i) z[i] += kOmega * lv.inv_diag[i] * (r[i] - t[i]);
  }

  const ConductanceSystem& fine_;
  std::vector<Level> levels_;
  std::optional<DenseCholesky> coarse_solver_;
};

}  // namespace

TemperatureField solve_steady_state(const ConductanceSystem& system, std::span<const double> active_power,
                                    const SolveOptions& options) {
  const auto& grid = system.grid;
  const auto n = static_cast<std::size_t>(grid.nodes());
  if (active_power.size() != static_cast<std::size_t>(grid.nodes_per_layer()))
    throw ValidationError("power vector has " + std::to_string(active_power.size()) + " entries, grid has " +
                          std::to_string(grid.nodes_per_layer()) + " active nodes");
  for (double p : active_power)
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("node power must be finite and non-negative");

  TemperatureField f;
  f.grid = grid;
  f.rise.assign(n, 0.0);
  std::vector<double> b(n, 0.0);
  std::copy(active_power.begin(), active_power.end(), b.begin());
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) return f;

  // The bulk layer sits at a large, nearly uniform rise. Solving for the
  // deviation from the energy-balance level T0 keeps the residual of the
  // lateral terms above rounding of T itself.
  const double total_power = std::accumulate(b.begin(), b.end(), 0.0);
  const double total_ambient =
      std::accumulate(system.ambient_conductance.begin(), system.ambient_conductance.end(), 0.0);
  const double t0 = total_power / total_ambient;
  for (std::size_t i = 0; i < n; ++i) b[i] -= t0 * system.ambient_conductance[i];

  const Multigrid precond(system);
  std::vector<double> x(n, 0.0), r = b, z(n), p(n), q(n);
  precond.apply(r, z);
  p = z;
  double rz = dot(r, z);
  double rnorm = std::sqrt(dot(r, r));
  int it = 0;
  while (rnorm / bnorm > options.tolerance) {
    if (it >= options.max_iterations)
      throw SolverError("thermal solve did not converge in " + std::to_string(options.max_iterations) +
                        " iterations (relative residual " + sci(rnorm / bnorm) + ")");
    apply_conductance(system, p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) throw SolverError("conductance matrix is not positive definite");
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    ++it;
    rnorm = std::sqrt(dot(r, r));
    precond.apply(r, z);
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  apply_conductance(system, x, q);
  double res = 0.0;
  for (std::size_t i = 0; i < n; ++i) res += (b[i] - q[i]) * (b[i] - q[i]);
  f.relative_residual = std::sqrt(res) / bnorm;
  f.iterations = it;
  f.offset = t0;
  for (std::size_t i = 0; i < n; ++i) f.rise[i] = t0 + x[i];
  if (f.relative_residual > 10.0 * std::max(options.tolerance, 1e-12))
    throw SolverError("thermal solve drifted: true relative residual " + sci(f.relative_residual) + " after " +
                      std::to_string(it) + " iterations");
  return f;
}

TemperatureField solve_steady_state(const ConductanceSystem& system, const PowerMap& power,
                                    const SolveOptions& options) {
  const auto p = node_power(system.grid, power);
  return solve_steady_state(system, p, options);
}

FieldMetrics field_metrics(const ConductanceSystem& system, const TemperatureField& field,
                           std::span<const double> active_power) {
  const auto& g = system.grid;
  const auto np = static_cast<std::size_t>(g.nodes_per_layer());
  FieldMetrics m;
  const auto first = field.rise.begin();
  const auto [lo, hi] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(np));
  m.rise_max = *hi;
  m.rise_min = *lo;
  m.t_max = m.rise_max + g.stack.ambient_c;
  m.t_min = m.rise_min + g.stack.ambient_c;
  m.spread = m.rise_max - m.rise_min;
  m.total_power = std::accumulate(active_power.begin(), active_power.end(), 0.0);
  m.power_density = m.total_power / (static_cast<double>(np) * g.node_area() * 1e4);
  for (std::size_t i = np; i < field.rise.size(); ++i) m.heat_out += field.rise[i] * system.ambient_conductance[i];
  m.energy_balance = m.total_power > 0.0 ? (m.heat_out - m.total_power) / m.total_power : 0.0;
  m.relative_residual = field.relative_residual;
  m.iterations = field.iterations;
  return m;
}

double max_duty_cycle(double rise_max_at_full_duty, double ambient_c, double limit_c) {
  if (!(limit_c > ambient_c)) throw ValidationError("temperature limit must exceed ambient");
  if (rise_max_at_full_duty <= 0.0) return 1.0;
  return std::min(1.0, (limit_c - ambient_c) / rise_max_at_full_duty);
}

namespace {

template <class F>
void for_layer(const TemperatureField& field, bool bulk_layer, F&& f) {
  const auto& g = field.grid;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      f(ix, iy, field.rise[bulk_layer ? g.bulk(ix, iy) : g.active(ix, iy)] + g.stack.ambient_c);
}

void write_delimited(std::ostream& out, const TemperatureField& field, bool bulk_layer, char sep, bool labels) {
  const auto prec = out.precision(10);
  if (labels) {
    out << "node_row\\node_col [deg C]";
    for (int ix = 0; ix < field.grid.nx; ++ix) out << sep << ix;
    out << '\n';
  }
  for_layer(field, bulk_layer, [&](int ix, int iy, double t) {
    if (labels && ix == 0) out << iy << sep;
    if (ix) out << sep;
    out << t;
    if (ix + 1 == field.grid.nx) out << '\n';
  });
  out.precision(prec);
}

}  // namespace

void write_layer_csv(std::ostream& out, const TemperatureField& field, bool bulk_layer) {
  write_delimited(out, field, bulk_layer, ',', true);
}

void write_layer_text(std::ostream& out, const TemperatureField& field, bool bulk_layer) {
  write_delimited(out, field, bulk_layer, ' ', false);
}

void write_layer_pgm(std::ostream& out, const TemperatureField& field, bool bulk_layer) {
  double lo = 1e300, hi = -1e300;
  for_layer(field, bulk_layer, [&](int, int, double t) {
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  });
  const double span = hi > lo ? hi - lo : 1.0;
  out << "P5\n" << field.grid.nx << ' ' << field.grid.ny << "\n255\n";
  for_layer(field, bulk_layer, [&](int, int, double t) {
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * (t - lo) / span))));
  });
}

}  // namespace cimtherm
