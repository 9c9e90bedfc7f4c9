#include "cimtherm/kernels.hpp"

#include <algorithm>
#include <bit>
#include <climits>
#include <cstdlib>
#include <random>
#include <string>

#include "cimtherm/error.hpp"
#include "json.hpp"

namespace cimtherm {

namespace {

int ceil_log2(std::int64_t n) {
  int k = 0;
  while ((std::int64_t{1} << k) < n) ++k;
  return k;
}

int bit_length(std::int64_t v) { return std::max(1, static_cast<int>(std::bit_width(static_cast<std::uint64_t>(v)))); }

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  const std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

/// Rows handed out from the top for data and from the bottom for scratch.
class RowAllocator {
 public:
  explicit RowAllocator(int rows) : rows_(rows), bottom_(rows) {}
  int data() { return top_++; }
  int scratch() { return --bottom_; }
  std::vector<int> scratch(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    for (auto& r : v) r = scratch();
    return v;
  }
  int used() const { return top_ + (rows_ - bottom_); }
  bool fits() const { return top_ <= bottom_; }

 private:
  int rows_;
  int top_ = 0;
  int bottom_;
};

constexpr int kUnbounded = INT_MAX / 2;

/// Appends instructions and optionally applies them to a live state.
struct Emitter {
  Program* out;
  ArrayState* state;
  LaneSet lanes;

  void push(Instruction ins) {
    if (state) execute_logic(*state, ins);
    out->push_back(std::move(ins));
  }
  void gate(GateKind g, std::initializer_list<int> in, int o) { push(col_gate(g, in, o, lanes)); }
  void clear_row(int row) { push(BulkSet{Direction::Col, row, lanes, false}); }
};

int fa_scratch_rows(AdderKind k) { return k == AdderKind::Mix ? 2 : 7; }

void full_adder(Emitter& e, AdderKind kind, const std::vector<int>& s, int a, int b, int c, int sum, int cout) {
  if (kind == AdderKind::Mix) {
    e.gate(GateKind::MAJ3, {a, b, c}, cout);
    e.gate(GateKind::NOT, {cout}, s[0]);
    e.gate(GateKind::NOT, {cout}, s[1]);
    e.gate(GateKind::MAJ5, {a, b, c, s[0], s[1]}, sum);
    return;
  }
  e.gate(GateKind::NOR2, {a, b}, s[0]);
  e.gate(GateKind::NOR2, {a, s[0]}, s[1]);
  e.gate(GateKind::NOR2, {b, s[0]}, s[2]);
  e.gate(GateKind::NOR2, {s[1], s[2]}, s[3]);  // xnor(a, b)
  e.gate(GateKind::NOR2, {s[3], c}, s[4]);
  e.gate(GateKind::NOR2, {s[3], s[4]}, s[5]);
  e.gate(GateKind::NOR2, {c, s[4]}, s[6]);
  e.gate(GateKind::NOR2, {s[5], s[6]}, sum);
  e.gate(GateKind::NOR2, {s[0], s[4]}, cout);
}

void carry_only(Emitter& e, AdderKind kind, const std::vector<int>& s, int a, int b, int c, int cout) {
  if (kind == AdderKind::Mix) {
    e.gate(GateKind::MAJ3, {a, b, c}, cout);
    return;
  }
  e.gate(GateKind::NOR2, {a, b}, s[0]);
  e.gate(GateKind::NOR2, {a, s[0]}, s[1]);
  e.gate(GateKind::NOR2, {b, s[0]}, s[2]);
  e.gate(GateKind::NOR2, {s[1], s[2]}, s[3]);
  e.gate(GateKind::NOR2, {s[3], c}, s[4]);
  e.gate(GateKind::NOR2, {s[0], s[4]}, cout);
}

struct CarryRows {
  int zero;  // carry-in for bit 0
  int a;
  int b;
};

/// dst = src + addend, full ripple over src.size() bits.
void ripple_add(Emitter& e, AdderKind kind, const std::vector<int>& scratch, const std::vector<int>& src,
                const std::vector<int>& addend, const std::vector<int>& dst, const CarryRows& cr) {
  int c = cr.zero;
  for (std::size_t q = 0; q < src.size(); ++q) {
    const int co = (c == cr.a) ? cr.b : cr.a;
    full_adder(e, kind, scratch, src[q], addend[q], c, dst[q], co);
    c = co;
  }
}

}  // namespace

// ---------------------------------------------------------------- INV

InvKernel gen_inv(int rows, int cols, double utilization, bool fixed) {
  if (rows < 2 || cols < 1) throw ValidationError("INV needs at least 2 rows and 1 column");
  InvKernel k;
  k.lanes = active_lane_count(utilization, cols);
  const auto lanes = LaneSet::range(0, k.lanes - 1);
  k.initial = ArrayState(rows, cols);
  if (fixed) {
    for (int c = 0; c < cols; ++c) {
      k.initial.set(0, c, c % 2 == 1);
      k.initial.set(1, c, c % 2 == 0);
    }
    k.program.push_back(col_gate(GateKind::NOT, {0}, 1, lanes));
    k.placement = {{"in", 0, 0, 0, k.lanes - 1}, {"out", 0, 1, 0, k.lanes - 1}};
  } else {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) k.initial.set(r, c, (r + c) % 2 == 1);
    for (int t = 0; t < rows; ++t) k.program.push_back(col_gate(GateKind::NOT, {t}, (t + 1) % rows, lanes));
    k.placement = {{"rotating", 0, 0, 0, k.lanes - 1}};
  }
  return k;
}

// ---------------------------------------------------------------- VMUL

namespace {

VmulLayout layout_vmul(const VmulSpec& spec, int rows, int cols) {
  VmulLayout l;
  l.spec = spec;
  l.rows = rows;
  l.cols = cols;
  l.acc_width = 2 * spec.bit_width + ceil_log2(spec.vector_length);
  RowAllocator alloc(rows);
  for (int i = 0; i < 2 * spec.vector_length * spec.bit_width; ++i) alloc.data();
  l.zero = alloc.scratch();
  l.carry_zero = alloc.scratch();
  l.carry_a = alloc.scratch();
  l.carry_b = alloc.scratch();
  l.terms = alloc.scratch(spec.bit_width);
  l.scratch = alloc.scratch(fa_scratch_rows(spec.adder));
  l.bank_a = alloc.scratch(l.acc_width);
  l.bank_b = alloc.scratch(l.acc_width);
  l.result_in_a = (static_cast<std::int64_t>(spec.vector_length) * spec.bit_width) % 2 == 0;
  l.footprint = alloc.used();
  return l;
}

void check_vmul_spec(const VmulSpec& spec) {
  if (spec.outputs < 1 || spec.vector_length < 1) throw ValidationError("VMUL dimensions must be positive");
  if (spec.bit_width < 1 || spec.bit_width > 16) throw ValidationError("VMUL bit width must lie in [1, 16]");
}

}  // namespace

int vmul_footprint(const VmulSpec& spec) {
  check_vmul_spec(spec);
  return layout_vmul(spec, kUnbounded, 1).footprint;
}

int vmul_max_vector_length(int rows, int bit_width, AdderKind adder) {
  int best = 0;
  for (int n = 1;; ++n) {
    if (vmul_footprint(VmulSpec{1, n, bit_width, adder}) > rows) break;
    best = n;
  }
  return best;
}

VmulData random_vmul_data(const VmulSpec& spec, std::uint64_t seed) {
  check_vmul_spec(spec);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> u(0, (std::int64_t{1} << spec.bit_width) - 1);
  VmulData d;
  d.matrix.assign(static_cast<std::size_t>(spec.outputs), std::vector<std::int64_t>(spec.vector_length));
  for (auto& row : d.matrix)
    for (auto& x : row) x = u(rng);
  d.vector.resize(static_cast<std::size_t>(spec.vector_length));
  for (auto& x : d.vector) x = u(rng);
  return d;
}

std::vector<std::int64_t> vmul_oracle(const std::vector<std::vector<std::int64_t>>& matrix,
                                      const std::vector<std::int64_t>& vector) {
  std::vector<std::int64_t> out;
  out.reserve(matrix.size());
  for (const auto& row : matrix) {
    if (row.size() != vector.size())
      throw ValidationError("vmul_oracle: row length " + std::to_string(row.size()) + " vs vector length " +
                            std::to_string(vector.size()));
    std::int64_t acc = 0;
    for (std::size_t k = 0; k < row.size(); ++k) acc += row[k] * vector[k];
    out.push_back(acc);
  }
  return out;
}

VmulKernel gen_vmul(const VmulSpec& spec, const VmulData& data, int rows, int cols) {
  check_vmul_spec(spec);
  if (spec.outputs > cols)
    throw ValidationError("VMUL: " + std::to_string(spec.outputs) + " outputs exceed " + std::to_string(cols) +
                          " columns");
  const auto l = layout_vmul(spec, rows, cols);
  if (l.footprint > rows)
    throw ValidationError("VMUL footprint of " + std::to_string(l.footprint) + " rows exceeds the array (" +
                          std::to_string(rows) + " rows)");
  if (data.matrix.size() != static_cast<std::size_t>(spec.outputs) ||
      data.vector.size() != static_cast<std::size_t>(spec.vector_length))
    throw ValidationError("VMUL data does not match the spec dimensions");
  const std::int64_t limit = std::int64_t{1} << spec.bit_width;
  const auto in_range = [&](std::int64_t v) { return v >= 0 && v < limit; };
  for (const auto& row : data.matrix) {
    if (row.size() != data.vector.size()) throw ValidationError("VMUL matrix is ragged");
    if (!std::all_of(row.begin(), row.end(), in_range)) throw ValidationError("VMUL matrix element out of range");
  }
  if (!std::all_of(data.vector.begin(), data.vector.end(), in_range))
    throw ValidationError("VMUL vector element out of range");

  VmulKernel k;
  k.layout = l;
  k.data = data;
  k.initial = ArrayState(rows, cols);
  const int w = spec.bit_width;
  for (int j = 0; j < spec.outputs; ++j) {
    for (int e = 0; e < spec.vector_length; ++e) {
      for (int b = 0; b < w; ++b) {
        k.initial.set(l.element_row(e, b), j, (data.matrix[j][e] >> b) & 1);
        k.initial.set(l.vector_row(e, b), j, (data.vector[e] >> b) & 1);
      }
    }
  }

  Emitter em{&k.program, nullptr, LaneSet::range(0, spec.outputs - 1)};
  for (int r : l.bank_a) em.clear_row(r);
  const std::vector<int>* cur = &l.bank_a;
  const std::vector<int>* other = &l.bank_b;
  std::vector<int> addend(static_cast<std::size_t>(l.acc_width));
  const CarryRows cr{l.carry_zero, l.carry_a, l.carry_b};
  for (int e = 0; e < spec.vector_length; ++e) {
    for (int b = 0; b < w; ++b) {
      for (int t = 0; t < w; ++t) em.gate(GateKind::AND2, {l.element_row(e, t), l.vector_row(e, b)}, l.terms[t]);
      for (int q = 0; q < l.acc_width; ++q) addend[q] = (q - b >= 0 && q - b < w) ? l.terms[q - b] : l.zero;
      ripple_add(em, spec.adder, l.scratch, *cur, addend, *other, cr);
      std::swap(cur, other);
    }
  }

  const int last = spec.outputs - 1;
  for (int e = 0; e < spec.vector_length; ++e)
    for (int b = 0; b < w; ++b) {
      k.placement.push_back({"W[:," + std::to_string(e) + "].b" + std::to_string(b), 0, l.element_row(e, b), 0, last});
      k.placement.push_back({"v[" + std::to_string(e) + "].b" + std::to_string(b), 0, l.vector_row(e, b), 0, last});
    }
  for (int q = 0; q < l.acc_width; ++q) {
    k.placement.push_back({"accA.b" + std::to_string(q), 0, l.bank_a[q], 0, last});
    k.placement.push_back({"accB.b" + std::to_string(q), 0, l.bank_b[q], 0, last});
  }
  return k;
}

std::vector<std::int64_t> decode_vmul(const VmulLayout& layout, const ArrayState& state) {
  const auto& bank = layout.result_in_a ? layout.bank_a : layout.bank_b;
  std::vector<std::int64_t> out(static_cast<std::size_t>(layout.spec.outputs), 0);
  for (int j = 0; j < layout.spec.outputs; ++j)
    for (int q = 0; q < layout.acc_width; ++q)
      if (state.get(bank[q], j)) out[j] |= std::int64_t{1} << q;
  return out;
}

// ---------------------------------------------------------------- Hopfield

void HopfieldInstance::validate() const {
  if (n < 1) throw ValidationError("Hopfield: n must be positive");
  const auto nn = static_cast<std::size_t>(n);
  if (weights.size() != nn * nn || bias.size() != nn || state.size() != nn)
    throw ValidationError("Hopfield: inconsistent instance dimensions");
  for (int i = 0; i < n; ++i) {
    if (w(i, i) != 0) throw ValidationError("Hopfield: W diagonal must be zero");
    for (int j = 0; j < i; ++j)
      if (w(i, j) != w(j, i))
        throw ValidationError("Hopfield: W is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
  }
}

std::int64_t HopfieldInstance::max_abs_weight() const {
  std::int64_t m = 0;
  for (auto x : weights) m = std::max(m, x < 0 ? -x : x);
  return m;
}

HopfieldInstance random_hopfield(int n, std::uint64_t seed, int magnitude_bits) {
  if (n < 1) throw ValidationError("Hopfield: n must be positive");
  std::mt19937_64 rng(seed);
  const std::int64_t wmax = (std::int64_t{1} << magnitude_bits) - 1;
  std::uniform_int_distribution<std::int64_t> uw(-wmax, wmax);
  std::uniform_int_distribution<std::int64_t> ub(-2 * wmax, 2 * wmax);
  std::uniform_int_distribution<int> bit(0, 1);
  HopfieldInstance h;
  h.n = n;
  h.weights.assign(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const auto v = uw(rng);
      h.weights[static_cast<std::size_t>(i) * n + j] = v;
      h.weights[static_cast<std::size_t>(j) * n + i] = v;
    }
  h.bias.resize(static_cast<std::size_t>(n));
  for (auto& b : h.bias) b = ub(rng);
  h.state.resize(static_cast<std::size_t>(n));
  for (auto& s : h.state) s = static_cast<std::uint8_t>(bit(rng));
  return h;
}

double hopfield_energy(const HopfieldInstance& inst, const std::vector<std::uint8_t>& bits) {
  double e = 0.0;
  for (int i = 0; i < inst.n; ++i) {
    const double vi = bits[i] ? 1.0 : -1.0;
    double h = 0.0;
    for (int j = 0; j < inst.n; ++j) h += static_cast<double>(inst.w(i, j)) * (bits[j] ? 1.0 : -1.0);
    e += -0.5 * vi * h + static_cast<double>(inst.bias[i]) * vi;
  }
  return e;
}

HopfieldTrace hopfield_oracle(const HopfieldInstance& inst, int max_sweeps) {
  inst.validate();
  HopfieldTrace t;
  auto v = inst.state;
  t.energy.push_back(hopfield_energy(inst, v));
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (int i = 0; i < inst.n; ++i) {
      std::int64_t h = -inst.bias[i];
      for (int j = 0; j < inst.n; ++j) h += inst.w(i, j) * (v[j] ? 1 : -1);
      if (h > 0 && !v[i]) {
        v[i] = 1;
        changed = true;
      } else if (h < 0 && v[i]) {
        v[i] = 0;
        changed = true;
      }
      t.states.push_back(v);
      t.energy.push_back(hopfield_energy(inst, v));
    }
    ++t.sweeps;
    if (!changed) {
      t.converged = true;
      break;
    }
  }
  t.fixed_point = v;
  return t;
}

HopfieldVariant hopfield_variant(KernelKind kind) {
  switch (kind) {
    case KernelKind::NNmixblk: return {AdderKind::Mix, UpdateMode::Bulk};
    case KernelKind::NNmixnoblk: return {AdderKind::Mix, UpdateMode::Gate};
    case KernelKind::NNmixrest: return {AdderKind::Mix, UpdateMode::Serial};
    case KernelKind::NNnorblk: return {AdderKind::Nor, UpdateMode::Bulk};
    case KernelKind::NNnornoblk: return {AdderKind::Nor, UpdateMode::Gate};
    case KernelKind::NNnorrest: return {AdderKind::Nor, UpdateMode::Serial};
    default: throw ValidationError("not a Hopfield kernel: " + std::string(to_string(kind)));
  }
}

Program flatten(const ArrayPlan& plan) {
  Program p;
  for (const auto& ph : plan.phases) p.insert(p.end(), ph.begin(), ph.end());
  return p;
}

namespace {

int magnitude_bits_for(const HopfieldInstance& inst) { return bit_length(inst.max_abs_weight()); }

/// Accumulator width from the global problem size, shared by every array.
int hopfield_acc_width(int n, int magnitude_bits) {
  return bit_length(static_cast<std::int64_t>(n) * ((std::int64_t{1} << magnitude_bits) - 1));
}

/// Element storage and dot-product scratch of one array.
struct ElementRows {
  std::vector<int> x, s;
  std::vector<std::vector<int>> mag;
  int zero = 0, carry_zero = 0, carry_a = 0, carry_b = 0, agree = 0;
  std::vector<int> partial, xnor, fa, bank_a, bank_b;
};

/// Threshold constants and decision scratch.
struct DecisionRows {
  std::vector<int> c_hi, c_lo;
  int ge_hi = 0, ge_lo = 0, tmp = 0, res = 0, inv = 0;
};

ElementRows alloc_elements(RowAllocator& a, int elements, int mbits, int acc, AdderKind adder) {
  ElementRows r;
  for (int k = 0; k < elements; ++k) {
    r.x.push_back(a.data());
    r.s.push_back(a.data());
    std::vector<int> m;
    for (int b = 0; b < mbits; ++b) m.push_back(a.data());
    r.mag.push_back(std::move(m));
  }
  r.zero = a.scratch();
  r.carry_zero = a.scratch();
  r.carry_a = a.scratch();
  r.carry_b = a.scratch();
  r.agree = a.scratch();
  r.partial = a.scratch(mbits);
  r.xnor = a.scratch(adder == AdderKind::Mix ? 2 : 3);
  r.fa = a.scratch(fa_scratch_rows(adder));
  r.bank_a = a.scratch(acc);
  r.bank_b = a.scratch(acc);
  return r;
}

DecisionRows alloc_decision(RowAllocator& a, int acc) {
  DecisionRows d;
  d.c_hi = a.scratch(acc + 1);
  d.c_lo = a.scratch(acc + 1);
  d.ge_hi = a.scratch();
  d.ge_lo = a.scratch();
  d.tmp = a.scratch();
  d.res = a.scratch();
  d.inv = a.scratch();
  return d;
}

/// A_j = sum_k |W_jk| [x_k == sign(W_jk)] over the array's elements, per column.
const std::vector<int>& emit_dot_product(Emitter& e, const ElementRows& r, AdderKind adder) {
  for (int row : r.bank_a) e.clear_row(row);
  const std::vector<int>* cur = &r.bank_a;
  const std::vector<int>* other = &r.bank_b;
  const int acc = static_cast<int>(r.bank_a.size());
  const int mbits = static_cast<int>(r.partial.size());
  std::vector<int> addend(static_cast<std::size_t>(acc));
  for (int q = 0; q < acc; ++q) addend[q] = q < mbits ? r.partial[q] : r.zero;
  const CarryRows cr{r.carry_zero, r.carry_a, r.carry_b};
  for (std::size_t k = 0; k < r.x.size(); ++k) {
    const int x = r.x[k], s = r.s[k];
    if (adder == AdderKind::Mix) {
      e.gate(GateKind::AND2, {x, s}, r.xnor[0]);
      e.gate(GateKind::NOR2, {x, s}, r.xnor[1]);
      e.gate(GateKind::OR2, {r.xnor[0], r.xnor[1]}, r.agree);
    } else {
      e.gate(GateKind::NOR2, {x, s}, r.xnor[0]);
      e.gate(GateKind::NOR2, {x, r.xnor[0]}, r.xnor[1]);
      e.gate(GateKind::NOR2, {s, r.xnor[0]}, r.xnor[2]);
      e.gate(GateKind::NOR2, {r.xnor[1], r.xnor[2]}, r.agree);
    }
    for (int b = 0; b < mbits; ++b) e.gate(GateKind::AND2, {r.agree, r.mag[k][b]}, r.partial[b]);
    ripple_add(e, adder, r.fa, *cur, addend, *other, cr);
    std::swap(cur, other);
  }
  return *cur;
}

/// res = (A >= T_hi) | ((A >= T_lo) & x); A >= T via the carry out of A + (2^m - T).
void emit_threshold(Emitter& e, AdderKind adder, const std::vector<int>& acc, const DecisionRows& d,
                    const std::vector<int>& fa, const CarryRows& cr, int state_row) {
  const int m = static_cast<int>(acc.size());
  for (const auto& [consts, ge] : {std::pair{&d.c_hi, d.ge_hi}, std::pair{&d.c_lo, d.ge_lo}}) {
    int c = cr.zero;
    for (int t = 0; t < m; ++t) {
      const int co = (c == cr.a) ? cr.b : cr.a;
      carry_only(e, adder, fa, acc[t], (*consts)[t], c, co);
      c = co;
    }
    e.gate(GateKind::OR2, {c, (*consts)[m]}, ge);
  }
  e.gate(GateKind::AND2, {d.ge_lo, state_row}, d.tmp);
  e.gate(GateKind::OR2, {d.ge_hi, d.tmp}, d.res);
}

struct Thresholds {
  std::int64_t c_hi;
  std::int64_t c_lo;
};

Thresholds threshold_constants(const HopfieldInstance& inst, int j, int acc) {
  std::int64_t s = 0;
  for (int k = 0; k < inst.n; ++k) s += std::abs(inst.w(j, k));
  const std::int64_t K = inst.bias[j] + s;
  const std::int64_t span = std::int64_t{1} << acc;
  const auto clamp = [&](std::int64_t t) { return std::clamp<std::int64_t>(t, 0, span); };
  const std::int64_t t_hi = clamp(floor_div(K, 2) + 1);
  const std::int64_t t_lo = clamp(-floor_div(-K, 2));
  return {span - t_hi, span - t_lo};
}

void store_constants(ArrayState& st, const DecisionRows& d, const HopfieldInstance& inst, int acc) {
  for (int j = 0; j < inst.n; ++j) {
    const auto t = threshold_constants(inst, j, acc);
    for (int q = 0; q <= acc; ++q) {
      st.set(d.c_hi[q], j, (t.c_hi >> q) & 1);
      st.set(d.c_lo[q], j, (t.c_lo >> q) & 1);
    }
  }
}

/// Loads elements [first, first + r.x.size()) of every neuron column.
void store_elements(ArrayState& st, const ElementRows& r, const HopfieldInstance& inst, int first) {
  for (std::size_t k = 0; k < r.x.size(); ++k) {
    const int e = first + static_cast<int>(k);
    for (int j = 0; j < inst.n; ++j) {
      const auto wv = inst.w(j, e);
      st.set(r.x[k], j, inst.state[e] != 0);
      st.set(r.s[k], j, wv > 0);
      const auto mag = wv < 0 ? -wv : wv;
      for (std::size_t b = 0; b < r.mag[k].size(); ++b) st.set(r.mag[k][b], j, (mag >> b) & 1);
    }
  }
}

void emit_update(Emitter& e, UpdateMode mode, int row, int i, int n, bool value, bool gate_seed_in_array,
                 int res_row, int inv_row) {
  switch (mode) {
    case UpdateMode::Bulk:
      e.push(BulkSet{Direction::Col, row, LaneSet::range(0, n - 1), value});
      break;
    case UpdateMode::Serial:
      for (int j = 0; j < n; ++j) e.push(SerialWrite{row, j, value});
      break;
    case UpdateMode::Gate: {
      // Seed !value at (row, i), copy it inverted along the row, then fix column i.
      if (gate_seed_in_array) {
        e.push(col_gate(GateKind::NOT, {res_row}, inv_row, LaneSet::single(i)));
        e.push(col_gate(GateKind::NOT, {res_row}, row, LaneSet::single(i)));
      } else {
        e.push(SerialWrite{row, i, !value});
      }
      for (int j = 0; j < n; ++j)
        if (j != i) e.push(row_gate(GateKind::NOT, {i}, j, LaneSet::single(row)));
      if (gate_seed_in_array)
        e.push(col_gate(GateKind::NOT, {inv_row}, row, LaneSet::single(i)));
      else
        e.push(SerialWrite{row, i, value});
      break;
    }
  }
}

std::uint8_t decode_bit(const ArrayState& st, int row, int n) {
  const bool v = st.get(row, 0);
  for (int j = 1; j < n; ++j)
    if (st.get(row, j) != v) throw ModelInconsistency("Hopfield state row " + std::to_string(row) + " is not uniform");
  return v ? 1 : 0;
}

void add_element_placement(std::vector<Placement>& out, const ElementRows& r, int array, int first, int n) {
  for (std::size_t k = 0; k < r.x.size(); ++k) {
    const auto e = std::to_string(first + static_cast<int>(k));
    out.push_back({"x[" + e + "]", array, r.x[k], 0, n - 1});
    out.push_back({"sign(W[:," + e + "])", array, r.s[k], 0, n - 1});
    for (std::size_t b = 0; b < r.mag[k].size(); ++b)
      out.push_back({"|W[:," + e + "]|.b" + std::to_string(b), array, r.mag[k][b], 0, n - 1});
  }
  for (std::size_t q = 0; q < r.bank_a.size(); ++q) {
    out.push_back({"accA.b" + std::to_string(q), array, r.bank_a[q], 0, n - 1});
    out.push_back({"accB.b" + std::to_string(q), array, r.bank_b[q], 0, n - 1});
  }
}

void add_decision_placement(std::vector<Placement>& out, const DecisionRows& d, int array, int n) {
  for (std::size_t q = 0; q < d.c_hi.size(); ++q) {
    out.push_back({"thr_hi.b" + std::to_string(q), array, d.c_hi[q], 0, n - 1});
    out.push_back({"thr_lo.b" + std::to_string(q), array, d.c_lo[q], 0, n - 1});
  }
  out.push_back({"result", array, d.res, 0, n - 1});
}

struct SweepTracker {
  int n;
  bool changed = false;
  bool converged = false;

  void record(int i, bool flip) {
    changed = changed || flip;
    if (i == n - 1) {
      if (!changed) converged = true;
      changed = false;
    }
  }
};

std::int64_t phase_cycles(const std::vector<ArrayPlan>& arrays, std::size_t first_phase) {
  std::int64_t total = 0;
  for (std::size_t p = first_phase; p < first_phase + kPhasesPerIteration; ++p) {
    std::int64_t len = 0;
    for (const auto& a : arrays) len = std::max(len, static_cast<std::int64_t>(a.phases[p].size()));
    total += len;
  }
  return total;
}

}  // namespace

int hopfield_footprint(int n, int magnitude_bits, AdderKind adder) {
  const int acc = hopfield_acc_width(n, magnitude_bits);
  RowAllocator a(kUnbounded);
  alloc_elements(a, n, magnitude_bits, acc, adder);
  alloc_decision(a, acc);
  return a.used();
}

int hopfield_max_neurons(int rows, int cols, int magnitude_bits, AdderKind adder) {
  int best = 0;
  for (int n = 1; n <= cols; ++n) {
    if (hopfield_footprint(n, magnitude_bits, adder) > rows) break;
    best = n;
  }
  return best;
}

HopfieldRun run_hopfield_single(const HopfieldInstance& inst, const HopfieldVariant& variant, int rows, int cols,
                                const HopfieldLimits& limits) {
  inst.validate();
  const int n = inst.n;
  const int mbits = magnitude_bits_for(inst);
  const int acc = hopfield_acc_width(n, mbits);
  if (n > cols) throw ValidationError("Hopfield: " + std::to_string(n) + " neurons exceed " + std::to_string(cols) + " columns");
  RowAllocator alloc(rows);
  const auto er = alloc_elements(alloc, n, mbits, acc, variant.adder);
  const auto dr = alloc_decision(alloc, acc);
  if (!alloc.fits())
    throw ValidationError("Hopfield footprint of " + std::to_string(alloc.used()) + " rows exceeds the array (" +
                          std::to_string(rows) + " rows)");

  HopfieldRun run;
  run.neurons = n;
  run.acc_width = acc;
  run.lanes_per_array = {n};
  ArrayState st(rows, cols);
  store_elements(st, er, inst, 0);
  store_constants(st, dr, inst, acc);
  run.arrays.push_back(ArrayPlan{"single", st, {}});
  add_element_placement(run.placement, er, 0, 0, n);
  add_decision_placement(run.placement, dr, 0, n);

  auto& plan = run.arrays.front();
  const CarryRows cr{er.carry_zero, er.carry_a, er.carry_b};
  SweepTracker sweep{n};
  std::int64_t cycles = 0;
  std::vector<std::uint8_t> state = inst.state;
  while (run.iterations < limits.max_iterations && !sweep.converged &&
         (limits.max_cycles <= 0 || cycles < limits.max_cycles)) {
    const int i = static_cast<int>(run.iterations % n);
    const std::size_t base = plan.phases.size();
    plan.phases.resize(base + kPhasesPerIteration);
    Emitter ec{&plan.phases[base + kCompute], &st, LaneSet::range(0, n - 1)};
    const auto& a = emit_dot_product(ec, er, variant.adder);
    Emitter et{&plan.phases[base + kThreshold], &st, LaneSet::single(i)};
    emit_threshold(et, variant.adder, a, dr, er.fa, cr, er.x[i]);
    const bool value = st.get(dr.res, i);
    Emitter eu{&plan.phases[base + kUpdate], &st, LaneSet::range(0, n - 1)};
    emit_update(eu, variant.update, er.x[i], i, n, value, true, dr.res, dr.inv);

    const bool flip = (state[i] != 0) != value;
    for (int k = 0; k < n; ++k) state[k] = decode_bit(st, er.x[k], n);
    run.states.push_back(state);
    sweep.record(i, flip);
    cycles += phase_cycles(run.arrays, base);
    ++run.iterations;
  }
  run.converged = sweep.converged;
  run.final_arrays = {st};
  return run;
}

HopfieldRun run_hopfield_multi(const HopfieldInstance& inst, const HopfieldVariant& variant, int rows, int cols,
                               int column_arrays, const HopfieldLimits& limits) {
  inst.validate();
  const int n = inst.n;
  if (column_arrays < 1) throw ValidationError("Hopfield: need at least one column array");
  if (n > cols) throw ValidationError("Hopfield: " + std::to_string(n) + " neurons exceed " + std::to_string(cols) + " columns");
  if (column_arrays > n) throw ValidationError("Hopfield: more column arrays than neurons");
  const int mbits = magnitude_bits_for(inst);
  const int acc = hopfield_acc_width(n, mbits);

  HopfieldRun run;
  run.neurons = n;
  run.acc_width = acc;

  std::vector<int> first(static_cast<std::size_t>(column_arrays) + 1, 0);
  for (int a = 0; a < column_arrays; ++a) first[a + 1] = first[a] + n / column_arrays + (a < n % column_arrays);
  std::vector<ElementRows> er;
  std::vector<ArrayState> st;
  for (int a = 0; a < column_arrays; ++a) {
    RowAllocator alloc(rows);
    er.push_back(alloc_elements(alloc, first[a + 1] - first[a], mbits, acc, variant.adder));
    if (!alloc.fits())
      throw ValidationError("Hopfield column array footprint of " + std::to_string(alloc.used()) +
                            " rows exceeds the array (" + std::to_string(rows) + " rows)");
    st.emplace_back(rows, cols);
    store_elements(st.back(), er.back(), inst, first[a]);
    add_element_placement(run.placement, er.back(), a, first[a], n);
    run.lanes_per_array.push_back(n);
  }

  // Update array: partial sums, combine banks, constants and a state row.
  RowAllocator ua(rows);
  std::vector<std::vector<int>> psum;
  for (int a = 0; a < column_arrays; ++a) {
    std::vector<int> p;
    for (int q = 0; q < acc; ++q) p.push_back(ua.data());
    psum.push_back(std::move(p));
  }
  const int xs = ua.data();
  const int ucz = ua.scratch();
  const int uca = ua.scratch();
  const int ucb = ua.scratch();
  const auto ufa = ua.scratch(fa_scratch_rows(variant.adder));
  const auto ubank_a = ua.scratch(acc);
  const auto ubank_b = ua.scratch(acc);
  const auto dr = alloc_decision(ua, acc);
  if (!ua.fits()) throw ValidationError("Hopfield update array footprint exceeds the array");
  const int U = column_arrays;
  st.emplace_back(rows, cols);
  for (int j = 0; j < n; ++j) st[U].set(xs, j, inst.state[j] != 0);
  store_constants(st[U], dr, inst, acc);
  add_decision_placement(run.placement, dr, U, n);
  run.placement.push_back({"state", U, xs, 0, n - 1});
  run.lanes_per_array.push_back(1);

  for (int a = 0; a <= U; ++a)
    run.arrays.push_back(ArrayPlan{a < U ? "column" + std::to_string(a) : "update", st[a], {}});

  const CarryRows ucr{ucz, uca, ucb};
  SweepTracker sweep{n};
  std::int64_t cycles = 0;
  std::vector<std::uint8_t> state = inst.state;
  while (run.iterations < limits.max_iterations && !sweep.converged &&
         (limits.max_cycles <= 0 || cycles < limits.max_cycles)) {
    const int i = static_cast<int>(run.iterations % n);
    const std::size_t base = run.arrays.front().phases.size();
    for (auto& p : run.arrays) p.phases.resize(base + kPhasesPerIteration);
    auto& uph = run.arrays[U].phases;

    std::vector<const std::vector<int>*> partial(static_cast<std::size_t>(U));
    for (int a = 0; a < U; ++a) {
      Emitter ec{&run.arrays[a].phases[base + kCompute], &st[a], LaneSet::range(0, n - 1)};
      partial[a] = &emit_dot_product(ec, er[a], variant.adder);
    }
    // Controller moves each partial sum of neuron i into the update array.
    Emitter ex{&uph[base + kTransfer], &st[U], LaneSet::single(i)};
    for (int a = 0; a < U; ++a)
      for (int q = 0; q < acc; ++q) ex.push(SerialWrite{psum[a][q], i, st[a].get((*partial[a])[q], i)});

    Emitter et{&uph[base + kThreshold], &st[U], LaneSet::single(i)};
    const std::vector<int>* sum = &psum[0];
    const std::vector<int>* dst = &ubank_a;
    for (int a = 1; a < U; ++a) {
      ripple_add(et, variant.adder, ufa, *sum, psum[a], *dst, ucr);
      sum = dst;
      dst = (dst == &ubank_a) ? &ubank_b : &ubank_a;
    }
    emit_threshold(et, variant.adder, *sum, dr, ufa, ucr, xs);
    et.gate(GateKind::NOT, {dr.res}, dr.inv);
    et.gate(GateKind::NOT, {dr.inv}, xs);
    const bool value = st[U].get(xs, i);

    int owner = 0;
    while (i >= first[owner + 1]) ++owner;
    const int row = er[owner].x[i - first[owner]];
    Emitter eu{&run.arrays[owner].phases[base + kUpdate], &st[owner], LaneSet::range(0, n - 1)};
    emit_update(eu, variant.update, row, i, n, value, false, 0, 0);

    const bool flip = (state[i] != 0) != value;
    for (int a = 0; a < U; ++a)
      for (std::size_t k = 0; k < er[a].x.size(); ++k)
        state[first[a] + static_cast<int>(k)] = decode_bit(st[a], er[a].x[k], n);
    run.states.push_back(state);
    sweep.record(i, flip);
    cycles += phase_cycles(run.arrays, base);
    ++run.iterations;
  }
  run.converged = sweep.converged;
  run.final_arrays = std::move(st);
  return run;
}

// ---------------------------------------------------------------- from config

namespace {

nlohmann::json placement_json(const std::vector<Placement>& placement) {
  auto arr = nlohmann::json::array();
  for (const auto& p : placement)
    arr.push_back({{"operand", p.operand}, {"array", p.array}, {"row", p.row}, {"cols", {p.first_col, p.last_col}}});
  return arr;
}

}  // namespace

Workload build_workload(const SimulationConfig& config) {
  config.validate();
  Workload w;
  w.kind = config.kernel.kind;
  const int rows = config.array_rows;
  const int cols = config.array_cols;
  nlohmann::json data;
  data["kernel"] = std::string(to_string(w.kind));

  if (is_inv(w.kind)) {
    auto k = gen_inv(rows, cols, config.utilization, w.kind == KernelKind::INVfx);
    w.program = std::move(k.program);
    w.initial = std::move(k.initial);
    w.lanes = k.lanes;
    w.placement = std::move(k.placement);
    w.phase_instructions = {static_cast<std::int64_t>(w.program.size())};
  } else if (is_vmul(w.kind)) {
    VmulSpec spec;
    spec.adder = uses_nor_adder(w.kind) ? AdderKind::Nor : AdderKind::Mix;
    spec.bit_width = config.kernel.bit_width;
    spec.outputs = active_lane_count(config.utilization, cols);
    spec.vector_length = config.kernel.vector_length > 0
                             ? config.kernel.vector_length
                             : vmul_max_vector_length(rows, spec.bit_width, spec.adder);
    if (spec.vector_length < 1) throw ValidationError("VMUL: array too small for a single element");
    const auto d = random_vmul_data(spec, config.kernel.seed);
    auto k = gen_vmul(spec, d, rows, cols);
    w.program = std::move(k.program);
    w.initial = std::move(k.initial);
    w.lanes = spec.outputs;
    w.placement = std::move(k.placement);
    w.phase_instructions = {static_cast<std::int64_t>(w.program.size())};
    const auto expected = vmul_oracle(d.matrix, d.vector);
    ArrayState replay = w.initial;
    for (const auto& ins : w.program) execute_logic(replay, ins);
    w.oracle_match = decode_vmul(k.layout, replay) == expected;
    data["matrix"] = d.matrix;
    data["vector"] = d.vector;
    data["expected"] = expected;
    data["bit_width"] = spec.bit_width;
    data["accumulator_bits"] = k.layout.acc_width;
  } else {
    const auto variant = hopfield_variant(w.kind);
    int n = config.kernel.neurons;
    if (n <= 0)
      n = std::min(active_lane_count(config.utilization, cols), hopfield_max_neurons(rows, cols, 1, variant.adder));
    if (n < 1) throw ValidationError("Hopfield: array too small for a single neuron");
    const auto inst = random_hopfield(n, config.kernel.seed);
    HopfieldLimits lim;
    lim.max_cycles = active_cycles_for(config.sim_time, config.technology.t_clk);
    auto r = run_hopfield_single(inst, variant, rows, cols, lim);
    const auto oracle = hopfield_oracle(inst);
    const std::size_t k = std::min(r.states.size(), oracle.states.size());
    w.oracle_match = std::equal(r.states.begin(), r.states.begin() + static_cast<std::ptrdiff_t>(k),
                                oracle.states.begin()) &&
                     (!r.converged || r.states.size() == oracle.states.size());
    w.program = flatten(r.arrays.front());
    w.initial = r.arrays.front().initial;
    w.lanes = n;
    w.placement = std::move(r.placement);
    w.phase_instructions.assign(kPhasesPerIteration, 0);
    for (std::size_t p = 0; p < r.arrays.front().phases.size(); ++p)
      w.phase_instructions[p % kPhasesPerIteration] += static_cast<std::int64_t>(r.arrays.front().phases[p].size());
    std::vector<std::vector<std::int64_t>> wm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      wm[i].assign(inst.weights.begin() + static_cast<std::ptrdiff_t>(i) * n,
                   inst.weights.begin() + static_cast<std::ptrdiff_t>(i + 1) * n);
    data["W"] = wm;
    data["b"] = inst.bias;
    data["V0"] = inst.state;
    data["iterations_recorded"] = r.iterations;
    data["converged"] = r.converged;
    data["oracle_fixed_point"] = oracle.fixed_point;
    data["accumulator_bits"] = r.acc_width;
  }
  w.realized_utilization = static_cast<double>(w.lanes) / cols;
  data["active_lanes"] = w.lanes;
  data["realized_utilization"] = w.realized_utilization;
  data["placement"] = placement_json(w.placement);
  data["phase_instructions"] = w.phase_instructions;
  w.data_json = data.dump(2);
  return w;
}

}  // namespace cimtherm
