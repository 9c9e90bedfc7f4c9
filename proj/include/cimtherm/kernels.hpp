#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cimtherm/array_sim.hpp"
#include "cimtherm/config.hpp"
#include "cimtherm/instruction.hpp"

namespace cimtherm {

enum class AdderKind { Mix, Nor };

/// A named operand row, occupying columns [first_col, last_col] of one array.
struct Placement {
  std::string operand;
  int array = 0;
  int row = 0;
  int first_col = 0;
  int last_col = 0;
};

// ---------------------------------------------------------------- INV

struct InvKernel {
  Program program;
  ArrayState initial;
  int lanes = 0;
  std::vector<Placement> placement;
};

/// Column-parallel NOT over the first ceil(utilization * cols) columns.
/// fixed: row 0 -> row 1 every cycle. Otherwise operand rows rotate by one
/// per cycle so the program spans `rows` instructions.
InvKernel gen_inv(int rows, int cols, double utilization, bool fixed);

// ---------------------------------------------------------------- VMUL

struct VmulSpec {
  int outputs = 1;        // matrix rows, one per array column
  int vector_length = 1;  // N
  int bit_width = 4;      // w, unsigned
  AdderKind adder = AdderKind::Mix;
};

struct VmulData {
  std::vector<std::vector<std::int64_t>> matrix;  // outputs x N
  std::vector<std::int64_t> vector;               // N
};

/// Row map of a VMUL kernel. Element k of output j lives in column j.
struct VmulLayout {
  VmulSpec spec;
  int rows = 0;
  int cols = 0;
  int acc_width = 0;
  int element_row(int k, int bit) const { return k * spec.bit_width + bit; }
  int vector_row(int k, int bit) const { return (spec.vector_length + k) * spec.bit_width + bit; }
  int zero = 0, carry_zero = 0, carry_a = 0, carry_b = 0;
  std::vector<int> terms;
  std::vector<int> bank_a, bank_b;
  std::vector<int> scratch;
  bool result_in_a = true;
  int footprint = 0;  // rows used
};

struct VmulKernel {
  Program program;
  ArrayState initial;
  VmulLayout layout;
  VmulData data;
  std::vector<Placement> placement;
};

/// Rows needed for a VMUL instance (operands + scratch + accumulators).
int vmul_footprint(const VmulSpec& spec);
/// Largest vector length that fits `rows`, or 0.
int vmul_max_vector_length(int rows, int bit_width, AdderKind adder);

VmulData random_vmul_data(const VmulSpec& spec, std::uint64_t seed);
VmulKernel gen_vmul(const VmulSpec& spec, const VmulData& data, int rows, int cols);
std::vector<std::int64_t> decode_vmul(const VmulLayout& layout, const ArrayState& state);
std::vector<std::int64_t> vmul_oracle(const std::vector<std::vector<std::int64_t>>& matrix,
                                      const std::vector<std::int64_t>& vector);

// ---------------------------------------------------------------- Hopfield

/// Bipolar network; state bit 1 is +1, bit 0 is -1.
struct HopfieldInstance {
  int n = 0;
  std::vector<std::int64_t> weights;  // n*n row-major, symmetric, zero diagonal
  std::vector<std::int64_t> bias;     // threshold per neuron
  std::vector<std::uint8_t> state;    // initial bits

  std::int64_t w(int i, int j) const { return weights[static_cast<std::size_t>(i) * n + j]; }
  /// Throws ValidationError unless W is symmetric with zero diagonal.
  void validate() const;
  std::int64_t max_abs_weight() const;
};

/// Weights uniform in [-(2^bits-1), 2^bits-1], bias in twice that range.
HopfieldInstance random_hopfield(int n, std::uint64_t seed, int magnitude_bits = 1);

/// E = -1/2 V'WV + b'V.
double hopfield_energy(const HopfieldInstance& inst, const std::vector<std::uint8_t>& bits);

struct HopfieldTrace {
  std::vector<std::vector<std::uint8_t>> states;  // after each single-neuron update
  std::vector<double> energy;                     // energy[0] initial, then per update
  std::vector<std::uint8_t> fixed_point;
  int sweeps = 0;
  bool converged = false;
};

/// Ascending-order asynchronous updates until a sweep changes nothing.
/// Ties keep the current state.
HopfieldTrace hopfield_oracle(const HopfieldInstance& inst, int max_sweeps = 1000);

enum class UpdateMode { Bulk, Gate, Serial };

struct HopfieldVariant {
  AdderKind adder = AdderKind::Mix;
  UpdateMode update = UpdateMode::Bulk;
};

HopfieldVariant hopfield_variant(KernelKind kind);

/// Phase indices within one iteration.
enum HopfieldPhase { kCompute = 0, kTransfer = 1, kThreshold = 2, kUpdate = 3, kPhasesPerIteration = 4 };

struct HopfieldLimits {
  std::int64_t max_iterations = 1'000'000;
  std::int64_t max_cycles = 0;  // stop after the iteration crossing this many cycles; 0 = none
};

/// Recorded execution of the in-array Hopfield driver. Each array plan has
/// kPhasesPerIteration phases per recorded iteration.
struct HopfieldRun {
  std::vector<ArrayPlan> arrays;
  std::vector<std::vector<std::uint8_t>> states;  // after each iteration, decoded from cells
  std::vector<ArrayState> final_arrays;
  std::int64_t iterations = 0;
  bool converged = false;
  int neurons = 0;
  int acc_width = 0;
  std::vector<int> lanes_per_array;  // active columns in each array
  std::vector<Placement> placement;
};

/// Rows a single-array mapping of n neurons needs.
int hopfield_footprint(int n, int magnitude_bits, AdderKind adder);
/// Largest n with hopfield_footprint(n) <= rows and n <= cols.
int hopfield_max_neurons(int rows, int cols, int magnitude_bits, AdderKind adder);

HopfieldRun run_hopfield_single(const HopfieldInstance& inst, const HopfieldVariant& variant, int rows,
                                int cols, const HopfieldLimits& limits = {});

/// `column_arrays` arrays of rows x cols split the elements; one more array
/// of the same size combines partial sums, thresholds and drives updates.
HopfieldRun run_hopfield_multi(const HopfieldInstance& inst, const HopfieldVariant& variant, int rows,
                               int cols, int column_arrays, const HopfieldLimits& limits = {});

/// Concatenates all phases of one array into a single program.
Program flatten(const ArrayPlan& plan);

// ---------------------------------------------------------------- from config

/// Single-array workload for a configuration: program, initial state and
/// realized lane count.
struct Workload {
  KernelKind kind = KernelKind::INVfx;
  Program program;
  ArrayState initial;
  int lanes = 0;
  double realized_utilization = 0.0;
  std::vector<Placement> placement;
  std::vector<std::int64_t> phase_instructions;  // per phase kind (Hopfield) or {program size}
  std::string data_json;                          // kernel data dump
  /// VMUL: one logic-only pass decodes to the oracle product. Hopfield: the
  /// recorded states follow the oracle update for update. Empty for INV.
  std::optional<bool> oracle_match;
};

Workload build_workload(const SimulationConfig& config);

}  // namespace cimtherm
