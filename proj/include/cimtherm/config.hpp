#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "cimtherm/tech_params.hpp"

namespace cimtherm {

enum class KernelKind {
  INVfx,
  INVshft,
  VMULmix,
  VMULnor,
  NNmixblk,
  NNmixnoblk,
  NNmixrest,
  NNnorblk,
  NNnornoblk,
  NNnorrest,
};

std::string_view to_string(KernelKind kind);
KernelKind kernel_kind_from_string(std::string_view text);

bool is_inv(KernelKind kind);
bool is_vmul(KernelKind kind);
bool is_hopfield(KernelKind kind);
/// True for the NOR-only full-adder variants.
bool uses_nor_adder(KernelKind kind);

struct KernelParams {
  KernelKind kind = KernelKind::INVfx;
  int bit_width = 4;         // VMUL element width
  int vector_length = 0;     // VMUL matrix rows; 0 picks the largest that fits
  int neurons = 0;           // Hopfield size; 0 derives it from utilization
  std::uint64_t seed = 42;

  bool operator==(const KernelParams&) const = default;
};

struct SimulationConfig {
  TechnologyParams technology = builtin_technology(TechKind::STT);
  ThermalStack stack = builtin_stack();
  int array_rows = 256;
  int array_cols = 32;
  KernelParams kernel;
  double utilization = 1.0;
  double duty_cycle = 1.0;
  double sim_time = 1e-3;
  int coalesce_factor = 1;
  bool allow_short_sim = false;

  void validate() const;

  bool operator==(const SimulationConfig&) const = default;
};

/// Parses the sectioned key-value format and validates the result.
/// Throws ParseError for malformed text or unknown keys, ValidationError for
/// invariant violations.
SimulationConfig load_config(std::string_view text);
SimulationConfig load_config_file(const std::string& path);

/// Emits every field explicitly; load_config(serialize_config(c)) == c.
std::string serialize_config(const SimulationConfig& config);

/// ceil(utilization * lanes), robust to representation error, at least 1.
int active_lane_count(double utilization, int lanes);

/// Named array sizes: sm = 256x32, md = 512x512, lg = 1024x1024; also "RxC".
std::pair<int, int> parse_array_size(std::string_view text);

}  // namespace cimtherm
