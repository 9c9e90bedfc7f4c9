#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace cimtherm {

// All quantities are SI: ohm, ampere, second, metre, watt, kelvin.

enum class TechKind { STT, SHE };

std::string_view to_string(TechKind kind);
TechKind tech_kind_from_string(std::string_view text);

struct TechnologyParams {
  TechKind kind = TechKind::STT;
  double r_p = 0.0;                 // parallel (logic 0) resistance
  double r_ap = 0.0;                // anti-parallel (logic 1) resistance
  std::optional<double> r_she;      // Hall channel, SHE only
  double i_crit = 0.0;              // switching threshold current
  double t_sw = 0.0;                // switching pulse length
  double t_clk = 0.0;               // clock period (preset + switch must fit)
  double cell_dx = 0.0;
  double cell_dy = 0.0;
  double cell_dz = 0.0;

  double cell_area() const { return cell_dx * cell_dy; }

  /// Throws ValidationError naming the first violated invariant.
  void validate() const;

  bool operator==(const TechnologyParams&) const = default;
};

/// Vertical heat path below the array: die, TIM, copper base, heatsink.
struct ThermalStack {
  double bulk_si_dz = 0.0;
  double tim_dz = 0.0;
  double cu_dz = 0.0;
  double k_si = 0.0;
  double k_tim = 0.0;
  double k_cu = 0.0;
  double r_convective = 0.0;  // lumped heatsink-to-air, K/W
  double ambient_c = 25.0;    // degrees Celsius

  void validate() const;

  bool operator==(const ThermalStack&) const = default;
};

TechnologyParams builtin_technology(TechKind kind);
ThermalStack builtin_stack();

}  // namespace cimtherm
