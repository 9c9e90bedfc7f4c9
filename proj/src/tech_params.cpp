#include "cimtherm/tech_params.hpp"

#include <cctype>
#include <string>

#include "cimtherm/error.hpp"

namespace cimtherm {

std::string_view to_string(TechKind kind) {
  return kind == TechKind::STT ? "STT" : "SHE";
}

TechKind tech_kind_from_string(std::string_view text) {
  std::string upper(text);
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (upper == "STT") return TechKind::STT;
  if (upper == "SHE") return TechKind::SHE;
  throw ValidationError("unknown technology '" + std::string(text) + "' (expected STT or SHE)");
}

void TechnologyParams::validate() const {
  if (!(r_p > 0.0)) throw ValidationError("technology: r_p must be > 0");
  if (!(r_ap > r_p)) throw ValidationError("technology: r_ap must exceed r_p");
  if (!(i_crit > 0.0)) throw ValidationError("technology: i_crit must be > 0");
  if (!(t_sw > 0.0)) throw ValidationError("technology: t_sw must be > 0");
  if (!(t_clk >= 2.0 * t_sw))
    throw ValidationError("technology: t_clk must be >= 2*t_sw (cycle holds preset and switch phases)");
  if (!(cell_dx > 0.0 && cell_dy > 0.0 && cell_dz > 0.0))
    throw ValidationError("technology: cell dimensions must be > 0");
  if (kind == TechKind::SHE) {
    if (!r_she || !(*r_she > 0.0)) throw ValidationError("technology: SHE requires r_she > 0");
  } else if (r_she) {
    throw ValidationError("technology: r_she is only valid for SHE");
  }
}

void ThermalStack::validate() const {
  if (!(bulk_si_dz > 0.0 && tim_dz > 0.0 && cu_dz > 0.0))
    throw ValidationError("thermal: layer thicknesses must be > 0");
  if (!(k_si > 0.0 && k_tim > 0.0 && k_cu > 0.0))
    throw ValidationError("thermal: conductivities must be > 0");
  if (!(r_convective > 0.0)) throw ValidationError("thermal: r_convective must be > 0");
}

TechnologyParams builtin_technology(TechKind kind) {
  TechnologyParams t;
  t.kind = kind;
  t.t_sw = 1e-9;
  t.t_clk = 3e-9;
  t.cell_dx = 0.12e-6;
  t.cell_dz = 0.12e-6;
  if (kind == TechKind::STT) {
    t.r_p = 3.15e3;
    t.r_ap = 7.34e3;
    t.i_crit = 50e-6;
    t.cell_dy = 0.12e-6;
  } else {
    t.r_p = 253.97e3;
    t.r_ap = 507.94e3;
    t.r_she = 64e3;
    t.i_crit = 3e-6;
    t.cell_dy = 0.24e-6;  // doubled cell area
  }
  return t;
}

ThermalStack builtin_stack() {
  ThermalStack s;
  s.bulk_si_dz = 500e-6;
  s.tim_dz = 100e-6;
  s.cu_dz = 5e-3;
  s.k_si = 100.0;
  s.k_tim = 3.0;
  s.k_cu = 400.0;
  s.r_convective = 1.5;
  s.ambient_c = 25.0;
  return s;
}

}  // namespace cimtherm
