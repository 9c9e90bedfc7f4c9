#include <random>

#include "cimtherm/config.hpp"
#include "cimtherm/error.hpp"
#include "cimtherm/tech_params.hpp"
#include "doctest.h"

using namespace cimtherm;

TEST_CASE("builtin STT constants") {
  const auto t = builtin_technology(TechKind::STT);
  CHECK(t.r_p == 3.15e3);
  CHECK(t.r_ap == 7.34e3);
  CHECK_FALSE(t.r_she.has_value());
  CHECK(t.i_crit == 50e-6);
  CHECK(t.t_sw == 1e-9);
  CHECK(t.t_clk == 3e-9);
  CHECK(t.cell_dx == 0.12e-6);
  CHECK(t.cell_dy == 0.12e-6);
  CHECK(t.cell_dz == 0.12e-6);
  CHECK(t.cell_area() == doctest::Approx(0.0144e-12).epsilon(1e-12));
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("builtin SHE constants") {
  const auto t = builtin_technology(TechKind::SHE);
  CHECK(t.r_p == 253.97e3);
  CHECK(t.r_ap == 507.94e3);
  REQUIRE(t.r_she.has_value());
  CHECK(*t.r_she == 64e3);
  CHECK(t.i_crit == 3e-6);
  CHECK(t.cell_dy == 0.24e-6);
  CHECK(t.cell_dx == 0.12e-6);
  CHECK(t.cell_area() == doctest::Approx(0.0288e-12).epsilon(1e-12));
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("builtin thermal stack") {
  const auto s = builtin_stack();
  CHECK(s.bulk_si_dz == 500e-6);
  CHECK(s.tim_dz == 100e-6);
  CHECK(s.cu_dz == 5e-3);
  CHECK(s.k_si == 100.0);
  CHECK(s.k_tim == 3.0);
  CHECK(s.k_cu == 400.0);
  CHECK(s.r_convective == 1.5);
  CHECK(s.ambient_c == 25.0);
}

TEST_CASE("technology invariants") {
  auto t = builtin_technology(TechKind::STT);
  t.r_ap = t.r_p;
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t = builtin_technology(TechKind::STT);
  t.r_she = 1e3;
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t = builtin_technology(TechKind::SHE);
  t.r_she.reset();
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t = builtin_technology(TechKind::STT);
  t.t_clk = 1.5e-9;
  CHECK_THROWS_AS(t.validate(), ValidationError);
}

TEST_CASE("minimal config applies defaults") {
  const auto cfg = load_config(R"(
[technology]
kind = STT
[kernel]
name = INVfx
[array]
size = 256x32
)");
  CHECK(cfg.array_rows == 256);
  CHECK(cfg.array_cols == 32);
  CHECK(cfg.sim_time == 1e-3);
  CHECK(cfg.utilization == 1.0);
  CHECK(cfg.duty_cycle == 1.0);
  CHECK(cfg.coalesce_factor == 1);
  CHECK(cfg.kernel.kind == KernelKind::INVfx);
  CHECK(cfg.technology == builtin_technology(TechKind::STT));
  CHECK(cfg.stack == builtin_stack());
}

TEST_CASE("config validation errors") {
  const std::string base = "[technology]\nkind = STT\n[kernel]\nname = INVfx\n[array]\nsize = sm\n";
  CHECK_THROWS_AS(load_config(base + "[run]\nutilization = 0\n"), ValidationError);
  CHECK_THROWS_AS(load_config(base + "[run]\nduty_cycle = 1.5\n"), ValidationError);
  CHECK_THROWS_AS(load_config("[technology]\nkind = STT\nt_clk_s = 1e-9\nt_sw_s = 1e-9\n"
                              "[kernel]\nname = INVfx\n[array]\nsize = sm\n"),
                  ValidationError);
  CHECK_THROWS_AS(load_config(base + "[run]\nsim_time_s = 1e-4\n"), ValidationError);
  CHECK_NOTHROW(load_config(base + "[run]\nsim_time_s = 1e-4\nallow_short_sim = true\n"));
  CHECK_THROWS_AS(load_config(base + "[thermal]\ncoalesce = 3\n"), ValidationError);
}

TEST_CASE("config parse errors") {
  const std::string base = "[technology]\nkind = STT\n[kernel]\nname = INVfx\n[array]\nsize = sm\n";
  CHECK_THROWS_AS(load_config(base + "[run]\nbogus = 1\n"), ParseError);
  CHECK_THROWS_AS(load_config(base + "[nope]\n"), ParseError);
  CHECK_THROWS_AS(load_config(base + "[run]\nutilization = abc\n"), ParseError);
  CHECK_THROWS_AS(load_config(base + "[run]\nutilization\n"), ParseError);
  CHECK_THROWS_AS(load_config(base + "[run]\nutilization = 0.5\nutilization = 0.5\n"), ParseError);
}

TEST_CASE("active lane count rounds up") {
  CHECK(active_lane_count(0.25, 32) == 8);
  CHECK(active_lane_count(1.0, 32) == 32);
  CHECK(active_lane_count(0.3, 10) == 3);
  CHECK(active_lane_count(0.01, 32) == 1);
}

TEST_CASE("config round-trips through its text form") {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const KernelKind kinds[] = {KernelKind::INVfx,   KernelKind::INVshft,    KernelKind::VMULmix,
                              KernelKind::VMULnor, KernelKind::NNmixblk,   KernelKind::NNnorrest};
  for (int trial = 0; trial < 200; ++trial) {
    SimulationConfig c;
    c.technology = builtin_technology(u(rng) < 0.5 ? TechKind::STT : TechKind::SHE);
    c.technology.r_p *= 0.5 + u(rng);
    c.technology.r_ap = c.technology.r_p * (1.5 + u(rng));
    c.technology.i_crit *= 0.5 + u(rng);
    c.stack.k_tim = 1.0 + 10.0 * u(rng);
    c.stack.ambient_c = 20.0 + 10.0 * u(rng);
    const int sizes[][2] = {{256, 32}, {512, 512}, {64, 48}};
    const auto& sz = sizes[trial % 3];
    c.array_rows = sz[0];
    c.array_cols = sz[1];
    c.coalesce_factor = (trial % 2) ? 1 : 4 * (c.array_cols % 4 == 0) + (c.array_cols % 4 != 0);
    if (c.array_rows % c.coalesce_factor || c.array_cols % c.coalesce_factor) c.coalesce_factor = 1;
    c.kernel.kind = kinds[trial % 6];
    c.kernel.bit_width = 1 + trial % 8;
    c.kernel.seed = rng();
    c.kernel.seed >>= 2;
    c.utilization = 0.01 + 0.99 * u(rng);
    c.duty_cycle = 0.01 + 0.99 * u(rng);
    c.sim_time = 1e-3 * (1.0 + u(rng));
    REQUIRE_NOTHROW(c.validate());
    const auto back = load_config(serialize_config(c));
    CHECK(back == c);
  }
}
