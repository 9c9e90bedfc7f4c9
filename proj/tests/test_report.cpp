#include <filesystem>
#include <fstream>
#include <sstream>

#include "cimtherm/error.hpp"
#include "cimtherm/report.hpp"
#include "doctest.h"

using namespace cimtherm;

namespace {

SimulationConfig inv(double util = 1.0, TechKind tech = TechKind::STT) {
  SimulationConfig c;
  c.technology = builtin_technology(tech);
  c.utilization = util;
  c.allow_short_sim = true;
  return c;
}

std::vector<std::string> header_fields(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream line(csv.substr(0, csv.find('\n')));
  for (std::string f; std::getline(line, f, ',');) out.push_back(f);
  return out;
}

}  // namespace

TEST_CASE("fnv1a reference vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("simulate INVfx sm populates the report") {
  const auto out = simulate(inv());
  const auto& r = out.report;
  CHECK(r.lanes == 32);
  CHECK(r.power_density > 0.0);
  CHECK(r.t_max > r.t_min);
  CHECK(r.rise_max == doctest::Approx(r.t_max - 25.0));
  CHECK(r.max_duty_cycle == doctest::Approx(std::min(1.0, 100.0 / r.rise_max)));
  CHECK(r.relative_residual <= 1e-8);
  CHECK(std::abs(r.energy_balance) <= 1e-6);
  CHECK_FALSE(r.oracle_match.has_value());
  const auto j = to_json(r);
  CHECK(j.at("power_density_W_cm2").get<double>() == r.power_density);
  CHECK(j.at("t_max_C").get<double>() == r.t_max);
  CHECK(j.contains("generated_at"));
  CHECK(j.at("model_version") == std::string(kModelVersion));
  CHECK(j.at("config_hash").get<std::string>().size() == 16);
  CHECK(j.at("utilization").at("basis").get<std::string>().find("columns") != std::string::npos);
}

TEST_CASE("reports are deterministic apart from the timestamp") {
  auto c = inv(0.5);
  c.kernel.kind = KernelKind::VMULnor;
  c.sim_time = 1e-4;
  const auto a = to_json(simulate(c).report, false).dump();
  const auto b = to_json(simulate(c).report, false).dump();
  CHECK(a == b);
  c.kernel.seed += 1;
  CHECK(to_json(simulate(c).report, false).dump() != a);
}

TEST_CASE("SHE runs an order of magnitude cooler") {
  const double stt = simulate(inv()).report.rise_max;
  const double she = simulate(inv(1.0, TechKind::SHE)).report.rise_max;
  CHECK(stt / she >= 5.0);
}

TEST_CASE("VMUL and NN reports carry an oracle match") {
  auto c = inv();
  c.sim_time = 1e-4;
  for (auto k : {KernelKind::VMULmix, KernelKind::VMULnor, KernelKind::NNmixblk, KernelKind::NNnorrest}) {
    CAPTURE(to_string(k));
    c.kernel.kind = k;
    const auto r = simulate(c).report;
    REQUIRE(r.oracle_match.has_value());
    CHECK(*r.oracle_match);
  }
}

TEST_CASE("errors keep their type and name the stage") {
  auto c = inv();
  c.array_rows = 8;
  c.array_cols = 4;
  c.kernel.kind = KernelKind::VMULmix;
  try {
    simulate(c);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).rfind("kernel: ", 0) == 0);
  }
  c = inv();
  c.utilization = 1.5;
  CHECK_THROWS_AS(simulate(c), ValidationError);
}

TEST_CASE("utilization sweep: density steps exactly 1:2:3:4") {
  SweepSpec s{SweepAxis::Utilization, {"0.25", "0.5", "0.75", "1"}, inv()};
  const auto pts = run_sweep(s, 2);
  REQUIRE(pts.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(pts[k].value == s.values[k]);
    REQUIRE(pts[k].report);
    CHECK(pts[k].report->power_density ==
          doctest::Approx(static_cast<double>(k + 1) * pts[0].report->power_density).epsilon(1e-12));
  }
  std::ostringstream csv;
  write_sweep_csv(csv, s.axis, pts);
  const auto text = csv.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
  for (const auto& f : header_fields(text)) {
    CAPTURE(f);
    CHECK(f.find(" [") != std::string::npos);
  }
}

TEST_CASE("duty sweep is linear in duty") {
  SweepSpec s{SweepAxis::DutyCycle, {"1", "0.8", "0.6", "0.4", "0.2"}, inv()};
  const auto pts = run_sweep(s, 1);
  const double full = pts[0].report->rise_max;
  for (const auto& p : pts) {
    REQUIRE(p.report);
    CHECK(p.report->rise_max == doctest::Approx(p.report->stats.realized_duty() * full).epsilon(1e-7));
    CHECK(p.report->rise_max_full_duty == doctest::Approx(full).epsilon(1e-7));
  }
}

TEST_CASE("technology sweep and per-point failures") {
  SweepSpec t{SweepAxis::Technology, {"stt", "she"}, inv()};
  const auto tp = run_sweep(t);
  REQUIRE(tp.size() == 2);
  CHECK(tp[0].report->config.technology.kind == TechKind::STT);
  CHECK(tp[1].report->config.technology.kind == TechKind::SHE);

  auto base = inv();
  base.kernel.kind = KernelKind::VMULmix;
  base.sim_time = 1e-4;
  SweepSpec a{SweepAxis::ArraySize, {"8x4", "sm"}, base};
  const auto ap = run_sweep(a);
  CHECK_FALSE(ap[0].report);
  CHECK(ap[0].error.find("kernel") != std::string::npos);
  CHECK(ap[1].report);

  SweepSpec bad{SweepAxis::Utilization, {"0.5", "1.5"}, inv()};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  SweepSpec none{SweepAxis::Utilization, {}, inv()};
  CHECK_THROWS_AS(none.validate(), ValidationError);
  CHECK_THROWS_AS(sweep_axis_from_string("voltage"), ValidationError);
}

TEST_CASE("throttle keeps 125 C") {
  const auto t = run_throttle(inv(), {1.0, 0.5});
  REQUIRE(t.rise_max_full_duty > 100.0);
  CHECK(t.max_duty_cycle == doctest::Approx(100.0 / t.rise_max_full_duty));
  CHECK(t.t_max_at_max_duty <= 125.1);
  CHECK(t.t_max_at_max_duty >= 124.9);
  CHECK(t.rows.size() == 3);
  CHECK(t.rows[1].rise_max == doctest::Approx(0.5 * t.rise_max_full_duty).epsilon(1e-7));
}

TEST_CASE("multi-array NN run") {
  auto c = inv();
  c.array_rows = 128;
  c.array_cols = 32;
  c.kernel.kind = KernelKind::NNmixblk;
  c.kernel.neurons = 16;
  c.sim_time = 3e-4;
  const auto out = simulate_multi_nn(c, 4);
  const auto& r = out.report;
  REQUIRE(r.arrays.size() == 5);
  CHECK(out.fields.size() == 5);
  CHECK(r.oracle_match.value());
  CHECK(r.arrays[0].lanes == 16);
  CHECK(r.arrays[4].name == "update");
  CHECK(r.phase_cycles.size() == 4);
  double power = 0.0;
  for (const auto& a : r.arrays) power += a.thermal.total_power;
  CHECK(r.total_power == doctest::Approx(power));
  CHECK(to_json(r).at("arrays").size() == 5);

  c.kernel.kind = KernelKind::INVfx;
  CHECK_THROWS_AS(simulate_multi_nn(c, 4), ValidationError);
}

TEST_CASE("artifacts") {
  const auto dir = std::filesystem::temp_directory_path() / "cimtherm_test_artifacts";
  std::filesystem::remove_all(dir);
  auto c = inv();
  c.kernel.kind = KernelKind::VMULmix;
  c.sim_time = 1e-4;
  write_artifacts(simulate(c), dir);
  for (const char* f : {"report.json", "kernel_data.json", "power.csv", "temperature_active.csv",
                        "temperature_bulk.csv", "temperature_active.txt", "temperature_active.pgm"})
    CHECK(std::filesystem::exists(dir / f));
  std::ifstream in(dir / "report.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j.at("oracle_match") == true);
  std::ifstream kd(dir / "kernel_data.json");
  const auto data = nlohmann::json::parse(kd);
  CHECK(data.contains("matrix"));
  CHECK(data.contains("expected"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("tech tables") {
  std::ostringstream v, i;
  write_voltage_table(v, builtin_technology(TechKind::STT));
  const auto text = v.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 10);
  CHECK(text.find("NAND2,2,0,0.30") != std::string::npos);
  write_current_table(i, builtin_technology(TechKind::SHE));
  const auto cur = i.str();
  // 2 writes + NOT + 4 two-input gates + MAJ3 + MAJ5 patterns, two priors each, plus header.
  CHECK(std::count(cur.begin(), cur.end(), '\n') == 1 + 2 * (2 + 2 + 4 * 4 + 8 + 32));
}
