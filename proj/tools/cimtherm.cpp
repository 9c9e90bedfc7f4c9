// cimtherm: kernel -> array simulation -> thermal solve, from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "cimtherm/acceptance.hpp"
#include "cimtherm/config.hpp"
#include "cimtherm/error.hpp"
#include "cimtherm/report.hpp"

namespace fs = std::filesystem;
using namespace cimtherm;

namespace {

enum Exit { kOk = 0, kFailed = 1, kValidation = 2, kInconsistent = 3, kSolver = 4 };

// Flags shared by the subcommands that build a configuration.
struct ConfigFlags {
  std::string config_path, tech, kernel, size, out;
  int rows = 0, cols = 0, coalesce = 0, neurons = 0, bit_width = 0, vector_length = 0;
  double utilization = 0.0, duty = 0.0, sim_time = 0.0;
  std::uint64_t seed = 0;
  bool allow_short = false;
  std::vector<CLI::Option*> set;

  void add(CLI::App& app, bool with_out = true) {
    app.add_option("--config", config_path, "Configuration file")->check(CLI::ExistingFile);
    track(app.add_option("--tech", tech, "stt or she"));
    track(app.add_option("--kernel", kernel, "INVfx, INVshft, VMULmix, VMULnor, NN{mix,nor}{blk,noblk,rest}"));
    track(app.add_option("--rows", rows, "Array rows"));
    track(app.add_option("--cols", cols, "Array columns"));
    track(app.add_option("--size", size, "sm, md, lg or RxC"));
    track(app.add_option("--utilization", utilization, "Fraction of columns active"));
    track(app.add_option("--duty-cycle", duty, "Fraction of non-idle cycles"));
    track(app.add_option("--sim-time", sim_time, "Simulated time (s)"));
    track(app.add_option("--coalesce", coalesce, "Cells per thermal node edge"));
    track(app.add_option("--seed", seed, "Kernel data seed"));
    track(app.add_option("--neurons", neurons, "Hopfield size (0 derives it)"));
    track(app.add_option("--bit-width", bit_width, "VMUL element bits"));
    track(app.add_option("--vector-length", vector_length, "VMUL vector length (0 = largest that fits)"));
    track(app.add_flag("--allow-short-sim", allow_short, "Permit windows shorter than one program pass"));
    if (with_out) app.add_option("--out", out, "Output directory");
  }

  void track(CLI::Option* o) { set.push_back(o); }
  bool given(const std::string& name) const {
    for (auto* o : set)
      if (o->get_name() == name) return o->count() > 0;
    return false;
  }

  SimulationConfig build() const {
    SimulationConfig c = config_path.empty() ? SimulationConfig{} : load_config_file(config_path);
    if (given("--tech")) c.technology = builtin_technology(tech_kind_from_string(tech));
    if (given("--kernel")) c.kernel.kind = kernel_kind_from_string(kernel);
    if (given("--size")) std::tie(c.array_rows, c.array_cols) = parse_array_size(size);
    if (given("--rows")) c.array_rows = rows;
    if (given("--cols")) c.array_cols = cols;
    if (given("--utilization")) c.utilization = utilization;
    if (given("--duty-cycle")) c.duty_cycle = duty;
    if (given("--sim-time")) c.sim_time = sim_time;
    if (given("--coalesce")) c.coalesce_factor = coalesce;
    if (given("--seed")) c.kernel.seed = seed;
    if (given("--neurons")) c.kernel.neurons = neurons;
    if (given("--bit-width")) c.kernel.bit_width = bit_width;
    if (given("--vector-length")) c.kernel.vector_length = vector_length;
    if (given("--allow-short-sim")) c.allow_short_sim = true;
    c.validate();
    return c;
  }
};

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::ofstream open_file(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw ValidationError("cannot write " + p.string());
  return f;
}

void print_summary(const RunReport& r) {
  std::printf("%s %s %dx%d  lanes %d (%.1f%%)  duty %.3f\n", std::string(to_string(r.config.kernel.kind)).c_str(),
              std::string(to_string(r.config.technology.kind)).c_str(), r.config.array_rows, r.config.array_cols,
              r.lanes, 100.0 * r.realized_utilization, r.stats.realized_duty());
  std::printf("  power %.4g W  density %.2f W/cm^2\n", r.total_power, r.power_density);
  std::printf("  t_max %.2f C  t_min %.2f C  rise_max %.2f K  max duty @125C %.4f\n", r.t_max, r.t_min, r.rise_max,
              r.max_duty_cycle);
  if (r.oracle_match) std::printf("  oracle match: %s\n", *r.oracle_match ? "yes" : "NO");
  for (const auto& a : r.arrays)
    std::printf("  array %-8s lanes %3d  density %.2f W/cm^2  t_max %.2f C\n", a.name.c_str(), a.lanes,
                a.thermal.power_density, a.thermal.t_max);
}

int cmd_tech(const std::string& tech, const std::string& out) {
  std::vector<TechKind> kinds;
  if (tech.empty())
    kinds = {TechKind::STT, TechKind::SHE};
  else
    kinds = {tech_kind_from_string(tech)};
  for (auto k : kinds) {
    const auto params = builtin_technology(k);
    const std::string name(to_string(k));
    if (out.empty()) {
      std::cout << "# " << name << " gate voltages\n";
      write_voltage_table(std::cout, params);
      std::cout << "# " << name << " per-input currents and power\n";
      write_current_table(std::cout, params);
    } else {
      auto v = open_file(fs::path(out) / ("voltages_" + name + ".csv"));
      write_voltage_table(v, params);
      auto c = open_file(fs::path(out) / ("currents_" + name + ".csv"));
      write_current_table(c, params);
    }
  }
  return kOk;
}

int cmd_simulate(const ConfigFlags& f, int arrays) {
  const auto c = f.build();
  const auto out = arrays > 0 ? simulate_multi_nn(c, arrays) : simulate(c);
  print_summary(out.report);
  if (!f.out.empty()) {
    write_artifacts(out, f.out);
    std::printf("  artifacts in %s\n", f.out.c_str());
  }
  return kOk;
}

int cmd_sweep(const ConfigFlags& f, const std::string& axis, const std::string& values, int workers) {
  SweepSpec spec;
  spec.axis = sweep_axis_from_string(axis);
  spec.values = split(values);
  if (spec.values.empty() && spec.axis == SweepAxis::Utilization) spec.values = {"0.25", "0.5", "0.75", "1"};
  if (spec.values.empty() && spec.axis == SweepAxis::Technology) spec.values = {"stt", "she"};
  spec.base = f.build();
  const auto points = run_sweep(spec, workers);
  write_sweep_csv(std::cout, spec.axis, points);
  if (!f.out.empty()) {
    auto csv = open_file(fs::path(f.out) / ("sweep_" + std::string(to_string(spec.axis)) + ".csv"));
    write_sweep_csv(csv, spec.axis, points);
  }
  for (const auto& p : points)
    if (!p.report) return kFailed;
  return kOk;
}

int cmd_throttle(const ConfigFlags& f, const std::string& duties) {
  std::vector<double> d;
  for (const auto& s : split(duties)) d.push_back(std::stod(s));
  const auto t = run_throttle(f.build(), d);
  std::printf("rise_max at duty 1: %.3f K  max duty for 125 C: %.5f  t_max there: %.3f C\n", t.rise_max_full_duty,
              t.max_duty_cycle, t.t_max_at_max_duty);
  write_throttle_csv(std::cout, t);
  if (!f.out.empty()) {
    auto csv = open_file(fs::path(f.out) / "throttle.csv");
    write_throttle_csv(csv, t);
  }
  return kOk;
}

int cmd_verify(const std::string& config_path, bool skip_stress) {
  AcceptanceOptions o;
  if (!config_path.empty()) {
    const auto c = load_config_file(config_path);
    (c.technology.kind == TechKind::STT ? o.stt : o.she) = c.technology;
  }
  o.stress = !skip_stress;
  const auto results = run_acceptance(o, [](const CheckResult& r) {
    std::cout << format_check(r) << std::endl;
  });
  int failed = 0;
  bool inconsistent = false;
  for (const auto& r : results) {
    failed += !r.pass;
    inconsistent = inconsistent || r.model_inconsistency;
  }
  std::printf("%d/%zu checks passed\n", static_cast<int>(results.size()) - failed, results.size());
  if (failed == 0) return kOk;
  return inconsistent ? kInconsistent : kFailed;
}

// Data tables for the utilization, technology, size, throttling and multi-array figures.
int cmd_report(ConfigFlags& f, const std::string& figure, const std::string& kernels, const std::string& sizes,
               int workers) {
  if (f.out.empty()) throw ValidationError("report: --out is required");
  const auto base = f.build();
  const fs::path dir(f.out);
  const bool all = figure == "all";
  std::vector<std::string> kernel_list = split(kernels);
  if (kernel_list.empty())
    kernel_list = {"INVfx", "INVshft", "VMULmix", "VMULnor", "NNmixblk", "NNmixnoblk", "NNmixrest",
                   "NNnorblk", "NNnornoblk", "NNnorrest"};
  const auto size_list = sizes.empty() ? std::vector<std::string>{"sm", "md"} : split(sizes);

  const auto sweep = [&](SweepAxis axis, SimulationConfig c, std::vector<std::string> values, const fs::path& file) {
    SweepSpec s{axis, std::move(values), std::move(c)};
    const auto points = run_sweep(s, workers);
    auto csv = open_file(dir / file);
    write_sweep_csv(csv, axis, points);
    std::printf("  %s\n", (dir / file).string().c_str());
  };

  if (all || figure == "utilization") {
    for (const auto& k : kernel_list)
      for (const auto& sz : size_list) {
        auto c = base;
        c.kernel.kind = kernel_kind_from_string(k);
        std::tie(c.array_rows, c.array_cols) = parse_array_size(sz);
        sweep(SweepAxis::Utilization, c, {"0.25", "0.5", "0.75", "1"}, "utilization_" + k + "_" + sz + ".csv");
      }
  }
  if (all || figure == "technology") {
    for (const auto& k : kernel_list) {
      auto c = base;
      c.kernel.kind = kernel_kind_from_string(k);
      sweep(SweepAxis::Technology, c, {"stt", "she"}, "technology_" + k + ".csv");
    }
  }
  if (all || figure == "size") {
    auto c = base;
    c.kernel.kind = KernelKind::INVfx;
    sweep(SweepAxis::ArraySize, c, size_list, "size_INVfx.csv");
  }
  if (all || figure == "throttle") {
    auto c = base;
    c.kernel.kind = KernelKind::INVfx;
    const auto t = run_throttle(c, {1.0, 0.8, 0.6, 0.4, 0.2});
    auto csv = open_file(dir / "throttle_INVfx.csv");
    write_throttle_csv(csv, t);
    std::printf("  %s\n", (dir / "throttle_INVfx.csv").string().c_str());
  }
  if (all || figure == "multi") {
    auto c = base;
    c.kernel.kind = is_hopfield(base.kernel.kind) ? base.kernel.kind : KernelKind::NNmixblk;
    std::tie(c.array_rows, c.array_cols) = parse_array_size("md");
    const auto m = simulate_multi_nn(c, 4);
    write_artifacts(m, dir / "multi_nn");
    std::printf("  %s\n", (dir / "multi_nn").string().c_str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermal evaluation of MRAM computing-in-memory kernels"};
  app.require_subcommand(1);

  auto* tech = app.add_subcommand("tech", "Dump derived gate voltages and per-input current/power tables");
  std::string tech_kind, tech_out;
  tech->add_option("--tech", tech_kind, "stt or she (default both)");
  tech->add_option("--out", tech_out, "Directory for CSV files (default stdout)");

  ConfigFlags sim_flags, sweep_flags, throttle_flags, report_flags;
  auto* sim = app.add_subcommand("simulate", "Run one configuration and write its report");
  sim_flags.add(*sim);
  int arrays = 0;
  sim->add_option("--arrays", arrays, "NN only: column arrays of a multi-array plan (plus one update array)");

  auto* sw = app.add_subcommand("sweep", "Run a configuration over one axis");
  sweep_flags.add(*sw);
  std::string axis = "utilization", values;
  int workers = 0;
  sw->add_option("--axis", axis, "utilization, duty_cycle, array_size or technology");
  sw->add_option("--values", values, "Comma-separated values");
  sw->add_option("--workers", workers, "Worker threads (0 = one per core)");

  auto* th = app.add_subcommand("throttle", "Duty-cycle sweep and the largest duty that keeps 125 C");
  throttle_flags.add(*th);
  std::string duties = "1,0.8,0.6,0.4,0.2";
  th->add_option("--duties", duties, "Comma-separated duty cycles");

  auto* ver = app.add_subcommand("verify", "Run the acceptance checks");
  std::string verify_config;
  bool skip_stress = false;
  ver->add_option("--config", verify_config, "Take technology parameters from this file")->check(CLI::ExistingFile);
  ver->add_flag("--skip-stress", skip_stress, "Skip the 2.1M-node solve");

  auto* rep = app.add_subcommand("report", "Write the figure data tables");
  report_flags.add(*rep);
  std::string figure = "all", kernels, sizes;
  int report_workers = 0;
  rep->add_option("--figure", figure, "utilization, technology, size, throttle, multi or all")
      ->check(CLI::IsMember({"utilization", "technology", "size", "throttle", "multi", "all"}));
  rep->add_option("--kernels", kernels, "Comma-separated kernels for the per-kernel tables");
  rep->add_option("--sizes", sizes, "Comma-separated array sizes (default sm,md)");
  rep->add_option("--workers", report_workers, "Worker threads (0 = one per core)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*tech) return cmd_tech(tech_kind, tech_out);
    if (*sim) return cmd_simulate(sim_flags, arrays);
    if (*sw) return cmd_sweep(sweep_flags, axis, values, workers);
    if (*th) return cmd_throttle(throttle_flags, duties);
    if (*ver) return cmd_verify(verify_config, skip_stress);
    if (*rep) return cmd_report(report_flags, figure, kernels, sizes, report_workers);
  } catch (const ModelInconsistency& e) {
    std::fprintf(stderr, "model inconsistency: %s\n", e.what());
    return kInconsistent;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver: %s\n", e.what());
    return kSolver;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  } catch (const ExecutionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: bad number (%s)\n", e.what());
    return kValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailed;
  }
  return kOk;
}
