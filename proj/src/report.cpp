#include "cimtherm/report.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <ostream>
#include <thread>

#include "cimtherm/error.hpp"

namespace cimtherm {

namespace {

std::string staged(std::string_view stage, const std::exception& e) {
  return std::string(stage) + ": " + e.what();
}

// Runs f, prefixing any library error with the stage name. Types survive so
// callers can still map them to exit codes.
template <class F>
auto in_stage(std::string_view stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw ParseError(staged(stage, e));
  } catch (const ValidationError& e) {
    throw ValidationError(staged(stage, e));
  } catch (const ModelInconsistency& e) {
    throw ModelInconsistency(staged(stage, e));
  } catch (const SolverError& e) {
    throw SolverError(staged(stage, e));
  } catch (const ExecutionError& e) {
    throw ExecutionError(staged(stage, e));
  }
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string tech_text(const TechnologyParams& t) {
  std::string s(to_string(t.kind));
  for (double v : {t.r_p, t.r_ap, t.r_she.value_or(0.0), t.i_crit, t.t_sw, t.t_clk, t.cell_dx, t.cell_dy, t.cell_dz})
    s += ' ' + g17(v);
  return s;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json stats_json(const ExecutionStats& s) {
  nlohmann::json gates = nlohmann::json::object();
  nlohmann::json lane_ops = nlohmann::json::object();
  for (GateKind g : kAllGates) {
    const auto i = static_cast<std::size_t>(g);
    if (s.gate_instructions[i] == 0) continue;
    gates[std::string(to_string(g))] = s.gate_instructions[i];
    lane_ops[std::string(to_string(g))] = s.gate_lane_ops[i];
  }
  return {{"cycles", s.cycles},
          {"active_instructions", s.active_instructions},
          {"idle_cycles_injected", s.idle_cycles_injected},
          {"barrier_idle_cycles", s.barrier_idle_cycles},
          {"idle_instructions", s.idle_instructions},
          {"gate_instructions", gates},
          {"gate_lane_ops", lane_ops},
          {"serial_writes", s.serial_writes},
          {"bulk_sets", s.bulk_sets},
          {"total_energy_J", s.total_energy},
          {"simulated_time_s", s.simulated_time},
          {"realized_duty", s.realized_duty()}};
}

nlohmann::json thermal_json(const FieldMetrics& m) {
  return {{"t_max_C", m.t_max},
          {"t_min_C", m.t_min},
          {"rise_max_K", m.rise_max},
          {"rise_min_K", m.rise_min},
          {"spread_K", m.spread},
          {"total_power_W", m.total_power},
          {"power_density_W_cm2", m.power_density},
          {"heat_out_W", m.heat_out},
          {"energy_balance", m.energy_balance},
          {"relative_residual", m.relative_residual},
          {"iterations", m.iterations}};
}

void accumulate(ExecutionStats& into, const ExecutionStats& s) {
  into.cycles += s.cycles;  // array-cycles
  into.active_instructions += s.active_instructions;
  into.idle_cycles_injected += s.idle_cycles_injected;
  into.barrier_idle_cycles += s.barrier_idle_cycles;
  for (std::size_t i = 0; i < kAllGates.size(); ++i) {
    into.gate_instructions[i] += s.gate_instructions[i];
    into.gate_lane_ops[i] += s.gate_lane_ops[i];
  }
  into.serial_writes += s.serial_writes;
  into.bulk_sets += s.bulk_sets;
  into.idle_instructions += s.idle_instructions;
  into.total_energy += s.total_energy;
  into.simulated_time = std::max(into.simulated_time, s.simulated_time);
}

struct Thermal {
  TemperatureField field;
  FieldMetrics metrics;
};

Thermal solve_array(const SimulationConfig& config, const PowerMap& power) {
  return in_stage("thermal", [&] {
    const auto sys = assemble_conductance(
        build_grid(power.rows, power.cols, config.technology, config.stack, config.coalesce_factor));
    const auto np = node_power(sys.grid, power);
    Thermal t{solve_steady_state(sys, np), {}};
    t.metrics = field_metrics(sys, t.field, np);
    return t;
  });
}

// Duty-cycle throttling scales power and rise by the fraction of cycles not
// spent in injected idles.
double throttle_fraction(const ExecutionStats& s) {
  return s.cycles ? static_cast<double>(s.cycles - s.idle_cycles_injected) / static_cast<double>(s.cycles) : 1.0;
}

void fill_thermal(RunReport& r, const std::vector<Thermal>& arrays, const std::vector<PowerMap>& power) {
  r.t_max = -1e300;
  r.t_min = 1e300;
  r.rise_max = -1e300;
  for (std::size_t a = 0; a < arrays.size(); ++a) {
    const auto& m = arrays[a].metrics;
    r.total_power += m.total_power;
    r.t_max = std::max(r.t_max, m.t_max);
    r.t_min = std::min(r.t_min, m.t_min);
    r.rise_max = std::max(r.rise_max, m.rise_max);
    r.power_density = std::max(r.power_density, power[a].power_density());
    r.relative_residual = std::max(r.relative_residual, m.relative_residual);
    r.solver_iterations = std::max(r.solver_iterations, m.iterations);
    if (std::abs(m.energy_balance) >= std::abs(r.energy_balance)) r.energy_balance = m.energy_balance;
  }
  const double frac = throttle_fraction(r.stats);
  r.rise_max_full_duty = frac > 0.0 ? r.rise_max / frac : r.rise_max;
  r.max_duty_cycle = max_duty_cycle(r.rise_max_full_duty, r.config.stack.ambient_c);
}

bool parse_fraction(const std::string& text, double& out) {
  const char* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && p == end && out > 0.0 && out <= 1.0;
}

void write_power_csv(std::ostream& out, const PowerMap& p) {
  out.precision(10);
  out << "row\\col [W]";
  for (int c = 0; c < p.cols; ++c) out << ',' << c;
  out << '\n';
  for (int r = 0; r < p.rows; ++r) {
    out << r;
    for (int c = 0; c < p.cols; ++c) out << ',' << p.at(r, c);
    out << '\n';
  }
}

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw ValidationError("cannot write " + path.string());
  return f;
}

}  // namespace

std::string_view utilization_basis(KernelKind kind) {
  if (is_inv(kind)) return "active columns / array columns (one NOT lane per column)";
  if (is_vmul(kind)) return "active columns / array columns (one output element per column)";
  return "active columns / array columns (one neuron per column)";
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json to_json(const RunReport& r, bool with_timestamp) {
  const auto& c = r.config;
  nlohmann::json j;
  j["model_version"] = kModelVersion;
  if (with_timestamp) j["generated_at"] = utc_now();
  j["config_hash"] = fnv1a_hex(serialize_config(c));
  j["technology_hash"] = fnv1a_hex(tech_text(c.technology));
  j["config"] = {{"technology", std::string(to_string(c.technology.kind))},
                 {"array_rows", c.array_rows},
                 {"array_cols", c.array_cols},
                 {"kernel", std::string(to_string(c.kernel.kind))},
                 {"bit_width", c.kernel.bit_width},
                 {"vector_length", c.kernel.vector_length},
                 {"neurons", c.kernel.neurons},
                 {"seed", c.kernel.seed},
                 {"utilization", c.utilization},
                 {"duty_cycle", c.duty_cycle},
                 {"sim_time_s", c.sim_time},
                 {"coalesce_factor", c.coalesce_factor},
                 {"ambient_C", c.stack.ambient_c}};
  j["config_text"] = serialize_config(c);
  j["utilization"] = {{"basis", std::string(utilization_basis(c.kernel.kind))},
                      {"requested", c.utilization},
                      {"active_lanes", r.lanes},
                      {"realized", r.realized_utilization}};
  j["stats"] = stats_json(r.stats);
  j["total_power_W"] = r.total_power;
  j["power_density_W_cm2"] = r.power_density;
  j["t_max_C"] = r.t_max;
  j["t_min_C"] = r.t_min;
  j["rise_max_K"] = r.rise_max;
  j["rise_max_full_duty_K"] = r.rise_max_full_duty;
  j["max_duty_cycle_125C"] = r.max_duty_cycle;
  j["solver"] = {{"relative_residual", r.relative_residual},
                 {"iterations", r.solver_iterations},
                 {"energy_balance", r.energy_balance}};
  j["oracle_match"] = r.oracle_match ? nlohmann::json(*r.oracle_match) : nlohmann::json(nullptr);
  j["phase_instructions"] = r.phase_instructions;
  if (!r.arrays.empty()) {
    j["phase_cycles"] = r.phase_cycles;
    auto& arr = j["arrays"] = nlohmann::json::array();
    for (const auto& a : r.arrays)
      arr.push_back({{"name", a.name},
                     {"rows", a.rows},
                     {"cols", a.cols},
                     {"active_lanes", a.lanes},
                     {"stats", stats_json(a.stats)},
                     {"thermal", thermal_json(a.thermal)}});
  }
  return j;
}

SimulationOutput simulate(const SimulationConfig& config) {
  in_stage("config", [&] { config.validate(); });
  const auto w = in_stage("kernel", [&] { return build_workload(config); });
  const auto run_result = in_stage("simulate", [&] {
    const GateTable table(config.technology);
    return run(w.program, w.initial, table, RunWindow{config.sim_time, config.duty_cycle});
  });
  SimulationOutput out;
  auto& r = out.report;
  r.config = config;
  r.lanes = w.lanes;
  r.realized_utilization = w.realized_utilization;
  r.stats = run_result.stats;
  r.oracle_match = w.oracle_match;
  r.phase_instructions = w.phase_instructions;
  out.power = {run_result.power};
  std::vector<Thermal> th{solve_array(config, run_result.power)};
  fill_thermal(r, th, out.power);
  out.fields = {std::move(th.front().field)};
  out.kernel_data = w.data_json;
  return out;
}

SimulationOutput simulate_multi_nn(const SimulationConfig& config, int column_arrays) {
  in_stage("config", [&] { config.validate(); });
  if (!is_hopfield(config.kernel.kind))
    throw ValidationError("config: multi-array runs need an NN kernel, got " + std::string(to_string(config.kernel.kind)));
  if (config.duty_cycle != 1.0) throw ValidationError("config: duty-cycle throttling applies to single-array runs");
  const int rows = config.array_rows;
  const int cols = config.array_cols;
  const int n = config.kernel.neurons > 0 ? config.kernel.neurons : std::min(500, cols);
  const auto inst = random_hopfield(n, config.kernel.seed);
  const auto hr = in_stage("kernel", [&] {
    HopfieldLimits lim;
    lim.max_cycles = active_cycles_for(config.sim_time, config.technology.t_clk);
    return run_hopfield_multi(inst, hopfield_variant(config.kernel.kind), rows, cols, column_arrays, lim);
  });
  const auto mr = in_stage("simulate", [&] {
    const GateTable table(config.technology);
    return multi_array_run(hr.arrays, table, config.sim_time);
  });

  SimulationOutput out;
  auto& r = out.report;
  r.config = config;
  r.lanes = n;
  r.realized_utilization = static_cast<double>(n) / cols;
  const auto oracle = hopfield_oracle(inst);
  const std::size_t k = std::min(hr.states.size(), oracle.states.size());
  r.oracle_match = std::equal(hr.states.begin(), hr.states.begin() + static_cast<std::ptrdiff_t>(k),
                              oracle.states.begin()) &&
                   (!hr.converged || hr.states.size() == oracle.states.size());
  r.phase_instructions.assign(kPhasesPerIteration, 0);
  r.phase_cycles.assign(kPhasesPerIteration, 0);
  for (std::size_t p = 0; p < mr.phase_lengths.size(); ++p) r.phase_cycles[p % kPhasesPerIteration] += mr.phase_lengths[p];
  for (const auto& plan : hr.arrays)
    for (std::size_t p = 0; p < plan.phases.size(); ++p)
      r.phase_instructions[p % kPhasesPerIteration] += static_cast<std::int64_t>(plan.phases[p].size());

  std::vector<Thermal> th;
  for (std::size_t a = 0; a < mr.arrays.size(); ++a) {
    const auto& ar = mr.arrays[a];
    accumulate(r.stats, ar.stats);
    out.power.push_back(ar.power);
    th.push_back(solve_array(config, ar.power));
    r.arrays.push_back(ArrayReport{hr.arrays[a].name, rows, cols, hr.lanes_per_array[a], ar.stats, th.back().metrics});
  }
  fill_thermal(r, th, out.power);
  for (auto& t : th) out.fields.push_back(std::move(t.field));

  nlohmann::json data;
  data["kernel"] = std::string(to_string(config.kernel.kind));
  data["column_arrays"] = column_arrays;
  data["neurons"] = n;
  data["b"] = inst.bias;
  data["V0"] = inst.state;
  std::vector<std::vector<std::int64_t>> wm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    wm[i].assign(inst.weights.begin() + static_cast<std::ptrdiff_t>(i) * n,
                 inst.weights.begin() + static_cast<std::ptrdiff_t>(i + 1) * n);
  data["W"] = wm;
  data["iterations_recorded"] = hr.iterations;
  data["converged"] = hr.converged;
  data["accumulator_bits"] = hr.acc_width;
  data["lanes_per_array"] = hr.lanes_per_array;
  auto& pl = data["placement"] = nlohmann::json::array();
  for (const auto& p : hr.placement)
    pl.push_back({{"operand", p.operand}, {"array", p.array}, {"row", p.row}, {"first_col", p.first_col},
                  {"last_col", p.last_col}});
  out.kernel_data = data.dump(2);
  return out;
}

void write_artifacts(const SimulationOutput& output, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  open_out(dir / "report.json") << to_json(output.report).dump(2) << '\n';
  open_out(dir / "kernel_data.json") << output.kernel_data << '\n';
  const bool multi = output.power.size() > 1;
  for (std::size_t a = 0; a < output.power.size(); ++a) {
    const std::string suffix = multi ? "_" + output.report.arrays[a].name : "";
    auto pw = open_out(dir / ("power" + suffix + ".csv"));
    write_power_csv(pw, output.power[a]);
    for (bool bulk : {false, true}) {
      const std::string stem = std::string("temperature_") + (bulk ? "bulk" : "active") + suffix;
      auto csv = open_out(dir / (stem + ".csv"));
      write_layer_csv(csv, output.fields[a], bulk);
      auto txt = open_out(dir / (stem + ".txt"));
      write_layer_text(txt, output.fields[a], bulk);
      auto pgm = open_out(dir / (stem + ".pgm"), true);
      write_layer_pgm(pgm, output.fields[a], bulk);
    }
  }
}

// ---------------------------------------------------------------- sweeps

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Utilization:
      return "utilization";
    case SweepAxis::DutyCycle:
      return "duty_cycle";
    case SweepAxis::ArraySize:
      return "array_size";
    case SweepAxis::Technology:
      return "technology";
  }
  return "";
}

SweepAxis sweep_axis_from_string(std::string_view text) {
  for (auto a : {SweepAxis::Utilization, SweepAxis::DutyCycle, SweepAxis::ArraySize, SweepAxis::Technology})
    if (to_string(a) == text) return a;
  if (text == "duty") return SweepAxis::DutyCycle;
  if (text == "size") return SweepAxis::ArraySize;
  if (text == "tech") return SweepAxis::Technology;
  throw ValidationError("unknown sweep axis '" + std::string(text) + "'");
}

void SweepSpec::validate() const {
  if (values.empty()) throw ValidationError("sweep: no values");
  for (std::size_t i = 0; i < values.size(); ++i) point(i);
}

SimulationConfig SweepSpec::point(std::size_t index) const {
  const auto& v = values.at(index);
  SimulationConfig c = base;
  double x = 0.0;
  switch (axis) {
    case SweepAxis::Utilization:
      if (!parse_fraction(v, x)) throw ValidationError("sweep: utilization '" + v + "' outside (0, 1]");
      c.utilization = x;
      break;
    case SweepAxis::DutyCycle:
      if (!parse_fraction(v, x)) throw ValidationError("sweep: duty cycle '" + v + "' outside (0, 1]");
      c.duty_cycle = x;
      break;
    case SweepAxis::ArraySize: {
      const auto [r, cl] = parse_array_size(v);
      c.array_rows = r;
      c.array_cols = cl;
      break;
    }
    case SweepAxis::Technology:
      c.technology = builtin_technology(tech_kind_from_string(v));
      break;
  }
  return c;
}

std::vector<SweepPoint> run_sweep(const SweepSpec& spec, int workers) {
  spec.validate();
  const std::size_t n = spec.values.size();
  std::vector<SweepPoint> points(n);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      auto& p = points[i];
      p.value = spec.values[i];
      try {
        p.report = simulate(spec.point(i)).report;
      } catch (const std::exception& e) {
        p.error = e.what();
      }
    }
  };
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < count; ++t) pool.emplace_back(work);
  work();
  pool.clear();
  return points;
}

void write_sweep_csv(std::ostream& out, SweepAxis axis, const std::vector<SweepPoint>& points) {
  out.precision(10);
  out << to_string(axis) << (axis == SweepAxis::Utilization || axis == SweepAxis::DutyCycle ? " [fraction]" : " [-]")
      << ",technology [-],kernel [-],array [rows x cols],active_lanes [-],realized_utilization [fraction]"
         ",realized_duty [fraction],total_power [W],power_density [W/cm^2],t_max [C],t_min [C],rise_max [K]"
         ",max_duty_cycle [fraction],relative_residual [-],oracle_match [-],error [-]\n";
  for (const auto& p : points) {
    out << p.value;
    if (p.report) {
      const auto& r = *p.report;
      out << ',' << to_string(r.config.technology.kind) << ',' << to_string(r.config.kernel.kind) << ','
          << r.config.array_rows << 'x' << r.config.array_cols << ',' << r.lanes << ',' << r.realized_utilization
          << ',' << r.stats.realized_duty() << ',' << r.total_power << ',' << r.power_density << ',' << r.t_max
          << ',' << r.t_min << ',' << r.rise_max << ',' << r.max_duty_cycle << ',' << r.relative_residual << ','
          << (r.oracle_match ? (*r.oracle_match ? "true" : "false") : "") << ",\n";
    } else {
      std::string msg = p.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << ",,,,,,,,,,,,,,," << msg << '\n';
    }
  }
}

// ---------------------------------------------------------------- throttling

ThrottleResult run_throttle(const SimulationConfig& config, const std::vector<double>& duties) {
  ThrottleResult t;
  const auto row = [&](double duty) {
    SimulationConfig c = config;
    c.duty_cycle = duty;
    const auto r = simulate(c).report;
    return ThrottleRow{duty, r.stats.realized_duty(), r.power_density, r.rise_max, r.t_max};
  };
  const auto full = row(1.0);
  t.rise_max_full_duty = full.rise_max;
  t.max_duty_cycle = max_duty_cycle(full.rise_max, config.stack.ambient_c);
  for (double d : duties) t.rows.push_back(d == 1.0 ? full : row(d));
  const auto at_max = t.max_duty_cycle == 1.0 ? full : row(t.max_duty_cycle);
  t.t_max_at_max_duty = at_max.t_max;
  t.rows.push_back(at_max);
  return t;
}

void write_throttle_csv(std::ostream& out, const ThrottleResult& result) {
  out.precision(10);
  out << "duty_cycle [fraction],realized_duty [fraction],power_density [W/cm^2],rise_max [K],t_max [C]\n";
  for (const auto& r : result.rows)
    out << r.duty << ',' << r.realized_duty << ',' << r.power_density << ',' << r.rise_max << ',' << r.t_max << '\n';
}

// ---------------------------------------------------------------- tables

void write_voltage_table(std::ostream& out, const TechnologyParams& tech) {
  out.precision(6);
  out << "gate [-],arity [-],preset [-],v_gate [V],v_write [V]\n";
  const double vw = write_voltage(tech);
  for (GateKind g : kAllGates)
    out << to_string(g) << ',' << arity(g) << ',' << preset_bit(g) << ',' << derive_gate_voltage(tech, g) << ','
        << vw << '\n';
}

void write_current_table(std::ostream& out, const TechnologyParams& tech) {
  out.precision(6);
  out << "gate [-],inputs [bits],prior_output [-],r_eq [ohm],i_out [A],i_crit [A],switched [-],new_output [-]"
         ",truth [-],gate_power [W],preset_power [W],cycle_energy [J]\n";
  for (GateKind g : kAllGates) {
    const int n = arity(g);
    for (unsigned m = 0; m < (1u << n); ++m) {
      const InputPattern p(m, n);
      std::string bits;
      for (int k = 0; k < n; ++k) bits += p.bit(k) ? '1' : '0';
      for (int prior = 0; prior < 2; ++prior) {
        const auto o = gate_outcome(tech, g, p, prior != 0);
        const double r = n ? equivalent_resistance(tech, p, preset_bit(g)) : write_path_resistance(tech, prior != 0);
        out << to_string(g) << ',' << bits << ',' << prior << ',' << r << ',' << o.output_current << ','
            << tech.i_crit << ',' << o.switched << ',' << o.new_output << ',' << truth(g, p) << ',' << o.gate_power
            << ',' << o.preset_power << ',' << o.cycle_energy << '\n';
      }
    }
  }
}

}  // namespace cimtherm
