#include "cimtherm/config.hpp"

#include <array>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "cimtherm/error.hpp"

namespace cimtherm {

namespace {

constexpr std::array<std::pair<KernelKind, std::string_view>, 10> kKernelNames{{
    {KernelKind::INVfx, "INVfx"},
    {KernelKind::INVshft, "INVshft"},
    {KernelKind::VMULmix, "VMULmix"},
    {KernelKind::VMULnor, "VMULnor"},
    {KernelKind::NNmixblk, "NNmixblk"},
    {KernelKind::NNmixnoblk, "NNmixnoblk"},
    {KernelKind::NNmixrest, "NNmixrest"},
    {KernelKind::NNnorblk, "NNnorblk"},
    {KernelKind::NNnornoblk, "NNnornoblk"},
    {KernelKind::NNnorrest, "NNnorrest"},
}};

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

double parse_double(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE || !std::isfinite(v))
    throw ParseError("key '" + key + "': expected a number, got '" + value + "'");
  return v;
}

long long parse_int(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE)
    throw ParseError("key '" + key + "': expected an integer, got '" + value + "'");
  return v;
}

int parse_small_int(const std::string& key, const std::string& value) {
  const long long v = parse_int(key, value);
  if (v < -1'000'000'000LL || v > 1'000'000'000LL)
    throw ParseError("key '" + key + "': integer out of range");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  const auto v = lower(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError("key '" + key + "': expected true/false, got '" + value + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string_view to_string(KernelKind kind) {
  for (const auto& [k, name] : kKernelNames)
    if (k == kind) return name;
  return "?";
}

KernelKind kernel_kind_from_string(std::string_view text) {
  const auto want = lower(std::string(text));
  for (const auto& [k, name] : kKernelNames)
    if (lower(std::string(name)) == want) return k;
  throw ValidationError("unknown kernel '" + std::string(text) + "'");
}

bool is_inv(KernelKind kind) { return kind == KernelKind::INVfx || kind == KernelKind::INVshft; }
bool is_vmul(KernelKind kind) { return kind == KernelKind::VMULmix || kind == KernelKind::VMULnor; }
bool is_hopfield(KernelKind kind) { return !is_inv(kind) && !is_vmul(kind); }

bool uses_nor_adder(KernelKind kind) {
  switch (kind) {
    case KernelKind::VMULnor:
    case KernelKind::NNnorblk:
    case KernelKind::NNnornoblk:
    case KernelKind::NNnorrest:
      return true;
    default:
      return false;
  }
}

int active_lane_count(double utilization, int lanes) {
  const double exact = utilization * lanes;
  int n = static_cast<int>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  if (n < 1) n = 1;
  if (n > lanes) n = lanes;
  return n;
}

std::pair<int, int> parse_array_size(std::string_view text) {
  const auto t = lower(trim(text));
  if (t == "sm") return {256, 32};
  if (t == "md") return {512, 512};
  if (t == "lg") return {1024, 1024};
  const auto x = t.find('x');
  if (x == std::string::npos) throw ParseError("array size '" + t + "': expected sm|md|lg|RxC");
  const auto rows = parse_small_int("array.size", t.substr(0, x));
  const auto cols = parse_small_int("array.size", t.substr(x + 1));
  return {rows, cols};
}

void SimulationConfig::validate() const {
  technology.validate();
  stack.validate();
  if (array_rows <= 0 || array_cols <= 0)
    throw ValidationError("array: rows and cols must be positive");
  if (!(utilization > 0.0 && utilization <= 1.0))
    throw ValidationError("run: utilization must lie in (0, 1]");
  if (!(duty_cycle > 0.0 && duty_cycle <= 1.0))
    throw ValidationError("run: duty_cycle must lie in (0, 1]");
  if (!(sim_time > 0.0)) throw ValidationError("run: sim_time must be > 0");
  if (sim_time < 1e-3 && !allow_short_sim)
    throw ValidationError("run: sim_time below 1 ms requires allow_short_sim = true");
  if (sim_time / technology.t_clk > 2e9)
    throw ValidationError("run: sim_time spans too many clock cycles");
  if (coalesce_factor < 1) throw ValidationError("thermal: coalesce must be >= 1");
  if (array_rows % coalesce_factor != 0 || array_cols % coalesce_factor != 0)
    throw ValidationError("thermal: coalesce factor must divide array rows and cols");
  if (kernel.bit_width < 1 || kernel.bit_width > 16)
    throw ValidationError("kernel: bit_width must lie in [1, 16]");
  if (kernel.vector_length < 0) throw ValidationError("kernel: vector_length must be >= 0");
  if (kernel.neurons < 0) throw ValidationError("kernel: neurons must be >= 0");
}

SimulationConfig load_config(std::string_view text) {
  SimulationConfig cfg;
  std::map<std::string, std::string> values;  // "section.key" -> raw value

  std::istringstream in{std::string(text)};
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto where = " (line " + std::to_string(lineno) + ")";
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError("unterminated section header" + where);
      section = lower(trim(std::string_view(t).substr(1, t.size() - 2)));
      if (section != "technology" && section != "array" && section != "kernel" &&
          section != "thermal" && section != "run")
        throw ParseError("unknown section [" + section + "]" + where);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value" + where);
    if (section.empty()) throw ParseError("key outside of any section" + where);
    const auto key = section + "." + lower(trim(std::string_view(t).substr(0, eq)));
    const auto value = trim(std::string_view(t).substr(eq + 1));
    if (!values.emplace(key, value).second) throw ParseError("duplicate key '" + key + "'" + where);
  }

  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = values.find(key);
    if (it == values.end()) return std::nullopt;
    auto v = it->second;
    values.erase(it);
    return v;
  };
  auto take_double = [&](const std::string& key, double& dst) {
    if (auto v = take(key)) dst = parse_double(key, *v);
  };
  auto take_int = [&](const std::string& key, int& dst) {
    if (auto v = take(key)) dst = parse_small_int(key, *v);
  };

  const auto kind = take("technology.kind");
  if (!kind) throw ValidationError("technology.kind is required");
  cfg.technology = builtin_technology(tech_kind_from_string(*kind));
  take_double("technology.r_p_ohm", cfg.technology.r_p);
  take_double("technology.r_ap_ohm", cfg.technology.r_ap);
  if (auto v = take("technology.r_she_ohm")) {
    if (lower(*v) == "none")
      cfg.technology.r_she.reset();
    else
      cfg.technology.r_she = parse_double("technology.r_she_ohm", *v);
  }
  take_double("technology.i_crit_a", cfg.technology.i_crit);
  take_double("technology.t_sw_s", cfg.technology.t_sw);
  take_double("technology.t_clk_s", cfg.technology.t_clk);
  take_double("technology.cell_dx_m", cfg.technology.cell_dx);
  take_double("technology.cell_dy_m", cfg.technology.cell_dy);
  take_double("technology.cell_dz_m", cfg.technology.cell_dz);

  const auto size = take("array.size");
  const auto rows = take("array.rows");
  const auto cols = take("array.cols");
  if (size) {
    if (rows || cols) throw ParseError("array: give either size or rows/cols, not both");
    std::tie(cfg.array_rows, cfg.array_cols) = parse_array_size(*size);
  } else if (rows && cols) {
    cfg.array_rows = parse_small_int("array.rows", *rows);
    cfg.array_cols = parse_small_int("array.cols", *cols);
  } else {
    throw ValidationError("array: size or both rows and cols are required");
  }

  const auto name = take("kernel.name");
  if (!name) throw ValidationError("kernel.name is required");
  cfg.kernel.kind = kernel_kind_from_string(*name);
  take_int("kernel.bit_width", cfg.kernel.bit_width);
  take_int("kernel.vector_length", cfg.kernel.vector_length);
  take_int("kernel.neurons", cfg.kernel.neurons);
  if (auto v = take("kernel.seed")) {
    const auto s = parse_int("kernel.seed", *v);
    if (s < 0) throw ValidationError("kernel.seed must be >= 0");
    cfg.kernel.seed = static_cast<std::uint64_t>(s);
  }

  take_double("thermal.bulk_si_dz_m", cfg.stack.bulk_si_dz);
  take_double("thermal.tim_dz_m", cfg.stack.tim_dz);
  take_double("thermal.cu_dz_m", cfg.stack.cu_dz);
  take_double("thermal.k_si_w_mk", cfg.stack.k_si);
  take_double("thermal.k_tim_w_mk", cfg.stack.k_tim);
  take_double("thermal.k_cu_w_mk", cfg.stack.k_cu);
  take_double("thermal.r_convective_k_w", cfg.stack.r_convective);
  take_double("thermal.ambient_c", cfg.stack.ambient_c);
  take_int("thermal.coalesce", cfg.coalesce_factor);

  take_double("run.utilization", cfg.utilization);
  take_double("run.duty_cycle", cfg.duty_cycle);
  take_double("run.sim_time_s", cfg.sim_time);
  if (auto v = take("run.allow_short_sim")) cfg.allow_short_sim = parse_bool("run.allow_short_sim", *v);

  if (!values.empty()) throw ParseError("unknown key '" + values.begin()->first + "'");

  cfg.validate();
  return cfg;
}

SimulationConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return load_config(ss.str());
}

std::string serialize_config(const SimulationConfig& c) {
  std::ostringstream o;
  const auto& t = c.technology;
  const auto& s = c.stack;
  o << "[technology]\n"
    << "kind = " << to_string(t.kind) << "          # STT | SHE\n"
    << "r_p_ohm = " << fmt_double(t.r_p) << "     # parallel (logic 0) resistance, ohm\n"
    << "r_ap_ohm = " << fmt_double(t.r_ap) << "    # anti-parallel (logic 1) resistance, ohm\n";
  if (t.r_she) o << "r_she_ohm = " << fmt_double(*t.r_she) << "   # Hall channel resistance, ohm\n";
  else o << "r_she_ohm = none\n";
  o << "i_crit_a = " << fmt_double(t.i_crit) << "    # critical switching current, A\n"
    << "t_sw_s = " << fmt_double(t.t_sw) << "      # switching time, s\n"
    << "t_clk_s = " << fmt_double(t.t_clk) << "     # clock period, s\n"
    << "cell_dx_m = " << fmt_double(t.cell_dx) << "\n"
    << "cell_dy_m = " << fmt_double(t.cell_dy) << "\n"
    << "cell_dz_m = " << fmt_double(t.cell_dz) << "\n\n"
    << "[array]\n"
    << "rows = " << c.array_rows << "\n"
    << "cols = " << c.array_cols << "\n\n"
    << "[kernel]\n"
    << "name = " << to_string(c.kernel.kind) << "\n"
    << "bit_width = " << c.kernel.bit_width << "\n"
    << "vector_length = " << c.kernel.vector_length << "   # 0 = largest that fits\n"
    << "neurons = " << c.kernel.neurons << "         # 0 = derived from utilization\n"
    << "seed = " << c.kernel.seed << "\n\n"
    << "[thermal]\n"
    << "bulk_si_dz_m = " << fmt_double(s.bulk_si_dz) << "\n"
    << "tim_dz_m = " << fmt_double(s.tim_dz) << "\n"
    << "cu_dz_m = " << fmt_double(s.cu_dz) << "\n"
    << "k_si_w_mk = " << fmt_double(s.k_si) << "\n"
    << "k_tim_w_mk = " << fmt_double(s.k_tim) << "\n"
    << "k_cu_w_mk = " << fmt_double(s.k_cu) << "\n"
    << "r_convective_k_w = " << fmt_double(s.r_convective) << "\n"
    << "ambient_c = " << fmt_double(s.ambient_c) << "\n"
    << "coalesce = " << c.coalesce_factor << "\n\n"
    << "[run]\n"
    << "utilization = " << fmt_double(c.utilization) << "\n"
    << "duty_cycle = " << fmt_double(c.duty_cycle) << "\n"
    << "sim_time_s = " << fmt_double(c.sim_time) << "\n"
    << "allow_short_sim = " << (c.allow_short_sim ? "true" : "false") << "\n";
  return o.str();
}

}  // namespace cimtherm
