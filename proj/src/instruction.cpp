#include "cimtherm/instruction.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <sstream>

#include "cimtherm/error.hpp"

namespace cimtherm {

namespace {

int parse_index(std::string_view text, std::string_view what) {
  int v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || v < 0)
    throw ParseError(std::string(what) + ": bad index '" + std::string(text) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const auto b = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

/// key=value fields after the opcode; each key at most once.
std::map<std::string, std::string_view, std::less<>> fields(const std::vector<std::string_view>& toks,
                                                            std::size_t from) {
  std::map<std::string, std::string_view, std::less<>> out;
  for (std::size_t i = from; i < toks.size(); ++i) {
    const auto eq = toks[i].find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value, got '" + std::string(toks[i]) + "'");
    if (!out.emplace(std::string(toks[i].substr(0, eq)), toks[i].substr(eq + 1)).second)
      throw ParseError("duplicate field '" + std::string(toks[i].substr(0, eq)) + "'");
  }
  return out;
}

std::string_view need(const std::map<std::string, std::string_view, std::less<>>& f, std::string_view key) {
  auto it = f.find(key);
  if (it == f.end()) throw ParseError("missing field '" + std::string(key) + "'");
  return it->second;
}

bool parse_bit(std::string_view v) {
  if (v == "0") return false;
  if (v == "1") return true;
  throw ParseError("expected bit value 0 or 1, got '" + std::string(v) + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// LaneSet

LaneSet LaneSet::range(int first, int last) {
  LaneSet s;
  s.add(first, last);
  return s;
}

LaneSet LaneSet::from_lanes(std::vector<int> lanes) {
  std::sort(lanes.begin(), lanes.end());
  LaneSet s;
  for (int l : lanes) s.add(l, l);
  return s;
}

void LaneSet::add(int first, int last) {
  if (first < 0 || last < first) throw ExecutionError("invalid lane range");
  // Insert then merge overlapping / adjacent ranges.
  auto it = std::lower_bound(ranges_.begin(), ranges_.end(), first,
                             [](const Range& r, int v) { return r.first < v; });
  ranges_.insert(it, Range{first, last});
  std::vector<Range> merged;
  merged.reserve(ranges_.size());
  for (const auto& r : ranges_) {
    if (!merged.empty() && r.first <= merged.back().last + 1)
      merged.back().last = std::max(merged.back().last, r.last);
    else
      merged.push_back(r);
  }
  ranges_ = std::move(merged);
}

std::int64_t LaneSet::size() const {
  std::int64_t n = 0;
  for (const auto& r : ranges_) n += r.last - r.first + 1;
  return n;
}

bool LaneSet::contains(int lane) const {
  for (const auto& r : ranges_)
    if (lane >= r.first && lane <= r.last) return true;
  return false;
}

std::string LaneSet::to_string() const {
  std::string out;
  for (const auto& r : ranges_) {
    if (!out.empty()) out += ',';
    out += std::to_string(r.first);
    if (r.last != r.first) out += ".." + std::to_string(r.last);
  }
  return out;
}

LaneSet LaneSet::parse(std::string_view text) {
  LaneSet s;
  if (text.empty()) throw ParseError("empty lane set");
  for (auto part : split(text, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string_view::npos) {
      const int v = parse_index(part, "lanes");
      s.add(v, v);
    } else {
      const int a = parse_index(part.substr(0, dots), "lanes");
      const int b = parse_index(part.substr(dots + 2), "lanes");
      if (b < a) throw ParseError("descending lane range '" + std::string(part) + "'");
      s.add(a, b);
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Instructions

bool GateOp::operator==(const GateOp& o) const {
  if (dir != o.dir || gate != o.gate || output != o.output || !(lanes == o.lanes)) return false;
  const int n = arity(gate);
  return std::equal(inputs.begin(), inputs.begin() + n, o.inputs.begin());
}

GateOp make_gate(Direction dir, GateKind gate, std::initializer_list<int> inputs, int output,
                 LaneSet lanes) {
  if (static_cast<int>(inputs.size()) != arity(gate))
    throw ExecutionError(std::string(to_string(gate)) + ": wrong operand count");
  GateOp op;
  op.dir = dir;
  op.gate = gate;
  std::copy(inputs.begin(), inputs.end(), op.inputs.begin());
  op.output = output;
  op.lanes = std::move(lanes);
  return op;
}

GateOp col_gate(GateKind gate, std::initializer_list<int> input_rows, int output_row, LaneSet lanes) {
  return make_gate(Direction::Col, gate, input_rows, output_row, std::move(lanes));
}

GateOp row_gate(GateKind gate, std::initializer_list<int> input_cols, int output_col, LaneSet lanes) {
  return make_gate(Direction::Row, gate, input_cols, output_col, std::move(lanes));
}

std::int64_t lane_count(const Instruction& instr) {
  return std::visit(
      [](const auto& i) -> std::int64_t {
        using T = std::decay_t<decltype(i)>;
        if constexpr (std::is_same_v<T, GateOp> || std::is_same_v<T, BulkSet>)
          return i.lanes.size();
        else if constexpr (std::is_same_v<T, SerialWrite>)
          return 1;
        else
          return 0;
      },
      instr);
}

std::string format_instruction(const Instruction& instr) {
  std::ostringstream o;
  std::visit(
      [&](const auto& i) {
        using T = std::decay_t<decltype(i)>;
        if constexpr (std::is_same_v<T, GateOp>) {
          o << (i.dir == Direction::Row ? "ROW " : "COL ") << to_string(i.gate);
          const int n = arity(i.gate);
          if (n > 0) {
            o << " in=";
            for (int k = 0; k < n; ++k) o << (k ? "," : "") << i.inputs[k];
          }
          o << " out=" << i.output << " lanes=" << i.lanes.to_string();
        } else if constexpr (std::is_same_v<T, SerialWrite>) {
          o << "WRITE row=" << i.row << " col=" << i.col << " val=" << (i.value ? 1 : 0);
        } else if constexpr (std::is_same_v<T, BulkSet>) {
          if (i.dir == Direction::Col)
            o << "RBULK row=" << i.line;
          else
            o << "CBULK col=" << i.line;
          o << " lanes=" << i.lanes.to_string() << " val=" << (i.value ? 1 : 0);
        } else {
          o << "IDLE";
        }
      },
      instr);
  return o.str();
}

Instruction parse_instruction(std::string_view line) {
  const auto toks = tokens(line);
  if (toks.empty()) throw ParseError("empty instruction");
  const auto op = toks[0];
  if (op == "IDLE") {
    if (toks.size() != 1) throw ParseError("IDLE takes no fields");
    return Idle{};
  }
  if (op == "ROW" || op == "COL") {
    if (toks.size() < 2) throw ParseError("missing gate name");
    GateOp g;
    g.dir = op == "ROW" ? Direction::Row : Direction::Col;
    g.gate = gate_kind_from_string(toks[1]);
    const auto f = fields(toks, 2);
    const int n = arity(g.gate);
    std::size_t expected = 2;
    if (n > 0) {
      const auto ins = split(need(f, "in"), ',');
      if (static_cast<int>(ins.size()) != n)
        throw ParseError(std::string(to_string(g.gate)) + " expects " + std::to_string(n) + " inputs");
      for (int k = 0; k < n; ++k) g.inputs[k] = parse_index(ins[k], "in");
      expected = 3;
    }
    g.output = parse_index(need(f, "out"), "out");
    g.lanes = LaneSet::parse(need(f, "lanes"));
    if (f.size() != expected) throw ParseError("unexpected field in '" + std::string(line) + "'");
    return g;
  }
  if (op == "RBULK" || op == "CBULK") {
    const auto f = fields(toks, 1);
    BulkSet b;
    b.dir = op == "RBULK" ? Direction::Col : Direction::Row;
    b.line = parse_index(need(f, op == "RBULK" ? "row" : "col"), "line");
    b.lanes = LaneSet::parse(need(f, "lanes"));
    b.value = parse_bit(need(f, "val"));
    if (f.size() != 3) throw ParseError("unexpected field in '" + std::string(line) + "'");
    return b;
  }
  if (op == "WRITE") {
    const auto f = fields(toks, 1);
    SerialWrite w;
    w.row = parse_index(need(f, "row"), "row");
    w.col = parse_index(need(f, "col"), "col");
    w.value = parse_bit(need(f, "val"));
    if (f.size() != 3) throw ParseError("unexpected field in '" + std::string(line) + "'");
    return w;
  }
  throw ParseError("unknown opcode '" + std::string(op) + "'");
}

std::string format_program(const Program& program) {
  std::string out;
  for (const auto& i : program) {
    out += format_instruction(i);
    out += '\n';
  }
  return out;
}

Program parse_program(std::string_view text) {
  Program p;
  int lineno = 0;
  for (auto line : split(text, '\n')) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (tokens(line).empty()) continue;
    try {
      p.push_back(parse_instruction(line));
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return p;
}

}  // namespace cimtherm
