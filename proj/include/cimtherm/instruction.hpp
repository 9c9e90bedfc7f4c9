#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cimtherm/electrical.hpp"

namespace cimtherm {

/// Row: every active row executes the gate and operands are column indices.
/// Col: every active column executes the gate and operands are row indices.
enum class Direction : std::uint8_t { Row, Col };

/// Sorted, merged set of lane indices stored as inclusive ranges.
class LaneSet {
 public:
  struct Range {
    int first;
    int last;
    bool operator==(const Range&) const = default;
  };

  LaneSet() = default;
  static LaneSet range(int first, int last);
  static LaneSet single(int lane) { return range(lane, lane); }
  static LaneSet from_lanes(std::vector<int> lanes);

  void add(int first, int last);

  const std::vector<Range>& ranges() const { return ranges_; }
  std::int64_t size() const;
  bool empty() const { return ranges_.empty(); }
  int min() const { return ranges_.front().first; }
  int max() const { return ranges_.back().last; }
  bool contains(int lane) const;

  template <class F>
  void for_each(F&& f) const {
    for (const auto& r : ranges_)
      for (int i = r.first; i <= r.last; ++i) f(i);
  }

  std::string to_string() const;
  static LaneSet parse(std::string_view text);

  bool operator==(const LaneSet&) const = default;

 private:
  std::vector<Range> ranges_;
};

struct GateOp {
  Direction dir = Direction::Col;
  GateKind gate = GateKind::NOT;
  std::array<int, kMaxArity> inputs{};  // first arity(gate) entries are used
  int output = 0;
  LaneSet lanes;

  bool operator==(const GateOp& o) const;
};

struct SerialWrite {
  int row = 0;
  int col = 0;
  bool value = false;
  bool operator==(const SerialWrite&) const = default;
};

/// Writes `value` into cells of one line. With dir == Col the line is a row
/// and the lanes are columns; with dir == Row the line is a column.
struct BulkSet {
  Direction dir = Direction::Col;
  int line = 0;
  LaneSet lanes;
  bool value = false;
  bool operator==(const BulkSet&) const = default;
};

struct Idle {
  bool operator==(const Idle&) const = default;
};

using Instruction = std::variant<GateOp, SerialWrite, BulkSet, Idle>;
using Program = std::vector<Instruction>;

/// Convenience builders.
GateOp make_gate(Direction dir, GateKind gate, std::initializer_list<int> inputs, int output,
                 LaneSet lanes);
GateOp col_gate(GateKind gate, std::initializer_list<int> input_rows, int output_row, LaneSet lanes);
GateOp row_gate(GateKind gate, std::initializer_list<int> input_cols, int output_col, LaneSet lanes);

/// Number of cells that change hands in this instruction (lanes touched).
std::int64_t lane_count(const Instruction& instr);

/// Line-oriented text form, e.g.
///   COL NAND2 in=3,7 out=9 lanes=0..255
///   RBULK row=4 lanes=0..499 val=1
///   CBULK col=4 lanes=0..499 val=1
///   WRITE row=3 col=7 val=1
///   IDLE
std::string format_instruction(const Instruction& instr);
Instruction parse_instruction(std::string_view line);

std::string format_program(const Program& program);
/// '#' starts a comment; blank lines are ignored.
Program parse_program(std::string_view text);

}  // namespace cimtherm
