#include <random>

#include "cimtherm/error.hpp"
#include "cimtherm/instruction.hpp"
#include "doctest.h"

using namespace cimtherm;

TEST_CASE("lane sets merge and format") {
  LaneSet s;
  s.add(5, 9);
  s.add(1, 1);
  s.add(3, 3);
  s.add(10, 12);
  CHECK(s.to_string() == "1,3,5..12");
  CHECK(s.size() == 10);
  CHECK(s.contains(7));
  CHECK_FALSE(s.contains(4));
  CHECK(LaneSet::parse("1,3,5..12") == s);
  CHECK(LaneSet::from_lanes({3, 1, 2, 2}) == LaneSet::range(1, 3));
  CHECK_THROWS_AS(LaneSet::parse("4..2"), ParseError);
  CHECK_THROWS_AS(LaneSet::parse("a"), ParseError);
  CHECK_THROWS_AS(LaneSet::parse("-1"), ParseError);
}

TEST_CASE("instruction text forms") {
  CHECK(format_instruction(col_gate(GateKind::NAND2, {3, 7}, 9, LaneSet::range(0, 255))) ==
        "COL NAND2 in=3,7 out=9 lanes=0..255");
  CHECK(format_instruction(BulkSet{Direction::Col, 4, LaneSet::range(0, 499), true}) ==
        "RBULK row=4 lanes=0..499 val=1");
  CHECK(format_instruction(BulkSet{Direction::Row, 4, LaneSet::range(0, 9), false}) ==
        "CBULK col=4 lanes=0..9 val=0");
  CHECK(format_instruction(SerialWrite{3, 7, true}) == "WRITE row=3 col=7 val=1");
  CHECK(format_instruction(Idle{}) == "IDLE");
  CHECK(parse_instruction("ROW inv in=2 out=4 lanes=1") ==
        Instruction{row_gate(GateKind::NOT, {2}, 4, LaneSet::single(1))});
}

TEST_CASE("program parse errors carry the line") {
  CHECK_THROWS_AS(parse_instruction("COL NAND2 in=3 out=9 lanes=0"), ParseError);
  CHECK_THROWS_AS(parse_instruction("COL FOO in=3,4 out=9 lanes=0"), ParseError);
  CHECK_THROWS_AS(parse_instruction("WRITE row=1 col=2"), ParseError);
  CHECK_THROWS_AS(parse_instruction("JUMP 3"), ParseError);
  try {
    parse_program("IDLE\n# fine\n\nWRITE row=x col=1 val=1\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_CASE("random programs round-trip through text") {
  std::mt19937 rng(7);
  const auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
  for (int trial = 0; trial < 100; ++trial) {
    Program p;
    const int len = 1 + pick(40);
    for (int k = 0; k < len; ++k) {
      LaneSet lanes;
      const int nr = 1 + pick(4);
      for (int r = 0; r < nr; ++r) {
        const int a = pick(500);
        lanes.add(a, a + pick(20));
      }
      switch (pick(4)) {
        case 0: {
          GateOp g;
          g.dir = pick(2) ? Direction::Row : Direction::Col;
          g.gate = kLogicGates[pick(static_cast<int>(kLogicGates.size()))];
          for (int i = 0; i < arity(g.gate); ++i) g.inputs[i] = pick(1000);
          g.output = pick(1000);
          g.lanes = lanes;
          p.emplace_back(g);
          break;
        }
        case 1:
          p.emplace_back(SerialWrite{pick(512), pick(512), pick(2) == 1});
          break;
        case 2:
          p.emplace_back(BulkSet{pick(2) ? Direction::Row : Direction::Col, pick(512), lanes, pick(2) == 1});
          break;
        default:
          p.emplace_back(Idle{});
      }
    }
    CHECK(parse_program(format_program(p)) == p);
  }
}

TEST_CASE("lane count") {
  CHECK(lane_count(col_gate(GateKind::NOT, {0}, 1, LaneSet::range(0, 31))) == 32);
  CHECK(lane_count(SerialWrite{}) == 1);
  CHECK(lane_count(Idle{}) == 0);
}
