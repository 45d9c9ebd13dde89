#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mess/error.hpp"
#include "mess/milp.hpp"

using namespace mess::milp;

namespace {

Model toy() {
  Model m;
  auto a = m.add_binary("open_a", 3.0);
  auto b = m.add_binary("open_b", 2.5);
  auto f = m.add_continuous("flow", 0.0, 8.0, 0.125);
  auto g = m.add_continuous("slack", -kInf, kInf);
  auto h = m.add_continuous("fixed", 2.0, 2.0, 1.0);
  auto k = m.add_continuous("low", -3.0, kInf);
  m.add_row("cap_a", "capacity", {{f, 1.0}, {a, -5.0}}, Sense::Le, 0.0);
  m.add_row("demand", "balance", {{f, 1.0}, {g, 1.0}}, Sense::Eq, 4.0);
  m.add_row("cap_b", "capacity", {{f, 1.0}, {b, -0.1234567890123}}, Sense::Le, 1.0);
  m.add_row("floor", "balance", {{g, 1.0}, {h, 1.0}, {k, 1.0}}, Sense::Ge, -1e-3);
  m.add_offset(7.5);
  return m;
}

std::string text(const Model& m) {
  std::ostringstream os;
  write_mps(os, m);
  return os.str();
}

bool same(const Model& a, const Model& b) {
  if (a.vars().size() != b.vars().size() || a.rows().size() != b.rows().size() || a.offset() != b.offset())
    return false;
  for (std::size_t j = 0; j < a.vars().size(); ++j) {
    const auto &x = a.vars()[j], &y = b.vars()[j];
    if (x.name != y.name || x.kind != y.kind || x.lb != y.lb || x.ub != y.ub || x.cost != y.cost) return false;
  }
  // rows come back in marker order
  for (const auto& r : a.rows()) {
    auto i = b.find_row(r.name);
    if (!i) return false;
    const auto& s = b.rows()[*i];
    if (s.marker != r.marker || s.sense != r.sense || s.rhs != r.rhs || s.terms.size() != r.terms.size()) return false;
    for (std::size_t k = 0; k < r.terms.size(); ++k)
      if (s.terms[k].var != r.terms[k].var || s.terms[k].coef != r.terms[k].coef) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("empty model exports header and ENDATA only") {
  Model m;
  const auto s = text(m);
  CHECK(s.find("ROWS\n N  OBJ\nCOLUMNS\nRHS\nBOUNDS\nENDATA\n") != std::string::npos);
  std::istringstream in(s);
  auto back = read_mps(in);
  CHECK(back.vars().empty());
  CHECK(back.rows().empty());
}

TEST_CASE("toy model matches the golden file") {
  const std::string golden =
      "* rows 4 columns 6\n"
      "* ROW R0000001 capacity cap_a\n"
      "* ROW R0000002 capacity cap_b\n"
      "* ROW R0000003 balance demand\n"
      "* ROW R0000004 balance floor\n"
      "* COL C0000001 open_a\n"
      "* COL C0000002 open_b\n"
      "* COL C0000003 flow\n"
      "* COL C0000004 slack\n"
      "* COL C0000005 fixed\n"
      "* COL C0000006 low\n"
      "NAME          MESS\n"
      "ROWS\n"
      " N  OBJ\n"
      " L  R0000001\n"
      " L  R0000002\n"
      " E  R0000003\n"
      " G  R0000004\n"
      "COLUMNS\n"
      "    MARKER                 'MARKER'                 'INTORG'\n"
      "    C0000001  OBJ       3\n"
      "    C0000001  R0000001  -5\n"
      "    C0000002  OBJ       2.5\n"
      "    C0000002  R0000002  -0.1234567890123\n"
      "    MARKER                 'MARKER'                 'INTEND'\n"
      "    C0000003  OBJ       0.125\n"
      "    C0000003  R0000001  1\n"
      "    C0000003  R0000002  1\n"
      "    C0000003  R0000003  1\n"
      "    C0000004  R0000003  1\n"
      "    C0000004  R0000004  1\n"
      "    C0000005  OBJ       1\n"
      "    C0000005  R0000004  1\n"
      "    C0000006  R0000004  1\n"
      "RHS\n"
      "    RHS       OBJ       -7.5\n"
      "    RHS       R0000002  1\n"
      "    RHS       R0000003  4\n"
      "    RHS       R0000004  -0.001\n"
      "BOUNDS\n"
      " UP BND       C0000001  1\n"
      " UP BND       C0000002  1\n"
      " UP BND       C0000003  8\n"
      " FR BND       C0000004\n"
      " FX BND       C0000005  2\n"
      " LO BND       C0000006  -3\n"
      "ENDATA\n";
  CHECK(text(toy()) == golden);
  CHECK(text(toy()) == text(toy()));
}

TEST_CASE("export, import, export is byte-identical") {
  const auto first = text(toy());
  std::istringstream in(first);
  auto back = read_mps(in);
  CHECK(same(toy(), back));
  CHECK(text(back) == first);
}

TEST_CASE("round trip keeps full precision") {
  Model m;
  auto x = m.add_continuous("x", 0.1, 1.0 / 3.0, 2.0 / 7.0);
  m.add_row("r", "g", {{x, 3.141592653589793}}, Sense::Le, 1e-17);
  std::istringstream in(text(m));
  auto back = read_mps(in);
  CHECK(back.vars()[0].ub == 1.0 / 3.0);
  CHECK(back.vars()[0].cost == 2.0 / 7.0);
  CHECK(back.rows()[0].terms[0].coef == 3.141592653589793);
  CHECK(back.rows()[0].rhs == 1e-17);
}

TEST_CASE("malformed MPS reports the line") {
  std::istringstream in("ROWS\n X  R1\n");
  try {
    read_mps(in);
    FAIL("expected a validation error");
  } catch (const mess::ValidationError& e) {
    CHECK(e.where() == "mps:2");
  }
}

TEST_CASE("solution files round trip") {
  auto m = toy();
  std::vector<double> x{1, 0, 4.5, -0.5, 2, -3};
  std::ostringstream os;
  write_solution(os, m, x);
  std::istringstream in(os.str());
  CHECK(read_solution(in, m) == x);
  std::istringstream bad("nosuch 1\n");
  CHECK_THROWS_AS(read_solution(bad, m), mess::ValidationError);
}

TEST_CASE("export-only mode writes the file and reads an external solution") {
  auto m = toy();
  SolveOptions o;
  o.mode = SolverMode::ExportOnly;
  const auto tmp = std::filesystem::temp_directory_path();
  const auto mps = (tmp / "export_only_test.mps").string(), solf = (tmp / "export_only_test.sol").string();
  o.export_path = mps;
  auto none = solve(m, o);
  CHECK(none.status == Status::Limit);
  std::ostringstream sol;
  write_solution(sol, m, std::vector<double>{1, 0, 1, 3, 2, -3});
  {
    std::ofstream f(solf);
    f << sol.str();
  }
  o.solution_path = solf;
  auto got = solve(m, o);
  REQUIRE(got.status == Status::Feasible);
  CHECK(got.objective == doctest::Approx(3 + 0.125 + 2 + 7.5));
  std::ifstream f(mps);
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(ss.str() == text(m));
  f.close();
  std::filesystem::remove(mps);
  std::filesystem::remove(solf);
}

TEST_CASE("marker dump lists every row") {
  std::ostringstream os;
  write_markers_csv(os, toy());
  CHECK(os.str() ==
        "row,name,marker,sense,rhs,terms\n"
        "0,cap_a,capacity,<=,0,2\n"
        "1,demand,balance,=,4,2\n"
        "2,cap_b,capacity,<=,1,2\n"
        "3,floor,balance,>=,-0.001,3\n");
}
