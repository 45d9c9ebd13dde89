#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mess/error.hpp"
#include "mess/rolling.hpp"

using namespace mess;
using namespace mess::rolling;

namespace {

io::Case toy2() { return io::load_case(std::string(MESS_CASES_DIR) + "/toy2/case.json"); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double first_plan(const io::Case& c, Mode mode) {
  const auto real = realize(c, 3);
  auto state = initial_state(c, mode);
  transport::TravelCache cache(c.net());
  const auto win = prepare_window(c, state, real, mode, 3, cache);
  const auto bm = milp::build_model(win.input);
  auto o = c.solver;
  o.heuristic = milp::topology_heuristic(win.input, bm);
  const auto sol = milp::solve(bm.model, o);
  REQUIRE(sol.status == milp::Status::Optimal);
  return sol.objective;
}

IntervalRecord interval(double demand, double restored, double crit_demand, double crit_restored) {
  IntervalRecord r;
  r.demand_kw = demand;
  r.restored_kw = restored;
  r.critical_demand_kw = crit_demand;
  r.critical_restored_kw = crit_restored;
  return r;
}

}  // namespace

TEST_CASE("modes parse and print") {
  for (auto m : {Mode::Dynamic, Mode::Allocation, Mode::NoMess}) CHECK(parse_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_mode("static"), ConfigError);
}

TEST_CASE("a one-interval horizon is a single stochastic solve") {
  auto c = toy2();
  c.horizon = 1;
  c.prediction = 1;
  const auto rep = run(c, {Mode::Dynamic, 1});
  REQUIRE(rep.intervals.size() == 1);
  CHECK(rep.intervals[0].window == 1);
  CHECK(rep.intervals[0].status == milp::Status::Optimal);
  CHECK_FALSE(rep.intervals[0].hard_infeasible);
}

TEST_CASE("the window shrinks at the end of the horizon") {
  auto c = toy2();
  c.horizon = 3;
  c.prediction = 2;
  const auto rep = run(c, {Mode::Dynamic, 1});
  REQUIRE(rep.intervals.size() == 3);
  CHECK(rep.intervals[0].window == 2);
  CHECK(rep.intervals[1].window == 2);
  CHECK(rep.intervals[2].window == 1);
}

TEST_CASE("pinning the fleet never lowers the first plan's cost") {
  const auto c = toy2();
  const double dyn = first_plan(c, Mode::Dynamic);
  const double alloc = first_plan(c, Mode::Allocation);
  const double none = first_plan(c, Mode::NoMess);
  const double tol = 1e-6 * std::max(1.0, std::abs(none));
  CHECK(dyn <= alloc + tol);
  CHECK(alloc <= none + tol);
}

TEST_CASE("a run keeps vehicle state continuous and in bounds") {
  const auto c = toy2();
  const auto rep = run(c, {Mode::Dynamic, 2});
  REQUIRE(rep.intervals.size() == static_cast<std::size_t>(c.horizon));
  const auto& spec = c.fleet[0];
  for (std::size_t t = 0; t < rep.intervals.size(); ++t) {
    const auto& v = rep.intervals[t].vehicles.at(0);
    CHECK(v.energy_end >= spec.soc_min * spec.capacity - 1e-9);
    CHECK(v.energy_end <= spec.soc_max * spec.capacity + 1e-9);
    CHECK(rep.intervals[t].routing_violations == 0);
    if (t + 1 < rep.intervals.size()) {
      const auto& next = rep.intervals[t + 1].vehicles.at(0);
      CHECK(next.start == v.end);
      CHECK(next.energy_start == doctest::Approx(v.energy_end).epsilon(1e-12));
    }
  }
}

TEST_CASE("without vehicles there is no battery or transport cost") {
  const auto rep = run(toy2(), {Mode::NoMess, 1});
  for (const auto& r : rep.intervals) CHECK(r.vehicles.empty());
  const auto m = compute_metrics(rep);
  CHECK(m.cost.battery == 0.0);
  CHECK(m.cost.transport == 0.0);
}

TEST_CASE("a road failing under a moving vehicle sends it back and replans") {
  auto c = toy2();
  c.horizon = 6;
  c.prediction = 3;
  c.fleet[0].speed_kmh = 15;  // the 25 km road to A takes two intervals
  const auto free_run = run(c, {Mode::Dynamic, 1});
  const auto& v0 = free_run.intervals[0].vehicles[0];
  REQUIRE(v0.road_end.has_value());
  const auto road = *v0.road_end;

  c.events.push_back({1, io::ElementKind::Road, road, false});
  const auto rep = run(c, {Mode::Dynamic, 1});
  // same decision before the failure
  CHECK(rep.intervals[0].vehicles[0].arc == v0.arc);
  const auto& origin = rep.intervals[0].vehicles[0].arc.from;
  const auto& v1 = rep.intervals[1].vehicles[0];
  CHECK(v1.start == "~");
  CHECK(v1.arc.kind == tsn::ArcKind::Committed);
  CHECK(v1.arc.to == origin);
  CHECK(v1.end == origin);
  const auto& v2 = rep.intervals[2].vehicles[0];
  CHECK(v2.start == origin);
  CHECK(v2.arc.kind != tsn::ArcKind::Committed);
  CHECK(rep.intervals[2].status == milp::Status::Optimal);
}

TEST_CASE("metrics add interval costs and restored energy") {
  TimelineReport rep;
  auto a = interval(100.0, 50.0, 40.0, 40.0);
  a.cost = {10.0, 1.0, 2.0, 3.0};
  a.shed_all = true;
  auto b = interval(100.0, 70.0, 60.0, 30.0);
  b.cost = {5.0, 0.5, 0.0, 0.0};
  rep.intervals = {a, b};
  const auto m = compute_metrics(rep);
  CHECK(m.cost.interruption == doctest::Approx(15.0));
  CHECK(m.cost.generation == doctest::Approx(1.5));
  CHECK(m.cost.total() == doctest::Approx(21.5));
  CHECK(m.restoration_total == doctest::Approx(60.0));
  CHECK(m.restoration_critical == doctest::Approx(70.0));
  CHECK(m.restoration_noncritical == doctest::Approx(50.0));
  CHECK(m.fallbacks == 1);
}

TEST_CASE("restoration percentages at the extremes") {
  TimelineReport all, none, empty;
  all.intervals = {interval(80.0, 80.0, 20.0, 20.0)};
  none.intervals = {interval(80.0, 0.0, 20.0, 0.0)};
  empty.intervals = {interval(0.0, 0.0, 0.0, 0.0)};
  CHECK(compute_metrics(all).restoration_total == doctest::Approx(100.0));
  CHECK(compute_metrics(all).restoration_noncritical == doctest::Approx(100.0));
  CHECK(compute_metrics(none).restoration_total == 0.0);
  CHECK(compute_metrics(none).restoration_critical == 0.0);
  CHECK(compute_metrics(empty).restoration_total == 100.0);
}

TEST_CASE("metrics survive a timeline round trip") {
  const auto rep = run(toy2(), {Mode::Dynamic, 1});
  std::stringstream ss;
  write_timeline_csv(ss, rep);
  const auto m = metrics_from_timeline(ss);
  const auto ref = compute_metrics(rep);
  CHECK(m.cost.total() == doctest::Approx(ref.cost.total()).epsilon(1e-6));
  CHECK(m.restoration_total == doctest::Approx(ref.restoration_total).epsilon(1e-6));
  CHECK(m.restoration_critical == doctest::Approx(ref.restoration_critical).epsilon(1e-6));
  CHECK(m.fallbacks == ref.fallbacks);
}

TEST_CASE("two runs write identical bundles") {
  const auto c = toy2();
  const auto base = std::filesystem::temp_directory_path() / "mess_rolling_bundle";
  std::filesystem::remove_all(base);
  for (const char* tag : {"a", "b"}) write_bundle(run(c, {Mode::Dynamic, 7}), c, (base / tag).string());
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(base / "a")) {
    ++files;
    CHECK_MESSAGE(slurp(e.path()) == slurp(base / "b" / e.path().filename()), e.path().filename().string());
  }
  CHECK(files >= 7);
  std::filesystem::remove_all(base);
}
