#pragma once

// Receding-horizon restoration: each interval draws fresh scenarios around
// the realized state, rebuilds the vehicles' time-space layers, solves the
// two-stage model, implements its first interval, re-optimizes the dispatch
// against the realized slice and advances the state.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mess/case.hpp"
#include "mess/formulation.hpp"
#include "mess/transport.hpp"

namespace mess::rolling {

enum class Mode { Dynamic, Allocation, NoMess };
Mode parse_mode(const std::string& s);
const char* to_string(Mode m);

/// The realized uncertainty of one run.
struct Realization {
  std::vector<std::vector<double>> load_p;  // [t][load] kW
  std::vector<std::vector<double>> load_q;
  std::vector<transport::RoadMask> road_up;          // [t]
  std::vector<std::vector<std::uint8_t>> branch_up;  // [t]
};

/// Loads sampled around the forecast and outage processes from the case,
/// then scripted events applied on top.
Realization realize(const io::Case& c, std::uint64_t seed);

struct VehicleState {
  transport::MessLocation loc;
  double energy{0.0};  // pu*h
};

struct RollingState {
  int t{0};
  std::vector<VehicleState> fleet;
  std::vector<double> mg_energy;
  std::vector<std::uint8_t> alpha;
};

RollingState initial_state(const io::Case& c, Mode mode);

/// Everything the model of one roll needs.
struct Window {
  int t{0};
  int length{1};
  bool depot_sinks{false};
  scenario::ScenarioSet scenarios;
  milp::HorizonInput input;
};

/// Scenario refresh and layer rebuild for the roll at `state.t`.
Window prepare_window(const io::Case& c, const RollingState& state, const Realization& real, Mode mode,
                      std::uint64_t seed, transport::TravelCache& cache);

struct VehicleRecord {
  std::string start;  // location label at interval start
  milp::ArcKey arc;
  std::string end;
  double energy_start{0.0};  // pu*h
  double energy_end{0.0};
  bool moving{false};
  std::optional<std::size_t> road_end;  // road being traversed at interval end
};

struct IntervalRecord {
  int t{0};
  int window{0};
  std::size_t scenarios{0};
  milp::Status status{milp::Status::Limit};
  double gap{0.0};
  double plan_objective{0.0};
  long nodes{0};
  bool hard_infeasible{false};
  bool shed_all{false};
  std::size_t routing_violations{0};
  milp::IntervalDispatch dispatch;
  std::vector<std::uint8_t> branch_up;  // realized
  std::vector<std::uint8_t> damaged;    // branches the plan kept out of service
  std::vector<double> load_p;           // realized, kW
  std::vector<double> mg_energy_start;  // pu*h
  std::vector<VehicleRecord> vehicles;
  milp::CostBreakdown cost;  // realized, dollars
  double demand_kw{0.0}, restored_kw{0.0};
  double critical_demand_kw{0.0}, critical_restored_kw{0.0};
};

struct TopologyChange {
  int t{0};
  std::string branch;
  bool closed{false};
};

struct Metrics {
  milp::CostBreakdown cost;
  double restoration_critical{100.0};
  double restoration_noncritical{100.0};
  double restoration_total{100.0};
  std::size_t fallbacks{0};
};

struct TimelineReport {
  std::string case_name;
  Mode mode{Mode::Dynamic};
  std::uint64_t seed{0};
  std::vector<IntervalRecord> intervals;
  std::vector<TopologyChange> topology;
};

struct RunOptions {
  Mode mode{Mode::Dynamic};
  std::uint64_t seed{1};
};

TimelineReport run(const io::Case& c, const RunOptions& opts);

/// Sums of the realized interval costs and restored energy shares.
Metrics compute_metrics(const TimelineReport& report);

/// Writes timeline.csv, metrics.csv, mess_trace.csv, topology_log.csv,
/// dispatch.csv and the SVG charts into `dir` (created if needed).
void write_bundle(const TimelineReport& report, const io::Case& c, const std::string& dir);

void write_timeline_csv(std::ostream& os, const TimelineReport& report);
void write_metrics_csv(std::ostream& os, const Metrics& m);
/// Metrics recomputed from a saved timeline.csv.
Metrics metrics_from_timeline(std::istream& is);

}  // namespace mess::rolling
