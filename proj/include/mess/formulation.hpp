#pragma once

// The two-stage restoration model over one prediction window: vehicle
// routing on time-space layers, storage operation, radial reconfiguration,
// LinDistFlow, microgrid dispatch, nonanticipativity and the expected cost.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mess/grid.hpp"
#include "mess/milp.hpp"
#include "mess/scenario.hpp"
#include "mess/tsn.hpp"

namespace mess::milp {

inline constexpr std::size_t kNone = static_cast<std::size_t>(-1);

struct MessSpec {
  std::string id;
  double p_ch_max{0.0};   // pu
  double p_dch_max{0.0};  // pu
  double capacity{0.0};   // pu*h
  double soc_min{0.1};
  double soc_max{0.9};
  double soc_init{0.5};
  double eta_ch{0.95};
  double eta_dch{0.95};
  double speed_kmh{30.0};
  double cost_bat_per_kwh{0.0};
  double cost_tran_per_h{0.0};

  double e_min() const { return capacity * soc_min; }
  double e_max() const { return capacity * soc_max; }
};

enum class TransportWeighting { Expected, Nominal };

struct FormulationOptions {
  /// Expected: transport cost of scenario s weighted by its probability;
  /// Nominal: unweighted, as the cost term is printed.
  TransportWeighting transport{TransportWeighting::Expected};
  /// Pairwise s/s+1 equalities instead of the probability-weighted average.
  bool pairwise_nonanticipativity{false};
  /// Adds the -M(2-a) <= f <= M(2-a) fictitious-flow rows.
  bool redundant_flow_bounds{false};
};

/// Identifies an arc across scenario layers of one vehicle.
struct ArcKey {
  std::string from;  // site label, "~" for an en-route start
  std::string to;
  int depart{0};
  int arrive{0};
  tsn::ArcKind kind{tsn::ArcKind::Holding};
  auto operator<=>(const ArcKey&) const = default;
};

ArcKey arc_key(const tsn::TimeSpaceNetwork& layer, std::size_t arc);

struct HorizonInput {
  const grid::DistributionSystem* grid{nullptr};
  std::vector<MessSpec> fleet;
  /// layers[w][s]
  std::vector<std::vector<tsn::TimeSpaceNetwork>> layers;
  /// Layer site label -> microgrid index; other sites cannot exchange power.
  std::map<std::string, std::size_t> microgrid_of_site;
  scenario::ScenarioSet scenarios;
  int horizon{1};
  double dt_h{1.0};
  std::vector<double> mess_energy;  // pu*h at window start
  std::vector<double> mg_energy;    // pu*h at window start
  FormulationOptions options;

  /// Branches treated as damaged on top of the scenarios' own outages.
  std::vector<std::uint8_t> extra_damaged;
  /// Fixed branch statuses (deterministic re-optimization); empty = free.
  std::vector<std::uint8_t> fixed_alpha;
  /// Per vehicle: arc forced on in the first interval; empty = free.
  std::vector<std::optional<ArcKey>> fixed_first_arc;
};

/// Variable ids of one scenario block; kNone where no variable exists.
struct ScenarioVars {
  std::vector<std::vector<std::size_t>> zeta;                 // [w][arc]
  std::vector<std::vector<std::vector<std::size_t>>> p_ch;    // [w][t][m]
  std::vector<std::vector<std::vector<std::size_t>>> p_dch;   // [w][t][m]
  std::vector<std::vector<std::size_t>> i_ch, i_dch, e_mess;  // [w][t]
  std::vector<std::size_t> alpha, fict;                       // [branch]
  std::vector<std::size_t> source;                            // [m]
  std::vector<std::vector<std::size_t>> p_r, v;               // [t][bus]
  std::vector<std::vector<std::size_t>> p, q;                 // [t][branch]
  std::vector<std::vector<std::size_t>> p_dg, q_dg, p_g, q_g, e_dg, local;  // [t][m]
};

struct BuiltModel {
  Model model;
  std::vector<ScenarioVars> vars;
  /// -1 switchable and free, otherwise the forced status.
  std::vector<signed char> alpha_fixed;
  std::vector<std::uint8_t> damaged;  // union over the window and scenarios
  std::vector<std::uint8_t> dead;     // buses cut off from every microgrid
  double flow_big_m{0.0};
  double voltage_big_m{0.0};
  int horizon{0};
  std::size_t scenarios{0};
};

/// Throws ConsistencyError on dimension mismatches, ConfigError on an empty
/// scenario set, and InfeasibleLayer when a forced first arc does not exist.
BuiltModel build_model(const HorizonInput& in);

/// Implemented quantities of one interval of one scenario block.
struct IntervalDispatch {
  std::vector<std::uint8_t> alpha;                  // [branch]
  std::vector<std::size_t> arc;                     // [w] arc index in layer (w, s)
  std::vector<std::vector<double>> p_ch, p_dch;     // [w][m] pu
  std::vector<double> e_mess;                       // [w] pu*h, end of interval
  std::vector<double> p_dg, q_dg, p_g, q_g, local;  // [m] pu
  std::vector<double> e_dg;                         // [m] end of interval
  std::vector<double> p_r, q_r, v;                  // [bus]
  std::vector<double> p, q;                         // [branch]
};

IntervalDispatch extract(const HorizonInput& in, const BuiltModel& bm, const std::vector<double>& x,
                         std::size_t s = 0, int t = 0);

/// Objective terms recomputed from a solution, in dollars.
struct CostBreakdown {
  double interruption{0.0};
  double generation{0.0};
  double battery{0.0};
  double transport{0.0};
  double total() const { return interruption + generation + battery + transport; }
};

/// Per vehicle and scenario: intervals whose cut does not hold exactly one
/// selected arc, plus one for every broken source-to-sink path.
std::size_t routing_violations(const HorizonInput& in, const BuiltModel& bm, const std::vector<double>& x);

CostBreakdown cost_breakdown(const HorizonInput& in, const BuiltModel& bm, const std::vector<double>& x);

/// Single scenario for re-optimization: `realized` in interval 0, the
/// probability-weighted mean load afterwards and the majority availability.
scenario::Scenario expected_scenario(const scenario::ScenarioSet& set, const scenario::Scenario& realized_first);

struct ReoptResult {
  Solution solution;
  IntervalDispatch dispatch;
  bool shed_all{false};  // no feasible dispatch; everything shed
};

/// Primal heuristic for B&B: once every non-topology binary is integral,
/// proposes the max-weight radial forest under the LP branch statuses.
Heuristic topology_heuristic(const HorizonInput& in, const BuiltModel& bm);

/// Builds the single-scenario model of `in` with branch statuses and the
/// first-interval arcs fixed, solves it and returns interval 0.
ReoptResult deterministic_reopt(HorizonInput in, const std::vector<std::uint8_t>& alpha,
                                const std::vector<ArcKey>& first_arcs, const SolveOptions& opts);

/// Interval-0 dispatch that sheds every load and leaves storage idle.
IntervalDispatch shed_all_dispatch(const HorizonInput& in, const std::vector<std::uint8_t>& alpha,
                                   const std::vector<std::size_t>& arcs);

}  // namespace mess::milp
