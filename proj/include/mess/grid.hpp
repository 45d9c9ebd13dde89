#pragma once

// Distribution feeders in per unit (1 MVA base), microgrids, the radiality
// oracle and LinDistFlow residuals.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace mess::grid {

inline constexpr double kBaseKva = 1000.0;  // 1 MVA

enum class LoadClass { Residential, Commercial, Industrial };
LoadClass parse_load_class(const std::string& s);
const char* to_string(LoadClass c);

struct Bus {
  std::string id;
  std::size_t feeder{0};
  double p_kw{0.0};  // nominal (peak) demand
  double q_kvar{0.0};
  LoadClass load_class{LoadClass::Residential};
  bool critical{false};
  double cost_per_kwh{0.0};  // interruption cost W_i
  double power_factor() const;
};

struct Branch {
  std::string id;
  std::size_t from{0};
  std::size_t to{0};
  double r_pu{0.0};
  double x_pu{0.0};
  double s_max_pu{0.0};
  bool switchable{false};
};

struct Microgrid {
  std::string id;
  std::size_t bus{0};
  double p_dg_max{0.0};  // pu
  double q_dg_max{0.0};  // pu
  double e_max{0.0};     // pu*h
  double e_min{0.0};
  double e_init{0.0};
  double cost_gen_per_kwh{0.0};
  double local_p_kw{0.0};  // peak local load
  double local_pf{1.0};
  LoadClass local_class{LoadClass::Residential};
  double local_cost_per_kwh{0.0};  // price of shedding local load
};

struct DistributionSystem {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Microgrid> microgrids;
  double v0{1.0};
  std::vector<double> v_min;  // per bus
  std::vector<double> v_max;

  /// Microgrid index per bus, or npos.
  std::vector<std::size_t> microgrid_at_bus() const;
  /// Loads in scenario order: feeder buses first, then microgrid local loads.
  std::size_t load_count() const { return buses.size() + microgrids.size(); }
  std::size_t local_load_index(std::size_t mg) const { return buses.size() + mg; }
};

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

/// Throws ValidationError on: bad indices, negative r/x, capacity <= 0,
/// voltage bounds not strictly around v0, feeders without a microgrid, two
/// microgrids on one bus, or fixed (non-switchable) branches that contain a
/// cycle or join two microgrids.
void validate(const DistributionSystem& ds);

/// Ohms -> per unit at the given line-to-line voltage.
double ohm_to_pu(double ohm, double base_kv);

/// Q = P * tan(acos pf); throws ConfigError unless 0 < pf <= 1.
double reactive_from_active(double p, double power_factor);

/// Buses that cannot reach any microgrid over branches marked available.
std::vector<std::uint8_t> dead_buses(const DistributionSystem& ds, const std::vector<std::uint8_t>& available);

struct RadialReport {
  bool ok{true};
  std::size_t closed{0};
  std::size_t expected{0};  // |N_live| - |M|
  std::vector<std::string> violations;
};

/// Disjoint-set check of a branch status vector: closed subgraph acyclic,
/// every energized component holds exactly one microgrid, closed count equals
/// |N| - |M| over live buses, and no closed branch touches a dead bus or a
/// branch marked unavailable. Empty `available` means all branches available.
RadialReport validate_radial(const DistributionSystem& ds, const std::vector<std::uint8_t>& alpha,
                             const std::vector<std::uint8_t>& available = {});

/// One interval of power-flow quantities, all per unit.
struct PowerFlowState {
  std::vector<double> p_g, q_g;  // bus injections
  std::vector<double> p_r, q_r;  // restored loads
  std::vector<double> p, q;      // branch flows, from -> to positive
  std::vector<double> v;
};

struct Residual {
  double balance{0.0};  // max |bus balance| over P and Q
  double voltage{0.0};  // max |voltage drop| on closed branches
  double max() const { return balance > voltage ? balance : voltage; }
};

/// v_from - v_to = (r P + x Q) / v0 on closed branches; injections minus
/// restored load equal net outflow at every bus.
Residual lindistflow_residual(const DistributionSystem& ds, const std::vector<std::uint8_t>& alpha,
                              const PowerFlowState& state);

/// Big-M of the fictitious flow bounds: the number of buses.
double fictitious_big_m(const DistributionSystem& ds);
/// Big-M of the voltage-drop disjunction.
double voltage_big_m(const DistributionSystem& ds);

}  // namespace mess::grid
