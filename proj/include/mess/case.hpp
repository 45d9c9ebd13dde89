#pragma once

// Case data: a JSON document that names CSV tables for roads, sites, buses,
// branches, microgrids, the fleet, load profiles, outage models and scripted
// events. Loading converts to per unit and cross-validates everything.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mess/formulation.hpp"
#include "mess/grid.hpp"
#include "mess/milp.hpp"
#include "mess/scenario.hpp"
#include "mess/transport.hpp"

namespace mess::io {

enum class ElementKind { Road, Branch };

/// Forces an element's realized status from `interval` on.
struct ScriptedEvent {
  int interval{0};
  ElementKind kind{ElementKind::Road};
  std::size_t index{0};
  bool up{false};
};

enum class ReoptPolicy { RemainingHorizon, SingleInterval };

struct Case {
  std::string name;
  bool synthetic{false};
  std::string directory;

  std::optional<transport::TransportNetwork> roads;
  grid::DistributionSystem grid;
  std::vector<milp::MessSpec> fleet;
  std::vector<std::size_t> fleet_depot;  // transport site index per vehicle

  int horizon{24};     // T_H
  int prediction{12};  // T_P
  double dt_h{1.0};

  /// Per load class: demand factor of the peak for each interval (wraps around).
  std::map<grid::LoadClass, std::vector<double>> profile;
  double critical_cost{10.0};
  double noncritical_cost{2.0};

  std::vector<scenario::AvailabilityModel> road_outage;    // per road
  std::vector<scenario::AvailabilityModel> branch_outage;  // per branch
  std::vector<ScriptedEvent> events;

  std::size_t scenarios_generated{2000};
  std::size_t scenarios_kept{10};
  double load_sd{0.02};

  milp::SolveOptions solver;
  milp::FormulationOptions formulation;
  ReoptPolicy reopt{ReoptPolicy::RemainingHorizon};

  const transport::TransportNetwork& net() const { return *roads; }
  /// Site id -> microgrid index for microgrid sites.
  std::map<std::string, std::size_t> microgrid_of_site() const;
  /// Forecast of every load (buses, then microgrid locals) over [t0, t0 + n).
  scenario::LoadForecast forecast(int t0, int n) const;
  double profile_factor(grid::LoadClass c, int t) const;
};

/// Reads and validates a case. Throws ValidationError carrying "file:line"
/// (or the file alone) for schema, reference and unit problems.
Case load_case(const std::string& json_path);

/// Cross-checks an in-memory case (also run by load_case).
void validate(const Case& c);

const char* to_string(ElementKind k);
ReoptPolicy parse_reopt(const std::string& s);

}  // namespace mess::io
