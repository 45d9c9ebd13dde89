#pragma once

// Load-error sampling, two-state availability trajectories, Monte-Carlo
// scenario generation and greedy backward reduction.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace mess::scenario {

inline constexpr double kNever = std::numeric_limits<double>::infinity();

/// Which sampler a random sub-stream feeds.
enum class Stream : std::uint64_t { Load = 1, Road = 2, Branch = 3, Realization = 4 };

/// Independent generator for one (kind, scenario, element); adding elements
/// or scenarios never shifts another element's draws.
std::mt19937_64 substream(std::uint64_t seed, Stream kind, std::uint64_t scenario, std::uint64_t element);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Predicted loads over a window: p_kw[t][load], with one power factor per load.
struct LoadForecast {
  std::vector<std::vector<double>> p_kw;
  std::vector<double> power_factor;

  std::size_t horizon() const { return p_kw.size(); }
  std::size_t loads() const { return power_factor.size(); }
  double q_kvar(std::size_t t, std::size_t load) const;
};

/// Reactive power at constant power factor; throws ConfigError unless 0 < pf <= 1.
double q_from_p(double p, double power_factor);

struct LoadSample {
  std::vector<std::vector<double>> p_kw;  // [t][load]
  std::vector<std::vector<double>> q_kvar;
};

/// Normal(P, sd_ratio * P) per load and interval, truncated at 0; Q keeps the
/// power factor. The first `exact_intervals` intervals are returned unperturbed.
LoadSample sample_load(const LoadForecast& forecast, std::uint64_t seed, std::uint64_t scenario = 0,
                       double sd_ratio = 0.02, std::size_t exact_intervals = 0);

/// Alternating up/down renewal process with exponential sojourns. kNever as a
/// mean makes that state absorbing.
struct AvailabilityModel {
  double mean_up_h{kNever};
  double mean_down_h{1.0};
  bool initially_up{true};
};

void validate(const AvailabilityModel& m);

/// Status at each interval start (1 = up). Throws ConfigError for horizon < 1
/// or nonpositive means.
std::vector<std::uint8_t> sample_availability(const AvailabilityModel& model, std::size_t horizon, double dt_h,
                                              std::mt19937_64& rng);

struct Scenario {
  std::vector<std::vector<double>> load_p;          // [t][load] kW
  std::vector<std::vector<double>> load_q;          // [t][load] kvar
  std::vector<std::vector<std::uint8_t>> road_up;   // [t][road]
  std::vector<std::vector<std::uint8_t>> branch_up; // [t][branch]
  double probability{1.0};

  std::size_t horizon() const { return load_p.size(); }
  bool operator==(const Scenario&) const = default;
};

struct ScenarioSet {
  std::vector<Scenario> scenarios;

  std::size_t size() const { return scenarios.size(); }
  double total_probability() const;
  bool operator==(const ScenarioSet&) const = default;
};

/// Everything the sampler needs for one window.
struct UncertaintyModel {
  LoadForecast loads;
  std::vector<AvailabilityModel> roads;
  std::vector<AvailabilityModel> branches;
  double dt_h{1.0};
  double sd_ratio{0.02};
  std::size_t exact_intervals{0};
};

/// n equiprobable joint trajectories; elements and loads are independent.
ScenarioSet generate_scenarios(const UncertaintyModel& model, std::size_t n, std::uint64_t seed);

/// Weights of the reduction distance: each load contributes load_scale * kW
/// (dt gives kWh); each availability flag contributes flag_weight.
struct DistanceWeights {
  double load_scale{1.0};
  double flag_weight{1.0};
};

/// Default: loads in kWh and flags worth one interval of peak system load.
DistanceWeights default_weights(const UncertaintyModel& model);

std::vector<double> features(const Scenario& s, const DistanceWeights& w);
double distance(const Scenario& a, const Scenario& b, const DistanceWeights& w);

/// Repeatedly deletes argmin_s gamma_s * (distance to nearest survivor),
/// lowest index on ties, moving its probability to that nearest survivor
/// (lowest index on ties). Survivors keep their original order.
ScenarioSet reduce_scenarios(const ScenarioSet& set, std::size_t k, const DistanceWeights& w);

/// Columns scenario,interval,element,value. Elements: probability, p<i>,
/// q<i>, road<k>, branch<k>. Values are printed shortest round-trip.
void write_csv(std::ostream& os, const ScenarioSet& set);
ScenarioSet read_csv(std::istream& is);

}  // namespace mess::scenario
