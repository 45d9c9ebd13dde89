#include "mess/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "mess/error.hpp"

namespace mess::scenario {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double draw_sojourn(double mean, std::mt19937_64& rng) {
  if (std::isinf(mean)) return kNever;
  return std::exponential_distribution<double>(1.0 / mean)(rng);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return splitmix64(splitmix64(a) ^ (b * 0xd1b54a32d192ed03ull)); }

std::mt19937_64 substream(std::uint64_t seed, Stream kind, std::uint64_t scenario, std::uint64_t element) {
  auto h = mix_seed(seed, static_cast<std::uint64_t>(kind));
  h = mix_seed(h, scenario);
  h = mix_seed(h, element);
  return std::mt19937_64(h);
}

double q_from_p(double p, double power_factor) {
  if (!(power_factor > 0.0 && power_factor <= 1.0))
    throw ConfigError(fmt::format("power factor must lie in (0, 1], got {}", power_factor));
  if (power_factor == 1.0 || p == 0.0) return 0.0;
  return p * std::tan(std::acos(power_factor));
}

double LoadForecast::q_kvar(std::size_t t, std::size_t load) const { return q_from_p(p_kw[t][load], power_factor[load]); }

LoadSample sample_load(const LoadForecast& forecast, std::uint64_t seed, std::uint64_t scenario, double sd_ratio,
                       std::size_t exact_intervals) {
  if (sd_ratio < 0.0) throw ConfigError("load error ratio must be nonnegative");
  const auto H = forecast.horizon();
  const auto L = forecast.loads();
  LoadSample out;
  out.p_kw.assign(H, std::vector<double>(L, 0.0));
  out.q_kvar.assign(H, std::vector<double>(L, 0.0));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < L; ++i) {
    auto rng = substream(seed, Stream::Load, scenario, i);
    for (std::size_t t = 0; t < H; ++t) {
      const double mean = forecast.p_kw[t][i];
      if (mean < 0.0) throw ConfigError(fmt::format("negative load forecast {} for load {}", mean, i));
      // Always draw, so the number of exact intervals does not shift later draws.
      const double z = normal(rng);
      const double p = t < exact_intervals ? mean : std::max(0.0, mean + sd_ratio * mean * z);
      out.p_kw[t][i] = p;
      out.q_kvar[t][i] = q_from_p(p, forecast.power_factor[i]);
    }
  }
  return out;
}

void validate(const AvailabilityModel& m) {
  if (!(m.mean_up_h > 0.0) || !(m.mean_down_h > 0.0))
    throw ConfigError(fmt::format("mean uptime and downtime must be positive, got {} and {}", m.mean_up_h, m.mean_down_h));
}

std::vector<std::uint8_t> sample_availability(const AvailabilityModel& model, std::size_t horizon, double dt_h,
                                              std::mt19937_64& rng) {
  if (horizon < 1) throw ConfigError("availability horizon must be at least one interval");
  if (!(dt_h > 0.0)) throw ConfigError("interval length must be positive");
  validate(model);
  std::vector<std::uint8_t> out(horizon, 0);
  bool up = model.initially_up;
  double next = draw_sojourn(up ? model.mean_up_h : model.mean_down_h, rng);
  for (std::size_t t = 0; t < horizon; ++t) {
    const double now = static_cast<double>(t) * dt_h;
    while (next <= now) {
      up = !up;
      next += draw_sojourn(up ? model.mean_up_h : model.mean_down_h, rng);
    }
    out[t] = up ? 1 : 0;
  }
  return out;
}

double ScenarioSet::total_probability() const {
  double s = 0.0;
  for (const auto& sc : scenarios) s += sc.probability;
  return s;
}

ScenarioSet generate_scenarios(const UncertaintyModel& model, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("scenario count must be at least 1");
  const auto H = model.loads.horizon();
  if (H < 1) throw ConfigError("scenario horizon must be at least one interval");
  ScenarioSet set;
  set.scenarios.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    auto& sc = set.scenarios[s];
    auto loads = sample_load(model.loads, seed, s, model.sd_ratio, model.exact_intervals);
    sc.load_p = std::move(loads.p_kw);
    sc.load_q = std::move(loads.q_kvar);
    auto flags = [&](const std::vector<AvailabilityModel>& elems, Stream kind) {
      std::vector<std::vector<std::uint8_t>> out(H, std::vector<std::uint8_t>(elems.size(), 1));
      for (std::size_t e = 0; e < elems.size(); ++e) {
        auto rng = substream(seed, kind, s, e);
        auto traj = sample_availability(elems[e], H, model.dt_h, rng);
        for (std::size_t t = 0; t < H; ++t) out[t][e] = traj[t];
      }
      return out;
    };
    sc.road_up = flags(model.roads, Stream::Road);
    sc.branch_up = flags(model.branches, Stream::Branch);
    sc.probability = 1.0 / static_cast<double>(n);
  }
  return set;
}

DistanceWeights default_weights(const UncertaintyModel& model) {
  double peak = 0.0;
  for (const auto& row : model.loads.p_kw) {
    double total = 0.0;
    for (double p : row) total += p;
    peak = std::max(peak, total);
  }
  return {model.dt_h, peak > 0.0 ? peak * model.dt_h : 1.0};
}

std::vector<double> features(const Scenario& s, const DistanceWeights& w) {
  std::vector<double> f;
  for (const auto& row : s.load_p)
    for (double p : row) f.push_back(w.load_scale * p);
  for (const auto& row : s.road_up)
    for (auto u : row) f.push_back(w.flag_weight * u);
  for (const auto& row : s.branch_up)
    for (auto u : row) f.push_back(w.flag_weight * u);
  return f;
}

namespace {

double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ConsistencyError("scenarios of different shape cannot be compared");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

double distance(const Scenario& a, const Scenario& b, const DistanceWeights& w) {
  return euclid(features(a, w), features(b, w));
}

ScenarioSet reduce_scenarios(const ScenarioSet& set, std::size_t k, const DistanceWeights& w) {
  const std::size_t n = set.size();
  if (k < 1 || k > n) throw ConfigError(fmt::format("cannot reduce {} scenarios to {}", n, k));
  if (k == n) return set;

  std::vector<std::vector<double>> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = features(set.scenarios[i], w);
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = euclid(f[i], f[j]);

  std::vector<char> alive(n, 1);
  std::vector<double> gamma(n);
  for (std::size_t i = 0; i < n; ++i) gamma[i] = set.scenarios[i].probability;
  std::vector<std::size_t> nn(n, 0);
  auto nearest = [&](std::size_t i) {
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !alive[j]) continue;
      if (best == n || d[i * n + j] < d[i * n + best]) best = j;
    }
    return best;
  };
  for (std::size_t i = 0; i < n; ++i) nn[i] = nearest(i);

  for (std::size_t left = n; left > k; --left) {
    std::size_t victim = n;
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      const double cost = gamma[i] * d[i * n + nn[i]];
      if (victim == n || cost < best) {
        victim = i;
        best = cost;
      }
    }
    const auto heir = nn[victim];
    gamma[heir] += gamma[victim];
    alive[victim] = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (alive[i] && nn[i] == victim) nn[i] = nearest(i);
  }

  ScenarioSet out;
  for (std::size_t i = 0; i < n; ++i)
    if (alive[i]) {
      out.scenarios.push_back(set.scenarios[i]);
      out.scenarios.back().probability = gamma[i];
    }
  return out;
}

void write_csv(std::ostream& os, const ScenarioSet& set) {
  os << "scenario,interval,element,value\n";
  for (std::size_t s = 0; s < set.size(); ++s) {
    const auto& sc = set.scenarios[s];
    os << fmt::format("{},0,probability,{}\n", s, sc.probability);
    for (std::size_t t = 0; t < sc.horizon(); ++t) {
      for (std::size_t i = 0; i < sc.load_p[t].size(); ++i) os << fmt::format("{},{},p{},{}\n", s, t, i, sc.load_p[t][i]);
      for (std::size_t i = 0; i < sc.load_q[t].size(); ++i) os << fmt::format("{},{},q{},{}\n", s, t, i, sc.load_q[t][i]);
      for (std::size_t k = 0; k < sc.road_up[t].size(); ++k)
        os << fmt::format("{},{},road{},{}\n", s, t, k, static_cast<int>(sc.road_up[t][k]));
      for (std::size_t k = 0; k < sc.branch_up[t].size(); ++k)
        os << fmt::format("{},{},branch{},{}\n", s, t, k, static_cast<int>(sc.branch_up[t][k]));
    }
  }
}

ScenarioSet read_csv(std::istream& is) {
  struct Row {
    std::size_t s, t, idx;
    int kind;  // 0 probability, 1 p, 2 q, 3 road, 4 branch
    double value;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t S = 0, H = 0, L = 0, R = 0, B = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "scenario,interval,element,value") throw ValidationError("unexpected scenario CSV header", "line 1");
      continue;
    }
    std::stringstream ss(line);
    std::string a, b, c, v;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ',') || !std::getline(ss, v))
      throw ValidationError("expected four columns", fmt::format("line {}", line_no));
    Row r{};
    try {
      r.s = std::stoul(a);
      r.t = std::stoul(b);
      r.value = std::strtod(v.c_str(), nullptr);
      auto take = [&](const char* prefix, int kind) {
        const std::string p(prefix);
        if (c.rfind(p, 0) != 0 || c.size() == p.size()) return false;
        r.kind = kind;
        r.idx = std::stoul(c.substr(p.size()));
        return true;
      };
      if (c == "probability") {
        r.kind = 0;
        r.idx = 0;
      } else if (!(take("p", 1) || take("q", 2) || take("road", 3) || take("branch", 4))) {
        throw ValidationError(fmt::format("unknown element '{}'", c), fmt::format("line {}", line_no));
      }
    } catch (const std::logic_error&) {
      throw ValidationError("malformed number", fmt::format("line {}", line_no));
    }
    S = std::max(S, r.s + 1);
    if (r.kind != 0) H = std::max(H, r.t + 1);
    if (r.kind == 1 || r.kind == 2) L = std::max(L, r.idx + 1);
    if (r.kind == 3) R = std::max(R, r.idx + 1);
    if (r.kind == 4) B = std::max(B, r.idx + 1);
    rows.push_back(r);
  }
  ScenarioSet set;
  set.scenarios.resize(S);
  for (auto& sc : set.scenarios) {
    sc.load_p.assign(H, std::vector<double>(L, 0.0));
    sc.load_q.assign(H, std::vector<double>(L, 0.0));
    sc.road_up.assign(H, std::vector<std::uint8_t>(R, 1));
    sc.branch_up.assign(H, std::vector<std::uint8_t>(B, 1));
  }
  for (const auto& r : rows) {
    auto& sc = set.scenarios[r.s];
    switch (r.kind) {
      case 0: sc.probability = r.value; break;
      case 1: sc.load_p[r.t][r.idx] = r.value; break;
      case 2: sc.load_q[r.t][r.idx] = r.value; break;
      case 3: sc.road_up[r.t][r.idx] = r.value != 0.0; break;
      default: sc.branch_up[r.t][r.idx] = r.value != 0.0; break;
    }
  }
  return set;
}

}  // namespace mess::scenario
