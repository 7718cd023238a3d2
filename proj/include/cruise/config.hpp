#pragma once

/// Scenario configuration as JSON (field names carry their units), the
/// built-in "paper-s5" preset, and JSON output of summary reports.

#include "cruise/simulator.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace cruise {

using json = nlohmann::ordered_json;

namespace detail {

inline const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw ConfigError("field '" + path + "': expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError("field '" + path + "." + key + "': missing");
  return *it;
}

template <class T>
T read(const json& j, const char* key, const std::string& path) {
  const json& v = field(j, key, path);
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("field '" + path + "." + key + "': " + e.what());
  }
}

template <class T>
T read_or(const json& j, const char* key, const std::string& path, T fallback) {
  if (!j.is_object()) throw ConfigError("field '" + path + "': expected an object");
  return j.contains(key) ? read<T>(j, key, path) : fallback;
}

inline const json& array_field(const json& j, const char* key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_array()) throw ConfigError("field '" + path + "." + key + "': expected an array");
  return v;
}

inline Window read_window(const json& j, const char* key, const std::string& path) {
  const auto v = read<std::vector<double>>(j, key, path);
  if (v.size() != 2) throw ConfigError("field '" + path + "." + key + "': expected [start, end]");
  return {v[0], v[1]};
}

inline std::string at(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

inline json tolerance_set_json(const ToleranceSet& t) {
  return {{"xtilde_m", t.xtilde_m},
          {"vtilde_mps", t.vtilde_mps},
          {"gap_m", t.gap_m},
          {"gap_velocity_mps", t.gap_velocity_mps}};
}

inline ToleranceSet read_tolerance_set(const json& j, const std::string& path, ToleranceSet d) {
  return {read_or(j, "xtilde_m", path, d.xtilde_m), read_or(j, "vtilde_mps", path, d.vtilde_mps),
          read_or(j, "gap_m", path, d.gap_m),
          read_or(j, "gap_velocity_mps", path, d.gap_velocity_mps)};
}

}  // namespace detail

inline json to_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["topology"] = {{"carriages_per_train", c.consist.topology.carriages_per_train}};
  const auto& l = c.consist.line;
  j["line"] = {{"davis",
                {{"c0_N_per_kg", l.davis.c0},
                 {"c1_Ns_per_m_kg", l.davis.c1},
                 {"c2_Ns2_per_m2_kg", l.davis.c2}}},
               {"coupler",
                {{"stiffness_N_per_m", l.coupler.stiffness},
                 {"damping_Ns_per_m", l.coupler.damping},
                 {"spacing_m", l.coupler.spacing}}}};
  json cars = json::array();
  for (const auto& p : c.consist.carriages) {
    const auto& f = p.fault;
    cars.push_back({{"mass_kg", p.mass},
                    {"actuator_rate_per_s", p.actuator_rate},
                    {"fault",
                     {{"omega_rad_per_s", f.omega},
                      {"upsilon_Nps", f.upsilon},
                      {"nu_Nps", f.nu},
                      {"const_amplitude", f.const_amplitude},
                      {"periodic_amplitude", f.periodic_amplitude},
                      {"phase_rad", f.phase},
                      {"const_window_s", {f.const_window.start, f.const_window.end}},
                      {"periodic_window_s", {f.periodic_window.start, f.periodic_window.end}}}}});
  }
  j["carriages"] = cars;
  const auto& k = c.constraints;
  j["constraints"] = {{"gamma1_m", k.gamma1},
                      {"gamma2_m", k.gamma2},
                      {"service_distance_m", k.service_distance},
                      {"sigma1_mps", k.sigma1},
                      {"sigma2_mps", k.sigma2}};
  j["follower_gains"] = {
      {"l1_per_s", c.follower.l1}, {"l2_per_s", c.follower.l2}, {"l3_per_s", c.follower.l3}};
  j["head_gains"] = {{"ell1_per_s", c.head.ell1},
                     {"ell2", c.head.ell2},
                     {"ell3", c.head.ell3},
                     {"ell4", c.head.ell4}};
  json eig = json::array();
  for (const auto& e : c.observer.eigenvalues) eig.push_back({e.real(), e.imag()});
  j["observer"] = {{"eigenvalues_per_s", eig}, {"k1_eigenvalue_per_s", c.observer.k1_eigenvalue}};
  if (c.observer.gains_override) {
    const auto& g = *c.observer.gains_override;
    j["observer"]["gains_override"] = {
        {"k1_per_s", g.k1}, {"K", std::vector<double>(g.K.data(), g.K.data() + 5)}};
  }
  json phases = json::array();
  for (const auto& p : c.reference.phases)
    phases.push_back({{"duration_s", p.duration}, {"jerk_mps3", p.jerk}});
  j["reference"] = {{"x0_m", c.reference.x0},
                    {"v0_mps", c.reference.v0},
                    {"w0_mps2", c.reference.w0},
                    {"v_max_mps", c.reference.v_max},
                    {"phases", phases}};
  json init = json::array();
  for (const auto& s : c.initial) init.push_back({{"x_m", s.x}, {"v_mps", s.v}, {"w_mps2", s.w}});
  j["initial"] = init;
  if (!c.observer_initial.empty()) {
    json obs = json::array();
    for (const auto& s : c.observer_initial)
      obs.push_back({{"x_m", s.x},
                     {"v_mps", s.v},
                     {"w_mps2", s.w},
                     {"f", {s.f(0), s.f(1), s.f(2)}}});
    j["observer_initial"] = obs;
  }
  if (c.step_s) j["step_s"] = *c.step_s;
  j["duration_s"] = c.duration_s;
  j["decimate"] = c.decimate;
  j["noise"] = {{"enabled", c.noise.enabled},
                {"variance_m2_per_s6", c.noise.variance},
                {"seed", c.noise.seed}};
  j["representation"] = to_string(c.representation);
  j["abort_on_violation"] = c.abort_on_violation;
  j["tolerances"] = {{"tail_window_s", c.tolerances.tail_window_s},
                     {"clean", detail::tolerance_set_json(c.tolerances.clean)},
                     {"noisy", detail::tolerance_set_json(c.tolerances.noisy)},
                     {"observer",
                      {{"settle_window_s", c.tolerances.observer.settle_window_s},
                       {"min_interval_s", c.tolerances.observer.min_interval_s},
                       {"fault_rel", c.tolerances.observer.fault_rel},
                       {"accel_abs_mps2", c.tolerances.observer.accel_abs}}}};
  return j;
}

/// Structural parse only; feasibility is checked by validate_config.
inline ScenarioConfig from_json(const json& j) {
  using detail::array_field;
  using detail::at;
  using detail::field;
  using detail::read;
  using detail::read_or;
  ScenarioConfig c;
  c.name = read_or<std::string>(j, "name", "", "");
  c.consist.topology.carriages_per_train = read<std::vector<std::size_t>>(
      field(j, "topology", ""), "carriages_per_train", ".topology");

  const json& davis = field(field(j, "line", ""), "davis", ".line");
  c.consist.line.davis = {read<double>(davis, "c0_N_per_kg", ".line.davis"),
                          read<double>(davis, "c1_Ns_per_m_kg", ".line.davis"),
                          read<double>(davis, "c2_Ns2_per_m2_kg", ".line.davis")};
  const json& coupler = field(field(j, "line", ""), "coupler", ".line");
  c.consist.line.coupler = {read<double>(coupler, "stiffness_N_per_m", ".line.coupler"),
                            read<double>(coupler, "damping_Ns_per_m", ".line.coupler"),
                            read<double>(coupler, "spacing_m", ".line.coupler")};

  const json& cars = array_field(j, "carriages", "");
  for (std::size_t i = 0; i < cars.size(); ++i) {
    const std::string path = at(".carriages", i);
    CarriageParams p;
    p.mass = read<double>(cars[i], "mass_kg", path);
    p.actuator_rate = read<double>(cars[i], "actuator_rate_per_s", path);
    const json& f = field(cars[i], "fault", path);
    const std::string fp = path + ".fault";
    p.fault.omega = read<double>(f, "omega_rad_per_s", fp);
    p.fault.upsilon = read<double>(f, "upsilon_Nps", fp);
    p.fault.nu = read<double>(f, "nu_Nps", fp);
    p.fault.const_amplitude = read<double>(f, "const_amplitude", fp);
    p.fault.periodic_amplitude = read<double>(f, "periodic_amplitude", fp);
    p.fault.phase = read<double>(f, "phase_rad", fp);
    p.fault.const_window = detail::read_window(f, "const_window_s", fp);
    p.fault.periodic_window = detail::read_window(f, "periodic_window_s", fp);
    c.consist.carriages.push_back(p);
  }

  const json& k = field(j, "constraints", "");
  c.constraints = {read<double>(k, "gamma1_m", ".constraints"),
                   read<double>(k, "gamma2_m", ".constraints"),
                   read<double>(k, "service_distance_m", ".constraints"),
                   read<double>(k, "sigma1_mps", ".constraints"),
                   read<double>(k, "sigma2_mps", ".constraints")};
  const json& fg = field(j, "follower_gains", "");
  c.follower = {read<double>(fg, "l1_per_s", ".follower_gains"),
                read<double>(fg, "l2_per_s", ".follower_gains"),
                read<double>(fg, "l3_per_s", ".follower_gains")};
  const json& hg = field(j, "head_gains", "");
  c.head = {read<double>(hg, "ell1_per_s", ".head_gains"), read<double>(hg, "ell2", ".head_gains"),
            read<double>(hg, "ell3", ".head_gains"), read<double>(hg, "ell4", ".head_gains")};

  if (j.contains("observer")) {
    const json& o = j["observer"];
    if (o.contains("eigenvalues_per_s")) {
      c.observer.eigenvalues.clear();
      const json& eig = array_field(o, "eigenvalues_per_s", ".observer");
      for (std::size_t i = 0; i < eig.size(); ++i) {
        const std::string path = at(".observer.eigenvalues_per_s", i);
        try {
          if (eig[i].is_number()) {
            c.observer.eigenvalues.emplace_back(eig[i].get<double>(), 0.0);
          } else {
            const auto pair = eig[i].get<std::vector<double>>();
            if (pair.size() != 2) throw ConfigError("field '" + path + "': expected [re, im]");
            c.observer.eigenvalues.emplace_back(pair[0], pair[1]);
          }
        } catch (const json::exception& e) {
          throw ConfigError("field '" + path + "': " + e.what());
        }
      }
    }
    c.observer.k1_eigenvalue =
        read_or(o, "k1_eigenvalue_per_s", ".observer", c.observer.k1_eigenvalue);
    if (o.contains("gains_override")) {
      const json& g = o["gains_override"];
      ObserverGains og;
      og.k1 = read<double>(g, "k1_per_s", ".observer.gains_override");
      const auto K = read<std::vector<double>>(g, "K", ".observer.gains_override");
      if (K.size() != 5) throw ConfigError("field '.observer.gains_override.K': expected 5 entries");
      for (int i = 0; i < 5; ++i) og.K(i) = K[static_cast<std::size_t>(i)];
      c.observer.gains_override = og;
    }
  }

  const json& r = field(j, "reference", "");
  c.reference.x0 = read<double>(r, "x0_m", ".reference");
  c.reference.v0 = read<double>(r, "v0_mps", ".reference");
  c.reference.w0 = read<double>(r, "w0_mps2", ".reference");
  c.reference.v_max = read<double>(r, "v_max_mps", ".reference");
  const json& phases = array_field(r, "phases", ".reference");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const std::string path = at(".reference.phases", i);
    c.reference.phases.push_back(
        {read<double>(phases[i], "duration_s", path), read<double>(phases[i], "jerk_mps3", path)});
  }

  const json& init = array_field(j, "initial", "");
  for (std::size_t i = 0; i < init.size(); ++i) {
    const std::string path = at(".initial", i);
    c.initial.push_back({read<double>(init[i], "x_m", path), read<double>(init[i], "v_mps", path),
                         read_or(init[i], "w_mps2", path, 0.0)});
  }
  if (j.contains("observer_initial")) {
    const json& obs = array_field(j, "observer_initial", "");
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const std::string path = at(".observer_initial", i);
      ObserverState s;
      s.x = read<double>(obs[i], "x_m", path);
      s.v = read<double>(obs[i], "v_mps", path);
      s.w = read_or(obs[i], "w_mps2", path, 0.0);
      const auto f = read_or(obs[i], "f", path, std::vector<double>{0.0, 0.0, 0.0});
      if (f.size() != 3) throw ConfigError("field '" + path + ".f': expected 3 entries");
      s.f = Eigen::Vector3d(f[0], f[1], f[2]);
      c.observer_initial.push_back(s);
    }
  }

  if (j.contains("step_s")) c.step_s = read<double>(j, "step_s", "");
  c.duration_s = read_or(j, "duration_s", "", c.duration_s);
  const auto decimate = read_or<std::int64_t>(j, "decimate", "", 1);
  if (decimate < 1) throw ConfigError("field '.decimate': must be >= 1");
  c.decimate = static_cast<std::size_t>(decimate);
  if (j.contains("noise")) {
    const json& n = j["noise"];
    c.noise.enabled = read_or(n, "enabled", ".noise", c.noise.enabled);
    c.noise.variance = read_or(n, "variance_m2_per_s6", ".noise", c.noise.variance);
    c.noise.seed = read_or<std::uint64_t>(n, "seed", ".noise", c.noise.seed);
  }
  c.representation = representation_from_string(
      read_or<std::string>(j, "representation", "", to_string(c.representation)));
  c.abort_on_violation = read_or(j, "abort_on_violation", "", c.abort_on_violation);
  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    c.tolerances.tail_window_s = read_or(t, "tail_window_s", ".tolerances", c.tolerances.tail_window_s);
    if (t.contains("clean"))
      c.tolerances.clean =
          detail::read_tolerance_set(t["clean"], ".tolerances.clean", c.tolerances.clean);
    if (t.contains("noisy"))
      c.tolerances.noisy =
          detail::read_tolerance_set(t["noisy"], ".tolerances.noisy", c.tolerances.noisy);
    if (t.contains("observer")) {
      const json& o = t["observer"];
      auto& ot = c.tolerances.observer;
      ot.settle_window_s = read_or(o, "settle_window_s", ".tolerances.observer", ot.settle_window_s);
      ot.min_interval_s = read_or(o, "min_interval_s", ".tolerances.observer", ot.min_interval_s);
      ot.fault_rel = read_or(o, "fault_rel", ".tolerances.observer", ot.fault_rel);
      ot.accel_abs = read_or(o, "accel_abs_mps2", ".tolerances.observer", ot.accel_abs);
    }
  }
  return c;
}

/// Parses JSON text; syntax errors report line and column.
inline ScenarioConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("parse error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
  }
  return from_json(j);
}

/// Reads, parses and fully validates a configuration file.
inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  ScenarioConfig c = parse_config(ss.str());
  validate_config(c);
  return c;
}

/// 64-bit FNV-1a of the canonical JSON form.
inline std::string config_hash(const ScenarioConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = digits[h & 0xF];
  return s;
}

// ---------------------------------------------------------------------------
// Preset

/// Three trains of three carriages with the experiment's parameters, fault
/// windows, initial states, gains and constraint values.
inline ScenarioConfig paper_s5() {
  ScenarioConfig c;
  c.name = "paper-s5";
  c.consist.topology.carriages_per_train = {3, 3, 3};
  c.consist.line.davis = {0.01176, 0.00077616, 1.6e-5};
  c.consist.line.coupler = {1.6e5, 600.0, 26.0};
  const double const_start[9] = {4, 6, 8, 10, 12, 14, 16, 18, 20};
  const double const_end[9] = {14, 15, 16, 17, 18, 19, 20, 21, 22};
  const double periodic_start[9] = {5, 7, 9, 11, 13, 15, 17, 19, 21};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const std::size_t k = 3 * i + j;
      CarriageParams p;
      p.mass = 8e4;
      p.actuator_rate = 50.0;
      p.fault.omega = 1.0;
      p.fault.upsilon = 2e5;
      p.fault.nu = 2e5;
      p.fault.const_amplitude = 1.0;
      p.fault.periodic_amplitude = 1.0;
      p.fault.phase = 6.0 * static_cast<double>(i) + 2.0 * static_cast<double>(j + 1);
      p.fault.const_window = {100.0 * const_start[k], 100.0 * const_end[k]};
      p.fault.periodic_window = {100.0 * periodic_start[k], 2300.0};
      c.consist.carriages.push_back(p);
    }
  c.constraints = {9000.0, 4702.0, 7053.0, 50.0, 50.0};
  c.follower = {0.1, 0.1, 0.1};
  c.head = {0.01, 2.1, 4.3, 1.0};
  c.reference = default_profile(13062.0 + 7053.0);
  c.initial = {{13062, 20.5, 0}, {13036, 20.2, 0}, {13010, 20.3, 0},
               {5157, 19.8, 0},  {5131, 19.9, 0},  {5105, 20.5, 0},
               {52, 19.7, 0},    {26, 20.5, 0},    {0, 20.2, 0}};
  c.duration_s = 2400.0;
  c.noise = {true, 0.5, 1};
  return c;
}

inline std::vector<std::string> preset_names() { return {"paper-s5"}; }

inline ScenarioConfig preset(const std::string& name) {
  if (name == "paper-s5") return paper_s5();
  throw ConfigError("unknown preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Summary output

inline json to_json(const SummaryReport& r) {
  json j;
  j["verdicts"] = {{"R1", r.verdicts.r1},
                   {"R2", r.verdicts.r2},
                   {"R3", r.verdicts.r3},
                   {"R3_prime", r.verdicts.r3_prime},
                   {"observer_settling", r.verdicts.observer},
                   {"pass", r.verdicts.all()}};
  json pairs = json::array();
  for (std::size_t i = 0; i < r.pairs.size(); ++i) {
    const auto& p = r.pairs[i];
    pairs.push_back({{"pair", i + 1},
                     {"xtilde_min_m", p.xtilde_min},
                     {"xtilde_max_m", p.xtilde_max},
                     {"vtilde_min_mps", p.vtilde_min},
                     {"vtilde_max_mps", p.vtilde_max},
                     {"qtilde_min_mps", p.qtilde_min},
                     {"qtilde_max_mps", p.qtilde_max},
                     {"tail_mean_abs_xtilde_m", p.tail_mean_abs_xtilde},
                     {"tail_mean_abs_vtilde_mps", p.tail_mean_abs_vtilde}});
  }
  j["pairs"] = pairs;
  json trains = json::array();
  for (std::size_t i = 0; i < r.trains.size(); ++i)
    trains.push_back({{"train", i + 1},
                      {"tail_mean_gap_error_m", r.trains[i].tail_mean_gap_error_m},
                      {"tail_mean_gap_velocity_mps", r.trains[i].tail_mean_gap_velocity_mps}});
  j["trains"] = trains;
  json events = json::array();
  for (const auto& e : r.events)
    events.push_back({{"t_s", e.t},
                      {"pair", e.pair + 1},
                      {"quantity", e.quantity},
                      {"value", e.value},
                      {"lower", e.lower},
                      {"upper", e.upper}});
  j["events"] = events;
  j["dropped_events"] = r.dropped_events;
  json obs = json::array();
  for (const auto& o : r.observer)
    obs.push_back({{"carriage", o.carriage},
                   {"start_s", o.start},
                   {"end_s", o.end},
                   {"max_fault_error_Nps", o.max_fault_error},
                   {"fault_scale_Nps", o.fault_scale},
                   {"max_accel_error_mps2", o.max_accel_error},
                   {"pass", o.pass}});
  j["observer_settling"] = obs;
  j["tolerances"] = detail::tolerance_set_json(r.tolerances);
  j["tolerances"]["tail_window_s"] = r.tail_window_s;
  j["tolerances"]["observer"] = {{"settle_window_s", r.observer_tolerance.settle_window_s},
                                 {"min_interval_s", r.observer_tolerance.min_interval_s},
                                 {"fault_rel", r.observer_tolerance.fault_rel},
                                 {"accel_abs_mps2", r.observer_tolerance.accel_abs}};
  j["bounds"] = {{"rho1_m", r.bounds.rho1},
                 {"rho2_m", r.bounds.rho2},
                 {"varrho1_mps", r.bounds.varrho1},
                 {"varrho2_mps", r.bounds.varrho2},
                 {"sigma1_mps", r.sigma1},
                 {"sigma2_mps", r.sigma2}};
  j["samples"] = r.samples;
  j["final_time_s"] = r.final_time_s;
  j["seed"] = r.seed;
  j["noise"] = r.noise;
  j["step_s"] = r.step_s;
  j["representation"] = r.representation;
  j["config_hash"] = r.config_hash;
  j["saturated_evaluations"] = r.saturated_evaluations;
  if (r.comparison)
    j["comparison"] = {{"max_abs_dx_m", r.comparison->max_abs_dx_m},
                       {"max_abs_dv_mps", r.comparison->max_abs_dv_mps}};
  return j;
}

}  // namespace cruise
