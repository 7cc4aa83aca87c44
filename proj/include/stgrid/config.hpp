#pragma once

// Run configuration and its INI-style text form.
//
//   [section]
//   key = value      # comments start with '#' or ';'
//
// Every field lives in one registry, so parsing and serialization cannot
// drift apart. Doubles are written in shortest round-trip form.

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "stgrid/environment.hpp"
#include "stgrid/errors.hpp"
#include "stgrid/schedule.hpp"

namespace stgrid {

enum class PolicyKind { Learned, RandomWalk, Exploitation, Exploratory };

inline constexpr std::array<PolicyKind, 4> kAllPolicies{
    PolicyKind::Learned, PolicyKind::RandomWalk, PolicyKind::Exploitation,
    PolicyKind::Exploratory};

inline std::string policy_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Learned: return "learned";
    case PolicyKind::RandomWalk: return "random";
    case PolicyKind::Exploitation: return "exploit";
    case PolicyKind::Exploratory: return "explore";
  }
  return "?";
}

inline PolicyKind parse_policy(std::string_view s) {
  for (PolicyKind k : kAllPolicies)
    if (policy_name(k) == s) return k;
  throw ConfigurationError("unknown policy '" + std::string(s) +
                           "' (expected learned, random, exploit or explore)");
}

// Frame export cadence: 0 none, 1 every step, K every K-th step.
struct FrameSpec {
  long every = 0;
  bool due(long k) const { return every > 0 && k % every == 0; }
  friend bool operator==(const FrameSpec&, const FrameSpec&) = default;
};

inline std::string frame_name(const FrameSpec& f) {
  if (f.every == 0) return "none";
  if (f.every == 1) return "all";
  return "every-" + std::to_string(f.every);
}

inline FrameSpec parse_frames(std::string_view s) {
  if (s == "none") return {0};
  if (s == "all") return {1};
  if (s.starts_with("every-")) {
    long k = 0;
    const auto body = s.substr(6);
    const auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), k);
    if (ec == std::errc() && p == body.data() + body.size() && k >= 1) return {k};
  }
  throw ConfigurationError("bad frames value '" + std::string(s) +
                           "' (expected none, all or every-K)");
}

struct GridConfig {
  std::size_t rows = 16;
  std::size_t cols = 16;
  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

struct PlannerConfig {
  std::size_t horizon = 16;
  std::size_t samples = 256;
  friend bool operator==(const PlannerConfig&, const PlannerConfig&) = default;
};

struct RunSection {
  long iterations = 5000;
  std::vector<std::uint64_t> seeds{1};
  PolicyKind policy = PolicyKind::Learned;
  FrameSpec frames;
  std::string output = "out";
  long checkpoint_every = 0;
  int target_state = 2;
  long burn_in = 100;
  bool record_wall_time = false;
  friend bool operator==(const RunSection&, const RunSection&) = default;
};

struct SysIdConfig {
  std::size_t latent = 64;
  std::size_t channels1 = 8;
  std::size_t channels2 = 16;
  std::size_t trajectory_length = 8;  // K
  std::size_t batch = 4;              // L
  std::size_t capacity = 512;
  friend bool operator==(const SysIdConfig&, const SysIdConfig&) = default;
};

struct DqnConfig {
  std::size_t width = 128;
  double gamma = 0.95;
  std::size_t batch = 32;
  std::size_t capacity = 10000;
  long sync_every = 100;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay_fraction = 0.2;
  friend bool operator==(const DqnConfig&, const DqnConfig&) = default;
};

struct FilterConfig {
  std::string observation_model = "preset";  // preset | uninformative | identity
  long steps = 60;
  friend bool operator==(const FilterConfig&, const FilterConfig&) = default;
};

struct RunConfig {
  GridConfig grid;
  WildfireTable wildfire;
  PlannerConfig planner;
  RunSection run;
  ScheduleParams schedule;
  SysIdConfig sysid;
  DqnConfig dqn;
  FilterConfig filter;

  void validate() const;
  ModelParams model() const { return wildfire_preset(grid.rows, grid.cols, wildfire); }
};

inline bool operator==(const WildfireTable& a, const WildfireTable& b) {
  return a.bias_normal == b.bias_normal && a.bias_latent == b.bias_latent &&
         a.bias_fire == b.bias_fire && a.normal_persist == b.normal_persist &&
         a.latent_persist == b.latent_persist && a.latent_to_fire == b.latent_to_fire &&
         a.fire_persist == b.fire_persist && a.fire_to_normal == b.fire_to_normal &&
         a.spread_up_center == b.spread_up_center && a.spread_up_diag == b.spread_up_diag &&
         a.spread_side == b.spread_side && a.spread_below == b.spread_below &&
         a.obs_normal == b.obs_normal && a.obs_latent == b.obs_latent && a.obs_fire == b.obs_fire;
}
inline bool operator==(const ScheduleParams& a, const ScheduleParams& b) {
  return a.eta_sys == b.eta_sys && a.eta_dqn == b.eta_dqn && a.delta_sys == b.delta_sys &&
         a.delta_dqn == b.delta_dqn;
}
inline bool operator==(const RunConfig& a, const RunConfig& b) {
  return a.grid == b.grid && a.wildfire == b.wildfire && a.planner == b.planner &&
         a.run == b.run && a.schedule == b.schedule && a.sysid == b.sysid && a.dqn == b.dqn &&
         a.filter == b.filter;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw ConfigurationError("cannot format number");
  return std::string(buf, p);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view s, const std::string& key) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigurationError("bad number '" + std::string(s) + "' for " + key);
  return v;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == ',')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != ',') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

// Field factories over a member accessor.
template <typename Get>
Field integer_field(std::string section, std::string key, Get get) {
  const std::string full = section + "." + key;
  return {section, key,
          [get](const RunConfig& c) { return std::to_string(get(const_cast<RunConfig&>(c))); },
          [get, full](RunConfig& c, std::string_view v) {
            get(c) = parse_number<std::remove_reference_t<decltype(get(c))>>(v, full);
          }};
}

template <typename Get>
Field double_field(std::string section, std::string key, Get get) {
  const std::string full = section + "." + key;
  return {section, key,
          [get](const RunConfig& c) { return format_double(get(const_cast<RunConfig&>(c))); },
          [get, full](RunConfig& c, std::string_view v) { get(c) = parse_number<double>(v, full); }};
}

template <typename Get>
Field row_field(std::string section, std::string key, Get get) {
  const std::string full = section + "." + key;
  return {section, key,
          [get](const RunConfig& c) {
            const auto& row = get(const_cast<RunConfig&>(c));
            std::string s;
            for (std::size_t i = 0; i < row.size(); ++i) s += (i ? " " : "") + format_double(row[i]);
            return s;
          },
          [get, full](RunConfig& c, std::string_view v) {
            const auto parts = split_ws(v);
            auto& row = get(c);
            if (parts.size() != row.size())
              throw ConfigurationError(full + " needs " + std::to_string(row.size()) + " numbers");
            for (std::size_t i = 0; i < row.size(); ++i) row[i] = parse_number<double>(parts[i], full);
          }};
}

#define STGRID_REF(expr) [](RunConfig& c) -> auto& { return c.expr; }

inline const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    v.push_back(integer_field("grid", "rows", STGRID_REF(grid.rows)));
    v.push_back(integer_field("grid", "cols", STGRID_REF(grid.cols)));

    v.push_back(double_field("wildfire", "bias_normal", STGRID_REF(wildfire.bias_normal)));
    v.push_back(double_field("wildfire", "bias_latent", STGRID_REF(wildfire.bias_latent)));
    v.push_back(double_field("wildfire", "bias_fire", STGRID_REF(wildfire.bias_fire)));
    v.push_back(double_field("wildfire", "normal_persist", STGRID_REF(wildfire.normal_persist)));
    v.push_back(double_field("wildfire", "latent_persist", STGRID_REF(wildfire.latent_persist)));
    v.push_back(double_field("wildfire", "latent_to_fire", STGRID_REF(wildfire.latent_to_fire)));
    v.push_back(double_field("wildfire", "fire_persist", STGRID_REF(wildfire.fire_persist)));
    v.push_back(double_field("wildfire", "fire_to_normal", STGRID_REF(wildfire.fire_to_normal)));
    v.push_back(double_field("wildfire", "spread_up_center", STGRID_REF(wildfire.spread_up_center)));
    v.push_back(double_field("wildfire", "spread_up_diag", STGRID_REF(wildfire.spread_up_diag)));
    v.push_back(double_field("wildfire", "spread_side", STGRID_REF(wildfire.spread_side)));
    v.push_back(double_field("wildfire", "spread_below", STGRID_REF(wildfire.spread_below)));
    v.push_back(row_field("wildfire", "obs_normal", STGRID_REF(wildfire.obs_normal)));
    v.push_back(row_field("wildfire", "obs_latent", STGRID_REF(wildfire.obs_latent)));
    v.push_back(row_field("wildfire", "obs_fire", STGRID_REF(wildfire.obs_fire)));

    v.push_back(integer_field("planner", "horizon", STGRID_REF(planner.horizon)));
    v.push_back(integer_field("planner", "samples", STGRID_REF(planner.samples)));

    v.push_back(integer_field("run", "iterations", STGRID_REF(run.iterations)));
    v.push_back({"run", "seeds",
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.run.seeds.size(); ++i)
                     s += (i ? " " : "") + std::to_string(c.run.seeds[i]);
                   return s;
                 },
                 [](RunConfig& c, std::string_view v) {
                   c.run.seeds.clear();
                   for (auto p : split_ws(v)) c.run.seeds.push_back(parse_number<std::uint64_t>(p, "run.seeds"));
                 }});
    v.push_back({"run", "policy", [](const RunConfig& c) { return policy_name(c.run.policy); },
                 [](RunConfig& c, std::string_view v) { c.run.policy = parse_policy(v); }});
    v.push_back({"run", "frames", [](const RunConfig& c) { return frame_name(c.run.frames); },
                 [](RunConfig& c, std::string_view v) { c.run.frames = parse_frames(v); }});
    v.push_back({"run", "output", [](const RunConfig& c) { return c.run.output; },
                 [](RunConfig& c, std::string_view v) { c.run.output = std::string(v); }});
    v.push_back(integer_field("run", "checkpoint_every", STGRID_REF(run.checkpoint_every)));
    v.push_back(integer_field("run", "target_state", STGRID_REF(run.target_state)));
    v.push_back(integer_field("run", "burn_in", STGRID_REF(run.burn_in)));
    v.push_back({"run", "record_wall_time",
                 [](const RunConfig& c) { return std::string(c.run.record_wall_time ? "true" : "false"); },
                 [](RunConfig& c, std::string_view v) {
                   if (v == "true" || v == "1") c.run.record_wall_time = true;
                   else if (v == "false" || v == "0") c.run.record_wall_time = false;
                   else throw ConfigurationError("run.record_wall_time must be true or false");
                 }});

    v.push_back(double_field("schedule", "eta_sys", STGRID_REF(schedule.eta_sys)));
    v.push_back(double_field("schedule", "eta_dqn", STGRID_REF(schedule.eta_dqn)));
    v.push_back(double_field("schedule", "delta_sys", STGRID_REF(schedule.delta_sys)));
    v.push_back(double_field("schedule", "delta_dqn", STGRID_REF(schedule.delta_dqn)));

    v.push_back(integer_field("sysid", "latent", STGRID_REF(sysid.latent)));
    v.push_back(integer_field("sysid", "channels1", STGRID_REF(sysid.channels1)));
    v.push_back(integer_field("sysid", "channels2", STGRID_REF(sysid.channels2)));
    v.push_back(integer_field("sysid", "trajectory_length", STGRID_REF(sysid.trajectory_length)));
    v.push_back(integer_field("sysid", "batch", STGRID_REF(sysid.batch)));
    v.push_back(integer_field("sysid", "capacity", STGRID_REF(sysid.capacity)));

    v.push_back(integer_field("dqn", "width", STGRID_REF(dqn.width)));
    v.push_back(double_field("dqn", "gamma", STGRID_REF(dqn.gamma)));
    v.push_back(integer_field("dqn", "batch", STGRID_REF(dqn.batch)));
    v.push_back(integer_field("dqn", "capacity", STGRID_REF(dqn.capacity)));
    v.push_back(integer_field("dqn", "sync_every", STGRID_REF(dqn.sync_every)));
    v.push_back(double_field("dqn", "eps_start", STGRID_REF(dqn.eps_start)));
    v.push_back(double_field("dqn", "eps_end", STGRID_REF(dqn.eps_end)));
    v.push_back(double_field("dqn", "eps_decay_fraction", STGRID_REF(dqn.eps_decay_fraction)));

    v.push_back({"filter", "observation_model",
                 [](const RunConfig& c) { return c.filter.observation_model; },
                 [](RunConfig& c, std::string_view v) { c.filter.observation_model = std::string(v); }});
    v.push_back(integer_field("filter", "steps", STGRID_REF(filter.steps)));
    return v;
  }();
  return f;
}

#undef STGRID_REF

}  // namespace detail

inline void RunConfig::validate() const {
  if (grid.rows == 0 || grid.cols == 0) throw ConfigurationError("grid.rows and grid.cols must be positive");
  model();  // validates the wildfire table
  if (planner.horizon < 1) throw ConfigurationError("planner.horizon must be >= 1");
  if (planner.samples < 1) throw ConfigurationError("planner.samples must be >= 1");
  if (run.iterations < 0) throw ConfigurationError("run.iterations must be >= 0");
  if (run.seeds.empty()) throw ConfigurationError("run.seeds must list at least one seed");
  if (run.output.empty()) throw ConfigurationError("run.output must be set");
  if (run.checkpoint_every < 0) throw ConfigurationError("run.checkpoint_every must be >= 0");
  if (run.target_state < 0 || run.target_state >= 3) throw ConfigurationError("run.target_state must be a state id");
  if (run.burn_in < 0) throw ConfigurationError("run.burn_in must be >= 0");
  schedule.validate();
  if (sysid.latent == 0 || sysid.channels1 == 0 || sysid.channels2 == 0)
    throw ConfigurationError("sysid widths must be positive");
  if (sysid.trajectory_length == 0 || sysid.batch == 0)
    throw ConfigurationError("sysid.trajectory_length and sysid.batch must be positive");
  if (sysid.capacity < sysid.trajectory_length + 1)
    throw ConfigurationError("sysid.capacity must hold at least one trajectory");
  if (dqn.width == 0 || dqn.batch == 0 || dqn.capacity == 0 || dqn.sync_every <= 0)
    throw ConfigurationError("dqn width, batch, capacity and sync_every must be positive");
  if (!(dqn.gamma > 0.0 && dqn.gamma < 1.0)) throw ConfigurationError("dqn.gamma must lie in (0,1)");
  if (!(dqn.eps_start >= 0.0 && dqn.eps_start <= 1.0 && dqn.eps_end >= 0.0 && dqn.eps_end <= dqn.eps_start))
    throw ConfigurationError("dqn epsilon must satisfy 0 <= eps_end <= eps_start <= 1");
  if (!(dqn.eps_decay_fraction >= 0.0 && dqn.eps_decay_fraction <= 1.0))
    throw ConfigurationError("dqn.eps_decay_fraction must lie in [0,1]");
  if (filter.observation_model != "preset" && filter.observation_model != "uninformative" &&
      filter.observation_model != "identity")
    throw ConfigurationError("filter.observation_model must be preset, uninformative or identity");
  if (filter.steps < 0) throw ConfigurationError("filter.steps must be >= 0");
}

inline std::string serialize_config(const RunConfig& c) {
  std::string out, section;
  for (const detail::Field& f : detail::fields()) {
    if (f.section != section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(c) + "\n";
  }
  return out;
}

// Starts from defaults and applies every key in the text. Unknown sections or
// keys are errors. The result is validated.
inline RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::map<std::string, const detail::Field*, std::less<>> index;
  for (const detail::Field& f : detail::fields()) index[f.section + "." + f.key] = &f;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto h = line.find_first_of("#;"); h != std::string_view::npos) line = line.substr(0, h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigurationError(where + "unterminated section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigurationError(where + "expected key = value");
    if (section.empty()) throw ConfigurationError(where + "key outside of any section");
    const std::string key = section + "." + std::string(detail::trim(line.substr(0, eq)));
    const auto it = index.find(key);
    if (it == index.end()) throw ConfigurationError(where + "unknown key " + key);
    try {
      it->second->set(c, detail::trim(line.substr(eq + 1)));
    } catch (const ConfigurationError& e) {
      throw ConfigurationError(where + e.what());
    }
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigurationError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace stgrid
