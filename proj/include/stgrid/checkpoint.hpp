#pragma once

// Checkpoint container, little-endian:
//
//   "STGRIDCK"  u32 version  u32 rows cols |S| |O| d_h  u32 section_count
//   section*:   char[4] tag  u64 byte_length  payload
//
// Sections:
//   "CONF"  config text, policy name, seed
//   "SYS "  u64 count, f32[count] autoencoder parameters (AutoencoderLayout order)
//   "DQN "  u32 input width actions, u64 count, f32 online[count], f32 target[count]
//   "OPTS"  Adam state of both learners, DQN update counter
//   "RUNS"  loop state: iteration, environment, robot, RNN state, buffers, RNG engines
//
// A plain-text manifest is written next to the binary as <path>.manifest.txt.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stgrid/config.hpp"
#include "stgrid/errors.hpp"
#include "stgrid/orchestrator.hpp"

namespace stgrid {

inline constexpr char kCheckpointMagic[8] = {'S', 'T', 'G', 'R', 'I', 'D', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace ckpt {

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    buf_.append(s);
  }
  void floats(const std::vector<float>& v) {
    u64(v.size());
    for (float x : v) f32(x);
  }
  void raw(const std::string& s) { buf_.append(s); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : data_(bytes) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::vector<float> floats() {
    const std::uint64_t n = u64();
    need(n * 4);
    std::vector<float> v(n);
    for (float& x : v) x = f32();
    return v;
  }
  std::string_view take(std::uint64_t n) {
    need(n);
    const auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > data_.size() - pos_) throw ConfigurationError("checkpoint is truncated or corrupt");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

inline void put_engine(Writer& w, const Engine& e) { w.str(engine_state(e)); }
inline Engine get_engine(Reader& r) {
  Engine e;
  restore_engine(e, r.str());
  return e;
}

inline void put_map(Writer& w, const ObservationMap& y) {
  w.u32(static_cast<std::uint32_t>(y.rows()));
  w.u32(static_cast<std::uint32_t>(y.cols()));
  for (int c : y.cells.cells()) w.i32(c);
  for (std::uint8_t m : y.mask.cells()) w.u8(m);
}
inline ObservationMap get_map(Reader& r) {
  const std::size_t rows = r.u32(), cols = r.u32();
  ObservationMap y(rows, cols);
  for (int& c : y.cells.cells()) c = r.i32();
  for (std::uint8_t& m : y.mask.cells()) m = r.u8();
  if (!y.consistent()) throw ConfigurationError("checkpoint observation map is inconsistent");
  return y;
}

template <typename T>
void put_adam(Writer& w, const nn::Adam<T>& a) {
  w.i64(a.steps());
  w.floats(a.first_moment());
  w.floats(a.second_moment());
}
template <typename T>
void get_adam(Reader& r, nn::Adam<T>& a, std::size_t expected) {
  a.set_steps(r.i64());
  a.first_moment() = r.floats();
  a.second_moment() = r.floats();
  if (a.first_moment().size() != expected || a.second_moment().size() != expected)
    throw ConfigurationError("checkpoint optimizer state has the wrong size");
}

inline void section(Writer& out, const char (&tag)[5], const Writer& payload) {
  out.raw(std::string(tag, 4));
  out.u64(payload.bytes().size());
  out.raw(payload.bytes());
}

}  // namespace ckpt

struct LoadedRun {
  RunConfig config;
  std::uint64_t seed = 0;
  PolicyKind policy = PolicyKind::Learned;
  RunState state;
};

inline std::string encode_checkpoint(const Run& run) {
  using ckpt::Writer;
  const RunConfig& cfg = run.config();
  const RunState& s = run.state();

  Writer conf;
  conf.str(serialize_config(cfg));
  conf.str(policy_name(run.policy()));
  conf.u64(run.seed());

  Writer sys;
  sys.floats(s.sys.values);

  Writer dqn;
  dqn.u32(static_cast<std::uint32_t>(s.q.shape.input));
  dqn.u32(static_cast<std::uint32_t>(s.q.shape.width));
  dqn.u32(static_cast<std::uint32_t>(s.q.shape.actions));
  dqn.u64(s.q.online.size());
  for (float v : s.q.online) dqn.f32(v);
  for (float v : s.q.target) dqn.f32(v);

  Writer opts;
  ckpt::put_adam(opts, s.sys_opt);
  ckpt::put_adam(opts, s.q_opt);
  opts.i64(s.dqn_updates);

  Writer rs;
  rs.i64(s.n);
  rs.i64(s.env.k());
  for (int c : s.env.state().cells()) rs.i32(c);
  ckpt::put_engine(rs, s.env.transition_rng());
  ckpt::put_engine(rs, s.env.observation_rng());
  rs.i32(s.robot.row);
  rs.i32(s.robot.col);
  rs.i64(s.h.k);
  rs.floats(s.h.h);
  ckpt::put_map(rs, s.y_last);
  rs.u8(s.has_prev ? 1 : 0);
  rs.floats(s.prev_h);
  rs.i32(s.prev_action);
  rs.i32(s.prev_reward);
  rs.u64(s.trajectories.size());
  for (std::size_t a = 0; a < s.trajectories.size(); ++a) {
    ckpt::put_map(rs, s.trajectories.step(a).y);
    rs.i32(s.trajectories.step(a).action);
  }
  rs.u64(s.transitions.size());
  for (std::size_t a = 0; a < s.transitions.size(); ++a) {
    const Transition& t = s.transitions[a];
    rs.floats(t.h);
    rs.i32(t.action);
    rs.f64(t.reward);
    rs.floats(t.h_next);
  }
  ckpt::put_engine(rs, s.planner_rng);
  ckpt::put_engine(rs, s.agent_rng);
  ckpt::put_engine(rs, s.sys_rng);
  ckpt::put_engine(rs, s.dqn_rng);

  Writer out;
  out.raw(std::string(kCheckpointMagic, 8));
  out.u32(kCheckpointVersion);
  out.u32(static_cast<std::uint32_t>(cfg.grid.rows));
  out.u32(static_cast<std::uint32_t>(cfg.grid.cols));
  out.u32(static_cast<std::uint32_t>(s.sys.shape.states));
  out.u32(static_cast<std::uint32_t>(s.sys.shape.observations));
  out.u32(static_cast<std::uint32_t>(cfg.sysid.latent));
  out.u32(5);
  ckpt::section(out, "CONF", conf);
  ckpt::section(out, "SYS ", sys);
  ckpt::section(out, "DQN ", dqn);
  ckpt::section(out, "OPTS", opts);
  ckpt::section(out, "RUNS", rs);
  return out.bytes();
}

inline LoadedRun decode_checkpoint(std::string_view bytes) {
  ckpt::Reader r(bytes);
  if (r.take(8) != std::string_view(kCheckpointMagic, 8)) throw ConfigurationError("not a checkpoint file");
  if (r.u32() != kCheckpointVersion) throw ConfigurationError("unsupported checkpoint version");
  const std::uint32_t rows = r.u32(), cols = r.u32(), S = r.u32(), O = r.u32(), latent = r.u32();
  const std::uint32_t count = r.u32();
  std::map<std::string, std::string_view> sections;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string tag(r.take(4));
    const std::uint64_t len = r.u64();
    sections[tag] = r.take(len);
  }
  for (const char* t : {"CONF", "SYS ", "DQN ", "OPTS", "RUNS"})
    if (!sections.count(t)) throw ConfigurationError(std::string("checkpoint lacks section ") + t);

  ckpt::Reader conf(sections["CONF"]);
  const RunConfig cfg = parse_config(conf.str());
  const PolicyKind policy = parse_policy(conf.str());
  const std::uint64_t seed = conf.u64();
  if (rows != cfg.grid.rows || cols != cfg.grid.cols || latent != cfg.sysid.latent || S != 3 || O != 3)
    throw ConfigurationError("checkpoint header disagrees with its config");

  // Start from a fresh state of the right shapes, then overwrite.
  RunConfig shaped = cfg;
  shaped.run.burn_in = 0;
  RunState s = initial_run_state(shaped, seed);

  ckpt::Reader sys(sections["SYS "]);
  s.sys.values = sys.floats();
  if (s.sys.values.size() != AutoencoderLayout(s.sys.shape).total)
    throw ConfigurationError("checkpoint SYS section has the wrong parameter count");

  ckpt::Reader dqn(sections["DQN "]);
  const QNetShape qs{dqn.u32(), dqn.u32(), dqn.u32()};
  if (!(qs == s.q.shape)) throw ConfigurationError("checkpoint DQN shape disagrees with config");
  const std::uint64_t nq = dqn.u64();
  if (nq != s.q.online.size()) throw ConfigurationError("checkpoint DQN parameter count mismatch");
  for (float& v : s.q.online) v = dqn.f32();
  for (float& v : s.q.target) v = dqn.f32();

  ckpt::Reader opts(sections["OPTS"]);
  ckpt::get_adam(opts, s.sys_opt, s.sys.values.size());
  ckpt::get_adam(opts, s.q_opt, s.q.online.size());
  s.dqn_updates = opts.i64();

  ckpt::Reader rs(sections["RUNS"]);
  s.n = rs.i64();
  const long k = rs.i64();
  StateMap state(cfg.grid.rows, cfg.grid.cols);
  for (int& c : state.cells()) {
    c = rs.i32();
    if (c < 0 || c >= 3) throw ConfigurationError("checkpoint state map holds an invalid state");
  }
  Engine et = ckpt::get_engine(rs);
  Engine eo = ckpt::get_engine(rs);
  s.env.restore(std::move(state), k, std::move(et), std::move(eo));
  s.robot.row = rs.i32();
  s.robot.col = rs.i32();
  s.h.k = rs.i64();
  s.h.h = rs.floats();
  s.y_last = ckpt::get_map(rs);
  s.has_prev = rs.u8() != 0;
  s.prev_h = rs.floats();
  s.prev_action = rs.i32();
  s.prev_reward = rs.i32();
  const std::uint64_t nt = rs.u64();
  for (std::uint64_t i = 0; i < nt; ++i) {
    ObservationMap y = ckpt::get_map(rs);
    s.trajectories.push(std::move(y), rs.i32());
  }
  const std::uint64_t nr = rs.u64();
  for (std::uint64_t i = 0; i < nr; ++i) {
    Transition t;
    t.h = rs.floats();
    t.action = rs.i32();
    t.reward = rs.f64();
    t.h_next = rs.floats();
    s.transitions.push(std::move(t));
  }
  s.planner_rng = ckpt::get_engine(rs);
  s.agent_rng = ckpt::get_engine(rs);
  s.sys_rng = ckpt::get_engine(rs);
  s.dqn_rng = ckpt::get_engine(rs);
  if (!rs.done()) throw ConfigurationError("checkpoint RUNS section has trailing bytes");
  if (s.h.h.size() != cfg.sysid.latent) throw ConfigurationError("checkpoint RNN state has the wrong width");
  return {cfg, seed, policy, std::move(s)};
}

inline std::string checkpoint_manifest(const Run& run, std::size_t bytes) {
  const RunState& s = run.state();
  const AutoencoderLayout L(s.sys.shape);
  std::ostringstream m;
  m << "format STGRIDCK v" << kCheckpointVersion << " little-endian\n"
    << "bytes " << bytes << "\n"
    << "policy " << policy_name(run.policy()) << "\n"
    << "seed " << run.seed() << "\n"
    << "iteration " << s.n << "\n"
    << "dims rows=" << s.sys.shape.rows << " cols=" << s.sys.shape.cols
    << " states=" << s.sys.shape.states << " observations=" << s.sys.shape.observations
    << " latent=" << s.sys.shape.latent << "\n"
    << "sections CONF SYS DQN OPTS RUNS\n"
    << "sys_parameters " << L.total << " f32\n";
  for (const ParamGroup& g : L.groups()) {
    std::size_t n = 0;
    for (const nn::Slice& sl : g.slices) n += sl.size;
    m << "  group " << g.name << " " << n << "\n";
  }
  m << "dqn_parameters " << s.q.online.size() << " f32 x2 (online, target) input=" << s.q.shape.input
    << " width=" << s.q.shape.width << " actions=" << s.q.shape.actions << "\n"
    << "trajectory_buffer " << s.trajectories.size() << "/" << s.trajectories.capacity() << "\n"
    << "transition_buffer " << s.transitions.size() << "/" << s.transitions.capacity() << "\n";
  return m.str();
}

inline void save_checkpoint(const std::string& path, const Run& run) {
  const std::string bytes = encode_checkpoint(run);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigurationError("cannot write checkpoint " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  std::ofstream manifest(path + ".manifest.txt", std::ios::trunc);
  if (!manifest) throw ConfigurationError("cannot write checkpoint manifest for " + path);
  manifest << checkpoint_manifest(run, bytes.size());
}

inline LoadedRun load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigurationError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

inline Run resume(LoadedRun loaded) {
  return Run(std::move(loaded.config), loaded.seed, loaded.policy, std::move(loaded.state));
}

}  // namespace stgrid
