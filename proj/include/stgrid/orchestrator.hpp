#pragma once

// The perceive -> estimate -> decide -> plan -> act -> record -> update loop,
// one environment step per iteration, and the three baselines.

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stgrid/autoencoder.hpp"
#include "stgrid/config.hpp"
#include "stgrid/dqn.hpp"
#include "stgrid/environment.hpp"
#include "stgrid/filter.hpp"
#include "stgrid/metrics.hpp"
#include "stgrid/planner.hpp"
#include "stgrid/replay.hpp"
#include "stgrid/rng.hpp"
#include "stgrid/schedule.hpp"

namespace stgrid {

// A component failure, tagged with the loop stage that raised it.
class RunStageError : public std::runtime_error {
 public:
  RunStageError(std::string stage, const std::string& what)
      : std::runtime_error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

inline NetShape net_shape(const RunConfig& c) {
  NetShape s;
  s.rows = c.grid.rows;
  s.cols = c.grid.cols;
  s.latent = c.sysid.latent;
  s.channels1 = c.sysid.channels1;
  s.channels2 = c.sysid.channels2;
  return s;
}

inline QNetShape qnet_shape(const RunConfig& c) { return {c.sysid.latent, c.dqn.width, 4}; }

// Everything a run mutates. Checkpoints serialize exactly this.
struct RunState {
  long n = 0;
  Environment env;
  Cell robot;
  RnnState<float> h;
  ObservationMap y_last;
  NetParams<float> sys;
  nn::Adam<float> sys_opt;
  QNet<float> q;
  nn::Adam<float> q_opt;
  long dqn_updates = 0;
  TrajectoryBuffer trajectories;
  TransitionBuffer transitions;
  bool has_prev = false;
  std::vector<float> prev_h;
  int prev_action = 0;
  int prev_reward = 0;
  Engine planner_rng, agent_rng, sys_rng, dqn_rng;
};

inline RunState initial_run_state(const RunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const ModelParams model = cfg.model();
  Engine sys_init = make_stream(seed, Stream::kSysInit);
  Engine dqn_init = make_stream(seed, Stream::kDqnInit);
  Engine rnn = make_stream(seed, Stream::kRnnState);
  RunState s{
      0,
      Environment(model, StateMap(cfg.grid.rows, cfg.grid.cols, 0),
                  make_stream(seed, Stream::kEnvTransition),
                  make_stream(seed, Stream::kEnvObservation)),
      Cell{static_cast<int>(cfg.grid.rows / 2), static_cast<int>(cfg.grid.cols / 2)},
      RnnState<float>::draw(cfg.sysid.latent, rnn),
      ObservationMap(cfg.grid.rows, cfg.grid.cols),
      NetParams<float>::initialized(net_shape(cfg), sys_init),
      {},
      QNet<float>::initialized(qnet_shape(cfg), dqn_init),
      {},
      0,
      TrajectoryBuffer(cfg.sysid.capacity, cfg.sysid.trajectory_length),
      TransitionBuffer(cfg.dqn.capacity),
      false,
      {},
      0,
      0,
      make_stream(seed, Stream::kPlanner),
      make_stream(seed, Stream::kAgent),
      make_stream(seed, Stream::kSysTrain),
      make_stream(seed, Stream::kDqnTrain)};
  s.sys_opt = nn::Adam<float>(s.sys.values.size());
  s.q_opt = nn::Adam<float>(s.q.online.size());
  for (long t = 0; t < cfg.run.burn_in; ++t) s.env.step();
  // y before the first iteration: the robot's own cell.
  s.y_last = s.env.observe_path(RobotPath{{s.robot}, {}});
  return s;
}

class Run {
 public:
  Run(RunConfig cfg, std::uint64_t seed, PolicyKind policy)
      : cfg_(std::move(cfg)), seed_(seed), policy_(policy),
        state_(initial_run_state(cfg_, seed)), eps_(epsilon_schedule(cfg_)) {}

  Run(RunConfig cfg, std::uint64_t seed, PolicyKind policy, RunState state)
      : cfg_(std::move(cfg)), seed_(seed), policy_(policy), state_(std::move(state)),
        eps_(epsilon_schedule(cfg_)) {}

  const RunConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  PolicyKind policy() const { return policy_; }
  const RunState& state() const { return state_; }
  long iteration() const { return state_.n; }

  // Most recent estimate p_hat and path, for frame export.
  const BeliefGrid& estimate() const { return estimate_; }
  const RobotPath& last_path() const { return path_; }
  const StateMap& last_state() const { return observed_state_; }

  // Stage tags are appended here when set.
  void set_trace(std::vector<std::string>* trace) { trace_ = trace; }

  MetricsRow iterate();

  std::vector<MetricsRow> run(long iterations) {
    std::vector<MetricsRow> rows;
    rows.reserve(static_cast<std::size_t>(std::max(0L, iterations)));
    for (long i = 0; i < iterations; ++i) rows.push_back(iterate());
    return rows;
  }

 private:
  static EpsilonSchedule epsilon_schedule(const RunConfig& c) {
    const double decay = c.dqn.eps_decay_fraction * static_cast<double>(c.run.iterations);
    return {c.dqn.eps_start, c.dqn.eps_end, static_cast<long>(decay)};
  }

  void tag(const char* stage) {
    if (trace_) trace_->emplace_back(stage);
  }

  template <typename Fn>
  auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
      return fn();
    } catch (const RunStageError&) {
      throw;
    } catch (const std::exception& e) {
      throw RunStageError(name, e.what());
    }
  }

  RunConfig cfg_;
  std::uint64_t seed_;
  PolicyKind policy_;
  RunState state_;
  EpsilonSchedule eps_;
  BeliefGrid estimate_;
  RobotPath path_;
  StateMap observed_state_;
  std::vector<std::string>* trace_ = nullptr;
};

inline MetricsRow Run::iterate() {
  RunState& s = state_;
  const auto t0 = std::chrono::steady_clock::now();
  const bool uses_belief = policy_ != PolicyKind::RandomWalk;
  const Rates rates = ttur_rates(cfg_.schedule, s.n);
  const ObsMatrix& obs = s.env.params().obs;
  MetricsRow row;
  row.n = s.n;
  row.eps_sys = rates.sys;
  row.eps_dqn = rates.dqn;

  if (uses_belief) {
    LearnedEstimate<float> est = stage("estimate", [&] {
      return estimate_with_learned_model(s.h, s.y_last, s.sys, obs);
    });
    tag("rnn_update");
    tag("decode");
    tag("bayes");
    s.h = std::move(est.h);
    estimate_ = std::move(est.estimate);
  }

  int action = -1;
  switch (policy_) {
    case PolicyKind::Learned:
      action = stage("policy", [&] {
        return act<float>(s.h.h, s.q, eps_.at(s.n), s.agent_rng);
      });
      break;
    case PolicyKind::Exploitation: action = 2; break;
    case PolicyKind::Exploratory: action = kExploreAction; break;
    case PolicyKind::RandomWalk: action = -1; break;
  }
  tag("policy");

  path_ = stage("plan", [&] {
    if (!uses_belief)
      return random_walk(s.robot, cfg_.planner.horizon, cfg_.grid.rows, cfg_.grid.cols, s.planner_rng);
    return plan(s.robot, estimate_, PlanSpec{action, cfg_.planner.horizon, cfg_.planner.samples},
                s.planner_rng)
        .path;
  });
  tag("plan");

  ObservationMap y = stage("observe", [&] { return s.env.observe_path(path_); });
  const int r = s.env.reward_of(path_, cfg_.run.target_state);
  observed_state_ = s.env.state();
  tag("observe");
  stage("env_step", [&] { s.env.step(); });
  s.robot = path_.end();
  tag("env_step");

  if (policy_ == PolicyKind::Learned) {
    if (s.has_prev)
      s.transitions.push(Transition{
          s.prev_h, s.prev_action,
          static_cast<double>(s.prev_reward) / static_cast<double>(cfg_.planner.horizon + 1), s.h.h});
    s.has_prev = true;
    s.prev_h = s.h.h;
    s.prev_action = action;
    s.prev_reward = r;
  }
  s.trajectories.push(y, action);
  tag("record");

  if (policy_ == PolicyKind::Learned && s.transitions.size() >= cfg_.dqn.batch) {
    stage("dqn_update", [&] {
      std::vector<Transition> batch;
      batch.reserve(cfg_.dqn.batch);
      for (std::size_t m = 0; m < cfg_.dqn.batch; ++m)
        batch.push_back(s.transitions[s.transitions.sample_index(s.dqn_rng)]);
      const DqnGradient<float> g = dqn_gradient<float>(batch, s.q, cfg_.dqn.gamma);
      dqn_update<float>(s.q, s.q_opt, g.grad, rates.dqn);
      if (++s.dqn_updates % cfg_.dqn.sync_every == 0) sync_target(s.q);
      row.dqn_loss = g.loss;
    });
    tag("dqn_update");
  }
  if (uses_belief && s.trajectories.window_count() >= cfg_.sysid.batch) {
    stage("sys_update", [&] {
      const auto batch = s.trajectories.sample(cfg_.sysid.batch, s.sys_rng);
      const SysGradient<float> g = sys_gradient<float>(batch, s.sys, obs, s.sys_rng);
      sys_update<float>(s.sys, s.sys_opt, g.grad, rates.sys);
      row.sys_loss = g.loss;
    });
    tag("sys_update");
  }

  s.y_last = std::move(y);
  ++s.n;
  tag("advance");

  row.reward = r;
  row.action = action;
  if (cfg_.run.record_wall_time)
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

// A fixed-action or random-walk run; shares seeds with the learned run.
inline std::vector<MetricsRow> run_baseline(PolicyKind kind, const RunConfig& cfg,
                                            std::uint64_t seed) {
  if (kind == PolicyKind::Learned) throw ConfigurationError("run_baseline: not a baseline policy");
  Run r(cfg, seed, kind);
  return r.run(cfg.run.iterations);
}

}  // namespace stgrid
