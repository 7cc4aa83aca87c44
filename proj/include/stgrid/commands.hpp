#pragma once

// Command bodies behind the CLI verbs. Each writes only below the configured
// output directory and returns a process exit status.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stgrid/checkpoint.hpp"
#include "stgrid/config.hpp"
#include "stgrid/filter.hpp"
#include "stgrid/metrics.hpp"
#include "stgrid/orchestrator.hpp"
#include "stgrid/parallel.hpp"
#include "stgrid/pgm.hpp"

namespace stgrid {

namespace fs = std::filesystem;

inline void prepare_output(const RunConfig& cfg) {
  fs::create_directories(cfg.run.output);
  std::ofstream echo(fs::path(cfg.run.output) / "config.ini", std::ios::trunc);
  if (!echo) throw ConfigurationError("cannot write to output directory " + cfg.run.output);
  echo << serialize_config(cfg);
}

inline void write_state_frames(const std::string& dir, long k, const StateMap& state,
                               const ObservationMap* y, const BeliefGrid* belief) {
  fs::create_directories(dir);
  write_pgm(frame_path(dir, "state", k), state.rows(), state.cols(), state_pixels(state, 3));
  if (y) write_pgm(frame_path(dir, "observation", k), y->rows(), y->cols(), observation_pixels(*y, 3));
  if (belief)
    for (std::size_t m = 0; m < belief->states(); ++m)
      write_pgm(frame_path(dir, "belief" + std::to_string(m), k), belief->rows(), belief->cols(),
                channel_pixels(belief->probs, m));
}

// Free-running environment: per-step occupancy and optional frames.
inline int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  prepare_output(cfg);
  const std::uint64_t seed = cfg.run.seeds.front();
  const ModelParams model = cfg.model();
  Environment env(model, StateMap(cfg.grid.rows, cfg.grid.cols, 0),
                  make_stream(seed, Stream::kEnvTransition), make_stream(seed, Stream::kEnvObservation));
  for (long t = 0; t < cfg.run.burn_in; ++t) env.step();
  if (cfg.run.iterations == 0) {
    log << "simulate: 0 steps, wrote config only\n";
    return 0;
  }
  const std::string dir = cfg.run.output;
  std::ofstream occ(fs::path(dir) / "occupancy.csv", std::ios::trunc);
  occ << "k,normal,latent,fire,fire_cluster\n";
  std::vector<double> mean(3, 0.0);
  for (long k = 0; k < cfg.run.iterations; ++k) {
    const auto f = occupancy(env.state(), 3);
    occ << k << "," << detail::shortest(f[0]) << "," << detail::shortest(f[1]) << ","
        << detail::shortest(f[2]) << "," << detail::shortest(mean_cluster_size(env.state(), 2)) << "\n";
    for (std::size_t m = 0; m < 3; ++m) mean[m] += f[m] / static_cast<double>(cfg.run.iterations);
    if (cfg.run.frames.due(k)) {
      const ObservationMap y = env.observe_everything();
      write_state_frames(dir + "/frames", k, env.state(), &y, nullptr);
    }
    env.step();
  }
  log << "simulate: " << cfg.run.iterations << " steps, mean occupancy normal "
      << mean[0] << " latent " << mean[1] << " fire " << mean[2] << "\n";
  return 0;
}

inline ObsMatrix filter_observation_model(const RunConfig& cfg) {
  if (cfg.filter.observation_model == "uninformative") return ObsMatrix::uniform(3, 3);
  if (cfg.filter.observation_model == "identity") return ObsMatrix::smoothed_identity(3, 1e-6);
  return cfg.model().obs;
}

// Known-model filter on full observations next to the uncorrected Phi iteration.
inline int cmd_filter_demo(const RunConfig& cfg, std::ostream& log) {
  prepare_output(cfg);
  const std::uint64_t seed = cfg.run.seeds.front();
  ModelParams model = cfg.model();
  model.obs = filter_observation_model(cfg);
  Environment env(model, StateMap(cfg.grid.rows, cfg.grid.cols, 0),
                  make_stream(seed, Stream::kEnvTransition), make_stream(seed, Stream::kEnvObservation));
  for (long t = 0; t < cfg.run.burn_in; ++t) env.step();
  std::ofstream csv(fs::path(cfg.run.output) / "filter.csv", std::ios::trunc);
  csv << "k,ce_filter,ce_phi\n";
  BeliefGrid u = BeliefGrid::uniform(3, cfg.grid.rows, cfg.grid.cols), v = u;
  double sum_f = 0.0, sum_p = 0.0;
  for (long k = 0; k < cfg.filter.steps; ++k) {
    const ObservationMap y = env.observe_everything();
    const BeliefGrid p = bayes_correct(u, y, model.obs);
    const double cf = mean_cross_entropy(p, env.state()), cp = mean_cross_entropy(v, env.state());
    sum_f += cf;
    sum_p += cp;
    csv << k << "," << detail::shortest(cf) << "," << detail::shortest(cp) << "\n";
    if (cfg.run.frames.due(k)) write_state_frames(cfg.run.output + "/frames", k, env.state(), &y, &p);
    u = predict(p, model);
    v = predict(v, model);
    env.step();
  }
  if (cfg.filter.steps > 0) {
    const double n = static_cast<double>(cfg.filter.steps);
    log << "filter-demo: mean cross-entropy filter " << sum_f / n << " vs phi-only " << sum_p / n
        << "\n";
  }
  return 0;
}

inline std::string seed_dir(const RunConfig& cfg, std::uint64_t seed) {
  return cfg.run.output + "/seed_" + std::to_string(seed);
}

// Drives a run to `until`, writing metrics, frames and checkpoints under dir.
inline void drive(Run& run, long until, const std::string& dir, std::ostream& log) {
  fs::create_directories(dir);
  const RunConfig& cfg = run.config();
  MetricsWriter metrics(dir + "/metrics.csv");
  while (run.iteration() < until) {
    const long n = run.iteration();
    const MetricsRow row = run.iterate();
    metrics.write(row);
    if (cfg.run.frames.due(n)) {
      const BeliefGrid* b = run.policy() == PolicyKind::RandomWalk ? nullptr : &run.estimate();
      write_state_frames(dir + "/frames", n, run.last_state(), &run.state().y_last, b);
    }
    if (cfg.run.checkpoint_every > 0 && run.iteration() % cfg.run.checkpoint_every == 0)
      save_checkpoint(dir + "/ckpt_" + std::to_string(run.iteration()) + ".bin", run);
  }
  save_checkpoint(dir + "/final.bin", run);
  log << policy_name(run.policy()) << " seed " << run.seed() << ": " << run.iteration()
      << " iterations, final-10% mean reward " << final_tenth_mean(read_metrics(dir + "/metrics.csv"))
      << "\n";
}

// Orchestrator runs for every configured seed, or the suffix of a resumed run.
inline int cmd_train(const RunConfig& cfg, std::ostream& log,
                     const std::optional<std::string>& resume_from = std::nullopt) {
  if (resume_from) {
    LoadedRun loaded = load_checkpoint(*resume_from);
    loaded.config.run.output = cfg.run.output;
    loaded.config.run.iterations = cfg.run.iterations;
    loaded.config.run.frames = cfg.run.frames;
    loaded.config.run.checkpoint_every = cfg.run.checkpoint_every;
    loaded.config.run.record_wall_time = cfg.run.record_wall_time;
    prepare_output(loaded.config);
    Run run = resume(std::move(loaded));
    log << "resuming " << policy_name(run.policy()) << " seed " << run.seed() << " at iteration "
        << run.iteration() << "\n";
    drive(run, run.config().run.iterations, seed_dir(run.config(), run.seed()), log);
    return 0;
  }
  prepare_output(cfg);
  for (std::uint64_t seed : cfg.run.seeds) {
    Run run(cfg, seed, cfg.run.policy);
    drive(run, cfg.run.iterations, seed_dir(cfg, seed), log);
  }
  return 0;
}

struct CompareRow {
  PolicyKind policy;
  std::vector<double> per_seed;  // final-10% mean reward per seed
  double mean = 0.0;
  double percent_of_random = 0.0;
};

inline std::string compare_csv_path(const RunConfig& cfg, PolicyKind k, std::uint64_t seed) {
  return cfg.run.output + "/" + policy_name(k) + "_seed" + std::to_string(seed) + ".csv";
}

// Mean final-10% reward per policy from the per-run CSVs.
inline std::vector<CompareRow> summarize_compare(const RunConfig& cfg) {
  std::vector<CompareRow> rows;
  for (PolicyKind k : {PolicyKind::RandomWalk, PolicyKind::Learned, PolicyKind::Exploitation,
                       PolicyKind::Exploratory}) {
    CompareRow r{k, {}, 0.0, 0.0};
    for (std::uint64_t seed : cfg.run.seeds) {
      r.per_seed.push_back(final_tenth_mean(read_metrics(compare_csv_path(cfg, k, seed))));
      r.mean += r.per_seed.back() / static_cast<double>(cfg.run.seeds.size());
    }
    rows.push_back(std::move(r));
  }
  const double base = rows.front().mean;
  for (CompareRow& r : rows) r.percent_of_random = base > 0 ? 100.0 * r.mean / base : 0.0;
  return rows;
}

inline std::string format_compare_table(const std::vector<CompareRow>& rows) {
  std::string out = "policy    mean_reward  percent_of_random\n";
  char line[128];
  for (const CompareRow& r : rows) {
    std::snprintf(line, sizeof line, "%-9s %11.3f  %16.1f\n", policy_name(r.policy).c_str(), r.mean,
                  r.percent_of_random);
    out += line;
  }
  return out;
}

// All four policies over the shared seed list. Arms run on up to
// STGRID_THREADS workers; each arm is independent and deterministic.
inline int cmd_compare(const RunConfig& cfg, std::ostream& log) {
  prepare_output(cfg);
  struct Arm {
    PolicyKind policy;
    std::uint64_t seed;
  };
  std::vector<Arm> arms;
  for (PolicyKind k : kAllPolicies)
    for (std::uint64_t seed : cfg.run.seeds) arms.push_back({k, seed});
  std::vector<std::string> errors(arms.size());
  parallel_for(arms.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      try {
        Run run(cfg, arms[i].seed, arms[i].policy);
        MetricsWriter w(compare_csv_path(cfg, arms[i].policy, arms[i].seed));
        for (long n = 0; n < cfg.run.iterations; ++n) w.write(run.iterate());
      } catch (const std::exception& ex) {
        errors[i] = policy_name(arms[i].policy) + " seed " + std::to_string(arms[i].seed) + ": " + ex.what();
      }
    }
  });
  for (const std::string& e : errors)
    if (!e.empty()) throw std::runtime_error(e);
  const auto rows = summarize_compare(cfg);
  std::ofstream summary(fs::path(cfg.run.output) / "summary.csv", std::ios::trunc);
  summary << "policy,seeds,mean_final_reward,percent_of_random\n";
  for (const CompareRow& r : rows)
    summary << policy_name(r.policy) << "," << cfg.run.seeds.size() << "," << detail::shortest(r.mean)
            << "," << detail::shortest(r.percent_of_random) << "\n";
  log << format_compare_table(rows);
  return 0;
}

}  // namespace stgrid
