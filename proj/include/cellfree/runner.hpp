#ifndef CELLFREE_RUNNER_HPP
#define CELLFREE_RUNNER_HPP

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cellfree/channel.hpp"
#include "cellfree/io.hpp"
#include "cellfree/powerctl.hpp"
#include "cellfree/scenario.hpp"
#include "cellfree/teammse.hpp"
#include "cellfree/uatf.hpp"

namespace cellfree {

enum class Algorithm { fp, ao };

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "fp") return Algorithm::fp;
  if (s == "ao") return Algorithm::ao;
  throw ConfigError("unknown algorithm '" + s + "' (expected fp or ao)");
}

inline BeamformingRule parse_beamformer(const std::string& s) {
  if (s == "tmmse") return BeamformingRule::team_mmse;
  if (s == "mf") return BeamformingRule::matched_filter;
  throw ConfigError("unknown beamformer '" + s + "' (expected tmmse or mf)");
}

struct RunOptions {
  Algorithm algorithm = Algorithm::fp;
  BeamformingRule beamformer = BeamformingRule::team_mmse;
  std::optional<std::vector<double>> weights;  // empty vector means uniform
  std::optional<std::uint64_t> seed;
  double tol = 1e-6;
  std::size_t max_iters = 100;
  std::string out_dir;  // no artifacts when empty
  bool dump_ensemble = false;
  bool dump_beamformers = false;
};

struct RunResult {
  RVector power_mw;
  RVector power_dbm;
  RVector rates;
  double min_rate = 0.0;
  double min_weighted_sinr = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double wall_time_s = 0.0;
  NetworkConfig config;
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::fp;
  BeamformingRule beamformer = BeamformingRule::team_mmse;
  ConvergenceTrace trace;
};

inline io::json result_to_json(const RunResult& r) {
  io::json j;
  j["algorithm"] = r.algorithm == Algorithm::fp ? "fp" : "ao";
  j["beamformer"] = r.beamformer == BeamformingRule::team_mmse ? "tmmse" : "mf";
  j["seed"] = r.seed;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["min_rate_bps_hz"] = r.min_rate;
  j["min_weighted_sinr"] = r.min_weighted_sinr;
  j["rates_bps_hz"] = std::vector<double>(r.rates.data(), r.rates.data() + r.rates.size());
  j["powers_dbm"] = std::vector<double>(r.power_dbm.data(), r.power_dbm.data() + r.power_dbm.size());
  j["powers_mw"] = std::vector<double>(r.power_mw.data(), r.power_mw.data() + r.power_mw.size());
  j["config"] = io::config_to_json(r.config);
  j["wall_time_s"] = r.wall_time_s;
  return j;
}

/// Scenario and ensemble shared by one run or by all entries of a sweep.
struct Deployment {
  NetworkConfig config;
  NetworkScenario scenario;
  ChannelEnsemble ensemble;
};

inline Deployment build_deployment(NetworkConfig config) {
  Deployment d;
  d.scenario = build_scenario(config);
  d.ensemble = sample_ensemble(d.scenario, config.n_sim, config.seed);
  d.config = std::move(config);
  return d;
}

inline NetworkConfig apply_overrides(NetworkConfig c, const RunOptions& opt) {
  if (opt.weights) c.weights = *opt.weights;
  if (opt.seed) c.seed = *opt.seed;
  validate(c);
  return c;
}

inline RunResult run_deployment(const Deployment& d, const RunOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  JointOptions jo;
  jo.tol = opt.tol;
  jo.max_iter = opt.max_iters;
  JointResult jr;
  const bool team = opt.beamformer == BeamformingRule::team_mmse;
  if (opt.algorithm == Algorithm::fp) {
    jr = team ? algorithm_fp(d.ensemble, d.scenario, TeamMmseRule{}, jo)
              : algorithm_fp(d.ensemble, d.scenario, MatchedFilterRule{}, jo);
  } else {
    jr = team ? algorithm_ao(d.ensemble, d.scenario, TeamMmseRule{}, jo)
              : algorithm_ao(d.ensemble, d.scenario, MatchedFilterRule{}, jo);
  }
  RunResult r;
  r.power_mw = jr.power;
  r.power_dbm = jr.power.unaryExpr([](double x) { return linear_to_db(x); });
  r.rates = rates(jr.stats, jr.power);
  r.min_rate = r.rates.minCoeff();
  r.min_weighted_sinr = weighted_sinrs(jr.stats, jr.power, d.scenario.weights).minCoeff();
  r.iterations = jr.iterations;
  r.converged = jr.converged;
  r.config = d.config;
  r.seed = d.config.seed;
  r.algorithm = opt.algorithm;
  r.beamformer = opt.beamformer;
  r.trace = std::move(jr.trace);
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    const std::filesystem::path out(opt.out_dir);
    io::write_text((out / "trace.csv").string(), io::trace_to_csv(r.trace));
    io::write_text((out / "result.json").string(), result_to_json(r).dump(2) + "\n");
    io::write_text((out / "scenario.json").string(), io::scenario_to_json(d.scenario).dump(2) + "\n");
    if (opt.dump_beamformers)
      io::write_text((out / "beamformers.json").string(),
                     io::beamformers_to_json(jr.beamformers, d.scenario).dump(2) + "\n");
    if (opt.dump_ensemble) dump_ensemble(d.ensemble, (out / "ensemble.bin").string());
  }
  return r;
}

/// End-to-end run: config file + flags -> result and artifacts in opt.out_dir.
inline RunResult run(const NetworkConfig& config, const RunOptions& opt) {
  return run_deployment(build_deployment(apply_overrides(config, opt)), opt);
}

inline RunResult run(const std::string& config_path, const RunOptions& opt) {
  return run(io::load_config(config_path), opt);
}

/// One converged run per weight vector on a common scenario and ensemble, so
/// the resulting rate tuples belong to the same rate region.
inline std::vector<RunResult> sweep_weights(const NetworkConfig& config, const RunOptions& opt,
                                            const std::vector<std::vector<double>>& weight_list) {
  if (weight_list.empty()) throw ConfigError("sweep needs at least one weight vector");
  for (const auto& w : weight_list) {
    NetworkConfig probe = config;
    probe.weights = w;
    validate(probe);
  }
  RunOptions base = opt;
  base.weights.reset();
  Deployment d = build_deployment(apply_overrides(config, base));
  std::vector<RunResult> results;
  io::json summary = io::json::array();
  for (std::size_t i = 0; i < weight_list.size(); ++i) {
    d.config.weights = weight_list[i];
    d.scenario.weights = d.config.weights.empty()
                             ? RVector::Ones(static_cast<Eigen::Index>(d.scenario.num_ues()))
                             : RVector(Eigen::Map<const RVector>(weight_list[i].data(),
                                                                 static_cast<Eigen::Index>(weight_list[i].size())));
    RunOptions entry = base;
    if (!opt.out_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "sweep_%03zu", i);
      entry.out_dir = (std::filesystem::path(opt.out_dir) / name).string();
    }
    results.push_back(run_deployment(d, entry));
    io::json row = result_to_json(results.back());
    row.erase("config");
    row["weights"] = weight_list[i];
    summary.push_back(row);
  }
  if (!opt.out_dir.empty())
    io::write_text((std::filesystem::path(opt.out_dir) / "sweep.json").string(), summary.dump(2) + "\n");
  return results;
}

inline std::vector<RunResult> sweep_weights(const std::string& config_path, const RunOptions& opt,
                                            const std::vector<std::vector<double>>& weight_list) {
  return sweep_weights(io::load_config(config_path), opt, weight_list);
}

}  // namespace cellfree

#endif  // CELLFREE_RUNNER_HPP
