#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cellfree/runner.hpp"

namespace {

struct Flags {
  std::string config;
  std::string algorithm = "fp";
  std::string beamformer = "tmmse";
  std::string weights = "uniform";
  std::uint64_t seed = 0;
  double tol = 1e-6;
  std::size_t max_iters = 100;
  std::string out = "out";
  bool dump_ensemble = false;
  bool dump_beamformers = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "network configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--algorithm", f.algorithm, "fp | ao")->check(CLI::IsMember({"fp", "ao"}));
  cmd->add_option("--beamformer", f.beamformer, "tmmse | mf")->check(CLI::IsMember({"tmmse", "mf"}));
  cmd->add_option("--seed", f.seed, "override the config seed");
  cmd->add_option("--tol", f.tol, "outer stopping tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iters", f.max_iters, "maximum outer iterations")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out, "artifact directory");
}

cellfree::RunOptions to_options(const Flags& f, const CLI::App* cmd) {
  cellfree::RunOptions opt;
  opt.algorithm = cellfree::parse_algorithm(f.algorithm);
  opt.beamformer = cellfree::parse_beamformer(f.beamformer);
  if (cmd->count("--seed") > 0) opt.seed = f.seed;
  opt.tol = f.tol;
  opt.max_iters = f.max_iters;
  opt.out_dir = f.out;
  opt.dump_ensemble = f.dump_ensemble;
  opt.dump_beamformers = f.dump_beamformers;
  return opt;
}

void print_summary(const cellfree::RunResult& r) {
  std::printf("iterations %zu (%s), min rate %.6f bit/s/Hz, min weighted SINR %.6g, %.2f s\n", r.iterations,
              r.converged ? "converged" : "not converged", r.min_rate, r.min_weighted_sinr, r.wall_time_s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uplink max-min power control with distributed team MMSE beamforming"};
  app.require_subcommand(1);

  Flags run_flags;
  CLI::App* run_cmd = app.add_subcommand("run", "optimize one weight vector");
  add_common(run_cmd, run_flags);
  run_cmd->add_option("--weights", run_flags.weights, "comma-separated weights or 'uniform'");
  run_cmd->add_flag("--dump-ensemble", run_flags.dump_ensemble, "write ensemble.bin");
  run_cmd->add_flag("--dump-beamformers", run_flags.dump_beamformers, "write beamformers.json");

  Flags sweep_flags;
  std::string weight_list;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "optimize several weight vectors on one deployment");
  add_common(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--weights", weight_list, "weight vectors separated by ';', e.g. '1,2;2,1'")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) {
      cellfree::RunOptions opt = to_options(run_flags, run_cmd);
      if (run_cmd->count("--weights") > 0) opt.weights = cellfree::io::parse_weights(run_flags.weights);
      print_summary(cellfree::run(run_flags.config, opt));
    } else {
      cellfree::RunOptions opt = to_options(sweep_flags, sweep_cmd);
      std::vector<std::vector<double>> list;
      std::stringstream ss(weight_list);
      std::string item;
      while (std::getline(ss, item, ';')) list.push_back(cellfree::io::parse_weights(item));
      for (const auto& r : cellfree::sweep_weights(sweep_flags.config, opt, list)) print_summary(r);
    }
  } catch (const cellfree::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const cellfree::DegenerateBeamformerError& e) {
    std::cerr << "degenerate beamformer: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
