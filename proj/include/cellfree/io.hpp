#ifndef CELLFREE_IO_HPP
#define CELLFREE_IO_HPP

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cellfree/common.hpp"
#include "cellfree/powerctl.hpp"
#include "cellfree/scenario.hpp"
#include "cellfree/teammse.hpp"

namespace cellfree::io {

using json = nlohmann::ordered_json;

namespace detail {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("config field '") + key + "': " + ex.what());
  }
}

inline json positions_json(const Positions& pos) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < pos.rows(); ++i) arr.push_back({pos(i, 0), pos(i, 1)});
  return arr;
}

}  // namespace detail

/// Parses "uniform" or a comma-separated list of positive weights.
inline std::vector<double> parse_weights(const std::string& text) {
  if (text == "uniform") return {};
  std::vector<double> w;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      w.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("invalid weight '" + item + "'");
    }
  }
  if (w.empty()) throw ConfigError("empty weight list");
  return w;
}

inline NetworkConfig config_from_json(const json& j) {
  static const std::set<std::string> known = {
      "L", "N", "K", "Q", "area_side_m", "ap_height_delta_m", "pathloss_exponent_coeff",
      "pathloss_intercept_db", "shadow_std_db", "shadow_corr_dist_m", "bandwidth_hz",
      "noise_figure_db", "power_budget_dbm", "weights", "n_sim", "seed", "ap_positions"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& item : j.items())
    if (!known.contains(item.key())) throw ConfigError("unknown config field '" + item.key() + "'");
  NetworkConfig c;
  detail::read_field(j, "L", c.L);
  detail::read_field(j, "N", c.N);
  detail::read_field(j, "K", c.K);
  detail::read_field(j, "Q", c.Q);
  detail::read_field(j, "area_side_m", c.area_side_m);
  detail::read_field(j, "ap_height_delta_m", c.ap_height_delta_m);
  detail::read_field(j, "pathloss_exponent_coeff", c.pathloss_exponent_coeff);
  detail::read_field(j, "pathloss_intercept_db", c.pathloss_intercept_db);
  detail::read_field(j, "shadow_std_db", c.shadow_std_db);
  detail::read_field(j, "shadow_corr_dist_m", c.shadow_corr_dist_m);
  detail::read_field(j, "bandwidth_hz", c.bandwidth_hz);
  detail::read_field(j, "noise_figure_db", c.noise_figure_db);
  detail::read_field(j, "power_budget_dbm", c.power_budget_dbm);
  detail::read_field(j, "n_sim", c.n_sim);
  detail::read_field(j, "seed", c.seed);
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    if (w.is_string()) {
      c.weights = parse_weights(w.get<std::string>());
    } else {
      detail::read_field(j, "weights", c.weights);
    }
  }
  if (j.contains("ap_positions")) {
    std::vector<std::vector<double>> pts;
    detail::read_field(j, "ap_positions", pts);
    Positions pos(static_cast<Eigen::Index>(pts.size()), 2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (pts[i].size() != 2) throw ConfigError("ap_positions entries must be [x, y] pairs");
      pos(static_cast<Eigen::Index>(i), 0) = pts[i][0];
      pos(static_cast<Eigen::Index>(i), 1) = pts[i][1];
    }
    c.ap_positions = pos;
  }
  validate(c);
  return c;
}

inline json config_to_json(const NetworkConfig& c) {
  json j;
  j["L"] = c.L;
  j["N"] = c.N;
  j["K"] = c.K;
  j["Q"] = c.Q;
  j["area_side_m"] = c.area_side_m;
  j["ap_height_delta_m"] = c.ap_height_delta_m;
  j["pathloss_exponent_coeff"] = c.pathloss_exponent_coeff;
  j["pathloss_intercept_db"] = c.pathloss_intercept_db;
  j["shadow_std_db"] = c.shadow_std_db;
  j["shadow_corr_dist_m"] = c.shadow_corr_dist_m;
  j["bandwidth_hz"] = c.bandwidth_hz;
  j["noise_figure_db"] = c.noise_figure_db;
  j["power_budget_dbm"] = c.power_budget_dbm;
  if (c.weights.empty()) {
    j["weights"] = "uniform";
  } else {
    j["weights"] = c.weights;
  }
  j["n_sim"] = c.n_sim;
  j["seed"] = c.seed;
  if (c.ap_positions) j["ap_positions"] = detail::positions_json(*c.ap_positions);
  return j;
}

inline json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path);
  try {
    return json::parse(is);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
}

inline NetworkConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  os << text;
}

/// Geometry, clusters and gains (dB) for plotting.
inline json scenario_to_json(const NetworkScenario& s) {
  json j;
  j["L"] = s.num_aps();
  j["K"] = s.num_ues();
  j["N"] = s.N;
  j["Q"] = s.clusters.empty() ? 0 : s.clusters.front().size();
  j["power_budget_mw"] = s.power_budget;
  j["noise_dbm"] = s.noise_dbm;
  j["ap_positions"] = detail::positions_json(s.ap_positions);
  j["ue_positions"] = detail::positions_json(s.ue_positions);
  j["clusters"] = s.clusters;
  json gains = json::array();
  for (Eigen::Index l = 0; l < s.gains.rows(); ++l) {
    std::vector<double> row;
    for (Eigen::Index k = 0; k < s.gains.cols(); ++k) row.push_back(linear_to_db(s.gains(l, k)));
    gains.push_back(row);
  }
  j["gains_db"] = gains;
  j["weights"] = std::vector<double>(s.weights.data(), s.weights.data() + s.weights.size());
  return j;
}

inline std::vector<double> interleave(const CVector& v) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(2 * v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(v(i).real());
    out.push_back(v(i).imag());
  }
  return out;
}

/// Long-term parameters of the final beamformers. Each set lists its power
/// vector and (team MMSE) psi per AP; `owner[k]` names the set UE k uses and
/// every serving (AP, UE) pair carries c_{l,k} as interleaved re/im values.
inline json beamformers_to_json(const BeamformerSelection& sel, const NetworkScenario& s) {
  json j;
  j["rule"] = to_string(sel.rule());
  json sets = json::array();
  for (const BeamformerSet& bf : sel.sets) {
    json entry;
    entry["power_mw"] = std::vector<double>(bf.power.data(), bf.power.data() + bf.power.size());
    if (bf.rule == BeamformingRule::team_mmse)
      entry["psi"] = std::vector<double>(bf.psi.data(), bf.psi.data() + bf.psi.size());
    sets.push_back(entry);
  }
  j["sets"] = sets;
  j["owner"] = sel.owner;
  if (sel.rule() == BeamformingRule::team_mmse) {
    json cs = json::array();
    for (std::size_t k = 0; k < s.num_ues(); ++k) {
      const BeamformerSet& bf = sel.sets[sel.owner[k]];
      for (std::size_t l : s.clusters[k])
        cs.push_back({{"ap", l}, {"ue", k}, {"c", interleave(bf.c[l].col(static_cast<Eigen::Index>(k)))}});
    }
    j["c"] = cs;
  }
  return j;
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Columns: iter, step, min_weighted_sinr, min_rate_bps_hz, residual, then
/// one p_k column per UE in dBm.
inline std::string trace_to_csv(const ConvergenceTrace& trace) {
  std::ostringstream os;
  os << "iter,step,min_weighted_sinr,min_rate_bps_hz,residual";
  const Eigen::Index K = trace.empty() ? 0 : trace.front().power.size();
  for (Eigen::Index k = 0; k < K; ++k) os << ",p_" << (k + 1) << "_dbm";
  os << '\n';
  for (const TraceRecord& r : trace) {
    os << r.iteration << ',' << to_string(r.step) << ',' << format_double(r.min_weighted_sinr) << ','
       << format_double(r.min_rate) << ',' << format_double(r.residual);
    for (Eigen::Index k = 0; k < r.power.size(); ++k) os << ',' << format_double(linear_to_db(r.power(k)));
    os << '\n';
  }
  return os.str();
}

}  // namespace cellfree::io

#endif  // CELLFREE_IO_HPP
