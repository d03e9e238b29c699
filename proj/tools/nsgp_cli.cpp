// nsgp: command-line driver for GEV fitting, NNGP posterior sampling and
// local-kriging prediction of gridded return-value fields.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nsgp/nsgp.hpp"

#ifndef NSGP_VERSION
#define NSGP_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

using namespace nsgp;

struct KeySpec {
  const char* name;
  const char* value;
  const char* help;
};

// Every recognized key with its default. Config files and --set may only use these.
const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> keys{
      {"input", "", "cell CSV (cell_id, longitude, latitude, ind_land, rv20)"},
      {"ensemble", "", "ensemble CSV for fit-gev (cell_id, year, member, value)"},
      {"out_dir", "nsgp_out", "directory for every output file"},
      {"chain", "", "chain CSV (default <out_dir>/chain.csv)"},
      {"neighbor_cache", "", "neighbor cache directory (default <out_dir>/cache)"},
      {"k", "15", "neighbors per conditioning / prediction set"},
      {"nu", "0.5", "Matern smoothness"},
      {"jitter", "0", "diagonal jitter added to covariance blocks"},
      {"spline_df", "3", "latitude spline degrees of freedom"},
      {"land_interaction", "1", "include latitude x land terms in the SD design"},
      {"n_iter", "20000", "MCMC iterations"},
      {"n_burn", "10000", "burn-in iterations"},
      {"thin", "5", "keep every thin-th iteration after burn-in"},
      {"adapt_interval", "50", "iterations between proposal adaptations"},
      {"seed", "1", "random seed"},
      {"threads", "1", "worker threads (0 = hardware concurrency)"},
      {"target", "y", "prediction target: y (latent) or z (with nugget)"},
      {"predict_set", "missing", "cells to predict: missing or all"},
      {"predict_thin", "1", "use every n-th saved draw for prediction"},
      {"level", "0.99", "credible level for summaries"},
      {"period", "20", "return period in years for fit-gev"},
      {"sim_layout", "scattered", "simulate: scattered or grid"},
      {"sim_n", "300", "simulate: number of scattered cells"},
      {"sim_n_lon", "24", "simulate: grid columns"},
      {"sim_n_lat", "12", "simulate: grid rows"},
      {"sim_lat_limit", "80", "simulate: |latitude| bound of the cells"},
      {"sim_mu", "290", "simulate: mean"},
      {"sim_tau2", "0.05", "simulate: nugget variance"},
      {"sim_alpha", "", "simulate: SD coefficients, comma separated (default 0.5,0,...)"},
      {"sim_phi", "-0.2,0.4", "simulate: range coefficients, comma separated"},
      {"sim_missing", "0.1", "simulate: fraction of cells left without a response"},
  };
  return keys;
}

class Config {
 public:
  Config() {
    for (const auto& k : key_table()) values_[k.name] = k.value;
  }

  void set(const std::string& key, const std::string& value, const std::string& where) {
    if (!values_.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    values_[key] = value;
  }

  void set_assignment(const std::string& kv, const std::string& where) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value, got '" + kv + "'");
    set(io::trim(kv.substr(0, eq)), io::trim(kv.substr(eq + 1)), where);
  }

  void load_file(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
      ++n;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      if (io::trim(line).empty()) continue;
      set_assignment(line, path.string() + ":" + std::to_string(n));
    }
  }

  [[nodiscard]] const std::string& str(const std::string& key) const { return values_.at(key); }

  [[nodiscard]] double num(const std::string& key) const {
    const std::string& s = str(key);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
      throw ConfigError("key '" + key + "' must be a number, got '" + s + "'");
    return v;
  }

  [[nodiscard]] std::size_t count(const std::string& key) const {
    const std::string& s = str(key);
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw ConfigError("key '" + key + "' must be a non-negative integer, got '" + s + "'");
    return v;
  }

  [[nodiscard]] bool flag(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "1" || s == "true" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "no") return false;
    throw ConfigError("key '" + key + "' must be 0 or 1, got '" + s + "'");
  }

  [[nodiscard]] std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    if (str(key).empty()) return out;
    for (const auto& part : io::split_csv(str(key))) {
      double v = 0.0;
      const auto t = io::trim(part);
      const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
      if (res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw ConfigError("key '" + key + "' must be a comma-separated list of numbers");
      out.push_back(v);
    }
    return out;
  }

  [[nodiscard]] fs::path out_dir() const { return str("out_dir"); }

  [[nodiscard]] fs::path chain_path() const {
    return str("chain").empty() ? out_dir() / "chain.csv" : fs::path(str("chain"));
  }

  [[nodiscard]] fs::path cache_dir() const {
    return str("neighbor_cache").empty() ? out_dir() / "cache" : fs::path(str("neighbor_cache"));
  }

  [[nodiscard]] std::size_t threads() const {
    const std::size_t t = count("threads");
    return t == 0 ? std::max(1u, std::thread::hardware_concurrency()) : t;
  }

  [[nodiscard]] KernelConfig kernel() const {
    KernelConfig k;
    k.nu = num("nu");
    k.jitter = num("jitter");
    if (!(k.nu > 0.0)) throw ConfigError("nu must be positive");
    if (k.jitter < 0.0) throw ConfigError("jitter must be non-negative");
    return k;
  }

  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

  [[nodiscard]] std::string hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& [k, v] : values_) {
      for (char c : k + "=" + v + "\n") {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
      }
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

 private:
  std::map<std::string, std::string> values_;
};

bool g_quiet = false;

void log(const std::string& msg) {
  if (!g_quiet) std::cerr << "nsgp: " << msg << '\n';
}

/// Run record written next to the outputs whether or not the command succeeds.
class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {
    doc_["tool"] = "nsgp";
    doc_["version"] = NSGP_VERSION;
    doc_["command"] = command_;
    doc_["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                            std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION);
    doc_["stages"] = ordered_json::array();
  }

  template <class Fn>
  auto stage(const std::string& name, Fn&& fn) {
    current_ = name;
    const auto t0 = std::chrono::steady_clock::now();
    auto record = [&] {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      doc_["stages"].push_back({{"name", name}, {"wall_seconds", dt.count()}});
      current_ = "after " + name;
    };
    if constexpr (std::is_void_v<std::invoke_result_t<Fn>>) {
      fn();
      record();
    } else {
      auto out = fn();
      record();
      return out;
    }
  }

  ordered_json& doc() { return doc_; }
  [[nodiscard]] const std::string& current_stage() const { return current_; }

  void write(const fs::path& dir) const {
    const auto body = doc_.dump(2) + "\n";
    io::atomic_write(dir / ("manifest_" + command_ + ".json"), [&](std::ostream& os) { os << body; });
  }

 private:
  std::string command_;
  std::string current_ = "setup";
  ordered_json doc_;
};

void require_file(const Config& cfg, const std::string& key) {
  const std::string& p = cfg.str(key);
  if (p.empty()) throw ConfigError("key '" + key + "' is required for this command");
  if (!fs::exists(p)) throw ConfigError(key + " file does not exist: " + p);
}

SpatialDataset load_dataset(const Config& cfg, Manifest& m) {
  require_file(cfg, "input");
  io::IngestReport rep;
  SpatialDataset d = io::read_dataset(cfg.str("input"), &rep);
  log("read " + std::to_string(rep.rows) + " rows from " + cfg.str("input") + ", dropped " +
      std::to_string(rep.dropped_poles) + " pole cells, " + std::to_string(rep.missing_response) +
      " cells without a response");
  for (const auto& c : rep.ignored_columns) log("ignoring unrecognized column '" + c + "'");
  m.doc()["ingest"] = {{"rows", rep.rows},
                       {"dropped_poles", rep.dropped_poles},
                       {"missing_response", rep.missing_response},
                       {"ignored_columns", rep.ignored_columns}};
  if (d.size() == 0) throw DataError("no usable cells in " + cfg.str("input"));
  return d;
}

/// Design for every cell. The spline basis always comes from all cell
/// latitudes so fitting and prediction share the same knots.
DesignMatrices full_design(const Config& cfg, const SpatialDataset& d) {
  const auto df = static_cast<int>(cfg.count("spline_df"));
  if (df < 1) throw ConfigError("spline_df must be at least 1");
  return build_design(d, build_spline_basis(d.latitudes(), df), cfg.flag("land_interaction"));
}

struct Observed {
  std::vector<std::size_t> idx;
  std::vector<XyzPoint> points;
  std::vector<double> z;
  DesignMatrices design;
};

Observed observed_part(const SpatialDataset& d, const DesignMatrices& full) {
  Observed o;
  o.idx = d.observed_indices();
  if (o.idx.size() < 2) throw DataError("need at least two cells with a response");
  const SpatialDataset sub = d.subset(o.idx);
  o.points = sub.points();
  o.z = sub.response();
  o.design = select_rows(full, o.idx);
  check_distinct(o.points);
  return o;
}

std::size_t neighbor_count(const Config& cfg) {
  const std::size_t k = cfg.count("k");
  if (k < 1) throw ConfigError("k must be at least 1");
  return k;
}

/// Loads the conditioning sets from the cache or builds and stores them.
NeighborGraph cached_graph(const Config& cfg, std::span<const XyzPoint> pts, Manifest& m) {
  const std::size_t k = neighbor_count(cfg);
  const std::uint64_t key = neighbor_cache_key(pts, k);
  char name[40];
  std::snprintf(name, sizeof(name), "nbr-%016llx.txt", static_cast<unsigned long long>(key));
  const fs::path path = cfg.cache_dir() / name;
  m.doc()["neighbor_cache"] = path.string();
  NeighborGraph g;
  if (std::ifstream is(path); is && read_neighbor_graph(is, key, g) && g.size() == pts.size()) {
    log("reusing neighbor sets from " + path.string());
    m.doc()["neighbor_cache_hit"] = true;
    return g;
  }
  g = build_neighbor_graph(pts, k);
  io::atomic_write(path, [&](std::ostream& os) { write_neighbor_graph(os, g, key); });
  log("wrote neighbor sets to " + path.string());
  m.doc()["neighbor_cache_hit"] = false;
  return g;
}

ThetaState simulation_theta(const Config& cfg, const DesignMatrices& d) {
  ThetaState t;
  t.mu = cfg.num("sim_mu");
  t.tau2 = cfg.num("sim_tau2");
  const auto alpha = cfg.list("sim_alpha");
  const auto phi = cfg.list("sim_phi");
  t.alpha = Eigen::VectorXd::Zero(d.x_sigma.cols());
  if (alpha.empty()) {
    t.alpha(0) = 0.5;
  } else if (alpha.size() == static_cast<std::size_t>(t.alpha.size())) {
    t.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), t.alpha.size());
  } else {
    throw ConfigError("sim_alpha needs " + std::to_string(t.alpha.size()) + " values");
  }
  if (phi.size() != static_cast<std::size_t>(d.x_range.cols()))
    throw ConfigError("sim_phi needs " + std::to_string(d.x_range.cols()) + " values");
  t.phi = Eigen::Map<const Eigen::VectorXd>(phi.data(), d.x_range.cols());
  return t;
}

void cmd_simulate(const Config& cfg, Manifest& m) {
  const std::uint64_t seed = cfg.count("seed");
  SpatialDataset d = m.stage("layout", [&] {
    const double lat_limit = cfg.num("sim_lat_limit");
    if (!(lat_limit > 0.0 && lat_limit < kPoleLatitude))
      throw ConfigError("sim_lat_limit must lie in (0, 89)");
    const std::string& layout = cfg.str("sim_layout");
    if (layout == "grid") return make_grid(cfg.count("sim_n_lon"), cfg.count("sim_n_lat"), lat_limit);
    if (layout == "scattered") return make_scattered(cfg.count("sim_n"), seed, lat_limit);
    throw ConfigError("sim_layout must be 'grid' or 'scattered'");
  });
  const DesignMatrices design = full_design(cfg, d);
  const ThetaState theta = simulation_theta(cfg, design);
  const double missing = cfg.num("sim_missing");
  if (!(missing >= 0.0 && missing < 1.0)) throw ConfigError("sim_missing must lie in [0, 1)");

  const auto z = m.stage("draw", [&] {
    return simulate_response(d.points(), design, theta, seed + 1, cfg.kernel());
  });
  std::vector<std::size_t> perm(d.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed + 2);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_missing = static_cast<std::size_t>(std::floor(missing * static_cast<double>(d.size())));
  std::vector<char> is_missing(d.size(), 0);
  for (std::size_t i = 0; i < n_missing; ++i) is_missing[perm[i]] = 1;
  for (std::size_t i = 0; i < d.size(); ++i) d.cells[i].rv20 = is_missing[i] ? kMissing : z[i];

  const fs::path data_path = cfg.out_dir() / "simulated.csv";
  const fs::path truth_path = cfg.out_dir() / "truth.csv";
  m.stage("write", [&] {
    io::atomic_write(data_path, [&](std::ostream& os) { io::write_dataset(os, d); });
    io::atomic_write(truth_path, [&](std::ostream& os) {
      os << "parameter,value\n";
      const auto names = parameter_names(theta.alpha.size(), theta.phi.size());
      const Eigen::VectorXd v = theta.pack();
      for (std::size_t j = 0; j < names.size(); ++j)
        os << names[j] << ',' << io::fmt(v(static_cast<Eigen::Index>(j))) << '\n';
      // Full latent field, for checking predictions against the truth.
      os << "# cell_id,latent\n";
      for (std::size_t i = 0; i < d.size(); ++i)
        os << "# " << d.cells[i].cell_id << ',' << io::fmt(z[i]) << '\n';
    });
  });
  m.doc()["outputs"] = {data_path.string(), truth_path.string()};
  m.doc()["cells"] = d.size();
  m.doc()["missing_cells"] = n_missing;
  log("simulated " + std::to_string(d.size()) + " cells into " + data_path.string());
}

void cmd_fit_gev(const Config& cfg, Manifest& m) {
  require_file(cfg, "ensemble");
  const double period = cfg.num("period");
  if (!(period > 1.0)) throw ConfigError("period must exceed 1 year");
  SpatialDataset d = load_dataset(cfg, m);
  const auto series = m.stage("maxima", [&] {
    const auto rows = io::parse_ensemble(io::read_csv_file(cfg.str("ensemble")));
    return extract_annual_maxima(rows);
  });
  std::vector<GevFit> fits(series.size());
  m.stage("fit", [&] {
    parallel_for(series.size(), cfg.threads(), [&](std::size_t b, std::size_t e, std::size_t) {
      for (std::size_t i = b; i < e; ++i) fits[i] = fit_gev(series[i]);
    });
  });

  std::map<std::int64_t, double> rv;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (fits[i].converged) {
      rv[series[i].cell_id] = return_value(fits[i].params, period);
    } else {
      ++failed;
    }
  }
  for (auto& c : d.cells) {
    const auto it = rv.find(c.cell_id);
    c.rv20 = it == rv.end() ? kMissing : it->second;
  }
  const fs::path fits_path = cfg.out_dir() / "gev_fits.csv";
  const fs::path data_path = cfg.out_dir() / "dataset.csv";
  m.stage("write", [&] {
    io::atomic_write(fits_path, [&](std::ostream& os) { io::write_gev_fits(os, series, fits, period); });
    io::atomic_write(data_path, [&](std::ostream& os) { io::write_dataset(os, d); });
  });
  m.doc()["series"] = series.size();
  m.doc()["failed_fits"] = failed;
  m.doc()["outputs"] = {fits_path.string(), data_path.string()};
  log("fitted " + std::to_string(series.size()) + " cells, " + std::to_string(failed) +
      " did not converge");
}

void cmd_build_neighbors(const Config& cfg, Manifest& m) {
  const SpatialDataset d = load_dataset(cfg, m);
  const auto points = d.subset(d.observed_indices()).points();
  if (points.size() < 2) throw DataError("need at least two cells with a response");
  check_distinct(points);
  const NeighborGraph g = m.stage("neighbors", [&] { return cached_graph(cfg, points, m); });
  m.doc()["points"] = g.size();
  m.doc()["k"] = g.k;
}

void cmd_mcmc(const Config& cfg, Manifest& m) {
  SamplerConfig sc;
  sc.n_iter = cfg.count("n_iter");
  sc.n_burn = cfg.count("n_burn");
  sc.thin = cfg.count("thin");
  sc.adapt_interval = cfg.count("adapt_interval");
  sc.rng_seed = cfg.count("seed");
  sc.validate();
  const KernelConfig kernel = cfg.kernel();

  const SpatialDataset d = load_dataset(cfg, m);
  const DesignMatrices design = full_design(cfg, d);
  const Observed obs = observed_part(d, design);
  NeighborGraph g = m.stage("neighbors", [&] { return cached_graph(cfg, obs.points, m); });
  const NngpLikelihood lik(obs.points, obs.design, std::move(g), kernel, cfg.threads());

  const ChainSamples chain = m.stage("sample", [&] { return run_chain(obs.z, lik, PriorSpec{}, sc); });
  const fs::path path = cfg.chain_path();
  m.stage("write", [&] { io::atomic_write(path, [&](std::ostream& os) { io::write_chain(os, chain); }); });

  m.doc()["observed_cells"] = obs.z.size();
  m.doc()["saved_draws"] = chain.size();
  m.doc()["acceptance"] = chain.acceptance;
  m.doc()["likelihood_evaluations"] = chain.likelihood_evaluations;
  m.doc()["likelihood_failures"] = chain.likelihood_failures;
  m.doc()["outputs"] = {path.string()};
  log("saved " + std::to_string(chain.size()) + " draws to " + path.string());
}

void cmd_predict(const Config& cfg, Manifest& m) {
  PredictOptions opts;
  opts.target = parse_target(cfg.str("target"));
  opts.kernel = cfg.kernel();
  opts.threads = cfg.threads();
  const std::string& set = cfg.str("predict_set");
  if (set != "missing" && set != "all") throw ConfigError("predict_set must be 'missing' or 'all'");
  const std::size_t every = cfg.count("predict_thin");
  if (every < 1) throw ConfigError("predict_thin must be at least 1");
  const fs::path chain_path = cfg.chain_path();
  if (!fs::exists(chain_path)) throw DataError("chain file not found: " + chain_path.string());

  const SpatialDataset d = load_dataset(cfg, m);
  const DesignMatrices design = full_design(cfg, d);
  const Observed obs = observed_part(d, design);
  ChainSamples chain = m.stage("read_chain", [&] { return io::parse_chain(io::read_csv_file(chain_path)); });
  if (chain.n_alpha != design.x_sigma.cols() || chain.n_phi != design.x_range.cols())
    throw ConfigError("chain columns do not match the design; check spline_df and land_interaction");
  if (every > 1) {
    ChainSamples thinned = chain;
    std::vector<Eigen::Index> keep;
    for (std::size_t l = 0; l < chain.size(); l += every) keep.push_back(static_cast<Eigen::Index>(l));
    thinned.draws.resize(static_cast<Eigen::Index>(keep.size()), chain.draws.cols());
    thinned.iterations.clear();
    thinned.log_post.clear();
    for (auto l : keep) {
      thinned.draws.row(static_cast<Eigen::Index>(thinned.iterations.size())) = chain.draws.row(l);
      thinned.iterations.push_back(chain.iterations[static_cast<std::size_t>(l)]);
      thinned.log_post.push_back(chain.log_post[static_cast<std::size_t>(l)]);
    }
    chain = std::move(thinned);
  }

  std::vector<std::size_t> pred_idx = d.missing_indices();
  if (set == "all") {
    pred_idx.resize(d.size());
    std::iota(pred_idx.begin(), pred_idx.end(), std::size_t{0});
  }
  const SpatialDataset pred = d.subset(pred_idx);
  const auto pred_points = pred.points();
  const DesignMatrices pred_design = select_rows(design, pred_idx);
  const auto nbrs = m.stage("neighbors", [&] {
    return knn_predict_sets(obs.points, pred_points, neighbor_count(cfg));
  });
  const PredictionResult res = m.stage("predict", [&] {
    return predict_field(pred_points, pred_design, chain, obs.points, obs.design, obs.z, nbrs, opts);
  });
  const fs::path path = cfg.out_dir() / "predictions.csv";
  m.stage("write", [&] {
    io::atomic_write(path, [&](std::ostream& os) { io::write_predictions(os, pred, res); });
  });
  m.doc()["predicted_cells"] = pred.size();
  m.doc()["draws_used"] = res.n_draws;
  m.doc()["predictive_sd"] = "total variance: mean of per-draw variances plus variance of per-draw means";
  m.doc()["joint_structure"] = "marginal per location; draws are independent across locations given theta";
  m.doc()["outputs"] = {path.string()};
  log("predicted " + std::to_string(pred.size()) + " cells into " + path.string());
}

void cmd_summarize(const Config& cfg, Manifest& m) {
  const fs::path chain_path = cfg.chain_path();
  if (!fs::exists(chain_path)) throw DataError("chain file not found: " + chain_path.string());
  const double level = cfg.num("level");
  const ChainSamples chain = io::parse_chain(io::read_csv_file(chain_path));
  std::vector<SummaryRow> rows = summarize(chain, level);

  // Derived quantities on the reporting scale: nugget SD and ranges in km.
  const auto n = static_cast<std::size_t>(chain.draws.rows());
  std::vector<double> nugget_sd(n);
  for (std::size_t l = 0; l < n; ++l) nugget_sd[l] = std::sqrt(chain.draws(static_cast<Eigen::Index>(l), 1));
  rows.push_back(summarize_draws("nugget_sd", nugget_sd, level));
  if (chain.n_phi == 2) {
    const Eigen::Index p1 = 2 + chain.n_alpha;
    std::vector<double> ocean(n), land(n);
    for (std::size_t l = 0; l < n; ++l) {
      const auto li = static_cast<Eigen::Index>(l);
      ocean[l] = 1000.0 * std::exp(chain.draws(li, p1));
      land[l] = 1000.0 * std::exp(chain.draws(li, p1) + chain.draws(li, p1 + 1));
    }
    rows.push_back(summarize_draws("range_ocean_km", ocean, level));
    rows.push_back(summarize_draws("range_land_km", land, level));
  }
  const fs::path path = cfg.out_dir() / "summary.csv";
  io::atomic_write(path, [&](std::ostream& os) { io::write_summary(os, rows); });
  io::write_summary(std::cout, rows);
  m.doc()["draws"] = n;
  m.doc()["outputs"] = {path.string()};
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const DomainError*>(&e)) return 3;
  if (dynamic_cast<const NumericalError*>(&e)) return 4;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return 3;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonstationary NNGP modeling of gridded GEV return values"};
  app.set_version_flag("--version", NSGP_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  std::vector<std::string> overrides;
  std::map<std::string, std::string> direct;
  app.add_option("-c,--config", config_file, "flat key=value config file")->check(CLI::ExistingFile);
  app.add_option("-s,--set", overrides, "override one config key (key=value), repeatable");
  app.add_option("-i,--input", direct["input"], "cell CSV");
  app.add_option("-o,--out", direct["out_dir"], "output directory");
  app.add_option("--chain", direct["chain"], "chain CSV");
  app.add_option("--ensemble", direct["ensemble"], "ensemble CSV (fit-gev)");
  app.add_option("-t,--threads", direct["threads"], "worker threads");
  app.add_option("--seed", direct["seed"], "random seed");
  app.add_flag("-q,--quiet", g_quiet, "suppress progress messages");
  app.footer([] {
    std::string s = "\nConfig keys (defaults in brackets):\n";
    for (const auto& k : key_table())
      s += "  " + std::string(k.name) + " [" + k.value + "]  " + k.help + "\n";
    return s;
  }());

  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "draw a synthetic dataset from the dense GP"},
      {"fit-gev", "fit GEV distributions to ensemble annual maxima"},
      {"build-neighbors", "compute and cache maxmin ordering and conditioning sets"},
      {"mcmc", "sample the posterior under the nearest-neighbor likelihood"},
      {"predict", "local-kriging predictions from a saved chain"},
      {"summarize", "posterior means, SDs and credible intervals"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  Manifest manifest(command);
  Config cfg;
  int rc = 0;
  try {
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& kv : overrides) cfg.set_assignment(kv, "--set");
    for (const auto& [k, v] : direct)
      if (!v.empty()) cfg.set(k, v, "command line");
    manifest.doc()["config_hash"] = cfg.hash();
    manifest.doc()["config"] = cfg.values();
    manifest.doc()["seed"] = cfg.str("seed");
    manifest.doc()["threads"] = cfg.threads();
    fs::create_directories(cfg.out_dir());

    if (command == "simulate") cmd_simulate(cfg, manifest);
    else if (command == "fit-gev") cmd_fit_gev(cfg, manifest);
    else if (command == "build-neighbors") cmd_build_neighbors(cfg, manifest);
    else if (command == "mcmc") cmd_mcmc(cfg, manifest);
    else if (command == "predict") cmd_predict(cfg, manifest);
    else cmd_summarize(cfg, manifest);
    manifest.doc()["status"] = "ok";
  } catch (const std::exception& e) {
    rc = exit_code_for(e);
    std::cerr << "nsgp " << command << ": error: " << e.what() << '\n';
    manifest.doc()["status"] = "failed";
    manifest.doc()["failure_stage"] = manifest.current_stage();
    manifest.doc()["error"] = e.what();
  }
  manifest.doc()["exit_code"] = rc;
  try {
    manifest.write(cfg.out_dir());
  } catch (const std::exception& e) {
    std::cerr << "nsgp: could not write manifest: " << e.what() << '\n';
  }
  return rc;
}
