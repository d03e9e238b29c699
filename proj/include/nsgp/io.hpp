#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "nsgp/dataset.hpp"
#include "nsgp/error.hpp"
#include "nsgp/extremes.hpp"
#include "nsgp/mcmc.hpp"
#include "nsgp/predict.hpp"

namespace nsgp::io {

/// Shortest text that round-trips the double exactly.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based file line of each row

  [[nodiscard]] std::ptrdiff_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }
};

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty() || line.front() == '#') continue;
    if (t.header.empty()) {
      t.header = split_csv(line);
      continue;
    }
    auto fields = split_csv(line);
    if (fields.size() != t.header.size()) {
      throw DataError("line " + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  if (t.header.empty()) throw DataError("CSV input is empty");
  return t;
}

inline CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  return read_csv(is);
}

inline bool is_missing_token(const std::string& s) { return s.empty() || s == "NA" || s == "NaN"; }

inline double parse_double(const std::string& s, std::size_t line, const std::string& col) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw DataError("line " + std::to_string(line) + ": cannot parse " + col + " value '" + s + "'");
  return v;
}

inline std::int64_t parse_int(const std::string& s, std::size_t line, const std::string& col) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError("line " + std::to_string(line) + ": cannot parse " + col + " value '" + s + "'");
  return v;
}

inline std::vector<std::size_t> require_columns(const CsvTable& t,
                                                const std::vector<std::string>& names) {
  std::vector<std::size_t> idx;
  for (const auto& n : names) {
    const auto c = t.column(n);
    if (c < 0) throw DataError("input is missing required column '" + n + "'");
    idx.push_back(static_cast<std::size_t>(c));
  }
  return idx;
}

struct IngestReport {
  std::size_t rows = 0;
  std::size_t dropped_poles = 0;
  std::size_t missing_response = 0;
  std::vector<std::string> ignored_columns;
};

inline const std::vector<std::string>& dataset_columns() {
  static const std::vector<std::string> cols{"cell_id", "longitude", "latitude", "ind_land", "rv20"};
  return cols;
}

/// Reads the return-value schema. Pole cells (|lat| >= 89) are dropped;
/// blank / NA responses are missing; unknown columns are reported and ignored.
inline SpatialDataset parse_dataset(const CsvTable& t, IngestReport* report = nullptr) {
  const auto idx = require_columns(t, dataset_columns());
  IngestReport rep;
  for (const auto& h : t.header) {
    if (std::find(dataset_columns().begin(), dataset_columns().end(), h) == dataset_columns().end())
      rep.ignored_columns.push_back(h);
  }
  SpatialDataset d;
  std::map<std::int64_t, std::size_t> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = t.line_numbers[r];
    Cell c;
    c.cell_id = parse_int(row[idx[0]], line, "cell_id");
    c.longitude = parse_double(row[idx[1]], line, "longitude");
    c.latitude = parse_double(row[idx[2]], line, "latitude");
    const auto land = parse_int(row[idx[3]], line, "ind_land");
    if (land != 0 && land != 1)
      throw DataError("line " + std::to_string(line) + ": ind_land must be 0 or 1");
    c.land = static_cast<int>(land);
    c.rv20 = is_missing_token(row[idx[4]]) ? kMissing : parse_double(row[idx[4]], line, "rv20");
    if (!(std::abs(c.latitude) <= 90.0))
      throw DataError("line " + std::to_string(line) + ": latitude out of range");
    if (auto [it, ok] = seen.emplace(c.cell_id, line); !ok) {
      throw DataError("duplicate cell_id " + std::to_string(c.cell_id) + " on lines " +
                      std::to_string(it->second) + " and " + std::to_string(line));
    }
    ++rep.rows;
    if (std::abs(c.latitude) >= kPoleLatitude) {
      ++rep.dropped_poles;
      continue;
    }
    if (!c.observed()) ++rep.missing_response;
    assign_xyz(c);
    d.cells.push_back(c);
  }
  if (report) *report = rep;
  return d;
}

inline SpatialDataset read_dataset(const std::filesystem::path& path, IngestReport* report = nullptr) {
  return parse_dataset(read_csv_file(path), report);
}

inline void write_dataset(std::ostream& os, const SpatialDataset& d) {
  os << "cell_id,longitude,latitude,ind_land,rv20\n";
  for (const auto& c : d.cells) {
    os << c.cell_id << ',' << fmt(c.longitude) << ',' << fmt(c.latitude) << ',' << c.land << ','
       << (c.observed() ? fmt(c.rv20) : std::string()) << '\n';
  }
}

/// Ensemble schema: cell_id, year, member, value.
inline std::vector<EnsembleValue> parse_ensemble(const CsvTable& t) {
  const auto idx = require_columns(t, {"cell_id", "year", "member", "value"});
  std::vector<EnsembleValue> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = t.line_numbers[r];
    out.push_back({parse_int(row[idx[0]], line, "cell_id"),
                   static_cast<int>(parse_int(row[idx[1]], line, "year")),
                   static_cast<int>(parse_int(row[idx[2]], line, "member")),
                   parse_double(row[idx[3]], line, "value")});
  }
  return out;
}

/// Per-cell fits: cell_id, mu, sigma, xi, converged, rv20 (blank when the fit failed).
inline void write_gev_fits(std::ostream& os, const std::vector<MaximaSeries>& series,
                           const std::vector<GevFit>& fits, double period = 20.0) {
  os << "cell_id,mu,sigma,xi,converged,rv20\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& f = fits[i];
    os << series[i].cell_id << ',';
    if (f.converged) {
      os << fmt(f.params.mu) << ',' << fmt(f.params.sigma) << ',' << fmt(f.params.xi) << ",1,"
         << fmt(return_value(f.params, period));
    } else {
      os << ",,,0,";
    }
    os << '\n';
  }
}

/// Chain CSV: iteration, mu, tau2, alpha1..alphaP, phi1..phiQ, log_post.
inline void write_chain(std::ostream& os, const ChainSamples& c) {
  os << "iteration";
  for (const auto& n : c.names) os << ',' << n;
  os << ",log_post\n";
  for (std::size_t l = 0; l < c.size(); ++l) {
    os << c.iterations[l];
    for (Eigen::Index j = 0; j < c.draws.cols(); ++j) os << ',' << fmt(c.draws(static_cast<Eigen::Index>(l), j));
    os << ',' << fmt(c.log_post[l]) << '\n';
  }
}

inline ChainSamples parse_chain(const CsvTable& t) {
  if (t.header.size() < 4 || t.header.front() != "iteration" || t.header.back() != "log_post" ||
      t.header[1] != "mu" || t.header[2] != "tau2")
    throw DataError("not a chain file: unexpected header");
  ChainSamples c;
  for (std::size_t j = 1; j + 1 < t.header.size(); ++j) {
    const auto& n = t.header[j];
    c.names.push_back(n);
    if (n.rfind("alpha", 0) == 0) ++c.n_alpha;
    else if (n.rfind("phi", 0) == 0) ++c.n_phi;
    else if (n != "mu" && n != "tau2") throw DataError("chain file has unknown column '" + n + "'");
  }
  const auto p = static_cast<Eigen::Index>(c.names.size());
  c.draws.resize(static_cast<Eigen::Index>(t.rows.size()), p);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = t.line_numbers[r];
    c.iterations.push_back(static_cast<std::size_t>(parse_int(row[0], line, "iteration")));
    for (Eigen::Index j = 0; j < p; ++j)
      c.draws(static_cast<Eigen::Index>(r), j) =
          parse_double(row[static_cast<std::size_t>(j) + 1], line, c.names[static_cast<std::size_t>(j)]);
    c.log_post.push_back(parse_double(row.back(), line, "log_post"));
  }
  return c;
}

inline void write_predictions(std::ostream& os, const SpatialDataset& cells,
                              const PredictionResult& res) {
  os << "cell_id,longitude,latitude,pred_mean,pred_sd,n_draws,target\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells.cells[i];
    const auto ii = static_cast<Eigen::Index>(i);
    os << c.cell_id << ',' << fmt(c.longitude) << ',' << fmt(c.latitude) << ',' << fmt(res.mean(ii))
       << ',' << fmt(res.sd(ii)) << ',' << res.n_draws << ',' << to_string(res.target) << '\n';
  }
}

inline void write_summary(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "parameter,mean,sd,lower,upper,level\n";
  for (const auto& r : rows) {
    os << r.parameter << ',' << fmt(r.mean) << ',' << fmt(r.sd) << ',' << fmt(r.lower) << ','
       << fmt(r.upper) << ',' << fmt(r.level) << '\n';
  }
}

/// Writes through a sibling temporary file and renames it into place.
inline void atomic_write(const std::filesystem::path& path,
                         const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + tmp.string());
    body(os);
    os.flush();
    if (!os) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace nsgp::io
