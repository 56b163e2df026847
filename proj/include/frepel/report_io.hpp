#pragma once

// Report serialization: CSV tables with full-precision doubles, JSON
// conversions for every result type, FNV-1a digests for reproducibility
// manifests. Doubles are printed with %.17g so a value round-trips
// exactly; rerunning a command with the same seed must reproduce output
// files byte for byte.

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "frepel/errors.hpp"
#include "frepel/flory.hpp"
#include "frepel/gibbs.hpp"
#include "frepel/scaling.hpp"
#include "frepel/version.hpp"

namespace frepel {

// -------------------------------------------------------------- formatting ----

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Minimal CSV assembler: a header and rows of preformatted cells.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvTable& add_row(std::vector<std::string> cells) {
    if (cells.size() != header_.size())
      throw std::invalid_argument("CsvTable: row width does not match header");
    rows_.push_back(std::move(cells));
    return *this;
  }

  std::string str() const {
    std::ostringstream out;
    write_line(out, header_);
    for (const auto& row : rows_) write_line(out, row);
    return out.str();
  }

 private:
  static void write_line(std::ostringstream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// ------------------------------------------------------------------- files ----

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("short write to " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failure on " + path.string());
  return buf.str();
}

// ------------------------------------------------------------------ digests ----

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::string fnv1a64_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

inline std::string digest_file(const std::filesystem::path& path) {
  return fnv1a64_hex(read_text_file(path));
}

// --------------------------------------------------------------------- json ----

inline nlohmann::json to_json(const EstimatorResult& r) {
  nlohmann::json j{
      {"value", r.value},
      {"std_error", r.std_error},
      {"ess", r.ess},
      {"n_samples", r.n_samples},
      {"n_blocks", r.n_blocks},
      {"block_size", r.block_size},
      {"reliable", r.reliable},
      {"quality", r.reliable ? "ok" : "flagged"},
      {"method", sampler_method_name(r.method)},
  };
  if (std::isfinite(r.acceptance_rate)) j["acceptance_rate"] = r.acceptance_rate;
  if (std::isfinite(r.survivor_fraction)) j["survivor_fraction"] = r.survivor_fraction;
  return j;
}

inline nlohmann::json to_json(const FloryPrediction& p) {
  nlohmann::json labels = nlohmann::json::array();
  for (RegimeLabel l : p.regime) labels.push_back(regime_label_name(l));
  nlohmann::json j{
      {"h", p.h},
      {"d", p.d},
      {"nu", p.nu},
      {"nu_clipped", p.nu_clipped},
      {"critical_dimension", p.critical_dim},
      {"regime", labels},
  };
  if (std::isfinite(p.nu_one_dim)) j["nu_one_dim_piecewise"] = p.nu_one_dim;
  return j;
}

inline nlohmann::json to_json(const RecursionDiagnostics& r) {
  return nlohmann::json{
      {"h", r.h},
      {"d", r.d},
      {"nu", r.nu},
      {"invariant_value", r.invariant_value},
      {"invariant_expected", r.invariant_expected},
      {"extrapolated_nu", r.extrapolated_nu},
      {"slab_exponent_y", std::isfinite(r.slab_y) ? nlohmann::json(r.slab_y)
                                                  : nlohmann::json()},
      {"crossover_exponent_x", r.crossover_x},
  };
}

inline nlohmann::json to_json(const FitResult& f) {
  return nlohmann::json{
      {"slope", f.slope},           {"intercept", f.intercept},
      {"slope_std_error", f.slope_std_error}, {"r_squared", f.r_squared},
      {"n_points", f.n_points},     {"weighted", f.weighted},
      {"nu", f.nu()},               {"nu_std_error", f.nu_std_error()},
  };
}

inline nlohmann::json to_json(const SweepPoint& p) {
  return nlohmann::json{
      {"horizon", p.horizon},
      {"epsilon", p.epsilon_used},
      {"n_steps", p.n_steps_used},
      {"r2", to_json(p.r2)},
  };
}

inline nlohmann::json to_json(const InvarianceTestReport& r) {
  return nlohmann::json{
      {"a", r.a},
      {"g_lhs", r.g_lhs},
      {"g_rhs", r.g_rhs},
      {"epsilon_lhs", r.epsilon_lhs},
      {"epsilon_rhs", r.epsilon_rhs},
      {"partition_lhs", to_json(r.partition_lhs)},
      {"partition_rhs", to_json(r.partition_rhs)},
      {"z_score", r.z_score},
      {"r2_lhs", to_json(r.r2_lhs)},
      {"r2_rhs", to_json(r.r2_rhs)},
      {"r2_rhs_rescaled", r.r2_rhs_rescaled},
      {"r2_rhs_rescaled_std_error", r.r2_rhs_rescaled_std_error},
      {"z_r2", r.z_r2},
  };
}

inline nlohmann::json to_json(const EndDensityReport& r) {
  return nlohmann::json{
      {"horizon", r.horizon},
      {"n_replicas", r.n_replicas},
      {"target_variance", r.target_variance},
      {"mean", r.mean},
      {"z_mean", r.z_mean},
      {"variance", r.variance},
      {"z_variance", r.z_variance},
      {"excess_kurtosis", r.excess_kurtosis},
      {"z_kurtosis", r.z_kurtosis},
      {"mean_r2", r.mean_r2},
      {"target_r2", r.target_r2},
      {"z_r2", r.z_r2},
      {"max_abs_z", r.max_abs_z},
  };
}

// -------------------------------------------------------------- csv reports ----

inline std::string sweep_csv(const SweepResult& sweep) {
  CsvTable table({"N", "r2", "r2_stderr", "ess", "quality"});
  for (const SweepPoint& p : sweep.points)
    table.add_row({format_g17(p.horizon), format_g17(p.r2.value),
                   format_g17(p.r2.std_error), format_g17(p.r2.ess),
                   p.r2.reliable ? "ok" : "flagged"});
  return table.str();
}

inline std::string eps_scan_csv(const std::vector<EpsScanPoint>& scan) {
  CsvTable table({"epsilon", "Z", "Z_stderr", "r2", "r2_stderr"});
  for (const EpsScanPoint& p : scan)
    table.add_row({format_g17(p.epsilon), format_g17(p.partition.value),
                   format_g17(p.partition.std_error), format_g17(p.r2.value),
                   format_g17(p.r2.std_error)});
  return table.str();
}

inline std::string slab_csv(const SlabExperimentResult& result) {
  CsvTable table({"D", "r2_D", "stderr", "survivor_fraction"});
  for (const SlabPoint& p : result.points) {
    if (p.dropped) continue;  // dropped rungs are reported in the JSON summary
    table.add_row({format_g17(p.width), format_g17(p.r2.value),
                   format_g17(p.r2.std_error), format_g17(p.r2.survivor_fraction)});
  }
  return table.str();
}

inline std::string regime_map_csv(const std::vector<double>& hursts,
                                  const std::vector<double>& dims) {
  CsvTable table({"hurst", "dim", "nu", "nu_clipped", "labels"});
  for (double h : hursts)
    for (double d : dims) {
      const double nu = flory_index_value(h, d);
      std::string labels;
      for (RegimeLabel l : classify_regime(h, d)) {
        if (!labels.empty()) labels += ';';
        labels += regime_label_name(l);
      }
      table.add_row({format_g17(h), format_g17(d), format_g17(nu),
                     format_g17(std::min(nu, 1.0)), labels});
    }
  return table.str();
}

inline std::string path_csv(const PathBundle& path) {
  std::vector<std::string> header{"t"};
  for (int c = 1; c <= path.dimension; ++c) header.push_back("x_" + std::to_string(c));
  CsvTable table(std::move(header));
  for (std::int64_t k = 0; k <= path.grid.n_steps; ++k) {
    std::vector<std::string> row{format_g17(path.grid.time(k))};
    for (int c = 0; c < path.dimension; ++c) row.push_back(format_g17(path.position(k, c)));
    table.add_row(std::move(row));
  }
  return table.str();
}

// ---------------------------------------------------------------- manifest ----

inline std::string iso8601_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Record of one command run: the full resolved parameter set plus digests
/// of every data file it wrote. The parameter object is what `replay`
/// feeds back through the same code path; created_utc is informational and
/// excluded from reproducibility comparisons.
inline nlohmann::json make_manifest(const std::string& command, const nlohmann::json& params,
                                    const std::filesystem::path& out_dir,
                                    const std::vector<std::string>& output_files) {
  nlohmann::json outputs = nlohmann::json::array();
  for (const std::string& name : output_files) {
    const std::string content = read_text_file(out_dir / name);
    outputs.push_back(nlohmann::json{
        {"file", name},
        {"bytes", content.size()},
        {"fnv1a64", fnv1a64_hex(content)},
    });
  }
  return nlohmann::json{
      {"tool", "frepel"},
      {"version", kVersionString},
      {"command", command},
      {"created_utc", iso8601_utc_now()},
      {"params", params},
      {"outputs", outputs},
  };
}

}  // namespace frepel
