// Workbench driver: closed-form predictions, Monte Carlo estimates, scaling
// experiments, and manifest replay. Every data-producing command resolves its
// full parameter set up front, records it in manifest.json next to the output
// files (with FNV-1a digests), and `replay` reruns a manifest and verifies the
// regenerated files byte for byte.

#include <frepel/frepel.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- exit codes ----

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kNumerical = 3;
constexpr int kIo = 4;

// Failure with a preassigned exit code and machine-readable context.
struct CliFailure {
  int code;
  std::string message;
  json context;
};

// ---- option parsing helpers ----

frepel::SamplerMethod parse_method(const std::string& name) {
  if (name == "prior-importance") return frepel::SamplerMethod::prior_importance;
  if (name == "metropolis-noise") return frepel::SamplerMethod::metropolis_noise;
  throw std::invalid_argument("unknown method '" + name +
                              "' (expected prior-importance or metropolis-noise)");
}

frepel::PathEngine parse_engine(const std::string& name) {
  if (name == "automatic") return frepel::PathEngine::automatic;
  if (name == "cholesky") return frepel::PathEngine::cholesky;
  if (name == "circulant") return frepel::PathEngine::circulant;
  throw std::invalid_argument("unknown engine '" + name +
                              "' (expected automatic, cholesky, or circulant)");
}

frepel::EpsilonPolicy parse_epsilon_policy(const std::string& name) {
  if (name == "grid-matched") return frepel::EpsilonPolicy::grid_matched;
  if (name == "fixed") return frepel::EpsilonPolicy::fixed;
  throw std::invalid_argument("unknown epsilon policy '" + name +
                              "' (expected grid-matched or fixed)");
}

frepel::StepPolicy parse_step_policy(const std::string& name) {
  if (name == "fixed-count") return frepel::StepPolicy::fixed_count;
  if (name == "fixed-dt") return frepel::StepPolicy::fixed_dt;
  throw std::invalid_argument("unknown step policy '" + name +
                              "' (expected fixed-count or fixed-dt)");
}

frepel::SamplerConfig sampler_from(const json& p) {
  frepel::SamplerConfig c;
  c.method = parse_method(p.at("method").get<std::string>());
  c.engine = parse_engine(p.at("engine").get<std::string>());
  c.n_replicas = p.at("n_replicas").get<std::int64_t>();
  c.n_mcmc_steps = p.at("n_mcmc_steps").get<std::int64_t>();
  c.burn_in = p.at("burn_in").get<std::int64_t>();
  c.block_size = p.at("block_size").get<std::int64_t>();
  c.ess_floor = p.at("ess_floor").get<double>();
  c.proposal_coordinates = p.at("proposal_coordinates").get<int>();
  c.g = p.at("g").get<double>();
  c.rng = {p.at("seed").get<std::uint64_t>(), p.at("stream").get<std::uint64_t>()};
  return c;  // epsilon is resolved by the caller, per grid
}

frepel::EpsilonSpec epsilon_from(const json& p) {
  frepel::EpsilonSpec spec;
  spec.policy = parse_epsilon_policy(p.at("epsilon_policy").get<std::string>());
  spec.c = p.at("epsilon_c").get<double>();
  spec.fixed_value = p.at("epsilon_value").get<double>();
  return spec;
}

frepel::HurstParameter hurst_from(const json& p) {
  return frepel::HurstParameter{p.at("hurst").get<double>()};
}

// ---- file emission ----

// Collects output files written under one run directory. All command output
// goes through here, so nothing can land outside the configured directory.
struct Emitter {
  fs::path dir;
  std::vector<std::string> files;

  void write(const std::string& name, const std::string& content) {
    frepel::write_text_file(dir / name, content);
    files.push_back(name);
  }
};

struct CommandOutcome {
  std::vector<std::string> files;
  json report;
};

// ---- closed-form commands ----

json predict_json(double h, int dim) {
  const frepel::FloryPrediction pred = frepel::flory_index(h, dim);
  json j = frepel::to_json(pred);
  // the crossover exponent has a pole at h d = 2, where the recursion
  // diagnostics are undefined
  if (std::abs(h * static_cast<double>(dim) - 2.0) > frepel::kRegimeTol)
    j["recursion"] = frepel::to_json(frepel::recursion_diagnostics(h, static_cast<double>(dim)));
  return j;
}

CommandOutcome cmd_predict(const json& p, Emitter& emit) {
  CommandOutcome out;
  out.report = predict_json(p.at("hurst").get<double>(), p.at("dim").get<int>());
  if (p.at("write_files").get<bool>()) emit.write("predict.json", out.report.dump(2) + "\n");
  return out;
}

std::string svg_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Phase-plane sketch: the three boundary curves d = 1/h (double points
// disappear), d = 2/h (local time degenerates), and d = 2h (interpolated
// index reaches the ballistic bound nu = 1).
std::string regime_map_svg(double h_min, double h_max, double d_min, double d_max) {
  const double width = 640.0, height = 480.0;
  const double ml = 62.0, mr = 18.0, mt = 18.0, mb = 48.0;
  const auto sx = [&](double h) { return ml + (h - h_min) / (h_max - h_min) * (width - ml - mr); };
  const auto sy = [&](double d) {
    return height - mb - (d - d_min) / (d_max - d_min) * (height - mt - mb);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\">\n";
  svg += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";

  // axes
  svg += "<line x1=\"" + svg_coord(ml) + "\" y1=\"" + svg_coord(height - mb) + "\" x2=\"" +
         svg_coord(width - mr) + "\" y2=\"" + svg_coord(height - mb) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg += "<line x1=\"" + svg_coord(ml) + "\" y1=\"" + svg_coord(height - mb) + "\" x2=\"" +
         svg_coord(ml) + "\" y2=\"" + svg_coord(mt) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double h = h_min + (h_max - h_min) * i / 4.0;
    const double d = d_min + (d_max - d_min) * i / 4.0;
    char label[32];
    std::snprintf(label, sizeof label, "%.3g", h);
    svg += "<text x=\"" + svg_coord(sx(h)) + "\" y=\"" + svg_coord(height - mb + 18.0) +
           "\" font-size=\"12\" text-anchor=\"middle\">" + label + "</text>\n";
    std::snprintf(label, sizeof label, "%.3g", d);
    svg += "<text x=\"" + svg_coord(ml - 8.0) + "\" y=\"" + svg_coord(sy(d) + 4.0) +
           "\" font-size=\"12\" text-anchor=\"end\">" + label + "</text>\n";
  }
  svg += "<text x=\"" + svg_coord((ml + width - mr) / 2.0) + "\" y=\"" +
         svg_coord(height - 8.0) + "\" font-size=\"13\" text-anchor=\"middle\">hurst h</text>\n";
  svg += "<text x=\"16\" y=\"" + svg_coord((mt + height - mb) / 2.0) +
         "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         svg_coord((mt + height - mb) / 2.0) + ")\">dimension d</text>\n";

  struct Curve {
    const char* color;
    const char* label;
    double (*f)(double);
  };
  const Curve curves[] = {
      {"#d62728", "d = 2/h", [](double h) { return 2.0 / h; }},
      {"#1f77b4", "d = 1/h", [](double h) { return 1.0 / h; }},
      {"#2ca02c", "d = 2h", [](double h) { return 2.0 * h; }},
  };
  const int n_samples = 256;
  for (const Curve& curve : curves) {
    std::string points;
    bool labeled = false;
    const auto flush = [&] {
      if (!points.empty())
        svg += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" + curve.color +
               "\" stroke-width=\"1.5\"/>\n";
      points.clear();
    };
    for (int i = 0; i <= n_samples; ++i) {
      const double h = h_min + (h_max - h_min) * i / static_cast<double>(n_samples);
      const double d = curve.f(h);
      if (!(d >= d_min && d <= d_max)) {
        flush();
        continue;
      }
      if (!points.empty()) points += " ";
      points += svg_coord(sx(h)) + "," + svg_coord(sy(d));
      if (!labeled && i >= n_samples / 3) {
        svg += "<text x=\"" + svg_coord(sx(h) + 6.0) + "\" y=\"" + svg_coord(sy(d) - 6.0) +
               "\" font-size=\"12\" fill=\"" + curve.color + "\">" + curve.label + "</text>\n";
        labeled = true;
      }
    }
    flush();
  }
  svg += "</svg>\n";
  return svg;
}

CommandOutcome cmd_regime_map(const json& p, Emitter& emit) {
  const double h_min = p.at("h_min").get<double>();
  const double h_max = p.at("h_max").get<double>();
  const double d_min = p.at("d_min").get<double>();
  const double d_max = p.at("d_max").get<double>();
  const int h_count = p.at("h_count").get<int>();
  const int d_count = p.at("d_count").get<int>();
  if (!(h_min > 0.0 && h_max < 1.0 && h_min < h_max))
    throw std::invalid_argument("regime-map: need 0 < h-min < h-max < 1");
  if (!(d_min > 0.0 && d_min < d_max))
    throw std::invalid_argument("regime-map: need 0 < d-min < d-max");
  if (h_count < 2 || d_count < 2)
    throw std::invalid_argument("regime-map: need at least 2 grid points per axis");

  std::vector<double> hursts(static_cast<std::size_t>(h_count));
  for (int i = 0; i < h_count; ++i)
    hursts[static_cast<std::size_t>(i)] = h_min + (h_max - h_min) * i / (h_count - 1.0);
  std::vector<double> dims(static_cast<std::size_t>(d_count));
  for (int i = 0; i < d_count; ++i)
    dims[static_cast<std::size_t>(i)] = d_min + (d_max - d_min) * i / (d_count - 1.0);

  CommandOutcome out;
  emit.write("regime_map.csv", frepel::regime_map_csv(hursts, dims));
  if (p.at("svg").get<bool>())
    emit.write("regime_map.svg", regime_map_svg(h_min, h_max, d_min, d_max));
  out.report = json{{"h_count", h_count}, {"d_count", d_count},
                    {"cells", h_count * d_count}};
  return out;
}

// ---- Monte Carlo commands ----

CommandOutcome cmd_simulate(const json& p, Emitter& emit) {
  const frepel::HurstParameter hurst = hurst_from(p);
  const int dim = p.at("dim").get<int>();
  const double horizon = p.at("horizon").get<double>();
  const frepel::TimeGrid grid(p.at("n_steps").get<std::int64_t>(), horizon);
  frepel::SamplerConfig config = sampler_from(p);
  config.epsilon = epsilon_from(p).resolve(hurst, grid);
  config.validate();

  json est;
  est["epsilon_used"] = config.epsilon;
  est["engine_resolved"] = frepel::path_engine_name(frepel::resolve_engine(config.engine, grid));
  est["gaussian_r2"] = static_cast<double>(dim) * std::pow(horizon, 2.0 * hurst.h);
  est["r2"] = frepel::to_json(frepel::estimate_r2(hurst, grid, dim, config));
  if (config.method == frepel::SamplerMethod::prior_importance)
    est["partition"] = frepel::to_json(frepel::estimate_partition(hurst, grid, dim, config));

  CommandOutcome out;
  emit.write("estimates.json", est.dump(2) + "\n");
  if (p.at("emit_path").get<bool>()) {
    // a dedicated stream past the estimator range, so the illustrative path
    // never aliases an estimator replica
    frepel::Rng rng(config.rng.with_offset(
        static_cast<std::uint64_t>(std::max(config.n_replicas, config.n_mcmc_steps))));
    const frepel::PathSampler sampler(hurst, grid, dim, config.engine);
    emit.write("path.csv", frepel::path_csv(sampler.sample(rng)));
  }
  out.report = est;
  return out;
}

CommandOutcome cmd_sweep(const json& p, Emitter& emit) {
  frepel::ExperimentPlan plan{hurst_from(p)};
  plan.dimension = p.at("dim").get<int>();
  plan.g = p.at("g").get<double>();
  plan.epsilon = epsilon_from(p);
  plan.ladder = p.at("ladder").get<std::vector<double>>();
  plan.step_policy = parse_step_policy(p.at("step_policy").get<std::string>());
  plan.n_steps = p.at("n_steps").get<std::int64_t>();
  plan.dt = p.at("dt").get<double>();
  plan.fit_min_horizon = p.at("fit_min_horizon").get<double>();
  plan.sampler = sampler_from(p);
  plan.sampler.g = plan.g;

  const frepel::SweepResult sweep = frepel::run_r2_sweep(plan);
  const frepel::FitResult fit = frepel::fit_exponent(sweep, plan.fit_min_horizon);

  json fit_report{
      {"fit", frepel::to_json(fit)},
      {"partial", sweep.partial},
      {"quality", sweep.partial ? "flagged" : "ok"},
      {"points", json::array()},
  };
  for (const frepel::SweepPoint& point : sweep.points)
    fit_report["points"].push_back(frepel::to_json(point));

  CommandOutcome out;
  emit.write("sweep.csv", frepel::sweep_csv(sweep));
  emit.write("fit.json", fit_report.dump(2) + "\n");
  out.report = json{{"nu", fit.nu()},
                    {"nu_std_error", fit.nu_std_error()},
                    {"r_squared", fit.r_squared},
                    {"quality", sweep.partial ? "flagged" : "ok"}};
  return out;
}

CommandOutcome cmd_invariance(const json& p, Emitter& emit) {
  const frepel::InvarianceTestReport report = frepel::test_scale_invariance(
      hurst_from(p), p.at("dim").get<int>(), p.at("g").get<double>(),
      p.at("horizon").get<double>(), p.at("a").get<double>(),
      p.at("n_steps").get<std::int64_t>(), epsilon_from(p), sampler_from(p),
      p.at("rhs_stream_offset").get<std::uint64_t>());

  CommandOutcome out;
  json j = frepel::to_json(report);
  j["quality"] =
      report.partition_lhs.reliable && report.partition_rhs.reliable ? "ok" : "flagged";
  emit.write("invariance.json", j.dump(2) + "\n");
  out.report = json{{"z_score", report.z_score}, {"z_r2", report.z_r2},
                    {"quality", j["quality"]}};
  return out;
}

CommandOutcome cmd_slab(const json& p, Emitter& emit) {
  const frepel::SlabExperimentResult result = frepel::slab_reduction_experiment(
      hurst_from(p), p.at("dim").get<int>(), p.at("g").get<double>(),
      p.at("horizon").get<double>(), p.at("widths").get<std::vector<double>>(),
      p.at("n_steps").get<std::int64_t>(), epsilon_from(p), sampler_from(p));

  json j{
      {"coordinate_index", result.coordinate_index},
      {"horizon", result.horizon},
      {"epsilon_used", result.epsilon_used},
      {"r2_unconstrained", frepel::to_json(result.r2_unconstrained)},
      {"points", json::array()},
      {"fit", frepel::to_json(result.fit)},
      {"fit_valid", result.fit_valid},
      {"y_measured", result.y_measured},
      {"y_predicted", result.y_predicted},
  };
  for (const frepel::SlabPoint& point : result.points)
    j["points"].push_back(json{{"width", point.width},
                               {"dropped", point.dropped},
                               {"r2", frepel::to_json(point.r2)}});

  CommandOutcome out;
  emit.write("slab.csv", frepel::slab_csv(result));
  emit.write("slab.json", j.dump(2) + "\n");
  out.report = json{{"y_measured", result.y_measured},
                    {"y_predicted", result.y_predicted},
                    {"fit_valid", result.fit_valid}};
  return out;
}

CommandOutcome cmd_eps_scan(const json& p, Emitter& emit) {
  const frepel::HurstParameter hurst = hurst_from(p);
  const frepel::TimeGrid grid(p.at("n_steps").get<std::int64_t>(),
                              p.at("horizon").get<double>());
  const std::vector<frepel::EpsScanPoint> scan = frepel::epsilon_stability_scan(
      hurst, grid, p.at("dim").get<int>(), p.at("widths").get<std::vector<double>>(),
      sampler_from(p));

  json points = json::array();
  for (std::size_t i = 0; i < scan.size(); ++i) {
    json point{{"epsilon", scan[i].epsilon},
               {"partition", frepel::to_json(scan[i].partition)},
               {"r2", frepel::to_json(scan[i].r2)}};
    if (i > 0) point["delta_r2_abs"] = std::abs(scan[i].r2.value - scan[i - 1].r2.value);
    points.push_back(std::move(point));
  }

  CommandOutcome out;
  emit.write("eps_scan.csv", frepel::eps_scan_csv(scan));
  emit.write("eps_scan.json", json{{"points", points}}.dump(2) + "\n");
  out.report = json{{"rungs", scan.size()}};
  return out;
}

// ---- dispatch ----

CommandOutcome run_command(const std::string& command, const json& params,
                           const fs::path& out_dir) {
  Emitter emit{out_dir, {}};
  CommandOutcome out;
  if (command == "predict")
    out = cmd_predict(params, emit);
  else if (command == "regime-map")
    out = cmd_regime_map(params, emit);
  else if (command == "simulate")
    out = cmd_simulate(params, emit);
  else if (command == "sweep")
    out = cmd_sweep(params, emit);
  else if (command == "invariance")
    out = cmd_invariance(params, emit);
  else if (command == "slab")
    out = cmd_slab(params, emit);
  else if (command == "eps-scan")
    out = cmd_eps_scan(params, emit);
  else
    throw CliFailure{kUsage, "manifest names unknown command '" + command + "'",
                     json{{"command", command}}};
  out.files = emit.files;
  return out;
}

// Output root: relative --out paths land under FREPEL_OUT_DIR when set,
// under the working directory otherwise.
fs::path resolve_out_dir(const std::string& out_flag) {
  fs::path p(out_flag);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("FREPEL_OUT_DIR")) return fs::path(root) / p;
  return fs::current_path() / p;
}

json replay_manifest(const fs::path& manifest_path, const fs::path& out_dir) {
  const json manifest = json::parse(frepel::read_text_file(manifest_path));
  if (!manifest.contains("command") || !manifest.contains("params") ||
      !manifest.contains("outputs"))
    throw CliFailure{kUsage, "manifest is missing command, params, or outputs",
                     json{{"manifest", manifest_path.string()}}};
  const std::string command = manifest.at("command").get<std::string>();
  const json params = manifest.at("params");

  fs::create_directories(out_dir);
  const CommandOutcome outcome = run_command(command, params, out_dir);
  frepel::write_text_file(out_dir / "manifest.json",
                          frepel::make_manifest(command, params, out_dir, outcome.files)
                                  .dump(2) +
                              "\n");

  json mismatches = json::array();
  for (const json& recorded : manifest.at("outputs")) {
    const std::string name = recorded.at("file").get<std::string>();
    const std::string fresh = frepel::digest_file(out_dir / name);
    if (fresh != recorded.at("fnv1a64").get<std::string>())
      mismatches.push_back(json{{"file", name},
                                {"expected", recorded.at("fnv1a64")},
                                {"actual", fresh}});
  }
  if (!mismatches.empty())
    throw CliFailure{kNumerical, "replay digests do not match the manifest",
                     json{{"command", command}, {"mismatches", mismatches}}};
  return json{{"command", command},
              {"out_dir", out_dir.string()},
              {"files_verified", manifest.at("outputs").size()},
              {"match", true}};
}

int report_failure(int code, const std::string& message, json context) {
  const json err{{"code", code}, {"message", message}, {"context", std::move(context)}};
  std::cerr << err.dump(2) << "\n";
  return code;
}

// ---- option bundles ----

struct SamplerOpts {
  std::string method = "prior-importance";
  std::string engine = "automatic";
  std::int64_t replicas = 20000;
  std::int64_t steps = 200000;
  std::int64_t burn_in = 20000;
  std::int64_t block_size = 0;
  double ess_floor = 50.0;
  int proposal_coordinates = 1;
  double g = 0.0;
  std::string eps_policy = "grid-matched";
  double eps_c = 1.0;
  double eps_value = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

void add_sampler_options(CLI::App* cmd, SamplerOpts& o, bool with_epsilon) {
  cmd->add_option("--method", o.method, "prior-importance or metropolis-noise")
      ->capture_default_str();
  cmd->add_option("--engine", o.engine, "automatic, cholesky, or circulant")
      ->capture_default_str();
  cmd->add_option("--replicas", o.replicas, "importance-sampling replica count")
      ->capture_default_str();
  cmd->add_option("--steps", o.steps, "metropolis chain length")->capture_default_str();
  cmd->add_option("--burn-in", o.burn_in, "metropolis burn-in")->capture_default_str();
  cmd->add_option("--block-size", o.block_size, "error-bar block size (0 = auto)")
      ->capture_default_str();
  cmd->add_option("--ess-floor", o.ess_floor, "flag estimates below this effective sample size")
      ->capture_default_str();
  cmd->add_option("--proposal-coordinates", o.proposal_coordinates,
                  "noise coordinates redrawn per metropolis proposal")
      ->capture_default_str();
  cmd->add_option("--g", o.g, "repulsion coupling")->capture_default_str();
  if (with_epsilon) {
    cmd->add_option("--epsilon-policy", o.eps_policy, "grid-matched or fixed")
        ->capture_default_str();
    cmd->add_option("--epsilon-c", o.eps_c, "grid-matched width: epsilon = c dt^{2H}")
        ->capture_default_str();
    cmd->add_option("--epsilon-value", o.eps_value, "fixed policy width")
        ->capture_default_str();
  }
  cmd->add_option("--seed", o.seed, "RNG seed (required: runs never draw silent entropy)")
      ->required();
  cmd->add_option("--stream", o.stream, "RNG stream id")->capture_default_str();
}

json sampler_params(const SamplerOpts& o) {
  return json{
      {"method", o.method},
      {"engine", o.engine},
      {"n_replicas", o.replicas},
      {"n_mcmc_steps", o.steps},
      {"burn_in", o.burn_in},
      {"block_size", o.block_size},
      {"ess_floor", o.ess_floor},
      {"proposal_coordinates", o.proposal_coordinates},
      {"g", o.g},
      {"epsilon_policy", o.eps_policy},
      {"epsilon_c", o.eps_c},
      {"epsilon_value", o.eps_value},
      {"seed", o.seed},
      {"stream", o.stream},
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fractional Edwards model workbench"};
  app.set_config("--config", "", "INI config file; command-line flags take precedence");
  app.require_subcommand(1);

  double hurst = 0.5;
  int dim = 2;
  double horizon = 1.0;
  std::int64_t n_steps = 64;
  double a_factor = 2.0;
  std::uint64_t rhs_offset = 0;
  bool rhs_offset_given = false;
  std::vector<double> ladder;
  std::vector<double> widths;
  std::string step_policy = "fixed-count";
  double dt = 1.0;
  double fit_min_horizon = 16.0;
  bool emit_path = false;
  bool svg = false;
  double h_min = 0.05, h_max = 0.95, d_min = 0.25, d_max = 6.0;
  int h_count = 19, d_count = 24;
  std::string out_flag = ".";
  std::string manifest_flag;
  SamplerOpts sampler;

  const auto add_out = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_flag, "output directory (relative paths land under "
                                       "FREPEL_OUT_DIR when set)")
        ->capture_default_str();
  };

  CLI::App* predict = app.add_subcommand("predict", "closed-form exponent prediction");
  predict->add_option("--hurst", hurst, "hurst index in (0, 1)")->required();
  predict->add_option("--dim", dim, "spatial dimension")->required();
  add_out(predict);

  CLI::App* regime = app.add_subcommand("regime-map", "phase-plane grid of regime labels");
  regime->add_option("--h-min", h_min, "")->capture_default_str();
  regime->add_option("--h-max", h_max, "")->capture_default_str();
  regime->add_option("--d-min", d_min, "")->capture_default_str();
  regime->add_option("--d-max", d_max, "")->capture_default_str();
  regime->add_option("--h-count", h_count, "grid points along h")->capture_default_str();
  regime->add_option("--d-count", d_count, "grid points along d")->capture_default_str();
  regime->add_flag("--svg", svg, "also render the boundary curves to SVG");
  add_out(regime);

  CLI::App* simulate = app.add_subcommand("simulate", "estimate Z and <R^2> on one grid");
  simulate->add_option("--hurst", hurst, "")->required();
  simulate->add_option("--dim", dim, "")->required();
  simulate->add_option("--N,--horizon", horizon, "time horizon")->capture_default_str();
  simulate->add_option("--n-steps", n_steps, "grid resolution")->capture_default_str();
  simulate->add_flag("--emit-path", emit_path, "write one sampled path as CSV");
  add_sampler_options(simulate, sampler, true);
  add_out(simulate);

  CLI::App* sweep = app.add_subcommand("sweep", "horizon ladder, <R^2> fit, exponent");
  sweep->add_option("--hurst", hurst, "")->required();
  sweep->add_option("--dim", dim, "")->required();
  sweep->add_option("--ladder", ladder, "ascending horizons, e.g. 8,16,32,64")
      ->required()
      ->delimiter(',');
  sweep->add_option("--step-policy", step_policy, "fixed-count or fixed-dt")
      ->capture_default_str();
  sweep->add_option("--n-steps", n_steps, "steps per rung under fixed-count")
      ->capture_default_str();
  sweep->add_option("--dt", dt, "spacing under fixed-dt")->capture_default_str();
  sweep->add_option("--fit-min-horizon", fit_min_horizon, "drop shorter rungs from the fit")
      ->capture_default_str();
  add_sampler_options(sweep, sampler, true);
  add_out(sweep);

  CLI::App* invariance = app.add_subcommand("invariance", "two-scale partition identity test");
  invariance->add_option("--hurst", hurst, "")->required();
  invariance->add_option("--dim", dim, "")->required();
  invariance->add_option("--N,--horizon", horizon, "base horizon")->capture_default_str();
  invariance->add_option("--a", a_factor, "scale factor")->capture_default_str();
  invariance->add_option("--n-steps", n_steps, "base grid resolution")->capture_default_str();
  invariance->add_option("--rhs-offset", rhs_offset,
                         "stream offset for the rescaled arm (default: replica count)")
      ->capture_default_str();
  add_sampler_options(invariance, sampler, true);
  add_out(invariance);

  CLI::App* slab = app.add_subcommand("slab", "confinement ladder for coordinate 1");
  slab->add_option("--hurst", hurst, "")->required();
  slab->add_option("--dim", dim, "")->required();
  slab->add_option("--N,--horizon", horizon, "time horizon")->capture_default_str();
  slab->add_option("--widths", widths, "descending slab widths, e.g. 8,4,2,1")
      ->required()
      ->delimiter(',');
  slab->add_option("--n-steps", n_steps, "grid resolution")->capture_default_str();
  add_sampler_options(slab, sampler, true);
  add_out(slab);

  CLI::App* eps_scan = app.add_subcommand("eps-scan", "mollifier-width stability scan");
  eps_scan->add_option("--hurst", hurst, "")->required();
  eps_scan->add_option("--dim", dim, "")->required();
  eps_scan->add_option("--N,--horizon", horizon, "time horizon")->capture_default_str();
  eps_scan->add_option("--widths", widths, "descending widths, e.g. 1,0.5,0.25")
      ->required()
      ->delimiter(',');
  eps_scan->add_option("--n-steps", n_steps, "grid resolution")->capture_default_str();
  add_sampler_options(eps_scan, sampler, false);
  add_out(eps_scan);

  CLI::App* replay = app.add_subcommand("replay", "rerun a manifest and verify digests");
  replay->add_option("--manifest", manifest_flag, "path to a manifest.json")->required();
  add_out(replay);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_failure(kUsage, e.what(), json{{"kind", "parse"}});
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  rhs_offset_given = invariance->count("--rhs-offset") > 0;

  try {
    if (command == "replay") {
      const json result = replay_manifest(fs::path(manifest_flag),
                                          resolve_out_dir(out_flag));
      std::cout << result.dump(2) << "\n";
      return kOk;
    }

    json params;
    if (command == "predict") {
      // passing --out opts in to files and a manifest; bare predict just prints
      params = json{{"hurst", hurst}, {"dim", dim},
                    {"write_files", predict->count("--out") > 0}};
    } else if (command == "regime-map") {
      params = json{{"h_min", h_min}, {"h_max", h_max}, {"d_min", d_min},
                    {"d_max", d_max}, {"h_count", h_count}, {"d_count", d_count},
                    {"svg", svg}};
    } else {
      params = sampler_params(sampler);
      params["hurst"] = hurst;
      params["dim"] = dim;
      if (command == "simulate") {
        params["horizon"] = horizon;
        params["n_steps"] = n_steps;
        params["emit_path"] = emit_path;
      } else if (command == "sweep") {
        params["ladder"] = ladder;
        params["step_policy"] = step_policy;
        params["n_steps"] = n_steps;
        params["dt"] = dt;
        params["fit_min_horizon"] = fit_min_horizon;
      } else if (command == "invariance") {
        params["horizon"] = horizon;
        params["a"] = a_factor;
        params["n_steps"] = n_steps;
        params["rhs_stream_offset"] =
            rhs_offset_given ? rhs_offset : static_cast<std::uint64_t>(sampler.replicas);
      } else if (command == "slab" || command == "eps-scan") {
        params["horizon"] = horizon;
        params["n_steps"] = n_steps;
        params["widths"] = widths;
        if (command == "eps-scan")
          for (const char* key : {"epsilon_policy", "epsilon_c", "epsilon_value"})
            params.erase(key);
      }
    }

    const fs::path out_dir = resolve_out_dir(out_flag);
    const bool writes_files = command != "predict" || predict->count("--out") > 0;
    if (writes_files) fs::create_directories(out_dir);

    const CommandOutcome outcome = run_command(command, params, out_dir);
    std::vector<std::string> files = outcome.files;
    if (!files.empty()) {
      frepel::write_text_file(
          out_dir / "manifest.json",
          frepel::make_manifest(command, params, out_dir, files).dump(2) + "\n");
      files.push_back("manifest.json");
    }

    json result{{"command", command}, {"report", outcome.report}};
    if (!files.empty()) {
      result["out_dir"] = out_dir.string();
      result["files"] = files;
    }
    std::cout << result.dump(2) << "\n";
    return kOk;
  } catch (const CliFailure& f) {
    return report_failure(f.code, f.message, f.context);
  } catch (const frepel::IoError& e) {
    return report_failure(kIo, e.what(), json{{"command", command}});
  } catch (const fs::filesystem_error& e) {
    return report_failure(kIo, e.what(), json{{"command", command}});
  } catch (const frepel::NumericalError& e) {
    return report_failure(kNumerical, e.what(), json{{"command", command}});
  } catch (const frepel::EmptyEnsembleError& e) {
    return report_failure(kNumerical, e.what(), json{{"command", command}});
  } catch (const nlohmann::json::exception& e) {
    return report_failure(kUsage, e.what(), json{{"command", command}});
  } catch (const std::invalid_argument& e) {
    return report_failure(kUsage, e.what(), json{{"command", command}});
  } catch (const std::domain_error& e) {
    return report_failure(kUsage, e.what(), json{{"command", command}});
  } catch (const std::out_of_range& e) {
    return report_failure(kUsage, e.what(), json{{"command", command}});
  } catch (const std::exception& e) {
    return report_failure(kNumerical, e.what(), json{{"command", command}});
  }
}
