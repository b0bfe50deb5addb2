// dragdeorbit command-line driver: guidance generation, single-case tracking,
// Monte Carlo campaigns and report tables.
//
// Exit codes: 0 ok, 1 input/parse/IO error, 2 guidance hit max-iter,
// 3 infeasible or out-of-range input, 4 tracking failure.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include "CLI11.hpp"
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include "json.hpp"

#include "dragdeorbit/config.hpp"

namespace fs = std::filesystem;
using namespace dragdeorbit;

namespace {

enum Exit : int { kOk = 0, kInput = 1, kMaxIter = 2, kInfeasible = 3, kTrackingFailure = 4 };

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::uint64_t index = 0;
  // track
  std::string guidance_dir;
  bool no_estimate = false;
  bool truth_nominal = false;
  bool no_noise = false;
  std::optional<double> c_drag;
  // mc
  std::optional<std::uint32_t> n;
  std::optional<unsigned> jobs;
  bool paired = false;
  // report
  std::vector<std::string> results;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("dragdeorbit");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("DRAGDEORBIT_LOG")) {
    const std::string s(lvl);
    if (s == "error") spdlog::set_level(spdlog::level::err);
    else if (s == "warn") spdlog::set_level(spdlog::level::warn);
    else if (s == "info") spdlog::set_level(spdlog::level::info);
    else if (s == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("DRAGDEORBIT_LOG='{}' not recognised (error|warn|info|debug)", s);
  }
}

RunConfig make_config(const Options& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (o.seed) cfg.campaign.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.n) cfg.campaign.n = *o.n;
  if (o.jobs) cfg.campaign.jobs = *o.jobs;
  if (o.paired) cfg.campaign.paired = true;
  cfg.validate();
  return cfg;
}

CaseConfig case_for(const RunConfig& cfg, const Options& o) {
  CaseConfig c = cfg.single_case ? cfg.single_case->to_case(cfg.campaign.seed)
                                 : sample_case(cfg.campaign.seed, o.index, cfg.sim.ranges);
  if (o.c_drag) {
    if (!(*o.c_drag > 0.0)) throw RangeError("--c-drag must be positive");
    c.c_drag = *o.c_drag;
  }
  return c;
}

fs::path out_dir(const RunConfig& cfg) {
  fs::path p(cfg.output_dir);
  fs::create_directories(p);
  return p;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw ParseError("cannot write " + p.string());
  return f;
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  auto f = open_out(p);
  f << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw ParseError("cannot open " + p.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

GuidanceTrajectory load_guidance(const fs::path& dir, const CaseConfig& c, const Environment& nominal,
                                 const GuidanceConfig& gc) {
  const auto side = read_json(dir / "guidance.json");
  std::ifstream csv(dir / "guidance.csv");
  if (!csv) throw ParseError("cannot open " + (dir / "guidance.csv").string());
  GuidanceTrajectory g;
  g.trajectory = read_trajectory_csv(csv, nominal);
  try {
    g.params = GuidanceParams{side.at("cb1").get<double>(), side.at("cb2").get<double>(),
                              side.at("t_swap_s").get<double>()};
    g.target.lat = side.at("target_lat_rad").get<double>();
    g.target.lon = side.at("target_lon_rad").get<double>();
    g.targeting_error = side.at("targeting_error_m").get<double>();
    g.iterations = side.at("iterations").get<int>();
    if (side.contains("epoch_jd") && std::abs(side["epoch_jd"].get<double>() - c.epoch.jd) > 1e-9) {
      throw ParseError("guidance.json was generated for a different case epoch");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("guidance.json: ") + e.what());
  }
  g.status = g.targeting_error < gc.tolerance ? GuidanceStatus::Converged : GuidanceStatus::MaxIter;
  g.achieved = geodetic(eci_to_ecef(g.trajectory.final_state(), nominal.epoch).r);
  const StateECI s0 = guidance_initial_state(c);
  if ((g.trajectory.initial().r - s0.r).norm() > 1.0) {
    throw ParseError("guidance.csv does not start at the case's initial state");
  }
  return g;
}

int cmd_guidance(const Options& o) {
  const RunConfig cfg = make_config(o);
  const CaseConfig c = case_for(cfg, o);
  const CaseEnvironments envs = make_environments(c, cfg.sim.ranges, cfg.sim.historical, cfg.sim.atmosphere);
  spdlog::info("guidance: epoch JD {:.6f}, i = {:.4f} rad, target ({:.4f}, {:.4f}) rad", c.epoch.jd, c.elements.i,
               c.target.lat, c.target.lon);
  const GuidanceTrajectory g = generate(guidance_initial_state(c), c.target, envs.nominal, cfg.sim.guidance);
  const fs::path dir = out_dir(cfg);
  {
    auto f = open_out(dir / "guidance.csv");
    write_trajectory_csv(f, g.trajectory);
  }
  auto side = guidance_sidecar(g);
  side["epoch_jd"] = c.epoch.jd;
  write_json(dir / "guidance.json", side);
  std::cout << "targeting error " << g.targeting_error << " m after " << g.iterations << " iterations; Cb1 "
            << g.params.cb1 << ", Cb2 " << g.params.cb2 << ", t_swap " << g.params.t_swap << " s\n";
  return g.status == GuidanceStatus::Converged ? kOk : kMaxIter;
}

int cmd_track(const Options& o) {
  RunConfig cfg = make_config(o);
  CaseConfig c = case_for(cfg, o);
  CaseEnvironments envs = make_environments(c, cfg.sim.ranges, cfg.sim.historical, cfg.sim.atmosphere);
  if (o.truth_nominal) {
    envs.truth = envs.nominal;
    c.dispersion_sma = 0.0;
    c.dispersion_angle = 0.0;
  }
  if (o.no_noise) cfg.sim.measurement_noise_scale = 0.0;
  const GuidanceTrajectory g =
      o.guidance_dir.empty() ? generate(guidance_initial_state(c), c.target, envs.nominal, cfg.sim.guidance)
                             : load_guidance(o.guidance_dir, c, envs.nominal, cfg.sim.guidance);
  const TrackingModel tm = TrackingModel::build(g.trajectory, envs.nominal, cfg.sim.mpc);
  const fs::path dir = out_dir(cfg);
  auto ff = open_out(dir / "filter_trace.csv");
  auto fc = open_out(dir / "control_trace.csv");
  Trajectory truth;
  const CaseResult r = track(c, envs, g, tm, cfg.sim, !o.no_estimate, TraceSinks{&ff, &fc}, &truth);
  {
    auto ft = open_out(dir / "truth.csv");
    write_trajectory_csv(ft, truth);
  }
  nlohmann::json j;
  j["status"] = to_string(r.status);
  j["use_density_estimate"] = r.use_density_estimate;
  j["miss_m"] = json_number(r.miss_m);
  j["max_err_m"] = r.max_err_m;
  j["actuation"] = r.actuation;
  j["guidance_err_m"] = r.guidance_err_m;
  j["steps"] = r.steps;
  j["failure_step"] = r.failure_step;
  j["final_c"] = r.final_c;
  j["qp_max_iter_steps"] = r.qp_max_iter;
  j["dare_fallbacks"] = r.dare_failures;
  j["message"] = r.message;
  write_json(dir / "track.json", j);
  if (r.dare_failures > 0) spdlog::warn("DARE fell back to the stage weight on {} steps", r.dare_failures);
  if (r.qp_max_iter > 0) spdlog::info("QP iteration cap reached on {} steps", r.qp_max_iter);
  switch (r.status) {
    case CaseStatus::Success:
      std::cout << "miss distance " << r.miss_m << " m (max tracking error " << r.max_err_m << " m)\n";
      return kOk;
    case CaseStatus::TrackingFailure:
      std::cout << "tracking failure at step " << r.failure_step << " (relative distance above "
                << cfg.sim.failure_distance << " m)\n";
      return kTrackingFailure;
    default:
      spdlog::error("tracking error: {}", r.message);
      return kInput;
  }
}

int cmd_mc(const Options& o) {
  const RunConfig cfg = make_config(o);
  CampaignOptions opt;
  opt.n = cfg.campaign.n;
  opt.seed = cfg.campaign.seed;
  opt.jobs = cfg.campaign.jobs;
  opt.paired = cfg.campaign.paired;
  opt.use_density_estimate = !o.no_estimate;
  if (opt.paired && o.no_estimate) spdlog::warn("--no-density-estimate ignored in paired mode");
  spdlog::info("campaign: n = {}, seed = {}, jobs = {}, paired = {}", opt.n, opt.seed, opt.jobs, opt.paired);
  const auto recs = run_campaign_cases(opt, cfg.sim);
  const auto summary = campaign_summary(recs, opt, cfg.sim);
  const fs::path dir = out_dir(cfg);
  write_json(dir / "summary.json", summary);
  {
    auto f = open_out(dir / "cases.csv");
    write_cases_csv(f, recs);
  }
  auto print_arm = [](const char* name, const nlohmann::json& a) {
    std::cout << name << ": success " << a["success"] << "/" << a["n"] << ", mean miss ";
    if (a["miss_mean_m"].is_null()) std::cout << "n/a\n";
    else std::cout << a["miss_mean_m"].get<double>() << " m\n";
  };
  print_arm(opt.paired || opt.use_density_estimate ? "with estimate" : "without estimate", summary["with_estimate"]);
  if (opt.paired) print_arm("without estimate", summary["without_estimate"]);
  return kOk;
}

// --- report ----------------------------------------------------------------

struct ArmRow {
  std::string arm;
  std::string status;
  double miss = 0.0;
  double actuation = 0.0;
};

std::vector<ArmRow> read_cases(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ParseError("cannot open " + p.string());
  std::string line;
  if (!std::getline(in, line) || line != kCasesCsvHeader) throw ParseError(p.string() + ": unexpected header", 1);
  std::vector<ArmRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = dragdeorbit::detail::split_csv(line);
    if (f.size() != 13) throw ParseError(p.string() + ": expected 13 fields", lineno);
    ArmRow r;
    r.arm = std::string(f[1]);
    r.status = std::string(f[3]);
    if (r.status == "success") {
      r.miss = dragdeorbit::detail::parse_number(f[4], "miss_m", lineno);
      r.actuation = dragdeorbit::detail::parse_number(f[6], "actuation", lineno);
    }
    rows.push_back(r);
  }
  return rows;
}

int cmd_report(const Options& o) {
  if (o.results.empty()) throw ParseError("report: give at least one results directory");
  const RunConfig cfg = make_config(o);
  const fs::path dir = out_dir(cfg);
  auto cdf = open_out(dir / "miss_cdf.csv");
  auto hist = open_out(dir / "miss_histogram.csv");
  auto tuning = open_out(dir / "tuning.csv");
  auto text = open_out(dir / "report.txt");
  cdf << "results,arm,percentile,miss_m\n";
  hist << "results,arm,bin_lo_km,bin_hi_km,count\n";
  tuning << "results,r_input,arm,n_success,actuation_median,miss_median_m,miss_mean_m\n";
  const std::vector<double> edges_km = {0, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 1e9};
  for (const auto& res : o.results) {
    const fs::path rdir(res);
    const auto rows = read_cases(rdir / "cases.csv");
    const auto summary = read_json(rdir / "summary.json");
    const double r_input = summary.value("r_input", std::numeric_limits<double>::quiet_NaN());
    text << "== " << res << " (n = " << summary.value("n_cases", 0) << ", R_c = " << r_input << ")\n";
    for (const std::string arm : {"with", "without"}) {
      std::vector<double> miss, act;
      int total = 0;
      for (const auto& r : rows) {
        if (r.arm != arm) continue;
        ++total;
        if (r.status == "success") {
          miss.push_back(r.miss);
          act.push_back(r.actuation);
        }
      }
      if (total == 0) continue;
      std::sort(miss.begin(), miss.end());
      for (int p = 0; p <= 100; p += 5) {
        cdf << res << ',' << arm << ',' << p << ',' << percentile_sorted(miss, p) << '\n';
      }
      for (std::size_t b = 0; b + 1 < edges_km.size(); ++b) {
        const auto cnt = std::count_if(miss.begin(), miss.end(), [&](double m) {
          return m >= edges_km[b] * 1e3 && m < edges_km[b + 1] * 1e3;
        });
        hist << res << ',' << arm << ',' << edges_km[b] << ',' << edges_km[b + 1] << ',' << cnt << '\n';
      }
      const double act_med = act.empty() ? std::numeric_limits<double>::quiet_NaN() : median_of(act);
      tuning << res << ',' << r_input << ',' << arm << ',' << miss.size() << ',' << act_med << ','
             << percentile_sorted(miss, 50) << ',' << mean_of(miss) << '\n';
      text << "  " << arm << " estimate: " << miss.size() << "/" << total << " success";
      if (!miss.empty()) {
        text << ", miss mean " << mean_of(miss) / 1e3 << " km, median " << percentile_sorted(miss, 50) / 1e3
             << " km, max " << miss.back() / 1e3 << " km, actuation median " << act_med;
      }
      text << '\n';
    }
    if (summary.contains("paired_comparison")) {
      const auto& pc = summary["paired_comparison"];
      text << "  paired (both arms succeeded, n = " << pc.value("n_both_success", 0) << "): ratio with/without "
           << pc["ratio_with_over_without"] << '\n';
    }
  }
  text.flush();
  std::ifstream back(dir / "report.txt");
  std::cout << back.rdbuf();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Drag-modulated deorbit guidance, estimation and tracking"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "Run configuration file (key = value sections)")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Base random seed");
  app.add_option("--out", o.out, "Output directory");

  auto* guid = app.add_subcommand("guidance", "Generate a guidance trajectory for one case");
  guid->add_option("--index", o.index, "Case index sampled from the seed (ignored with a [case] section)");

  auto* trk = app.add_subcommand("track", "Track a guidance trajectory in closed loop for one case");
  trk->add_option("--index", o.index, "Case index sampled from the seed (ignored with a [case] section)");
  trk->add_option("--guidance", o.guidance_dir, "Directory with guidance.csv and guidance.json");
  trk->add_flag("--no-density-estimate", o.no_estimate, "Zero the density-error feedforward");
  trk->add_flag("--truth-nominal", o.truth_nominal, "Truth environment equal to the guidance environment, no dispersion");
  trk->add_flag("--no-noise", o.no_noise, "Noise-free measurements");
  trk->add_option("--c-drag", o.c_drag, "Override the truth drag multiplier");

  auto* mc = app.add_subcommand("mc", "Run a Monte Carlo campaign");
  mc->add_option("--n", o.n, "Number of cases");
  mc->add_option("--jobs", o.jobs, "Worker threads");
  mc->add_flag("--paired", o.paired, "Run every case with and without the density estimate");
  mc->add_flag("--no-density-estimate", o.no_estimate, "Single-arm campaign without the density estimate");

  auto* rep = app.add_subcommand("report", "Tabulate campaign results");
  rep->add_option("results", o.results, "Campaign result directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInput;
  }

  try {
    if (*guid) return cmd_guidance(o);
    if (*trk) return cmd_track(o);
    if (*mc) return cmd_mc(o);
    if (*rep) return cmd_report(o);
  } catch (const ParseError& e) {
    spdlog::error("{}", e.what());
    return kInput;
  } catch (const CoverageError& e) {
    spdlog::error("{}", e.what());
    return kInput;
  } catch (const RangeError& e) {
    spdlog::error("{}", e.what());
    return kInfeasible;
  } catch (const ControlAuthorityError& e) {
    spdlog::error("{}", e.what());
    return kInfeasible;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kInput;
  }
  return kInput;
}
