// cavmon: sampling-interval trade-off analysis for CAV safety monitoring.
//
//   cavmon indicators  compute SD / LPV / ITTC series and critical events
//   cavmon sweep       per-interval detection/compression trade-off report
//   cavmon simulate    OBU -> RSU -> TMC pipeline simulation
//   cavmon synth       synthetic log with planted critical events
//
// Every option can also come from a TOML config file (--config) with one
// [indicators] / [sweep] / [simulate] / [synth] section per command; command-line
// flags override the file. CAVMON_OUTPUT_DIR sets the default output
// directory.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cavmon/cavmon.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitPartial = 3;

constexpr int kFormatVersion = 1;

struct RunConfig {
  std::string input;
  std::string out_dir;
  std::vector<std::string> indicators = {"SD", "LPV", "ITTC"};
  char delimiter = ',';
  double vehicle_width = cavmon::kDefaultVehicleWidth;
  std::vector<std::string> column_overrides;  // field=column
  int min_lane_quality = 2;
  std::vector<int> valid_status;  // empty: any non-zero code
  int range_rate_sign = 1;
  std::optional<double> sd_threshold, lpv_threshold, ittc_threshold;

  // sweep
  std::vector<double> intervals = cavmon::kDefaultIntervalGrid;
  double w_com = 0.5;
  double w_rel = 0.5;
  double alpha = 0.05;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  double delay_bin = cavmon::kDefaultDelayBinWidth;
  double error_bin = cavmon::kDefaultErrorBinWidth;
  double phase_fraction = 0.0;
  bool index_mode = false;

  // simulate
  double sampling_interval = 0.2;
  double sampling_phase = 0.0;
  double batch_interval = 1.0;
  std::string channel = "wave";
  std::optional<double> capacity;
  std::optional<std::size_t> queue_limit;
  std::optional<double> propagation_delay;
  bool no_drain = false;
  std::uint64_t vehicle_id = 1;

  // synth
  std::string output;
  cavmon::SynthConfig synth;
};

std::string fmt(double v) { return cavmon::detail::format_double(v); }

fs::path out_dir(const RunConfig& cfg) {
  fs::path dir = cfg.out_dir.empty() ? fs::path(".") : fs::path(cfg.out_dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw cavmon::Error("cannot write '" + path.string() + "'");
  out << content;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

cavmon::LoadResult load(const RunConfig& cfg) {
  if (cfg.input.empty()) throw cavmon::InvalidArgument("--input is required");
  cavmon::LoadOptions opts;
  opts.delimiter = cfg.delimiter;
  opts.vehicle_width = cfg.vehicle_width;
  std::map<std::string, std::string> overrides;
  for (const auto& kv : cfg.column_overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw cavmon::InvalidArgument("--column expects field=name, got '" + kv + "'");
    overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  opts.columns = cavmon::ColumnMap::with_overrides(overrides);
  auto res = cavmon::load_log(cfg.input, opts);

  cavmon::QualityPolicy policy;
  policy.min_lane_quality = cfg.min_lane_quality;
  if (!cfg.valid_status.empty()) policy.valid_target_status = std::set<int>(cfg.valid_status.begin(), cfg.valid_status.end());
  res.log = cavmon::filter_quality(res.log, policy);
  return res;
}

cavmon::IndicatorOptions indicator_options(const RunConfig& cfg) {
  if (cfg.range_rate_sign != 1 && cfg.range_rate_sign != -1)
    throw cavmon::InvalidArgument("--range-rate-sign must be 1 or -1");
  cavmon::IndicatorOptions o;
  o.sd_threshold = cfg.sd_threshold;
  o.lpv_threshold = cfg.lpv_threshold;
  o.ittc_threshold = cfg.ittc_threshold;
  o.range_rate_sign = cfg.range_rate_sign;
  return o;
}

std::vector<cavmon::IndicatorKind> selected(const RunConfig& cfg) {
  std::vector<cavmon::IndicatorKind> out;
  for (const auto& name : cfg.indicators) {
    const auto k = cavmon::parse_indicator(name);
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  }
  if (out.empty()) throw cavmon::InvalidArgument("no indicators selected");
  return out;
}

// Computes each selected indicator; failures are recorded per indicator.
std::map<cavmon::IndicatorKind, cavmon::IndicatorSeries> compute_all(const RunConfig& cfg,
                                                                     const cavmon::TelemetryLog& log,
                                                                     json& errors) {
  std::map<cavmon::IndicatorKind, cavmon::IndicatorSeries> out;
  const auto opts = indicator_options(cfg);
  for (auto kind : selected(cfg)) {
    const std::string name(cavmon::short_name(kind));
    try {
      auto s = cavmon::compute_indicator(kind, log, opts);
      if (s.empty()) throw cavmon::InvalidArgument("no usable " + name + " data in log");
      out.emplace(kind, std::move(s));
    } catch (const cavmon::Error& e) {
      errors[name] = e.what();
      std::cerr << "cavmon: " << name << ": " << e.what() << "\n";
    }
  }
  return out;
}

int status_for(std::size_t ok, std::size_t requested) {
  if (ok == 0) return kExitFatal;
  return ok < requested ? kExitPartial : kExitOk;
}

json input_summary(const cavmon::LoadResult& res) {
  return {{"source", res.log.source},
          {"frames", res.log.frames.size()},
          {"dropped_rows", res.dropped_rows},
          {"duplicate_rows", res.duplicate_rows},
          {"nominal_rate_hz", res.log.nominal_rate_hz},
          {"vehicle_width", res.log.vehicle_width}};
}

int cmd_indicators(const RunConfig& cfg) {
  const auto res = load(cfg);
  const auto dir = out_dir(cfg);
  json errors = json::object();
  const auto series = compute_all(cfg, res.log, errors);

  json summary = {{"format_version", kFormatVersion}, {"input", input_summary(res)}};
  json per = json::object();
  for (const auto& [kind, s] : series) {
    const std::string name(cavmon::short_name(kind));
    std::ostringstream csv;
    cavmon::write_series(csv, s);
    write_file(dir / (name + "_series.csv"), csv.str());

    const auto events = cavmon::detect_events(s);
    std::ostringstream jsonl;
    double total = 0.0;
    for (const auto& e : events) {
      jsonl << cavmon::to_json(e).dump() << "\n";
      total += e.duration();
    }
    write_file(dir / (name + "_events.jsonl"), jsonl.str());

    per[name] = {{"points", s.size()},
                 {"skipped_frames", s.skipped_frames},
                 {"threshold", s.threshold},
                 {"critical_events", events.size()},
                 {"mean_event_duration", events.empty() ? 0.0 : total / static_cast<double>(events.size())}};
    std::cout << name << ": " << s.size() << " points, " << events.size() << " critical events\n";
  }
  summary["indicators"] = per;
  summary["errors"] = errors;
  write_file(dir / "indicators_summary.json", dump(summary));
  return status_for(series.size(), selected(cfg).size());
}

int cmd_sweep(const RunConfig& cfg) {
  const cavmon::Weights weights{cfg.w_com, cfg.w_rel};
  weights.validate();
  for (double k : cfg.intervals)
    if (!(k > 0.0)) throw cavmon::InvalidArgument("intervals must be positive");
  if (cfg.trials == 0) throw cavmon::InvalidArgument("--trials must be at least 1");

  const auto res = load(cfg);
  const auto dir = out_dir(cfg);
  json errors = json::object();
  const auto series = compute_all(cfg, res.log, errors);

  cavmon::EvaluateOptions eval;
  eval.weights = weights;
  eval.phase_fraction = cfg.phase_fraction;
  eval.mode = cfg.index_mode ? cavmon::SamplingMode::IndexBased : cavmon::SamplingMode::TimeBased;
  eval.delay_bin_width = cfg.delay_bin;
  eval.error_bin_width = cfg.error_bin;

  std::ostringstream outcomes_csv, ks_csv, summaries_csv, rec_csv;
  outcomes_csv << "indicator,interval,success_ratio,compression_ratio,weighted_sum,raw_count,sampled_count,"
                  "event_count,detected_count\n";
  ks_csv << "indicator,interval,passing_rate,trials,alpha\n";
  summaries_csv << "indicator,interval,outcome,quantity,mode,std_dev,bin_width,count\n";
  rec_csv << "scope,interval,weighted_sum\n";

  json report = {{"format_version", kFormatVersion},
                 {"input", input_summary(res)},
                 {"weights", {{"communication", weights.communication}, {"reliability", weights.reliability}}},
                 {"alpha", cfg.alpha},
                 {"trials", cfg.trials},
                 {"seed", cfg.seed},
                 {"intervals", cfg.intervals}};
  json per = json::object();
  std::map<cavmon::IndicatorKind, std::vector<cavmon::SamplingOutcome>> all;

  for (const auto& [kind, s] : series) {
    const std::string name(cavmon::short_name(kind));
    const auto outcomes = cavmon::sweep(s, cfg.intervals, eval);
    json rows = json::array();
    for (const auto& o : outcomes) {
      const double rate = cavmon::ks_passing_rate(s, o.interval, cfg.trials, cfg.alpha, cfg.seed, eval.mode);
      auto row = cavmon::to_json(o);
      row["ks_passing_rate"] = rate;
      rows.push_back(row);

      outcomes_csv << name << ',' << fmt(o.interval) << ',' << fmt(o.success_ratio) << ','
                   << fmt(o.compression_ratio) << ',' << fmt(o.weighted_sum) << ',' << o.raw_count << ','
                   << o.sampled_count << ',' << o.event_count << ',' << o.detected_count << '\n';
      ks_csv << name << ',' << fmt(o.interval) << ',' << fmt(rate) << ',' << cfg.trials << ',' << fmt(cfg.alpha)
             << '\n';
      auto summary_row = [&](const char* outcome, const char* quantity,
                             const std::optional<cavmon::DistributionSummary>& d) {
        if (!d) return;
        summaries_csv << name << ',' << fmt(o.interval) << ',' << outcome << ',' << quantity << ',' << fmt(d->mode)
                      << ',' << fmt(d->std_dev) << ',' << fmt(d->bin_width) << ',' << d->count << '\n';
      };
      summary_row("detected", "delay", o.delay_summary);
      summary_row("detected", "error", o.error_summary);
      summary_row("missed", "delay", o.missed_delay_summary);
      summary_row("missed", "error", o.missed_error_summary);
    }
    const double best = cavmon::recommend(outcomes);
    const auto best_it = std::find_if(outcomes.begin(), outcomes.end(),
                                      [best](const cavmon::SamplingOutcome& o) { return o.interval == best; });
    rec_csv << name << ',' << fmt(best) << ',' << fmt(best_it->weighted_sum) << '\n';
    per[name] = {{"outcomes", rows},
                 {"raw_events", outcomes.front().event_count},
                 {"recommended_interval", best},
                 {"recommended_weighted_sum", best_it->weighted_sum}};
    all.emplace(kind, outcomes);

    std::cout << name << " (" << outcomes.front().event_count << " raw events)\n"
              << "  interval  success  compression  weighted  ks_pass\n";
    for (const auto& row : rows)
      std::cout << "  " << fmt(row["interval"].get<double>()) << "  " << fmt(row["success_ratio"].get<double>())
                << "  " << fmt(row["compression_ratio"].get<double>()) << "  "
                << fmt(row["weighted_sum"].get<double>()) << "  " << fmt(row["ks_passing_rate"].get<double>())
                << "\n";
    std::cout << "  recommended interval: " << fmt(best) << " s\n";
  }
  report["indicators"] = per;

  if (!all.empty()) {
    const auto table = cavmon::uniform_objective(all, weights);
    const double uniform = cavmon::recommend_uniform(all, weights);
    json utable = json::array();
    for (const auto& [k, v] : table) {
      utable.push_back({{"interval", k}, {"mean_weighted_sum", v}});
      if (k == uniform) rec_csv << "uniform," << fmt(k) << ',' << fmt(v) << '\n';
    }
    report["uniform"] = {{"table", utable}, {"recommended_interval", uniform}};
    std::cout << "uniform recommended interval: " << fmt(uniform) << " s\n";
  }
  report["errors"] = errors;

  write_file(dir / "report.json", dump(report));
  write_file(dir / "outcomes.csv", outcomes_csv.str());
  write_file(dir / "ks.csv", ks_csv.str());
  write_file(dir / "summaries.csv", summaries_csv.str());
  write_file(dir / "recommendations.csv", rec_csv.str());
  return status_for(series.size(), selected(cfg).size());
}

int cmd_simulate(const RunConfig& cfg) {
  auto channel = cavmon::ChannelModel::preset(cfg.channel);
  if (cfg.capacity) channel.capacity_bps = *cfg.capacity;
  if (cfg.queue_limit) channel.queue_limit = *cfg.queue_limit;
  if (cfg.propagation_delay) channel.propagation_delay = *cfg.propagation_delay;
  channel.validate();

  const auto res = load(cfg);
  const auto dir = out_dir(cfg);
  const cavmon::SamplingSpec spec{cfg.sampling_interval, cfg.sampling_phase, cavmon::SamplingMode::TimeBased};

  cavmon::SimulationOptions sim;
  sim.vehicle_id = cfg.vehicle_id;
  sim.drain = !cfg.no_drain;
  sim.indicators = indicator_options(cfg);
  const auto report = cavmon::simulate(res.log, spec, cfg.batch_interval, channel, sim);

  // Indicators computed straight from the sampled frames, for the check.
  cavmon::TelemetryLog sampled_log = res.log;
  sampled_log.frames = cavmon::decimate_frames(res.log, spec);
  json checks = json::object();
  bool all_ok = true;
  for (auto kind : selected(cfg)) {
    const std::string name(cavmon::short_name(kind));
    try {
      const auto direct = cavmon::compute_indicator(kind, sampled_log, sim.indicators);
      const bool ok = cavmon::end_to_end_check(report, direct);
      checks[name] = ok;
      all_ok = all_ok && ok;
    } catch (const cavmon::Error& e) {
      checks[name] = nullptr;
    }
  }

  json out = cavmon::to_json(report);
  std::vector<double> msg_lat;
  std::ostringstream msg_csv, lat_csv;
  msg_csv << "sequence,generated_at,encoded_size,record_count,dropped,delivered,delivered_at,latency\n";
  for (const auto& m : report.messages) {
    msg_csv << m.sequence << ',' << fmt(m.generated_at) << ',' << m.encoded_size << ',' << m.record_count << ','
            << (m.dropped ? 1 : 0) << ',' << (m.delivered ? 1 : 0) << ','
            << (m.delivered_at ? fmt(*m.delivered_at) : "") << ',' << (m.latency ? fmt(*m.latency) : "") << '\n';
    if (m.latency) msg_lat.push_back(*m.latency);
  }
  lat_csv << "frame_latency\n";
  for (double l : report.frame_latencies) lat_csv << fmt(l) << '\n';

  json lat_summary = nullptr;
  if (!msg_lat.empty()) {
    const auto [lo, hi] = std::minmax_element(msg_lat.begin(), msg_lat.end());
    double mean = 0.0;
    for (double l : msg_lat) mean += l;
    mean /= static_cast<double>(msg_lat.size());
    lat_summary = {{"min", *lo}, {"max", *hi}, {"mean", mean}};
  }

  json doc = {{"format_version", kFormatVersion},
              {"input", input_summary(res)},
              {"sampling", {{"interval", spec.interval}, {"phase", spec.phase}}},
              {"batch_interval", cfg.batch_interval},
              {"channel",
               {{"preset", cfg.channel},
                {"capacity_bps", std::isinf(channel.capacity_bps) ? json(nullptr) : json(channel.capacity_bps)},
                {"queue_limit", channel.queue_limit},
                {"propagation_delay", channel.propagation_delay}}},
              {"report", out},
              {"message_latency", lat_summary},
              {"end_to_end_check", checks}};
  write_file(dir / "simulation.json", dump(doc));
  write_file(dir / "messages.csv", msg_csv.str());
  write_file(dir / "frame_latencies.csv", lat_csv.str());

  std::cout << "messages: " << report.generated << " generated, " << report.delivered << " delivered, "
            << report.dropped << " dropped, " << report.in_queue << " in queue\n";
  if (!lat_summary.is_null())
    std::cout << "message latency: min " << fmt(lat_summary["min"].get<double>()) << " s, mean "
              << fmt(lat_summary["mean"].get<double>()) << " s, max " << fmt(lat_summary["max"].get<double>())
              << " s\n";
  std::cout << "end-to-end check: " << (all_ok ? "pass" : "FAIL") << "\n";
  return all_ok ? kExitOk : kExitPartial;
}

int cmd_synth(const RunConfig& cfg) {
  const auto res = cavmon::synthesize(cfg.synth);
  const auto dir = out_dir(cfg);
  const fs::path log_path = cfg.output.empty() ? dir / "synthetic.csv" : fs::path(cfg.output);
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());

  std::ostringstream csv;
  cavmon::write_log(csv, res.log);
  write_file(log_path, csv.str());

  json truth = json::array();
  for (const auto& e : res.planted) truth.push_back(cavmon::to_json(e));
  json doc = {{"format_version", kFormatVersion},
              {"seed", cfg.synth.seed},
              {"rate_hz", cfg.synth.rate_hz},
              {"duration_s", cfg.synth.duration_s},
              {"frames", res.log.frames.size()},
              {"planted_events", truth}};
  fs::path truth_path = log_path;
  truth_path.replace_extension(".events.json");
  write_file(truth_path, dump(doc));
  std::cout << "wrote " << log_path.string() << " (" << res.log.frames.size() << " frames, " << res.planted.size()
            << " planted events)\n";
  return kExitOk;
}

void add_input_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("-i,--input", cfg.input, "Telemetry log (delimiter-separated, header row)")->required();
  cmd->add_option("--delimiter", cfg.delimiter, "Field delimiter");
  cmd->add_option("--vehicle-width", cfg.vehicle_width, "Vehicle width in meters")->check(CLI::PositiveNumber);
  cmd->add_option("--column", cfg.column_overrides, "Column name override, field=name (repeatable)");
  cmd->add_option("--min-lane-quality", cfg.min_lane_quality, "Minimum lane detection quality");
  cmd->add_option("--valid-status", cfg.valid_status, "Accepted radar target status codes (default: any non-zero)");
  cmd->add_option("--indicators", cfg.indicators, "Indicators to compute (SD, LPV, ITTC)")->delimiter(',');
  cmd->add_option("--range-rate-sign", cfg.range_rate_sign, "1 if range rate is d(range)/dt, -1 if closing speed");
  cmd->add_option("--sd-threshold", cfg.sd_threshold, "Severe deceleration threshold, m/s^2");
  cmd->add_option("--lpv-threshold", cfg.lpv_threshold, "Lateral margin threshold, m");
  cmd->add_option("--ittc-threshold", cfg.ittc_threshold, "Inverse TTC threshold, 1/s");
}

void add_output_option(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("-o,--out-dir", cfg.out_dir, "Output directory (default: $CAVMON_OUTPUT_DIR or .)");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  if (const char* env = std::getenv("CAVMON_OUTPUT_DIR")) cfg.out_dir = env;

  CLI::App app{"Sampling-interval trade-off analysis for CAV safety monitoring"};
  app.set_config("--config", "", "TOML config file with a [<command>] section; command-line flags override it");
  app.fallthrough();  // --config may follow the subcommand
  app.require_subcommand(1);

  auto* ind = app.add_subcommand("indicators", "Compute indicator series and critical events");
  add_input_options(ind, cfg);
  add_output_option(ind, cfg);

  auto* sw = app.add_subcommand("sweep", "Detection/compression trade-off over a sampling-interval grid");
  add_input_options(sw, cfg);
  add_output_option(sw, cfg);
  sw->add_option("--intervals", cfg.intervals, "Sampling intervals in seconds")->delimiter(',');
  sw->add_option("--w-com", cfg.w_com, "Weight of the compression ratio");
  sw->add_option("--w-rel", cfg.w_rel, "Weight of the detection success ratio");
  sw->add_option("--alpha", cfg.alpha, "KS significance level");
  sw->add_option("--trials", cfg.trials, "Randomized-phase KS trials per interval");
  sw->add_option("--seed", cfg.seed, "Seed for the randomized KS trials")->required();
  sw->add_option("--delay-bin", cfg.delay_bin, "Histogram bin width for delays, s");
  sw->add_option("--error-bin", cfg.error_bin, "Histogram bin width for errors");
  sw->add_option("--phase-fraction", cfg.phase_fraction, "Sampling phase as a fraction of the interval");
  sw->add_flag("--index-mode", cfg.index_mode, "Index-based instead of time-based decimation");

  auto* sim = app.add_subcommand("simulate", "Simulate the OBU -> RSU -> TMC pipeline");
  add_input_options(sim, cfg);
  add_output_option(sim, cfg);
  sim->add_option("--sampling-interval", cfg.sampling_interval, "OBU sampling interval, s");
  sim->add_option("--phase", cfg.sampling_phase, "OBU sampling phase, s");
  sim->add_option("--batch-interval", cfg.batch_interval, "Message batching interval, s");
  sim->add_option("--channel", cfg.channel, "Channel preset: lte, wave, unlimited");
  sim->add_option("--capacity", cfg.capacity, "Channel capacity override, bits/s");
  sim->add_option("--queue-limit", cfg.queue_limit, "Uplink queue limit override, messages");
  sim->add_option("--propagation-delay", cfg.propagation_delay, "Propagation delay override, s");
  sim->add_flag("--no-drain", cfg.no_drain, "Stop at the end of the log instead of draining the uplink");
  sim->add_option("--vehicle-id", cfg.vehicle_id, "Vehicle identifier (48-bit)");

  auto* syn = app.add_subcommand("synth", "Generate a synthetic log with planted critical events");
  add_output_option(syn, cfg);
  syn->add_option("--output", cfg.output, "Log path (default: <out-dir>/synthetic.csv)");
  syn->add_option("--rate", cfg.synth.rate_hz, "Frame rate, Hz");
  syn->add_option("--duration", cfg.synth.duration_s, "Log length, s");
  syn->add_option("--seed", cfg.synth.seed, "Generator seed")->required();
  syn->add_option("--vehicle-width", cfg.synth.vehicle_width, "Vehicle width, m");
  syn->add_option("--lane-width", cfg.synth.lane_width, "Lane width, m");
  auto plan_options = [&](const std::string& p, cavmon::EventPlan& plan) {
    syn->add_option("--" + p + "-count", plan.count, "Number of planted " + p + " events");
    syn->add_option("--" + p + "-duration", plan.duration, "Duration of each " + p + " disturbance, s");
    syn->add_option("--" + p + "-amplitude", plan.amplitude, "Peak value of each " + p + " disturbance");
    syn->add_option("--" + p + "-jitter", plan.amplitude_jitter, "Uniform +/- jitter on the " + p + " peak");
  };
  plan_options("sd", cfg.synth.sd);
  plan_options("lpv", cfg.synth.lpv);
  plan_options("ittc", cfg.synth.ittc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ind) return cmd_indicators(cfg);
    if (*sw) return cmd_sweep(cfg);
    if (*sim) return cmd_simulate(cfg);
    if (*syn) return cmd_synth(cfg);
  } catch (const cavmon::InvalidArgument& e) {
    std::cerr << "cavmon: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "cavmon: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitUsage;
}
