#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ganlab/combination.hpp"
#include "ganlab/dynamics.hpp"
#include "ganlab/geometry.hpp"
#include "ganlab/io.hpp"
#include "ganlab/svg.hpp"
#include "ganlab/tinygan.hpp"
#include "ganlab/util.hpp"
#include "ganlab/variance_lab.hpp"

// Command-line front end: wires configs to the experiment pipelines and
// emits CSV, PGM and SVG artifacts. Every command takes an explicit seed and
// writes resolved-config.txt plus an artifact manifest into its output
// directory.
namespace ganlab::cli {

namespace fs = std::filesystem;

namespace detail {

// Collects produced artifacts so the run can be sealed with a manifest.
class RunDir {
 public:
  explicit RunDir(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  const fs::path& path() const { return dir_; }

  fs::path file(const std::string& name) {
    artifacts_.push_back(name);
    return dir_ / name;
  }

  void note(const fs::path& absolute) {
    artifacts_.push_back(fs::relative(absolute, dir_).string());
  }

  // resolved-config.txt + manifest.csv (the manifest carries the only
  // timestamps of a run; data artifacts are bitwise reproducible)
  void seal(const std::string& resolved_config) {
    io::write_file(dir_ / "resolved-config.txt", resolved_config);
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    std::ostringstream manifest;
    manifest << "path,bytes,fnv1a64,written_at\n";
    manifest << "resolved-config.txt," << fs::file_size(dir_ / "resolved-config.txt") << ","
             << std::hex << io::fnv1a64_file(dir_ / "resolved-config.txt") << std::dec << ","
             << stamp << "\n";
    for (const auto& rel : artifacts_) {
      const fs::path p = dir_ / rel;
      manifest << rel << "," << fs::file_size(p) << "," << std::hex << io::fnv1a64_file(p)
               << std::dec << "," << stamp << "\n";
    }
    io::write_file(dir_ / "manifest.csv", manifest.str());
  }

 private:
  fs::path dir_;
  std::vector<std::string> artifacts_;
};

inline dynamics::Batchsize parse_batchsize(const std::string& s) {
  if (s == "inf" || s == "infinite" || s == "full") return dynamics::Batchsize::infinite();
  const auto v = std::stoull(s);
  return dynamics::Batchsize::finite(v);
}

inline dynamics::StepSchedule parse_schedule(const std::string& s, double c) {
  if (s == "constant") return dynamics::StepSchedule::constant(c);
  if (s == "vanishing") return dynamics::StepSchedule::vanishing();
  throw std::invalid_argument("schedule: expected constant or vanishing, got " + s);
}

inline std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n') c = ' ';
  return s;
}

// Shared per-command state bound to CLI11 options.
struct CommonArgs {
  std::uint64_t seed = 0;
  std::string out = ".";
  int threads = 0;
  std::string config;
};

inline void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--seed", args.seed, "Master seed (mandatory; there is no wall-clock default)")
      ->required();
  cmd->add_option("--out", args.out, "Output directory")->capture_default_str();
  cmd->add_option("--threads", args.threads,
                  "Worker threads for parallel sections (0 = hardware)")
      ->capture_default_str();
  cmd->add_option("--config", args.config,
                  "Flat key = value config file; flags override file values");
}

inline std::string trimmed(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Reads a flat `key = value` config file ('#' lines are comments) into
// --key=value tokens for the option parser.
inline std::vector<std::string> load_config_tokens(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string entry = trimmed(line);
    if (entry.empty() || entry[0] == '#') continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    const std::string key = trimmed(entry.substr(0, eq));
    std::string value = trimmed(entry.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    if (key == "config")
      throw std::invalid_argument("config: nested config files are not supported");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
      value = value.substr(1, value.size() - 2);
      std::string squeezed;
      for (char c : value)
        if (c != ' ') squeezed.push_back(c);
      value = squeezed;
    }
    if (value.empty()) continue;  // `key =` means unset
    tokens.push_back("--" + key + "=" + value);
  }
  return tokens;
}

// Splices config-file tokens in after the subcommand name. Options named
// explicitly on the command line keep precedence: their file entries are
// dropped.
inline std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::vector<std::string> on_cli;
  for (std::size_t i = 1; i < args.size(); ++i)
    if (args[i].rfind("--", 0) == 0) on_cli.push_back(args[i].substr(0, args[i].find('=')));
  std::vector<std::string> out;
  out.push_back(args[0]);
  for (const auto& token : load_config_tokens(path)) {
    const std::string name = token.substr(0, token.find('='));
    if (std::find(on_cli.begin(), on_cli.end(), name) == on_cli.end()) out.push_back(token);
  }
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

// Final option values in the same flat format the config loader accepts,
// minus the config path itself.
inline std::string resolved_config_of(const CLI::App* cmd) {
  std::istringstream in(cmd->config_to_str(true, false));
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("config=", 0) != 0) out << line << "\n";
  return out.str();
}

inline tinygan::Matrix dataset_matrix(const geometry::GeometryDataset& ds) {
  const int pix = ds.images.at(0).pixel_count();
  tinygan::Matrix m(static_cast<int>(ds.size()), pix);
  for (std::size_t i = 0; i < ds.size(); ++i)
    std::copy(ds.images[i].pixels.begin(), ds.images[i].pixels.end(),
              m.row(static_cast<int>(i)));
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Command handlers. Each returns the process exit status.
// ---------------------------------------------------------------------------

struct SimulateArgs {
  detail::CommonArgs common;
  std::string schedule = "constant";
  double c = 1.0;
  int d = 1;
  std::string m = "inf";
  double dt = 1e-3;
  double t_end = 1.0;
  std::vector<double> w0;
  std::vector<double> theta0;
  std::int64_t record_stride = 1;
};

inline int cmd_simulate(const SimulateArgs& a, const std::string& resolved) {
  dynamics::SimConfig config;
  config.schedule = detail::parse_schedule(a.schedule, a.c);
  config.d = a.d;
  config.m = detail::parse_batchsize(a.m);
  config.dt = a.dt;
  config.t_start = config.schedule.start_time();
  config.t_end = a.t_end;
  config.seed = a.common.seed;
  config.record_stride = a.record_stride;
  if (!a.w0.empty() || !a.theta0.empty()) {
    dynamics::ParamState init = dynamics::ParamState::origin(a.d);
    if (!a.w0.empty()) init.w = a.w0;
    if (!a.theta0.empty()) init.theta = a.theta0;
    config.initial = init;
  }
  const auto traj = dynamics::simulate_path(config);
  detail::RunDir run(a.common.out);
  io::write_file(run.file("trajectory.csv"), io::trajectory_csv(traj, config.d));
  run.seal(resolved);
  std::cout << "simulate: " << traj.times.size() << " recorded states -> "
            << (run.path() / "trajectory.csv").string() << "\n";
  return 0;
}

struct VarianceSweepArgs {
  detail::CommonArgs common;
  std::string schedule = "constant";
  double c = 1.0;
  int d = 1;
  std::vector<std::uint64_t> m_values;
  int paths = 100;
  double t_eval = 3.141592653589793;
  double dt = 1e-3;
  int component = 1;
  std::string sigma_reading = "per-step";
};

inline int cmd_variance_sweep(const VarianceSweepArgs& a, const std::string& resolved) {
  variance_lab::SweepConfig config;
  config.base.schedule = detail::parse_schedule(a.schedule, a.c);
  config.base.d = a.d;
  config.base.dt = a.dt;
  config.base.t_start = config.base.schedule.start_time();
  config.base.t_end = a.t_eval;
  config.base.seed = a.common.seed;
  config.m_values = a.m_values;
  config.n_paths = a.paths;
  config.t_eval = a.t_eval;
  config.component = a.component;
  config.n_threads = a.common.threads;

  const auto reading = [&] {
    if (a.sigma_reading == "per-step") return dynamics::SigmaReading::PerStep;
    if (a.sigma_reading == "final-time") return dynamics::SigmaReading::FinalTime;
    throw std::invalid_argument("sigma-reading: expected per-step or final-time");
  }();

  const auto estimates = variance_lab::sweep(config);
  const auto fit = variance_lab::fit_scaling(estimates);
  std::vector<double> oracle;
  oracle.reserve(estimates.size());
  for (const auto& e : estimates)
    oracle.push_back(dynamics::variance_oracle(a.t_eval, e.m, a.d, a.component,
                                               config.base.schedule, reading));
  detail::RunDir run(a.common.out);
  io::write_file(run.file("sweep.csv"), io::sweep_csv(estimates, fit, oracle));
  run.seal(resolved);
  std::cout << "variance-sweep: slope=" << io::format_double(fit.slope)
            << " r2=" << io::format_double(fit.r_squared) << " -> "
            << (run.path() / "sweep.csv").string() << "\n";
  return 0;
}

struct GenGeometryArgs {
  detail::CommonArgs common;
  std::string mode = "paired";
  int n_base = 32;
  int count = 2;
  int rects = 2;
};

inline int cmd_gen_geometry(const GenGeometryArgs& a, const std::string& resolved) {
  geometry::GeometryDataset ds;
  if (a.mode == "paired") {
    ds = geometry::generate_paired(a.n_base, a.common.seed);
  } else if (a.mode == "plain") {
    ds = geometry::generate_plain(a.count, a.rects, a.common.seed);
  } else {
    throw std::invalid_argument("mode: expected paired or plain");
  }
  detail::RunDir run(a.common.out);
  for (const auto& p : io::write_dataset(run.path(), ds)) run.note(p);
  run.seal(resolved);
  std::cout << "gen-geometry: " << ds.size() << " images -> " << run.path().string() << "\n";
  return 0;
}

struct TrainGanArgs {
  detail::CommonArgs common;
  std::string data;
  std::string regime = "vanilla";
  std::string batchsize = "16";
  int steps = 1000;
  int d_steps = 1;
  std::string optimizer = "adam";
  double lr = 0.01;
  double alpha = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  std::string sc_mode = "count";
  int sc_target = -1;  // -1: use the dataset target count
  double sc_threshold = 0.1;
  std::string pcr_op = "or";
  std::string prior = "discrete";
  int latent_dim = 32;
  std::vector<int> g_hidden = {256, 256};
  std::vector<int> d_hidden = {256, 256};
  int log_stride = 10;
  int probes = 4;
  int eval_fakes = 256;
  int eval_reals = 256;
  int eval_dif = 32;
  bool emit_probes = false;
};

inline tinygan::GanConfig make_gan_config(const TrainGanArgs& a,
                                          const geometry::GeometryDataset& dataset) {
  tinygan::GanConfig config;
  config.regime = tinygan::parse_regime(a.regime);
  if (a.batchsize == "full") {
    config.full_batch = true;
  } else {
    config.batchsize = std::stoi(a.batchsize);
  }
  config.steps = a.steps;
  config.d_steps_per_g = a.d_steps;
  if (a.optimizer == "sgd") {
    config.optimizer.kind = tinygan::OptimizerSpec::Kind::Sgd;
    config.optimizer.lr = a.lr;
  } else if (a.optimizer == "adam") {
    config.optimizer.kind = tinygan::OptimizerSpec::Kind::Adam;
    config.optimizer.alpha = a.alpha;
    config.optimizer.beta1 = a.beta1;
    config.optimizer.beta2 = a.beta2;
  } else {
    throw std::invalid_argument("optimizer: expected sgd or adam");
  }
  if (tinygan::uses_sc(config.regime)) {
    tinygan::ScMode mode;
    if (a.sc_mode == "count") {
      mode.kind = tinygan::ScMode::Kind::CountFilter;
      mode.target_count = a.sc_target >= 0 ? a.sc_target : dataset.target_count;
    } else if (a.sc_mode == "dif") {
      mode.kind = tinygan::ScMode::Kind::DifFilter;
      mode.threshold = a.sc_threshold;
    } else {
      throw std::invalid_argument("sc-mode: expected count or dif");
    }
    config.sc_mode = mode;
  }
  if (tinygan::uses_pcr(config.regime)) config.pcr_op = combination::parse_comb_op(a.pcr_op);
  if (a.prior == "discrete") {
    config.prior_kind = tinygan::LatentPrior::Kind::DiscreteUniform;
  } else if (a.prior == "gaussian") {
    config.prior_kind = tinygan::LatentPrior::Kind::Gaussian;
  } else {
    throw std::invalid_argument("prior: expected discrete or gaussian");
  }
  config.latent_dim = a.latent_dim;
  config.gen_hidden = a.g_hidden;
  config.disc_hidden = a.d_hidden;
  config.seed = a.common.seed;
  config.log_stride = a.log_stride;
  config.n_probe = a.probes;
  config.eval_fakes = a.eval_fakes;
  config.eval_reals = a.eval_reals;
  config.eval_dif = a.eval_dif;
  return config;
}

inline int cmd_train_gan(const TrainGanArgs& a, const std::string& resolved) {
  const auto dataset = io::load_dataset(a.data);
  const auto config = make_gan_config(a, dataset);
  detail::RunDir run(a.common.out);

  tinygan::LogCallback on_log = nullptr;
  std::vector<fs::path> probe_files;
  if (a.emit_probes) {
    on_log = [&](const tinygan::LogEntry& e, const tinygan::Matrix& probe_images) {
      for (int r = 0; r < probe_images.rows; ++r) {
        const auto img = tinygan::detail::image_from_row(
            probe_images.row(r), dataset.images[0].width, dataset.images[0].height);
        char name[64];
        std::snprintf(name, sizeof(name), "probes/step_%06d_probe_%02d.pgm", e.step, r);
        io::write_pgm(run.path() / name, img);
        probe_files.push_back(run.path() / name);
      }
    };
  }

  const auto result = tinygan::train(config, dataset, on_log);
  io::write_file(run.file("trainlog.csv"), io::train_log_csv(result.log));
  io::save_checkpoint(run.file("checkpoint.bin"),
                      io::Checkpoint{result.gen, result.disc, result.gen_opt, result.disc_opt,
                                     result.prior, static_cast<std::uint64_t>(config.steps)});
  if (!result.log.skipped_d_steps.empty()) {
    std::ostringstream skipped;
    skipped << "step\n";
    for (int s : result.log.skipped_d_steps) skipped << s << "\n";
    io::write_file(run.file("skipped-d-steps.csv"), skipped.str());
  }
  for (const auto& p : probe_files) run.note(p);
  run.seal(resolved);
  if (result.log.aborted) {
    std::cerr << "error: training aborted: " << result.log.abort_reason << "\n";
    return 3;
  }
  std::cout << "train-gan: regime=" << a.regime
            << " final prop_correct=" << io::format_double(result.log.final_prop_correct())
            << " -> " << run.path().string() << "\n";
  return 0;
}

struct EvalCombosArgs {
  detail::CommonArgs common;
  std::string data;
  std::string checkpoint;
  std::vector<std::string> ops = {"and", "or"};
  std::uint64_t max_pairs = 128;
  int n_gen = 0;  // 0: 100x dataset size
  bool emit_images = false;
};

inline int cmd_eval_combos(const EvalCombosArgs& a, const std::string& resolved) {
  const auto dataset = io::load_dataset(a.data);
  const auto ckpt = io::load_checkpoint(a.checkpoint);
  detail::RunDir run(a.common.out);
  const auto real_rows = detail::dataset_matrix(dataset);

  std::ostringstream combos;
  combos << "op,n_pairs,mean_real,mean_dcom\n";
  for (std::size_t i = 0; i < a.ops.size(); ++i) {
    const auto op = combination::parse_comb_op(a.ops[i]);
    const auto dcom = combination::build_dcom(dataset.images, op, a.max_pairs,
                                              rng::derive_seed(a.common.seed, i));
    tinygan::Matrix dcom_rows(static_cast<int>(dcom.images.size()),
                              dataset.images[0].pixel_count());
    for (std::size_t r = 0; r < dcom.images.size(); ++r)
      std::copy(dcom.images[r].pixels.begin(), dcom.images[r].pixels.end(),
                dcom_rows.row(static_cast<int>(r)));
    const auto [mean_real, mean_dcom] = tinygan::score_combos(ckpt.disc, real_rows, dcom_rows);
    combos << a.ops[i] << "," << dcom.images.size() << "," << io::format_double(mean_real) << ","
           << io::format_double(mean_dcom) << "\n";
    if (a.emit_images)
      for (const auto& p : io::write_comb_dataset(run.path() / ("combos_" + a.ops[i]), dcom))
        run.note(p);
  }
  io::write_file(run.file("combo_scores.csv"), combos.str());

  const int n_gen = a.n_gen > 0 ? a.n_gen : static_cast<int>(dataset.size()) * 100;
  rng::Stream eval_stream(rng::derive_seed(a.common.seed, 0xe7a1ULL));
  const double prop = tinygan::prop_correct(ckpt.gen, ckpt.prior,
                                            std::max(n_gen, static_cast<int>(dataset.size())),
                                            dataset.target_count, eval_stream);
  const auto collapse =
      tinygan::mode_collapse_report(ckpt.gen, ckpt.prior, dataset, n_gen, eval_stream);
  std::ostringstream summary;
  summary << "metric,value\n";
  summary << "prop_correct," << io::format_double(prop) << "\n";
  summary << "mode_coverage," << io::format_double(collapse.coverage) << "\n";
  summary << "n_gen," << n_gen << "\n";
  io::write_file(run.file("summary.csv"), summary.str());

  std::ostringstream nearest;
  nearest << "train_index,nearest_generated_dif\n";
  for (std::size_t i = 0; i < collapse.nearest_generated.size(); ++i)
    nearest << i << "," << io::format_double(collapse.nearest_generated[i]) << "\n";
  io::write_file(run.file("nearest_generated.csv"), nearest.str());

  run.seal(resolved);
  std::cout << "eval-combos: prop_correct=" << io::format_double(prop)
            << " coverage=" << io::format_double(collapse.coverage) << " -> "
            << run.path().string() << "\n";
  return 0;
}

struct CheckTheorem3Args {
  detail::CommonArgs common;
  std::string data;
  std::string checkpoint;
  int pairs = 1000;
  std::vector<double> lambdas = {0.25, 0.5, 0.75};
};

inline int cmd_check_theorem3(const CheckTheorem3Args& a, const std::string& resolved) {
  const auto dataset = io::load_dataset(a.data);
  const auto ckpt = io::load_checkpoint(a.checkpoint);
  const auto n = dataset.size();
  if (n < 2) throw std::invalid_argument("check-theorem3: dataset needs at least 2 images");
  const double lipschitz = combination::lipschitz_upper_bound(ckpt.disc);

  rng::Stream stream(rng::derive_seed(a.common.seed, 0x7e03ULL));
  detail::RunDir run(a.common.out);
  std::ostringstream margins;
  margins << "pair_i,pair_j,lambda,f_x1,f_x2,delta,lipschitz,bound,f_mix,holds,"
             "positivity_condition,mix_positive\n";
  int held = 0, total = 0;
  for (int p = 0; p < a.pairs; ++p) {
    const auto i = static_cast<std::size_t>(stream.below(n));
    auto j = static_cast<std::size_t>(stream.below(n - 1));
    if (j >= i) ++j;
    for (double lambda : a.lambdas) {
      const auto rep = combination::check_margin(ckpt.disc, dataset.images[i], dataset.images[j],
                                                 lambda, lipschitz);
      margins << i << "," << j << "," << io::format_double(lambda) << ","
              << io::format_double(rep.f_x1) << "," << io::format_double(rep.f_x2) << ","
              << io::format_double(rep.delta) << "," << io::format_double(rep.lipschitz) << ","
              << io::format_double(rep.bound) << "," << io::format_double(rep.f_mix) << ","
              << (rep.holds ? 1 : 0) << "," << (rep.positivity_condition ? 1 : 0) << ","
              << (rep.mix_positive ? 1 : 0) << "\n";
      ++total;
      if (rep.holds) ++held;
    }
  }
  io::write_file(run.file("margins.csv"), margins.str());
  run.seal(resolved);
  std::cout << "check-theorem3: holds " << held << "/" << total
            << " (L=" << io::format_double(lipschitz) << ") -> " << run.path().string() << "\n";
  return held == total ? 0 : 3;
}

struct PlotArgs {
  detail::CommonArgs common;
  std::string in;
  std::string x_column;
  std::vector<std::string> y_columns;
  std::string name = "chart.svg";
  std::string title;
  std::string x_label;
  std::string y_label;
  bool points = false;
};

inline int cmd_plot(const PlotArgs& a, const std::string& resolved) {
  const auto table = io::read_csv(a.in);
  if (table.rows.empty()) throw std::invalid_argument("plot: input has no data rows");
  const int xc = a.x_column.empty() ? 0 : table.column(a.x_column);
  std::vector<int> ycs;
  if (a.y_columns.empty()) {
    for (std::size_t c = 0; c < table.header.size(); ++c)
      if (static_cast<int>(c) != xc) ycs.push_back(static_cast<int>(c));
  } else {
    for (const auto& name : a.y_columns) ycs.push_back(table.column(name));
  }
  std::vector<svg::Series> series;
  for (int yc : ycs) {
    svg::Series s;
    s.label = table.header[yc];
    s.points_only = a.points;
    for (const auto& row : table.rows) {
      if (static_cast<std::size_t>(xc) >= row.size() || static_cast<std::size_t>(yc) >= row.size())
        continue;
      s.x.push_back(row[xc]);
      s.y.push_back(row[yc]);
    }
    series.push_back(std::move(s));
  }
  const std::string chart = svg::render_chart(
      series, a.title, a.x_label.empty() ? table.header[xc] : a.x_label, a.y_label);
  detail::RunDir run(a.common.out);
  io::write_file(run.file(a.name), chart);
  run.seal(resolved);
  std::cout << "plot: " << series.size() << " series -> " << (run.path() / a.name).string()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Top-level dispatch
// ---------------------------------------------------------------------------

inline int run_command(const std::vector<std::string>& args) {
  CLI::App app{"ganlab: GAN failure-mode experiments on synthetic rectangle data"};
  app.require_subcommand(0, 1);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Integrate one linear-WGAN parameter path");
  detail::add_common(sim_cmd, sim.common);
  sim_cmd->add_option("--schedule", sim.schedule, "constant | vanishing")->capture_default_str();
  sim_cmd->add_option("--c", sim.c, "Constant schedule rate")->capture_default_str();
  sim_cmd->add_option("--d", sim.d, "Parameter dimension")->capture_default_str();
  sim_cmd->add_option("--m", sim.m, "Batchsize (integer or inf)")->capture_default_str();
  sim_cmd->add_option("--dt", sim.dt, "Integration step")->required();
  sim_cmd->add_option("--t-end", sim.t_end, "End time")->required();
  sim_cmd->add_option("--w0", sim.w0, "Initial w (comma list)")->delimiter(',');
  sim_cmd->add_option("--theta0", sim.theta0, "Initial theta (comma list)")->delimiter(',');
  sim_cmd->add_option("--record-stride", sim.record_stride, "Record every k-th step")
      ->capture_default_str();

  VarianceSweepArgs sweep;
  auto* sweep_cmd =
      app.add_subcommand("variance-sweep", "Monte Carlo variance across batchsizes");
  detail::add_common(sweep_cmd, sweep.common);
  sweep_cmd->add_option("--schedule", sweep.schedule, "constant | vanishing")
      ->capture_default_str();
  sweep_cmd->add_option("--c", sweep.c, "Constant schedule rate")->capture_default_str();
  sweep_cmd->add_option("--d", sweep.d, "Parameter dimension")->capture_default_str();
  sweep_cmd->add_option("--m", sweep.m_values, "Batchsizes (comma list)")
      ->delimiter(',')
      ->required();
  sweep_cmd->add_option("--paths", sweep.paths, "Paths per batchsize")->required();
  sweep_cmd->add_option("--t", sweep.t_eval, "Evaluation time")->required();
  sweep_cmd->add_option("--dt", sweep.dt, "Integration step")->required();
  sweep_cmd->add_option("--component", sweep.component, "Theta component (1-based)")
      ->capture_default_str();
  sweep_cmd->add_option("--sigma-reading", sweep.sigma_reading,
                        "Vanishing-oracle diffusion entry: per-step | final-time")
      ->capture_default_str();

  GenGeometryArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-geometry", "Generate a rectangle image dataset");
  detail::add_common(gen_cmd, gen.common);
  gen_cmd->add_option("--mode", gen.mode, "paired | plain")->capture_default_str();
  gen_cmd->add_option("--n-base", gen.n_base, "Paired mode: number of 3-rect base images")
      ->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Plain mode: number of images")
      ->capture_default_str();
  gen_cmd->add_option("--rects", gen.rects, "Plain mode: rectangles per image")
      ->capture_default_str();

  TrainGanArgs train;
  auto* train_cmd = app.add_subcommand("train-gan", "Train the tiny GAN on a dataset");
  detail::add_common(train_cmd, train.common);
  train_cmd->add_option("--data", train.data, "Dataset directory")->required();
  train_cmd->add_option("--regime", train.regime, "vanilla | fgd | sc | pcr | sc-pcr")
      ->capture_default_str();
  train_cmd->add_option("--batchsize", train.batchsize, "Batch size (integer or full)")
      ->capture_default_str();
  train_cmd->add_option("--steps", train.steps, "Generator updates")->required();
  train_cmd->add_option("--d-steps", train.d_steps, "Discriminator updates per generator update")
      ->capture_default_str();
  train_cmd->add_option("--optimizer", train.optimizer, "sgd | adam")->capture_default_str();
  train_cmd->add_option("--lr", train.lr, "SGD learning rate")->capture_default_str();
  train_cmd->add_option("--alpha", train.alpha, "Adam step size")->capture_default_str();
  train_cmd->add_option("--beta1", train.beta1, "Adam beta1")->capture_default_str();
  train_cmd->add_option("--beta2", train.beta2, "Adam beta2")->capture_default_str();
  train_cmd->add_option("--sc-mode", train.sc_mode, "count | dif")->capture_default_str();
  train_cmd->add_option("--sc-target", train.sc_target,
                        "Count filter target (-1: dataset target)")
      ->capture_default_str();
  train_cmd->add_option("--sc-threshold", train.sc_threshold, "Dif filter threshold")
      ->capture_default_str();
  train_cmd->add_option("--pcr-op", train.pcr_op, "average | and | or")->capture_default_str();
  train_cmd->add_option("--prior", train.prior, "discrete | gaussian")->capture_default_str();
  train_cmd->add_option("--latent-dim", train.latent_dim, "Latent dimension")
      ->capture_default_str();
  train_cmd->add_option("--g-hidden", train.g_hidden, "Generator hidden sizes")
      ->delimiter(',')
      ->capture_default_str();
  train_cmd->add_option("--d-hidden", train.d_hidden, "Discriminator hidden sizes")
      ->delimiter(',')
      ->capture_default_str();
  train_cmd->add_option("--log-stride", train.log_stride, "Log every k-th generator step")
      ->capture_default_str();
  train_cmd->add_option("--probes", train.probes, "Fixed probe latent codes")
      ->capture_default_str();
  train_cmd->add_option("--eval-fakes", train.eval_fakes, "Generated samples per metric log")
      ->capture_default_str();
  train_cmd->add_option("--eval-reals", train.eval_reals, "Dataset rows per score log")
      ->capture_default_str();
  train_cmd->add_option("--eval-dif", train.eval_dif, "Samples entering mean_dif")
      ->capture_default_str();
  train_cmd->add_flag("--emit-probes", train.emit_probes, "Write probe images per log point");

  EvalCombosArgs eval;
  auto* eval_cmd =
      app.add_subcommand("eval-combos", "Score combination images and generation quality");
  detail::add_common(eval_cmd, eval.common);
  eval_cmd->add_option("--data", eval.data, "Dataset directory")->required();
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--ops", eval.ops, "Combination ops (comma list)")
      ->delimiter(',')
      ->capture_default_str();
  eval_cmd->add_option("--max-pairs", eval.max_pairs, "Combination pairs per op")
      ->capture_default_str();
  eval_cmd->add_option("--n-gen", eval.n_gen, "Generated samples (0: 100x dataset)")
      ->capture_default_str();
  eval_cmd->add_flag("--emit-images", eval.emit_images, "Write combination images");

  CheckTheorem3Args thm3;
  auto* thm3_cmd =
      app.add_subcommand("check-theorem3", "Verify the Lipschitz mixture bound on a checkpoint");
  detail::add_common(thm3_cmd, thm3.common);
  thm3_cmd->add_option("--data", thm3.data, "Dataset directory")->required();
  thm3_cmd->add_option("--checkpoint", thm3.checkpoint, "Checkpoint file")->required();
  thm3_cmd->add_option("--pairs", thm3.pairs, "Sampled training pairs")->capture_default_str();
  thm3_cmd->add_option("--lambdas", thm3.lambdas, "Mixture coefficients (comma list)")
      ->delimiter(',')
      ->capture_default_str();

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot", "Render a CSV into a standalone SVG chart");
  detail::add_common(plot_cmd, plot.common);
  plot_cmd->add_option("--in", plot.in, "Input CSV")->required();
  plot_cmd->add_option("--x", plot.x_column, "X column name (default: first column)");
  plot_cmd->add_option("--y", plot.y_columns, "Y column names (default: all others)")
      ->delimiter(',');
  plot_cmd->add_option("--name", plot.name, "Output file name")->capture_default_str();
  plot_cmd->add_option("--title", plot.title, "Chart title");
  plot_cmd->add_option("--x-label", plot.x_label, "X axis label");
  plot_cmd->add_option("--y-label", plot.y_label, "Y axis label");
  plot_cmd->add_flag("--points", plot.points, "Scatter instead of lines");

  std::vector<std::string> expanded;
  try {
    expanded = detail::expand_config(args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << detail::one_line(e.what()) << "\n";
    return 2;
  }
  std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << detail::one_line(e.what()) << "\n";
    if (app.get_subcommands().empty()) std::cerr << app.help();
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }

  try {
    if (sim_cmd->parsed()) return cmd_simulate(sim, detail::resolved_config_of(sim_cmd));
    if (sweep_cmd->parsed())
      return cmd_variance_sweep(sweep, detail::resolved_config_of(sweep_cmd));
    if (gen_cmd->parsed()) return cmd_gen_geometry(gen, detail::resolved_config_of(gen_cmd));
    if (train_cmd->parsed()) return cmd_train_gan(train, detail::resolved_config_of(train_cmd));
    if (eval_cmd->parsed()) return cmd_eval_combos(eval, detail::resolved_config_of(eval_cmd));
    if (thm3_cmd->parsed())
      return cmd_check_theorem3(thm3, detail::resolved_config_of(thm3_cmd));
    if (plot_cmd->parsed()) return cmd_plot(plot, detail::resolved_config_of(plot_cmd));
  } catch (const std::exception& e) {
    std::cerr << "error: " << detail::one_line(e.what()) << "\n";
    return 1;
  }
  std::cerr << app.help();
  return 64;
}

inline int run_command(int argc, char** argv) {
  std::vector<std::string> args;
  args.reserve(argc > 0 ? argc - 1 : 0);
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_command(args);
}

}  // namespace ganlab::cli
