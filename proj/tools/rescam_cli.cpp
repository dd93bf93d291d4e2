#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "rescam/rescam.hpp"

namespace fs = std::filesystem;
using namespace rescam;

namespace {

struct Overrides {
  std::string config;
  std::string method;
  std::string channel;
  std::optional<int> J, G, n_lists, iterations, burn_in;
  std::optional<double> distance_mean;
  bool objects = false;
  bool no_objects = false;

  void add_to(CLI::App* app) {
    app->add_option("-c,--config", config, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--method", method, "Baseline | MI | CLM | CLM+MI | TRUEWORDS");
    app->add_option("--channel", channel, "noiseless | low | default");
    app->add_option("--J", J, "candidate reference objects per scene");
    app->add_option("--G", G, "outer iterations");
    app->add_option("--lists", n_lists, "candidate lists per iteration");
    app->add_option("--iterations", iterations, "concept-learning sweeps");
    app->add_option("--burn-in", burn_in, "concept-learning burn-in sweeps");
    app->add_option("--distance-mean", distance_mean, "mean trainer-reference distance");
    app->add_flag("--objects", objects, "object words in utterances and the object-clue learner");
    app->add_flag("--no-objects", no_objects, "location-only learner");
  }

  RunConfig build() const {
    RunConfig cfg;
    Json j = config.empty() ? Json::object() : read_json_file(config);
    if (!method.empty()) j["method"] = method;
    if (!channel.empty()) j["channel"] = channel;
    if (J) j["J"] = *J;
    if (G) j["G"] = *G;
    if (n_lists) j["n_lists"] = *n_lists;
    if (iterations) j["iterations"] = *iterations;
    if (burn_in) j["burn_in"] = *burn_in;
    if (distance_mean) j["distance_mean"] = *distance_mean;
    if (objects) j["objects"] = true;
    if (no_objects) j["objects"] = false;
    from_json_into(j, cfg);
    cfg.validate();
    return cfg;
  }
};

PhonemeInventory load_inventory(const std::string& path) {
  return path.empty() ? PhonemeInventory() : PhonemeInventory::load(path);
}

void write_manifest(const fs::path& dir, const Json& config, const std::vector<TrialResult>& rows, double wall_ms,
                    const std::string& command) {
  double trial_ms = 0.0;
  for (const auto& r : rows) trial_ms += r.wall_ms;
  Json m = {{"command", command},
            {"version", RESCAM_VERSION},
            {"compiler", __VERSION__},
            {"config_hash", hex64(config_hash(config))},
            {"config", config},
            {"trials", rows.size()},
            {"failed", std::count_if(rows.begin(), rows.end(), [](const TrialResult& r) { return !r.error.empty(); })},
            {"wall_ms", wall_ms},
            {"trial_ms_total", trial_ms}};
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

std::vector<std::uint64_t> seed_list(const std::vector<std::uint64_t>& seeds, int trials, std::uint64_t first) {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out;
  for (int i = 0; i < trials; ++i) out.push_back(first + static_cast<std::uint64_t>(i));
  return out;
}

int cmd_simulate(const Overrides& ov, std::uint64_t seed, const std::string& out, const std::string& inv_path) {
  const RunConfig cfg = ov.build();
  const auto inv = load_inventory(inv_path);
  Rng rng(mix_seed(seed, 0xDA7AULL));
  const auto scenes = generate_scenes(cfg.sim, inv, rng);
  std::string lines;
  for (const auto& s : scenes) lines += to_json(s, inv).dump() + "\n";
  if (out.empty() || out == "-") {
    std::cout << lines;
  } else {
    fs::create_directories(fs::path(out).parent_path().empty() ? fs::path(".") : fs::path(out).parent_path());
    write_text(out, lines);
  }
  return 0;
}

int cmd_run(const Overrides& ov, const std::vector<std::uint64_t>& seeds, const std::string& out,
            const std::string& inv_path, unsigned workers) {
  const RunConfig cfg = ov.build();
  const auto inv = load_inventory(inv_path);
  const fs::path dir(out);
  fs::create_directories(dir);
  const auto t0 = std::chrono::steady_clock::now();
  std::function<TrialResult(const std::uint64_t&)> fn = [&](const std::uint64_t& seed) {
    RunArtifacts art;
    TrialResult r;
    try {
      r = run_pipeline(cfg, seed, inv, &art);
      write_artifacts(dir / ("seed-" + std::to_string(seed)), art, inv);
    } catch (const std::exception& e) {
      r.method = method_name(cfg.method);
      r.objects = cfg.objects;
      r.J = cfg.sim.J;
      r.seed = seed;
      r.error = e.what();
    }
    return r;
  };
  const auto rows = run_pool<std::uint64_t, TrialResult>(seeds, workers, fn);
  write_results_csv(dir / "results.csv", rows);
  write_timings_csv(dir / "timings.csv", rows);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(dir, to_json(cfg), rows, ms, "run");
  for (const auto& r : rows) std::cout << results_row(r) << '\n';
  return 0;
}

int cmd_experiment(const Overrides& ov, const std::string& which, const std::vector<std::uint64_t>& seeds,
                   std::vector<int> J_values, bool full, const std::string& out, const std::string& inv_path,
                   unsigned workers) {
  ExperimentConfig ex;
  ex.experiment = parse_experiment(which);
  ex.base = ov.build();
  ex.seeds = seeds;
  ex.workers = workers;
  if (full) {
    ex.J_values = {3, 5, 10, 15, 20};
    if (ex.experiment == Experiment::AppendixB) ex.J_values = {3};
  }
  if (!J_values.empty()) ex.J_values = std::move(J_values);
  const auto inv = load_inventory(inv_path);
  const fs::path dir(out);
  fs::create_directories(dir);
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = run_experiment(ex, inv);
  write_results_csv(dir / "results.csv", rows);
  write_timings_csv(dir / "timings.csv", rows);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  Json config = to_json(ex.base);
  config["experiment"] = which;
  config["seeds"] = ex.seeds;
  config["J_values"] = ex.J_values;
  write_manifest(dir, config, rows, ms, "experiment");
  std::cout << "wrote " << rows.size() << " rows to " << (dir / "results.csv").string() << '\n';
  return 0;
}

// Group means of a results.csv by every non-metric column.
int cmd_eval_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  struct Acc {
    int n = 0;
    double ari = 0, par = 0, par_o = 0, ref = 0;
  };
  std::map<std::string, Acc> groups;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() < 12) continue;
    const std::string key = f[0] + (f[1] == "1" ? "+O" : "") + " J=" + f[2] + " dist=" + f[4] + " iters=" + f[5];
    auto& a = groups[key];
    ++a.n;
    a.ari += std::stod(f[6]);
    a.par += std::stod(f[7]);
    a.par_o += std::stod(f[8]);
    a.ref += std::stod(f[9]);
  }
  std::printf("%-48s %4s %8s %8s %8s %8s\n", "cell", "n", "ARI", "PAR", "PAR_O", "refacc");
  for (const auto& [k, a] : groups)
    std::printf("%-48s %4d %8.4f %8.4f %8.4f %8.4f\n", k.c_str(), a.n, a.ari / a.n, a.par / a.n, a.par_o / a.n,
                a.ref / a.n);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised learning of relative spatial concepts from phoneme strings"};
  app.require_subcommand(1);
  std::string inv_path;
  app.add_option("--inventory", inv_path, "phoneme inventory file (one symbol per line)")->check(CLI::ExistingFile);

  auto* sim = app.add_subcommand("simulate", "generate scenes and utterances as JSON lines");
  Overrides sim_ov;
  sim_ov.add_to(sim);
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  sim->add_option("--seed", sim_seed, "random seed");
  sim->add_option("-o,--out", sim_out, "output file (default stdout)");

  auto* run = app.add_subcommand("run", "run the learning pipeline for one configuration");
  Overrides run_ov;
  run_ov.add_to(run);
  std::vector<std::uint64_t> run_seeds;
  int run_trials = 1;
  std::string run_out = "out";
  unsigned run_workers = 1;
  run->add_option("--seed", run_seeds, "seeds (repeatable)");
  run->add_option("--trials", run_trials, "number of seeds starting at 1 when --seed is absent");
  run->add_option("-o,--out", run_out, "output directory");
  run->add_option("--workers", run_workers, "parallel trials");

  auto* exp = app.add_subcommand("experiment", "run an experiment grid");
  Overrides exp_ov;
  exp_ov.add_to(exp);
  std::string which = "I";
  std::vector<std::uint64_t> exp_seeds;
  int exp_trials = 10;
  std::vector<int> J_values;
  bool full = false;
  std::string exp_out = "out";
  unsigned exp_workers = 1;
  exp->add_option("--exp", which, "I | II | B")->required();
  exp->add_option("--seed", exp_seeds, "seeds (repeatable)");
  exp->add_option("--trials", exp_trials, "trials per cell when --seed is absent");
  exp->add_option("--J-values", J_values, "candidate object counts");
  exp->add_flag("--full", full, "paper-scale grid (J in {3,5,10,15,20}, 50 trials)");
  exp->add_option("-o,--out", exp_out, "output directory");
  exp->add_option("--workers", exp_workers, "parallel trials");

  auto* ev = app.add_subcommand("eval", "summarize results or score words");
  std::string ev_results;
  std::vector<std::string> ev_par;
  ev->add_option("--results", ev_results, "results.csv to summarize")->check(CLI::ExistingFile);
  ev->add_option("--par", ev_par, "phoneme accuracy rate of a recognized word against the true word")->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*sim) return cmd_simulate(sim_ov, sim_seed, sim_out, inv_path);
    if (*run) return cmd_run(run_ov, seed_list(run_seeds, run_trials, 1), run_out, inv_path, run_workers);
    if (*exp) {
      if (full && exp_seeds.empty()) exp_trials = 50;
      return cmd_experiment(exp_ov, which, seed_list(exp_seeds, exp_trials, 1), J_values, full, exp_out, inv_path,
                            exp_workers);
    }
    if (*ev) {
      if (!ev_par.empty()) {
        const auto inv = load_inventory(inv_path);
        std::printf("%.4f\n", par(ev_par[0], ev_par[1], inv));
        return 0;
      }
      if (!ev_results.empty()) return cmd_eval_results(ev_results);
      std::cerr << "eval: give --results or --par\n";
      return 2;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
