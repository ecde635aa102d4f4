// Command-line front end: generate synthetic datasets, fit mixtures,
// evaluate L1 error, and sweep sample-size curves. All randomness flows
// from --seed; every command echoes a run_spec JSON that reproduces it.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sphmix/cluster.hpp"
#include "sphmix/distance.hpp"
#include "sphmix/estimator.hpp"
#include "sphmix/io.hpp"
#include "sphmix/linalg.hpp"
#include "sphmix/model.hpp"
#include "sphmix/rng.hpp"
#include "sphmix/threads.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitOverflow = 3;
constexpr int kExitNonConvergence = 4;

struct FitFlags {
  std::size_t k = 1;
  double eps = 0.1;
  double delta = 0.05;
  std::uint64_t seed = 1;
  double grid_scale = 1.0;
  double weight_grid_scale = 1.0;
  std::size_t max_candidates = 0;
  std::size_t sigma_grid = 0;
  bool adaptive_span = false;
  double span_slack = 2.0;
  std::size_t scheffe_mc = 0;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--k", f.k, "Number of mixture components");
  cmd->add_option("--eps", f.eps, "Target L1 accuracy in (0,1)");
  cmd->add_option("--delta", f.delta, "Failure probability in (0,1)");
  cmd->add_option("--seed", f.seed, "Root seed for all derived randomness");
  cmd->add_option("--grid-scale", f.grid_scale,
                  "Mean-grid spacing multiplier (>= 1; 1 = reference grid)");
  cmd->add_option("--weight-grid-scale", f.weight_grid_scale,
                  "Weight-grid spacing multiplier (>= 1)");
  cmd->add_option("--max-candidates", f.max_candidates,
                  "Candidate-count guardrail (0 = unbounded)");
  cmd->add_option("--sigma-grid", f.sigma_grid,
                  "Variance grid size (0 = full 2d grid)");
  cmd->add_flag("--adaptive-span", f.adaptive_span,
                "Size span grids from observed projections, not the "
                "theoretical radius");
  cmd->add_option("--span-slack", f.span_slack,
                  "Extra span radius in sigma units (adaptive mode)");
  cmd->add_option("--scheffe-mc", f.scheffe_mc,
                  "Fresh draws per candidate per game (0 = #data rows)");
}

sphmix::EstimatorConfig to_config(const FitFlags& f) {
  sphmix::EstimatorConfig cfg;
  cfg.k = f.k;
  cfg.eps = f.eps;
  cfg.delta = f.delta;
  cfg.seed = f.seed;
  cfg.grid_scale = f.grid_scale;
  cfg.weight_grid_scale = f.weight_grid_scale;
  cfg.max_candidates = f.max_candidates;
  cfg.sigma_grid_size = f.sigma_grid;
  cfg.adaptive_span_radius = f.adaptive_span;
  cfg.span_radius_slack = f.span_slack;
  cfg.scheffe_n_mc = f.scheffe_mc;
  return cfg;
}

json config_echo(const sphmix::EstimatorConfig& cfg) {
  return json{{"k", cfg.k},
              {"eps", cfg.eps},
              {"delta", cfg.delta},
              {"seed", cfg.seed},
              {"grid_scale", cfg.grid_scale},
              {"weight_grid_scale", cfg.weight_grid_scale},
              {"max_candidates", cfg.max_candidates},
              {"sigma_grid_size", cfg.sigma_grid_size},
              {"adaptive_span_radius", cfg.adaptive_span_radius},
              {"span_radius_slack", cfg.span_radius_slack},
              {"scheffe_n_mc", cfg.scheffe_n_mc}};
}

sphmix::Mixture load_mixture(const std::string& path) {
  return sphmix::mixture_from_json(sphmix::read_file(path));
}

// Loads a dataset CSV plus its sidecar (path + ".json") when present;
// returns the recorded true mixture if the sidecar has one.
std::optional<sphmix::Mixture> load_dataset(const std::string& path,
                                            sphmix::Dataset& data) {
  data = sphmix::dataset_from_csv(sphmix::read_file(path));
  const std::string sidecar = path + ".json";
  if (std::filesystem::exists(sidecar)) {
    return sphmix::apply_sidecar(sphmix::read_file(sidecar), data);
  }
  return std::nullopt;
}

void write_audit(const std::string& path,
                 const std::vector<sphmix::GameRecord>& audit) {
  std::string lines;
  for (const sphmix::GameRecord& rec : audit) {
    lines += sphmix::game_record_to_json(rec);
    lines += '\n';
  }
  sphmix::write_file(path, lines);
}

// Re-derives the clustering the fit pipeline computed (same stages, same
// seed derivation chain, so the result is identical) and writes it out.
void dump_clusters(const std::string& path, const sphmix::Dataset& data,
                   const sphmix::EstimatorConfig& cfg) {
  const double s2 = sphmix::estimate_variance(data, cfg.k);
  const sphmix::Thresholds th = sphmix::compute_thresholds(
      data.n, data.d, cfg.k, cfg.eps, cfg.delta, s2);
  const sphmix::Clustering coarse = sphmix::coarse_single_linkage(data, th);
  const sphmix::Clustering refined = sphmix::recursive_spectral_cluster(
      data, coarse, th, cfg.k, cfg.eps,
      sphmix::derive_stream(cfg.seed, "recluster"));
  sphmix::write_file(path, sphmix::clustering_to_json(refined));
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string mixture_path;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  std::string out;
};

int run_gen(const GenArgs& a) {
  const sphmix::Mixture truth = load_mixture(a.mixture_path);
  if (a.n == 0) {
    throw std::invalid_argument("gen: --n must be positive");
  }
  sphmix::Dataset data = truth.sample(a.n, a.seed);
  sphmix::write_file(a.out, sphmix::dataset_to_csv(data));
  const std::string sidecar = a.out + ".json";
  sphmix::write_file(sidecar, sphmix::sidecar_to_json(data, &truth));

  std::vector<std::size_t> label_counts(truth.k(), 0);
  for (const int l : data.labels) ++label_counts[static_cast<std::size_t>(l)];
  json out{{"run_spec",
            {{"command", "gen"},
             {"mixture", a.mixture_path},
             {"n", a.n},
             {"seed", a.seed},
             {"out", a.out}}},
           {"n", data.n},
           {"d", data.d},
           {"csv", a.out},
           {"sidecar", sidecar},
           {"label_counts", label_counts}};
  std::cout << out.dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string data_path;
  std::string out;
  std::string report_path;
  std::string audit_path;
  std::string clusters_path;
  std::size_t mc_samples = 200000;
  FitFlags flags;
};

int run_fit(const FitArgs& a, bool one_dimensional) {
  sphmix::Dataset data;
  const std::optional<sphmix::Mixture> truth = load_dataset(a.data_path, data);
  sphmix::EstimatorConfig cfg = to_config(a.flags);
  cfg.collect_audit = !a.audit_path.empty();

  sphmix::LearnResult res = [&] {
    if (!one_dimensional) return sphmix::learn_k_sphere(data, cfg);
    if (data.d != 1) {
      throw std::invalid_argument("fit1d: dataset must have d = 1");
    }
    return sphmix::learn_1d(data.samples, cfg);
  }();

  sphmix::write_file(a.out, sphmix::mixture_to_json(res.mixture));
  if (!a.audit_path.empty()) write_audit(a.audit_path, res.report.audit);
  if (!a.clusters_path.empty()) {
    if (one_dimensional) {
      throw std::invalid_argument("--dump-clusters applies to fit only");
    }
    dump_clusters(a.clusters_path, data, cfg);
  }

  json report = json::parse(sphmix::learn_report_to_json(res.report));
  report["run_spec"] = config_echo(cfg);
  report["run_spec"]["command"] = one_dimensional ? "fit1d" : "fit";
  report["run_spec"]["data"] = a.data_path;
  report["run_spec"]["out"] = a.out;
  report["run_spec"]["mc_samples"] = a.mc_samples;
  if (truth && truth->dim() == res.mixture.dim()) {
    if (one_dimensional) {
      const double v = sphmix::l1_quadrature_1d(*truth, res.mixture);
      report["l1_estimate"] = {{"value", v}, {"std_error", 0.0}, {"n_mc", 0}};
    } else {
      const sphmix::L1Estimate e =
          sphmix::l1_mc(*truth, res.mixture, a.mc_samples,
                        sphmix::derive_stream(cfg.seed, "l1-estimate"));
      report["l1_estimate"] = {{"value", e.value},
                               {"std_error", e.std_error},
                               {"n_mc", e.n_mc}};
    }
  }
  if (!a.report_path.empty()) sphmix::write_file(a.report_path, report.dump());
  std::cout << report.dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string f_path;
  std::string g_path;
  bool exact = false;
  std::size_t mc_samples = 200000;
  std::uint64_t seed = 1;
};

int run_eval(const EvalArgs& a) {
  const sphmix::Mixture f = load_mixture(a.f_path);
  const sphmix::Mixture g = load_mixture(a.g_path);
  if (f.dim() != g.dim()) {
    throw std::invalid_argument("eval: mixtures have different dimensions");
  }
  json out{{"run_spec",
            {{"command", "eval"},
             {"f", a.f_path},
             {"g", a.g_path},
             {"exact", a.exact},
             {"mc_samples", a.mc_samples},
             {"seed", a.seed}}}};
  if (a.exact) {
    if (f.dim() != 1) {
      throw std::invalid_argument("eval: --exact requires 1-D mixtures");
    }
    out["value"] = sphmix::l1_quadrature_1d(f, g);
    out["std_error"] = 0.0;
    out["n_mc"] = 0;
  } else {
    const sphmix::L1Estimate e = sphmix::l1_mc(f, g, a.mc_samples, a.seed);
    out["value"] = e.value;
    out["std_error"] = e.std_error;
    out["n_mc"] = e.n_mc;
  }
  std::cout << out.dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string mixture_path;
  std::vector<std::size_t> n_grid;
  std::size_t reps = 1;
  bool one_dimensional = false;
  bool exact = false;
  std::size_t mc_samples = 200000;
  std::string out;
  FitFlags flags;
};

struct CellResult {
  bool ok = false;
  double l1 = 0.0;
  double wall_ms = 0.0;
  std::string error;
};

double sorted_quartile(const std::vector<double>& v, int which) {
  const std::size_t m = v.size();
  if (which == 1) return v[(m - 1) / 4];
  if (which == 3) return v[(3 * (m - 1)) / 4];
  return (v[(m - 1) / 2] + v[m / 2]) / 2.0;  // median
}

int run_sweep(const SweepArgs& a) {
  for (std::size_t i = 1; i < a.n_grid.size(); ++i) {
    if (a.n_grid[i] <= a.n_grid[i - 1]) {
      throw std::invalid_argument("sweep: --n grid must be strictly "
                                  "increasing");
    }
  }
  if (a.n_grid.empty()) {
    throw std::invalid_argument("sweep: --n grid must be nonempty");
  }
  if (a.reps == 0) throw std::invalid_argument("sweep: --reps must be >= 1");
  const sphmix::Mixture truth = load_mixture(a.mixture_path);

  const std::size_t n_cells = a.n_grid.size() * a.reps;
  std::vector<CellResult> cells(n_cells);
  sphmix::parallel_for(n_cells, [&](std::size_t cell) {
    CellResult& r = cells[cell];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const std::size_t n = a.n_grid[cell / a.reps];
      const std::uint64_t cell_seed =
          sphmix::derive_stream(a.flags.seed, "sweep", cell);
      const sphmix::Dataset data =
          truth.sample(n, sphmix::derive_stream(cell_seed, "data"));
      sphmix::EstimatorConfig cfg = to_config(a.flags);
      cfg.seed = sphmix::derive_stream(cell_seed, "fit");
      const sphmix::LearnResult res =
          a.one_dimensional ? sphmix::learn_1d(data.samples, cfg)
                            : sphmix::learn_k_sphere(data, cfg);
      if (a.exact && truth.dim() == 1) {
        r.l1 = sphmix::l1_quadrature_1d(truth, res.mixture);
      } else {
        r.l1 = sphmix::l1_mc(truth, res.mixture, a.mc_samples,
                             sphmix::derive_stream(cell_seed, "eval"))
                   .value;
      }
      r.ok = true;
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
    r.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  });

  std::string csv = "n,reps,failed,l1_q1,l1_median,l1_q3,wall_ms_median\n";
  std::size_t n_failed_total = 0;
  for (std::size_t gi = 0; gi < a.n_grid.size(); ++gi) {
    std::vector<double> l1s;
    std::vector<double> walls;
    std::size_t failed = 0;
    for (std::size_t rep = 0; rep < a.reps; ++rep) {
      const CellResult& r = cells[gi * a.reps + rep];
      walls.push_back(r.wall_ms);
      if (r.ok) {
        l1s.push_back(r.l1);
      } else {
        ++failed;
      }
    }
    n_failed_total += failed;
    std::sort(l1s.begin(), l1s.end());
    std::sort(walls.begin(), walls.end());
    char row[256];
    if (l1s.empty()) {
      std::snprintf(row, sizeof(row), "%zu,%zu,%zu,nan,nan,nan,%.3f\n",
                    a.n_grid[gi], a.reps, failed, sorted_quartile(walls, 2));
    } else {
      std::snprintf(row, sizeof(row), "%zu,%zu,%zu,%.6g,%.6g,%.6g,%.3f\n",
                    a.n_grid[gi], a.reps, failed, sorted_quartile(l1s, 1),
                    sorted_quartile(l1s, 2), sorted_quartile(l1s, 3),
                    sorted_quartile(walls, 2));
    }
    csv += row;
  }
  sphmix::write_file(a.out, csv);

  json out{{"run_spec",
            {{"command", "sweep"},
             {"mixture", a.mixture_path},
             {"n_grid", a.n_grid},
             {"reps", a.reps},
             {"fit1d", a.one_dimensional},
             {"exact", a.exact},
             {"mc_samples", a.mc_samples},
             {"out", a.out},
             {"config", config_echo(to_config(a.flags))}}},
           {"cells", n_cells},
           {"failed", n_failed_total},
           {"threads", sphmix::thread_budget()},
           {"csv", a.out}};
  std::cout << out.dump() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spherical Gaussian mixture learning toolkit"};
  app.require_subcommand(1);

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "Sample a dataset from a mixture");
  gen->add_option("--mixture", gen_args.mixture_path, "Mixture JSON path")
      ->required();
  gen->add_option("--n", gen_args.n, "Number of samples")->required();
  gen->add_option("--seed", gen_args.seed, "Sampling seed");
  gen->add_option("--out", gen_args.out, "Output CSV path (sidecar: +.json)")
      ->required();

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand(
      "fit", "Fit a k-component spherical mixture to a dataset");
  fit->add_option("--data", fit_args.data_path, "Dataset CSV path")
      ->required();
  fit->add_option("--out", fit_args.out, "Winner mixture JSON path")
      ->required();
  fit->add_option("--report", fit_args.report_path, "Report JSON path");
  fit->add_option("--audit", fit_args.audit_path, "Game audit JSONL path");
  fit->add_option("--dump-clusters", fit_args.clusters_path,
                  "Clustering JSON path");
  fit->add_option("--mc-samples", fit_args.mc_samples,
                  "Monte-Carlo draws for the reported L1 estimate");
  add_fit_flags(fit, fit_args.flags);

  FitArgs fit1d_args;
  CLI::App* fit1d = app.add_subcommand(
      "fit1d", "Fit a k-component Gaussian mixture to 1-D data");
  fit1d->add_option("--data", fit1d_args.data_path, "Dataset CSV path")
      ->required();
  fit1d->add_option("--out", fit1d_args.out, "Winner mixture JSON path")
      ->required();
  fit1d->add_option("--report", fit1d_args.report_path, "Report JSON path");
  fit1d->add_option("--audit", fit1d_args.audit_path, "Game audit JSONL path");
  fit1d->add_option("--mc-samples", fit1d_args.mc_samples,
                    "Monte-Carlo draws for the reported L1 estimate");
  add_fit_flags(fit1d, fit1d_args.flags);

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "L1 distance between mixtures");
  eval->add_option("--f", eval_args.f_path, "First mixture JSON")->required();
  eval->add_option("--g", eval_args.g_path, "Second mixture JSON")->required();
  eval->add_flag("--exact", eval_args.exact, "1-D adaptive quadrature");
  eval->add_option("--mc-samples", eval_args.mc_samples, "Monte-Carlo draws");
  eval->add_option("--seed", eval_args.seed, "Monte-Carlo seed");

  SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Fit/eval over a grid of sample sizes");
  sweep->add_option("--mixture", sweep_args.mixture_path,
                    "Scenario mixture JSON")
      ->required();
  sweep->add_option("--n", sweep_args.n_grid,
                    "Sample sizes (strictly increasing)")
      ->required()
      ->delimiter(',');
  sweep->add_option("--reps", sweep_args.reps, "Repetitions per size");
  sweep->add_flag("--fit1d", sweep_args.one_dimensional,
                  "Use the 1-D pipeline");
  sweep->add_flag("--exact", sweep_args.exact,
                  "Quadrature L1 (1-D scenarios)");
  sweep->add_option("--mc-samples", sweep_args.mc_samples,
                    "Monte-Carlo draws per cell evaluation");
  sweep->add_option("--out", sweep_args.out, "Output CSV path")->required();
  add_fit_flags(sweep, sweep_args.flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (gen->parsed()) return run_gen(gen_args);
    if (fit->parsed()) return run_fit(fit_args, false);
    if (fit1d->parsed()) return run_fit(fit1d_args, true);
    if (eval->parsed()) return run_eval(eval_args);
    if (sweep->parsed()) return run_sweep(sweep_args);
    std::cerr << json{{"error", "bad_input"}, {"message", "no subcommand"}}
                     .dump()
              << "\n";
    return kExitBadInput;
  } catch (const sphmix::CandidateOverflowError& e) {
    std::cerr << json{{"error", "candidate_overflow"},
                      {"count", e.count()},
                      {"message", e.what()}}
                     .dump()
              << "\n";
    return kExitOverflow;
  } catch (const sphmix::NonConvergenceError& e) {
    std::cerr << json{{"error", "non_convergence"}, {"message", e.what()}}
                     .dump()
              << "\n";
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "bad_input"}, {"message", e.what()}}.dump()
              << "\n";
    return kExitBadInput;
  }
}
