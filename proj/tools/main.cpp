#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ltpnet/errors.hpp"
#include "ltpnet/harness.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitFailure = 2;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string config;
};

ltpnet::ExperimentSpec spec_from(const Globals& g) {
  if (g.config.empty()) throw ltpnet::ConfigError("--config <spec.json> is required");
  auto spec = ltpnet::load_spec(g.config);
  if (g.seed) spec.seeds = ltpnet::Seeds::from_base(*g.seed);
  if (!g.out_dir.empty()) spec.output_dir = g.out_dir;
  return spec;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void print_eval(const ltpnet::EvalReport& e) {
  std::cout << "MAE " << fmt(e.mae) << "  MAPE " << (e.mape ? fmt(*e.mape) + "%" : std::string("n/a")) << "  RMSE "
            << fmt(e.rmse) << "  MSE " << fmt(e.mse) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSTM-Transformer forecaster with PSO hyperparameter search", "ltpnet"};
  app.set_version_flag("--version", ltpnet::artifact_version());
  app.fallthrough();
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Base seed (data s, init s+1, shuffle s+2, swarm s+3)");
  app.add_option("--out-dir", g.out_dir, "Output directory (overrides the spec)");
  app.add_option("--config", g.config, "Experiment spec JSON file");

  auto* run = app.add_subcommand("run", "Run one experiment from a spec file");
  auto* ablate = app.add_subcommand("ablate", "Run the four-variant ablation suite");
  auto* compare = app.add_subcommand("compare-optimizers", "Compare Adam, adaptive momentum and SGD with PSO search");

  auto* study = app.add_subcommand("pso-study", "Repeated PSO runs with static and dynamic inertia");
  ltpnet::PsoStudySpec study_spec;
  std::optional<double> bound;
  study->add_option("--objective", study_spec.objective, "sphere or rastrigin")->capture_default_str();
  study->add_option("--runs", study_spec.runs, "Runs per configuration")->capture_default_str();
  study->add_option("--dimension", study_spec.dimension, "Search-space dimension")->capture_default_str();
  study->add_option("--bound", bound, "Symmetric coordinate bound (default 5, or 5.12 for rastrigin)");
  study->add_option("--particles", study_spec.swarm.particles)->capture_default_str();
  study->add_option("--iterations", study_spec.swarm.iterations)->capture_default_str();
  study->add_option("--inertia", study_spec.swarm.inertia, "Inertia of the static configuration")
      ->capture_default_str();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the composed model's gradients");
  std::size_t grad_seeds = 20;
  gradcheck->add_option("--seeds", grad_seeds, "Random models to check")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Write a synthetic series as CSV");
  ltpnet::SyntheticSpec synth_spec;
  std::string synth_file = "synthetic.csv";
  synth->add_option("--length", synth_spec.length)->capture_default_str();
  synth->add_option("--features", synth_spec.feature_count, "Extra feature columns")->capture_default_str();
  synth->add_option("--period", synth_spec.period)->capture_default_str();
  synth->add_option("--trend", synth_spec.trend_slope)->capture_default_str();
  synth->add_option("--noise", synth_spec.noise_std)->capture_default_str();
  synth->add_option("--amplitude", synth_spec.amplitude)->capture_default_str();
  synth->add_option("--file", synth_file, "File name inside --out-dir")->capture_default_str();

  if (argc < 2) {
    std::cout << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run) {
      const auto spec = spec_from(g);
      const auto r = ltpnet::run_experiment(spec);
      std::cout << spec.name << " (" << ltpnet::to_string(spec.variant) << ", " << ltpnet::to_string(spec.optimizer)
                << ")\n";
      print_eval(r.eval);
      std::cout << "parameters " << r.efficiency.parameters << "  flops " << r.efficiency.flops << "  epochs "
                << r.train.stopped_epoch << "\nreports written to " << spec.output_dir.string() << "\n";
    } else if (*ablate) {
      const auto spec = spec_from(g);
      const auto res = ltpnet::run_ablation_suite(spec);
      std::cout << ltpnet::metrics_table_csv(res.table);
    } else if (*compare) {
      const auto spec = spec_from(g);
      const auto res = ltpnet::run_optimizer_comparison(spec);
      std::cout << ltpnet::comparison_table_csv(res.table);
    } else if (*study) {
      study_spec.bound = bound;
      if (g.seed) study_spec.base_seed = *g.seed;
      study_spec.output_dir = g.out_dir.empty() ? std::string("pso_study") : g.out_dir;
      const auto res = ltpnet::run_pso_distribution_study(study_spec);
      std::cout << "config,mean,median,std\n";
      for (const auto& s : res) std::cout << s.config << "," << fmt(s.mean) << "," << fmt(s.median) << "," << fmt(s.std) << "\n";
    } else if (*gradcheck) {
      const auto res = ltpnet::run_gradient_check(grad_seeds);
      std::cout << "checked " << res.checked_entries << " entries over " << res.seeds << " seeds\n"
                << "max relative error " << fmt(res.max_relative_error) << "\n";
      if (!(res.max_relative_error < 1e-4)) {
        std::cerr << "gradient check failed: max relative error is not below 1e-4\n";
        return kExitFailure;
      }
    } else if (*synth) {
      if (g.seed) synth_spec.seed = *g.seed;
      const std::filesystem::path dir = g.out_dir.empty() ? std::string(".") : g.out_dir;
      std::filesystem::create_directories(dir);
      ltpnet::write_csv(ltpnet::synthesize_series(synth_spec), dir / synth_file);
      std::cout << "wrote " << (dir / synth_file).string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return 0;
}
