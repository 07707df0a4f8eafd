#include "insitu/pipeline.hpp"
#include "insitu/verification.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iomanip>
#include <iostream>

namespace {

using namespace insitu;

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

RunConfig load_or_default(const std::string& path) {
  RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::load(path);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"In-situ absorption workbench: BEM simulation, dataset synthesis and a residual CNN estimator"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", INSITU_VERSION);

  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool paper_scale = false;
  bool desk_scale = false;
  app.add_option("--seed", seed, "Override every seed in the config");
  app.add_option("--threads", threads, "Worker threads (1 is bit-reproducible)")
      ->check(CLI::PositiveNumber);
  auto* paper = app.add_flag("--paper-scale", paper_scale, "530 base cases x 100 draws, 6 elements per wavelength");
  app.add_flag("--desk-scale", desk_scale, "23 base cases x 300 draws, 4 elements per wavelength (default)")
      ->excludes(paper);

  const auto cache = [] { return GreenCache::from_environment(".insitu-cache"); };

  auto* sim = app.add_subcommand("simulate", "BEM transfer function and absorption estimates for one scenario");
  std::string sim_config, sim_out = "simulate-out";
  bool rigid = false;
  sim->add_option("--config", sim_config, "Scenario config (TOML or JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", sim_out, "Output directory");
  sim->add_flag("--rigid", rigid, "Treat the sample as acoustically hard");
  sim->callback([&] {
    RunConfig cfg = RunConfig::load(sim_config);
    if (rigid) {
      if (!cfg.scenario) throw std::invalid_argument("simulate needs a [scenario] section");
      cfg.scenario->rigid = true;
      cfg.document["scenario"]["rigid"] = true;
    }
    const auto c = cache();
    const auto res = run_simulate(cfg, &c, sim_out, threads, log_line);
    std::cout << "wrote " << sim_out << "/h12.csv and " << sim_out << "/alpha.csv (max residual "
              << res.simulation.max_residual << ")\n";
  });

  auto* gen = app.add_subcommand("gen-dataset", "Synthesize a labeled train/val/test corpus");
  std::string gen_config, gen_out = "dataset";
  gen->add_option("--config", gen_config, "Dataset config (TOML or JSON)")->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "Output directory");
  gen->callback([&] {
    RunConfig cfg = load_or_default(gen_config);
    GenerationConfig g = cfg.generation;
    if (paper_scale || desk_scale) {
      const auto p = paper_scale ? GenerationConfig::paper_scale() : GenerationConfig::desk_scale();
      g.train_base_cases = p.train_base_cases;
      g.test_base_cases = p.test_base_cases;
      g.draws_per_case = p.draws_per_case;
      g.elements_per_wavelength = p.elements_per_wavelength;
    }
    if (seed) g.seed = *seed;
    g.threads = threads;
    const auto report = run_gen_dataset(cfg, g, cache(), gen_out, log_line);
    std::cout << "dataset " << gen_out << ": " << report.manifest.train_count << "/" << report.manifest.val_count
              << "/" << report.manifest.test_count << " records, config hash " << report.manifest.config_hash
              << '\n';
  });

  auto* tr = app.add_subcommand("train", "Train the network on a dataset directory");
  std::string tr_config, tr_data, tr_out = "model";
  std::optional<int> epochs;
  tr->add_option("--data", tr_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--config", tr_config, "Config with [network]/[training] sections")->check(CLI::ExistingFile);
  tr->add_option("--out", tr_out, "Output directory for model.bin and history.csv");
  tr->add_option("--epochs", epochs, "Override the maximum number of epochs")->check(CLI::PositiveNumber);
  tr->callback([&] {
    RunConfig cfg = load_or_default(tr_config);
    nn::TrainConfig t = cfg.training;
    if (seed) t.seed = *seed;
    if (epochs) t.max_epochs = *epochs;
    t.threads = threads;
    const std::uint64_t init_seed = derive_seed(t.seed, "init");
    const auto res = run_train(tr_data, cfg.network, t, init_seed, tr_out, log_line);
    std::cout << "trained " << res.history.epochs.size() << " epochs, best epoch " << res.history.best_epoch
              << " (val " << res.history.best_val_loss << ")";
    if (std::isfinite(res.test_mse)) std::cout << ", test MSE " << res.test_mse;
    std::cout << "; model written to " << tr_out << "/model.bin\n";
  });

  auto* pr = app.add_subcommand("predict", "Absorption from a measured transfer function");
  std::string pr_model, pr_input, pr_sidecar, pr_out = "prediction.csv";
  pr->add_option("--model", pr_model, "model.bin")->required()->check(CLI::ExistingFile);
  pr->add_option("--input", pr_input, "CSV with frequency_hz, re_h12, im_h12 [, re_hc, im_hc]")
      ->required()
      ->check(CLI::ExistingFile);
  pr->add_option("--geometry", pr_sidecar, "JSON sidecar with the measurement geometry")
      ->required()
      ->check(CLI::ExistingFile);
  pr->add_option("--out", pr_out, "Output CSV");
  pr->callback([&] {
    const auto sidecar = MeasurementSidecar::from_json(parse_config_file(pr_sidecar));
    run_predict(pr_model, pr_input, sidecar, AirProperties{}, pr_out);
    std::cout << "wrote " << pr_out << '\n';
  });

  auto* ev = app.add_subcommand("evaluate", "Compare network and two-microphone estimates on the test split");
  std::string ev_model, ev_data, ev_out = "evaluation";
  Thresholds thresholds;
  int examples = 3;
  ev->add_option("--model", ev_model, "model.bin")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--out", ev_out, "Output directory");
  ev->add_option("--max-mean-ratio", thresholds.max_mean_ratio, "Fail when mean MSE_NN / mean MSE_2mic exceeds this");
  ev->add_option("--max-median", thresholds.max_median_nn, "Fail unless median MSE_NN is below this");
  ev->add_option("--examples", examples, "Records exported as comparison spectra");
  int ev_status = 0;
  ev->callback([&] {
    const auto report = run_evaluate(ev_model, ev_data, ev_out, AirProperties{}, threads, examples);
    std::cout << std::setprecision(4) << "records " << report.records.size() << "\n"
              << "network        mean " << report.nn.mean << "  median " << report.nn.median << "  max "
              << report.nn.max << "\n"
              << "two-microphone mean " << report.two_mic.mean << "  median " << report.two_mic.median << "  max "
              << report.two_mic.max << "\n";
    for (const auto& v : check_thresholds(report, thresholds)) {
      std::cout << "threshold violated: " << v << '\n';
      ev_status = 3;
    }
  });

  auto* ver = app.add_subcommand("verify", "Run the built-in verification suites");
  std::vector<std::string> suites;
  ver->add_option("--suite", suites, "Subset of suites to run")->check(CLI::IsMember(verification_suites()));
  int ver_status = 0;
  ver->callback([&] {
    if (suites.empty()) suites = verification_suites();
    const auto c = cache();
    std::cout << std::left << std::setw(18) << "suite" << std::setw(8) << "result" << std::setw(10) << "seconds"
              << "detail\n";
    for (const auto& s : suites) {
      const auto r = run_check(s, threads, &c);
      std::cout << std::setw(18) << r.name << std::setw(8) << (r.passed ? "PASS" : "FAIL") << std::setw(10)
                << std::fixed << std::setprecision(2) << r.seconds << std::defaultfloat << r.detail << '\n';
      if (!r.passed) ver_status = 2;
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return ev_status ? ev_status : ver_status;
}
