#include "insitu/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace insitu {

using nlohmann::json;

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("failed to write " + path.string());
}

namespace {

json run_echo(const RunConfig& cfg) {
  return {{"tool_version", INSITU_VERSION}, {"config_hash", cfg.hash()}, {"config", cfg.document}};
}

void emit_warnings(const std::vector<std::string>& warnings, const Logger& log) {
  for (const auto& w : warnings) {
    if (log) log("warning: " + w);
  }
}

}  // namespace

SimulateResult run_simulate(const RunConfig& cfg, const GreenCache* cache, const std::filesystem::path& out_dir,
                            int threads, const Logger& log) {
  if (!cfg.scenario) throw std::invalid_argument("simulate needs a [scenario] section");
  emit_warnings(cfg.warnings, log);
  const auto& sc = *cfg.scenario;
  SimulationOptions opts = cfg.simulation;
  opts.threads = threads;
  opts.rigid = sc.rigid;

  SimulateResult res;
  res.simulation = simulate_transfer_function(sc.geometry, sc.material, cfg.air, cfg.grid, opts, cache);
  res.two_mic = absorption_two_mic(res.simulation.h12, sc.geometry, cfg.grid, cfg.air);
  res.reference = sc.rigid ? RealSpectrum::Zero(cfg.grid.size())
                           : reference_absorption(cfg.grid, sc.material, cfg.air, sc.geometry.elevation_deg);
  if (log) {
    std::ostringstream msg;
    msg << "mesh " << res.simulation.mesh.nx << "x" << res.simulation.mesh.ny << ", max relative residual "
        << res.simulation.max_residual;
    log(msg.str());
  }

  std::vector<bool> flagged(static_cast<std::size_t>(cfg.grid.size()), false);
  for (Index f : res.simulation.flagged) flagged[static_cast<std::size_t>(f)] = true;
  std::ostringstream h12, alpha;
  h12 << std::setprecision(17) << "frequency_hz,re_h12,im_h12,flagged\n";
  alpha << std::setprecision(17) << "frequency_hz,alpha_miki,alpha_2mic\n";
  for (Index i = 0; i < cfg.grid.size(); ++i) {
    const Complex h = res.simulation.h12[i];
    h12 << cfg.grid[i] << ',' << h.real() << ',' << h.imag() << ',' << flagged[static_cast<std::size_t>(i)] << '\n';
    alpha << cfg.grid[i] << ',' << res.reference[i] << ',' << res.two_mic.alpha[i] << '\n';
  }
  write_text(out_dir / "h12.csv", h12.str());
  write_text(out_dir / "alpha.csv", alpha.str());
  json run = run_echo(cfg);
  run["scenario"] = sc.name;
  run["mesh"] = {{"nx", res.simulation.mesh.nx}, {"ny", res.simulation.mesh.ny}};
  run["max_residual"] = res.simulation.max_residual;
  run["warnings"] = cfg.warnings;
  write_text(out_dir / "run.json", run.dump(2) + "\n");
  return res;
}

GenerationReport run_gen_dataset(const RunConfig& cfg, const GenerationConfig& gen, const GreenCache& cache,
                                 const std::filesystem::path& out_dir, const Logger& log) {
  emit_warnings(check_parameter_ranges(cfg.space), log);
  auto report = generate_dataset(cfg.space, gen, cfg.grid, cfg.air, cache, out_dir, log);
  if (log) {
    const auto& m = report.manifest;
    log("wrote " + std::to_string(m.train_count) + " train, " + std::to_string(m.val_count) + " val, " +
        std::to_string(m.test_count) + " test records (" + std::to_string(report.warnings) +
        " flagged frequencies)");
  }
  return report;
}

TrainResult run_train(const std::filesystem::path& dataset_dir, const nn::NetworkConfig& net_cfg,
                      const nn::TrainConfig& train_cfg, std::uint64_t init_seed,
                      const std::filesystem::path& out_dir, const Logger& log) {
  const Dataset ds = load_dataset(dataset_dir);
  if (ds.grid.size() != net_cfg.input_length) {
    throw std::invalid_argument("dataset grid has " + std::to_string(ds.grid.size()) +
                                " frequencies, network expects " + std::to_string(net_cfg.input_length));
  }
  ds.stats.validate();
  auto net = nn::ResidualNetwork<double>::glorot(net_cfg, init_seed);
  if (log) log("network with " + std::to_string(net.parameter_count()) + " parameters");

  const Eigen::MatrixXd train_x = ds.stats.apply(ds.train.features);
  const Eigen::MatrixXd val_x = ds.stats.apply(ds.val.features);
  auto history = nn::train(net, train_x, ds.train.labels, val_x, ds.val.labels, train_cfg,
                           [&](const nn::EpochRecord& e) {
                             if (!log) return;
                             std::ostringstream msg;
                             msg << "epoch " << e.epoch << " lr " << e.learning_rate << " train " << e.train_loss
                                 << " val " << e.val_loss;
                             log(msg.str());
                           });

  TrainResult res{nn::NetworkModel{std::move(net), ds.stats}, std::move(history),
                  std::numeric_limits<double>::quiet_NaN()};
  if (ds.test.size() > 0) {
    res.test_mse = nn::evaluate_mse(res.model.network, ds.stats.apply(ds.test.features), ds.test.labels,
                                    train_cfg.threads);
  }
  std::filesystem::create_directories(out_dir);
  nn::save_model(out_dir / "model.bin", res.model);
  res.history.write_csv(out_dir / "history.csv");
  json summary = {{"tool_version", INSITU_VERSION},
                  {"dataset_config_hash", ds.header.value("config_hash", "")},
                  {"network", net_cfg.to_json()},
                  {"training", train_cfg.to_json()},
                  {"init_seed", init_seed},
                  {"epochs_run", res.history.epochs.size()},
                  {"best_epoch", res.history.best_epoch},
                  {"best_val_loss", res.history.best_val_loss},
                  {"early_stopped", res.history.early_stopped}};
  if (std::isfinite(res.test_mse)) summary["test_mse"] = res.test_mse;
  write_text(out_dir / "train.json", summary.dump(2) + "\n");
  return res;
}

MeasurementSidecar MeasurementSidecar::from_json(const json& j) {
  MeasurementSidecar s;
  auto& g = s.geometry;
  g.lx = j.at("lx_m").get<double>();
  g.ly = j.at("ly_m").get<double>();
  g.source_distance = j.at("source_distance_m").get<double>();
  g.azimuth_deg = j.value("azimuth_deg", 0.0);
  g.elevation_deg = j.value("elevation_deg", 0.0);
  g.mic_z1 = j.value("mic1_height_m", g.mic_z1);
  g.mic_z2 = j.value("mic2_height_m", g.mic_z2);
  g.validate();
  if (j.contains("flow_resistivity_kns_m4")) {
    MaterialParams m{j.at("flow_resistivity_kns_m4").get<double>(), j.at("thickness_mm").get<double>() * 1e-3};
    m.validate();
    s.material = m;
  }
  s.smoothing_window = j.value("smoothing_window", s.smoothing_window);
  s.smoothing_passes = j.value("smoothing_passes", s.smoothing_passes);
  const auto delim = j.value("delimiter", std::string(","));
  if (delim.size() != 1) throw std::invalid_argument("delimiter must be a single character");
  s.delimiter = delim[0];
  return s;
}

PredictResult run_predict(const std::filesystem::path& model_path, const std::filesystem::path& measured_csv,
                          const MeasurementSidecar& sidecar, const AirProperties& air,
                          const std::filesystem::path& out_csv) {
  const auto model = nn::load_model(model_path);
  PredictResult res;
  if (res.grid.size() != model.network.config().input_length) {
    throw std::invalid_argument("model grid length differs from the standard grid");
  }
  const auto measured = read_measured_csv(measured_csv, sidecar.delimiter);
  const auto h = condition_measurement(measured, res.grid, sidecar.smoothing_window, sidecar.smoothing_passes);
  res.network = nn::predict(model, h.h12, sidecar.geometry.elevation_deg);
  res.two_mic = absorption_two_mic(h.h12, sidecar.geometry, res.grid, air);
  if (sidecar.material) {
    res.reference = reference_absorption(res.grid, *sidecar.material, air, sidecar.geometry.elevation_deg);
  }
  std::ostringstream out;
  out << std::setprecision(17) << "frequency_hz,alpha_nn,alpha_2mic" << (res.reference ? ",alpha_miki" : "") << '\n';
  for (Index i = 0; i < res.grid.size(); ++i) {
    out << res.grid[i] << ',' << res.network.alpha[i] << ',' << res.two_mic.alpha[i];
    if (res.reference) out << ',' << (*res.reference)[i];
    out << '\n';
  }
  write_text(out_csv, out.str());
  return res;
}

EvaluationReport run_evaluate(const std::filesystem::path& model_path, const std::filesystem::path& dataset_dir,
                              const std::filesystem::path& out_dir, const AirProperties& air, int threads,
                              int examples) {
  const Dataset ds = load_dataset(dataset_dir);
  const auto model = nn::load_model(model_path, ds.grid.size());
  if (!(model.stats == ds.stats)) {
    throw std::invalid_argument("model statistics differ from the dataset's training statistics");
  }
  const DatasetSplit& split = ds.test.size() > 0 ? ds.test : ds.val;
  auto report = compare_methods(split, model, ds.grid, air, threads);
  report.metadata["dataset_config_hash"] = ds.header.value("config_hash", "");
  report.metadata["tool_version"] = INSITU_VERSION;

  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "report.json", report.to_json().dump(2) + "\n");
  report.write_csv(out_dir / "records.csv");

  const Index l = ds.grid.size();
  const Index n = std::min<Index>(examples, split.size());
  if (n > 0) {
    const Eigen::MatrixXd pred = model.predict_rows(split.features.topRows(n));
    for (Index i = 0; i < n; ++i) {
      const auto& prov = split.provenance[static_cast<std::size_t>(i)];
      ComplexSpectrum h12(l);
      h12.real() = split.features.row(i).head(l).transpose();
      h12.imag() = split.features.row(i).segment(l, l).transpose();
      ComparisonSpectra s;
      s.name = "record_" + std::to_string(prov.base_case) + "_" + std::to_string(prov.draw);
      s.hz = ds.grid.hz();
      s.miki = split.labels.row(i).transpose();
      s.two_mic = absorption_two_mic(h12, prov.geometry(), ds.grid, air).alpha;
      s.nn = pred.row(i).transpose();
      s.metadata = prov.to_json();
      export_comparison(s, out_dir / "spectra");
    }
  }
  return report;
}

}  // namespace insitu
