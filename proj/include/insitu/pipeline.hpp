#ifndef INSITU_PIPELINE_HPP
#define INSITU_PIPELINE_HPP

#include "insitu/config.hpp"
#include "insitu/evaluation.hpp"
#include "insitu/green_cache.hpp"
#include "insitu/nn/model.hpp"
#include "insitu/nn/trainer.hpp"
#include "insitu/twomic.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace insitu {

using Logger = std::function<void(const std::string&)>;

struct SimulateResult {
  TransferSimulation simulation;
  AbsorptionSpectrum two_mic;
  RealSpectrum reference;
};

/// One scenario through the BEM, the two-microphone inversion and the
/// reference model. Writes h12.csv (frequency_hz, re_h12, im_h12, flagged),
/// alpha.csv (frequency_hz, alpha_miki, alpha_2mic) and run.json.
SimulateResult run_simulate(const RunConfig& cfg, const GreenCache* cache,
                            const std::filesystem::path& out_dir, int threads,
                            const Logger& log = {});

GenerationReport run_gen_dataset(const RunConfig& cfg, const GenerationConfig& gen,
                                 const GreenCache& cache, const std::filesystem::path& out_dir,
                                 const Logger& log = {});

struct TrainResult {
  nn::NetworkModel model;
  nn::TrainingHistory history;
  double test_mse = 0.0;  // NaN when the dataset has no test rows
};

/// Trains on a dataset directory and writes model.bin, history.csv and
/// train.json into `out_dir`. The network is initialized from `init_seed`.
TrainResult run_train(const std::filesystem::path& dataset_dir, const nn::NetworkConfig& net_cfg,
                      const nn::TrainConfig& train_cfg, std::uint64_t init_seed,
                      const std::filesystem::path& out_dir, const Logger& log = {});

/// Geometry and conditioning settings that accompany a measured transfer
/// function. JSON keys: lx_m, ly_m, source_distance_m, azimuth_deg,
/// elevation_deg, mic1_height_m, mic2_height_m, and optionally
/// flow_resistivity_kns_m4 + thickness_mm (adds a reference column),
/// smoothing_window, smoothing_passes, delimiter.
struct MeasurementSidecar {
  ScenarioGeometry geometry;
  std::optional<MaterialParams> material;
  int smoothing_window = 20;
  int smoothing_passes = 2;
  char delimiter = ',';

  static MeasurementSidecar from_json(const nlohmann::json& j);
};

struct PredictResult {
  FrequencyGrid grid = FrequencyGrid::standard();
  AbsorptionSpectrum network;
  AbsorptionSpectrum two_mic;
  std::optional<RealSpectrum> reference;
};

/// Conditions the measured CSV onto the model grid and writes
/// frequency_hz, alpha_nn, alpha_2mic[, alpha_miki] to `out_csv`.
PredictResult run_predict(const std::filesystem::path& model_path,
                          const std::filesystem::path& measured_csv,
                          const MeasurementSidecar& sidecar, const AirProperties& air,
                          const std::filesystem::path& out_csv);

/// Evaluates the test split of a dataset and writes report.json, records.csv
/// and comparison spectra of the first `examples` records.
EvaluationReport run_evaluate(const std::filesystem::path& model_path,
                              const std::filesystem::path& dataset_dir,
                              const std::filesystem::path& out_dir, const AirProperties& air,
                              int threads, int examples = 3);

/// Writes a file atomically-enough for our use and throws on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace insitu

#endif  // INSITU_PIPELINE_HPP
