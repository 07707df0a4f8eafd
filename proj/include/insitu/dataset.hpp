#ifndef INSITU_DATASET_HPP
#define INSITU_DATASET_HPP

#include "insitu/bem.hpp"
#include "insitu/green_cache.hpp"
#include "insitu/random.hpp"
#include "insitu/standardization.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace insitu {

struct ParameterRange {
  double lo = 0.0;
  double hi = 0.0;
  bool log_uniform = false;

  double sample(Rng& rng) const {
    return log_uniform ? rng.log_uniform(lo, hi) : rng.uniform(lo, hi);
  }
};

/// Sampling laws of the generated corpus.
struct ParameterSpace {
  ParameterRange lx{0.2, 1.0};                  // [m]
  ParameterRange ly{0.2, 1.0};                  // [m]
  ParameterRange thickness_mm{5.0, 200.0, true};
  ParameterRange sigma{5.0, 100.0, true};       // [kN s/m^4]
  ParameterRange source_distance{1.2, 1.8};     // [m]
  ParameterRange azimuth_deg{0.0, 360.0};
  ParameterRange elevation_deg{0.0, 80.0};

  void validate() const;
  nlohmann::json to_json() const;
  static ParameterSpace from_json(const nlohmann::json& j);
};

struct ParameterDraw {
  double lx = 0.0;
  double ly = 0.0;
  double thickness_m = 0.0;
  double sigma = 0.0;
  double source_distance = 0.0;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;

  auto operator<=>(const ParameterDraw&) const = default;
};

/// One draw of every parameter, in the fixed order lx, ly, d, sigma, |r_q|,
/// phi, theta.
ParameterDraw sample_parameters(const ParameterSpace& space, Rng& rng);

struct GenerationConfig {
  int train_base_cases = 20;
  int test_base_cases = 3;
  int draws_per_case = 300;
  double elements_per_wavelength = 4.0;
  double mesh_frequency = 2000.0;
  QuadratureOptions quadrature{};
  double split_ratio = 0.8;
  std::uint64_t seed = 20240601;
  int threads = 1;
  double mic_z1 = 0.01;
  double mic_z2 = 0.03;

  /// 20 + 3 base cases of 300 draws on a 4 element/wavelength mesh.
  static GenerationConfig desk_scale() { return {}; }
  /// 500 + 30 base cases of 100 draws on a 6 element/wavelength mesh.
  static GenerationConfig paper_scale();

  nlohmann::json to_json() const;
  static GenerationConfig from_json(const nlohmann::json& j);
};

struct BaseCase {
  int id = 0;
  bool test = false;  // held-out test geometry
  std::uint64_t seed = 0;
  BemMesh mesh;
  std::string cache_key;
};

/// Draws (lx, ly) for `count` base cases starting at `first_id` and makes sure
/// their collocation matrices are in the cache. `assemblies` counts cache
/// misses.
std::vector<BaseCase> generate_base_cases(int count, int first_id, bool test,
                                          const ParameterSpace& space,
                                          const GenerationConfig& cfg,
                                          const FrequencyGrid& grid, const AirProperties& air,
                                          const GreenCache& cache, int* assemblies = nullptr);

struct RecordProvenance {
  int base_case = 0;
  int draw = 0;
  std::uint64_t seed = 0;
  ParameterDraw params;
  int mesh_nx = 0;
  int mesh_ny = 0;
  double mic_z1 = 0.01;
  double mic_z2 = 0.03;
  std::vector<double> flagged_hz;  // BEM frequencies with vanishing p2

  ScenarioGeometry geometry() const;
  MaterialParams material() const { return {params.sigma, params.thickness_m}; }
  nlohmann::json to_json() const;
  static RecordProvenance from_json(const nlohmann::json& j);
};

struct DatasetRecord {
  RealSpectrum re;
  RealSpectrum im;
  double theta_deg = 0.0;
  RealSpectrum label;
  RecordProvenance provenance;
};

/// `draws` unique parameter combinations on one base case: BEM transfer
/// function as features, infinite-sample absorption at the drawn elevation as
/// label. Throws if any label leaves [0, 1].
std::vector<DatasetRecord> generate_records(const BaseCase& base, int draws,
                                            const ParameterSpace& space,
                                            const FrequencyGrid& grid, const AirProperties& air,
                                            const GreenCache& cache, const GenerationConfig& cfg);

/// Re-solves the BEM problem a record was generated from.
DatasetRecord reconstruct_record(const RecordProvenance& prov, const FrequencyGrid& grid,
                                 const AirProperties& air, const GenerationConfig& cfg,
                                 const GreenCache& cache);

struct DatasetSplit {
  std::string name;
  Eigen::MatrixXd features;  // rows x (2L + 1), raw
  Eigen::MatrixXd labels;    // rows x L
  std::vector<RecordProvenance> provenance;

  Index size() const { return features.rows(); }
};

DatasetSplit make_split(std::string name, const std::vector<DatasetRecord>& records);

struct Dataset {
  nlohmann::json header;
  FrequencyGrid grid;
  DatasetSplit train;
  DatasetSplit val;
  DatasetSplit test;
  Standardization stats;
};

struct DatasetManifest {
  Index train_count = 0;
  Index val_count = 0;
  Index test_count = 0;
  double split_ratio = 0.8;
  std::string config_hash;
  nlohmann::json header;
};

/// Shuffles train/validation records, splits them by `ratio`, fits the
/// standardization on the training rows and writes the dataset directory:
///
///   manifest.jsonl         header line, then one provenance line per record
///   <split>_features.f64   rows x (2L+1) float64, row-major, little-endian
///   <split>_labels.f64     rows x L float64, row-major, little-endian
///   stats.json             standardization statistics
DatasetManifest split_and_finalize(std::vector<DatasetRecord> trainval,
                                   std::vector<DatasetRecord> test, double ratio,
                                   std::uint64_t seed, const FrequencyGrid& grid,
                                   const nlohmann::json& config_echo,
                                   const std::filesystem::path& out_dir);

Dataset load_dataset(const std::filesystem::path& dir);

struct GenerationReport {
  DatasetManifest manifest;
  int assemblies = 0;
  std::size_t warnings = 0;
};

/// Base cases, records, split and files for a whole corpus.
GenerationReport generate_dataset(const ParameterSpace& space, const GenerationConfig& cfg,
                                  const FrequencyGrid& grid, const AirProperties& air,
                                  const GreenCache& cache, const std::filesystem::path& out_dir,
                                  const std::function<void(const std::string&)>& log = {});

}  // namespace insitu

#endif  // INSITU_DATASET_HPP
