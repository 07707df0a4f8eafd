#ifndef INSITU_CONFIG_HPP
#define INSITU_CONFIG_HPP

#include "insitu/bem.hpp"
#include "insitu/dataset.hpp"
#include "insitu/nn/network.hpp"
#include "insitu/nn/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace insitu {

/// TOML document as JSON; files ending in .json are read as JSON.
nlohmann::json parse_config_file(const std::filesystem::path& path);
nlohmann::json parse_config_text(const std::string& text, bool is_json);

struct ScenarioConfig {
  std::string name;
  ScenarioGeometry geometry;
  MaterialParams material;
  bool rigid = false;
};

/// Everything a command may need. Sections (all optional):
///
///   [air]              speed_of_sound_m_s, density_kg_m3
///   [grid]             start_hz, step_hz, stop_hz
///   [scenario]         name, lx_m, ly_m, source_distance_m, azimuth_deg,
///                      elevation_deg, mic1_height_m, mic2_height_m,
///                      flow_resistivity_kns_m4, thickness_mm, rigid
///   [mesh]             elements_per_wavelength, mesh_frequency_hz,
///                      quadrature_order, near_field_ratio, near_field_max_split
///   [parameter_space]  <name> = { min, max, sampling } per parameter
///   [generation]       see GenerationConfig::to_json
///   [network]          see nn::NetworkConfig::to_json
///   [training]         see nn::TrainConfig::to_json
///   seed               top-level integer
///
/// Unknown keys are errors.
struct RunConfig {
  nlohmann::json document = nlohmann::json::object();
  AirProperties air;
  FrequencyGrid grid = FrequencyGrid::standard();
  std::optional<ScenarioConfig> scenario;
  SimulationOptions simulation;
  ParameterSpace space;
  GenerationConfig generation;
  nn::NetworkConfig network;
  nn::TrainConfig training;
  std::optional<std::uint64_t> seed;
  /// Values outside the published parameter ranges.
  std::vector<std::string> warnings;

  std::string hash() const;

  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig load(const std::filesystem::path& path);
};

/// Messages for ranges or values lying outside the published parameter
/// space.
std::vector<std::string> check_parameter_ranges(const ParameterSpace& space);
std::vector<std::string> check_scenario_ranges(const ScenarioConfig& s);

}  // namespace insitu

#endif  // INSITU_CONFIG_HPP
