#include "insitu/config.hpp"

#include <toml.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace insitu {

using nlohmann::json;

json parse_config_text(const std::string& text, bool is_json) {
  if (is_json) return json::parse(text);
  toml::table table;
  try {
    table = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "TOML error at line " << e.source().begin.line << ": " << e.description();
    throw std::runtime_error(msg.str());
  }
  std::ostringstream out;
  out << toml::json_formatter{table};
  return json::parse(out.str());
}

json parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  try {
    return parse_config_text(text.str(), path.extension() == ".json");
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

namespace {

void require_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw std::invalid_argument("[" + section + "] must be a table");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw std::invalid_argument("unknown key '" + key + "' in [" + section + "]");
  }
}

ScenarioConfig parse_scenario(const json& j) {
  require_keys(j, "scenario",
               {"name", "lx_m", "ly_m", "source_distance_m", "azimuth_deg", "elevation_deg",
                "mic1_height_m", "mic2_height_m", "flow_resistivity_kns_m4", "thickness_mm", "rigid"});
  ScenarioConfig s;
  s.name = j.value("name", std::string("scenario"));
  auto& g = s.geometry;
  g.lx = j.at("lx_m").get<double>();
  g.ly = j.at("ly_m").get<double>();
  g.source_distance = j.at("source_distance_m").get<double>();
  g.azimuth_deg = j.value("azimuth_deg", 0.0);
  g.elevation_deg = j.value("elevation_deg", 0.0);
  g.mic_z1 = j.value("mic1_height_m", g.mic_z1);
  g.mic_z2 = j.value("mic2_height_m", g.mic_z2);
  g.validate();
  s.rigid = j.value("rigid", false);
  if (!s.rigid || j.contains("flow_resistivity_kns_m4")) {
    s.material.sigma = j.at("flow_resistivity_kns_m4").get<double>();
    s.material.thickness = j.at("thickness_mm").get<double>() * 1e-3;
    s.material.validate();
  }
  return s;
}

}  // namespace

std::vector<std::string> check_parameter_ranges(const ParameterSpace& space) {
  const ParameterSpace table;
  std::vector<std::string> out;
  const auto check = [&](const char* name, const ParameterRange& r, const ParameterRange& ref) {
    if (r.lo < ref.lo || r.hi > ref.hi) {
      std::ostringstream msg;
      msg << name << " range [" << r.lo << ", " << r.hi << "] extends beyond [" << ref.lo << ", " << ref.hi << "]";
      out.push_back(msg.str());
    }
    if (r.log_uniform != ref.log_uniform) {
      out.push_back(std::string(name) + " uses " + (r.log_uniform ? "log-uniform" : "uniform") + " sampling");
    }
  };
  check("lx_m", space.lx, table.lx);
  check("ly_m", space.ly, table.ly);
  check("thickness_mm", space.thickness_mm, table.thickness_mm);
  check("flow_resistivity_kns_m4", space.sigma, table.sigma);
  check("source_distance_m", space.source_distance, table.source_distance);
  check("azimuth_deg", space.azimuth_deg, table.azimuth_deg);
  check("elevation_deg", space.elevation_deg, table.elevation_deg);
  return out;
}

std::vector<std::string> check_scenario_ranges(const ScenarioConfig& s) {
  const ParameterSpace table;
  std::vector<std::string> out;
  const auto check = [&](const char* name, double v, const ParameterRange& ref) {
    if (v < ref.lo || v > ref.hi) {
      std::ostringstream msg;
      msg << name << " = " << v << " lies outside [" << ref.lo << ", " << ref.hi << "]";
      out.push_back(msg.str());
    }
  };
  const auto& g = s.geometry;
  check("lx_m", g.lx, table.lx);
  check("ly_m", g.ly, table.ly);
  check("source_distance_m", g.source_distance, table.source_distance);
  check("elevation_deg", g.elevation_deg, table.elevation_deg);
  if (!s.rigid) {
    check("thickness_mm", s.material.thickness * 1e3, table.thickness_mm);
    check("flow_resistivity_kns_m4", s.material.sigma, table.sigma);
  }
  return out;
}

std::string RunConfig::hash() const { return Fnv1a().text(document.dump()).hex(); }

RunConfig RunConfig::from_json(const json& doc) {
  require_keys(doc, "root",
               {"air", "grid", "scenario", "mesh", "parameter_space", "generation", "network", "training", "seed"});
  RunConfig c;
  c.document = doc;
  if (doc.contains("air")) {
    const auto& j = doc.at("air");
    require_keys(j, "air", {"speed_of_sound_m_s", "density_kg_m3"});
    c.air.c0 = j.value("speed_of_sound_m_s", c.air.c0);
    c.air.rho0 = j.value("density_kg_m3", c.air.rho0);
    c.air.validate();
  }
  if (doc.contains("grid")) {
    const auto& j = doc.at("grid");
    require_keys(j, "grid", {"start_hz", "step_hz", "stop_hz"});
    c.grid = FrequencyGrid::linear(j.value("start_hz", 100.0), j.value("step_hz", 10.0), j.value("stop_hz", 1990.0));
  }
  if (doc.contains("mesh")) {
    const auto& j = doc.at("mesh");
    require_keys(j, "mesh",
                 {"elements_per_wavelength", "mesh_frequency_hz", "quadrature_order", "near_field_ratio",
                  "near_field_max_split"});
    c.simulation.elements_per_wavelength = j.value("elements_per_wavelength", c.simulation.elements_per_wavelength);
    c.simulation.mesh_frequency = j.value("mesh_frequency_hz", c.simulation.mesh_frequency);
    c.simulation.quadrature.order = j.value("quadrature_order", c.simulation.quadrature.order);
    c.simulation.quadrature.near_ratio = j.value("near_field_ratio", c.simulation.quadrature.near_ratio);
    c.simulation.quadrature.max_split = j.value("near_field_max_split", c.simulation.quadrature.max_split);
  }
  if (doc.contains("scenario")) {
    c.scenario = parse_scenario(doc.at("scenario"));
    c.simulation.rigid = c.scenario->rigid;
    for (auto& w : check_scenario_ranges(*c.scenario)) c.warnings.push_back(std::move(w));
  }
  if (doc.contains("parameter_space")) {
    const auto& j = doc.at("parameter_space");
    require_keys(j, "parameter_space",
                 {"lx_m", "ly_m", "thickness_mm", "flow_resistivity_kns_m4", "source_distance_m", "azimuth_deg",
                  "elevation_deg"});
    c.space = ParameterSpace::from_json(j);
    for (auto& w : check_parameter_ranges(c.space)) c.warnings.push_back(std::move(w));
  }
  if (doc.contains("generation")) {
    const auto& j = doc.at("generation");
    require_keys(j, "generation",
                 {"train_base_cases", "test_base_cases", "draws_per_case", "elements_per_wavelength",
                  "mesh_frequency_hz", "quadrature_order", "near_field_ratio", "near_field_max_split",
                  "split_ratio", "seed", "mic1_height_m", "mic2_height_m"});
    c.generation = GenerationConfig::from_json(j);
  }
  if (doc.contains("network")) {
    const auto& j = doc.at("network");
    require_keys(j, "network", {"input_length", "input_channels", "channels", "kernel", "convs_per_block", "pool", "dense"});
    c.network = nn::NetworkConfig::from_json(j);
  }
  if (doc.contains("training")) {
    const auto& j = doc.at("training");
    require_keys(j, "training",
                 {"max_epochs", "batch_size", "learning_rate", "constant_epochs", "decay", "beta1", "beta2",
                  "epsilon", "l2", "decoupled_weight_decay", "patience", "min_delta", "restore_best", "seed",
                  "threads", "divergence_threshold"});
    c.training = nn::TrainConfig::from_json(j);
  }
  if (doc.contains("seed")) c.seed = doc.at("seed").get<std::uint64_t>();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  try {
    return from_json(parse_config_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

}  // namespace insitu
