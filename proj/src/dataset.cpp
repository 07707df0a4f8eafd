#include "insitu/dataset.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>

namespace insitu {

static_assert(std::endian::native == std::endian::little, "dataset tensors are little-endian");

using nlohmann::json;

namespace {

json range_json(const ParameterRange& r) {
  return {{"min", r.lo}, {"max", r.hi}, {"sampling", r.log_uniform ? "log-uniform" : "uniform"}};
}

ParameterRange range_from(const json& j, const ParameterRange& fallback) {
  ParameterRange r = fallback;
  if (j.is_array()) {
    r.lo = j.at(0).get<double>();
    r.hi = j.at(1).get<double>();
    return r;
  }
  r.lo = j.value("min", r.lo);
  r.hi = j.value("max", r.hi);
  if (j.contains("sampling")) {
    const auto s = j.at("sampling").get<std::string>();
    if (s != "uniform" && s != "log-uniform") throw std::invalid_argument("unknown sampling law " + s);
    r.log_uniform = s == "log-uniform";
  }
  return r;
}

void write_tensor(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  // Row-major on disk.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!out) throw std::runtime_error("failed to write " + path.string());
}

Eigen::MatrixXd read_tensor(const std::filesystem::path& path, Index rows, Index cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(rm.size() * sizeof(double)) || in.peek() != EOF) {
    throw std::runtime_error(path.string() + ": tensor size does not match the manifest");
  }
  return rm;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void ParameterSpace::validate() const {
  for (const auto* r : {&lx, &ly, &thickness_mm, &sigma, &source_distance, &azimuth_deg, &elevation_deg}) {
    if (!(r->hi >= r->lo)) throw std::invalid_argument("parameter range with max < min");
    if (r->log_uniform && !(r->lo > 0.0)) throw std::invalid_argument("log-uniform range must be positive");
  }
  if (!(lx.lo > 0.0) || !(ly.lo > 0.0)) throw std::invalid_argument("sample sizes must be positive");
  if (!(thickness_mm.lo > 0.0) || !(sigma.lo > 0.0)) throw std::invalid_argument("material ranges must be positive");
  if (!(elevation_deg.lo >= 0.0) || !(elevation_deg.hi < 90.0)) {
    throw std::invalid_argument("elevation range must lie in [0, 90)");
  }
}

json ParameterSpace::to_json() const {
  return {{"lx_m", range_json(lx)},
          {"ly_m", range_json(ly)},
          {"thickness_mm", range_json(thickness_mm)},
          {"flow_resistivity_kns_m4", range_json(sigma)},
          {"source_distance_m", range_json(source_distance)},
          {"azimuth_deg", range_json(azimuth_deg)},
          {"elevation_deg", range_json(elevation_deg)}};
}

ParameterSpace ParameterSpace::from_json(const json& j) {
  ParameterSpace s;
  const auto pick = [&](const char* key, ParameterRange& r) {
    if (j.contains(key)) r = range_from(j.at(key), r);
  };
  pick("lx_m", s.lx);
  pick("ly_m", s.ly);
  pick("thickness_mm", s.thickness_mm);
  pick("flow_resistivity_kns_m4", s.sigma);
  pick("source_distance_m", s.source_distance);
  pick("azimuth_deg", s.azimuth_deg);
  pick("elevation_deg", s.elevation_deg);
  s.validate();
  return s;
}

ParameterDraw sample_parameters(const ParameterSpace& space, Rng& rng) {
  ParameterDraw d;
  d.lx = space.lx.sample(rng);
  d.ly = space.ly.sample(rng);
  d.thickness_m = space.thickness_mm.sample(rng) * 1e-3;
  d.sigma = space.sigma.sample(rng);
  d.source_distance = space.source_distance.sample(rng);
  d.azimuth_deg = space.azimuth_deg.sample(rng);
  d.elevation_deg = space.elevation_deg.sample(rng);
  return d;
}

GenerationConfig GenerationConfig::paper_scale() {
  GenerationConfig c;
  c.train_base_cases = 500;
  c.test_base_cases = 30;
  c.draws_per_case = 100;
  c.elements_per_wavelength = 6.0;
  return c;
}

json GenerationConfig::to_json() const {
  return {{"train_base_cases", train_base_cases},
          {"test_base_cases", test_base_cases},
          {"draws_per_case", draws_per_case},
          {"elements_per_wavelength", elements_per_wavelength},
          {"mesh_frequency_hz", mesh_frequency},
          {"quadrature_order", quadrature.order},
          {"near_field_ratio", quadrature.near_ratio},
          {"near_field_max_split", quadrature.max_split},
          {"split_ratio", split_ratio},
          {"seed", seed},
          {"mic1_height_m", mic_z1},
          {"mic2_height_m", mic_z2}};
}

GenerationConfig GenerationConfig::from_json(const json& j) {
  GenerationConfig c;
  c.train_base_cases = j.value("train_base_cases", c.train_base_cases);
  c.test_base_cases = j.value("test_base_cases", c.test_base_cases);
  c.draws_per_case = j.value("draws_per_case", c.draws_per_case);
  c.elements_per_wavelength = j.value("elements_per_wavelength", c.elements_per_wavelength);
  c.mesh_frequency = j.value("mesh_frequency_hz", c.mesh_frequency);
  c.quadrature.order = j.value("quadrature_order", c.quadrature.order);
  c.quadrature.near_ratio = j.value("near_field_ratio", c.quadrature.near_ratio);
  c.quadrature.max_split = j.value("near_field_max_split", c.quadrature.max_split);
  c.split_ratio = j.value("split_ratio", c.split_ratio);
  c.seed = j.value("seed", c.seed);
  c.mic_z1 = j.value("mic1_height_m", c.mic_z1);
  c.mic_z2 = j.value("mic2_height_m", c.mic_z2);
  if (c.train_base_cases < 1 || c.test_base_cases < 0 || c.draws_per_case < 1) {
    throw std::invalid_argument("base case and draw counts must be positive");
  }
  if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) throw std::invalid_argument("split ratio must lie in (0, 1)");
  return c;
}

std::vector<BaseCase> generate_base_cases(int count, int first_id, bool test,
                                          const ParameterSpace& space,
                                          const GenerationConfig& cfg,
                                          const FrequencyGrid& grid, const AirProperties& air,
                                          const GreenCache& cache, int* assemblies) {
  std::vector<BaseCase> cases;
  int misses = 0;
  for (int i = 0; i < count; ++i) {
    BaseCase bc;
    bc.id = first_id + i;
    bc.test = test;
    bc.seed = derive_seed(cfg.seed, "base-case", static_cast<std::uint64_t>(bc.id));
    Rng rng(bc.seed);
    const auto draw = sample_parameters(space, rng);
    bc.mesh = build_mesh(draw.lx, draw.ly, cfg.elements_per_wavelength, cfg.mesh_frequency, air);
    bc.cache_key = GreenMatrixSet::key_for(bc.mesh, grid, air, cfg.quadrature);
    bool assembled = false;
    cache.get_or_assemble(bc.mesh, grid, air, cfg.quadrature, cfg.threads, &assembled);
    misses += assembled ? 1 : 0;
    cases.push_back(std::move(bc));
  }
  if (assemblies) *assemblies = misses;
  return cases;
}

ScenarioGeometry RecordProvenance::geometry() const {
  return {params.lx, params.ly, params.source_distance, params.azimuth_deg, params.elevation_deg, mic_z1, mic_z2};
}

json RecordProvenance::to_json() const {
  return {{"base_case", base_case},
          {"draw", draw},
          {"seed", seed},
          {"lx_m", params.lx},
          {"ly_m", params.ly},
          {"thickness_m", params.thickness_m},
          {"flow_resistivity_kns_m4", params.sigma},
          {"source_distance_m", params.source_distance},
          {"azimuth_deg", params.azimuth_deg},
          {"elevation_deg", params.elevation_deg},
          {"mesh_nx", mesh_nx},
          {"mesh_ny", mesh_ny},
          {"mic1_height_m", mic_z1},
          {"mic2_height_m", mic_z2},
          {"flagged_hz", flagged_hz}};
}

RecordProvenance RecordProvenance::from_json(const json& j) {
  RecordProvenance p;
  p.base_case = j.at("base_case").get<int>();
  p.draw = j.at("draw").get<int>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.params.lx = j.at("lx_m").get<double>();
  p.params.ly = j.at("ly_m").get<double>();
  p.params.thickness_m = j.at("thickness_m").get<double>();
  p.params.sigma = j.at("flow_resistivity_kns_m4").get<double>();
  p.params.source_distance = j.at("source_distance_m").get<double>();
  p.params.azimuth_deg = j.at("azimuth_deg").get<double>();
  p.params.elevation_deg = j.at("elevation_deg").get<double>();
  p.mesh_nx = j.at("mesh_nx").get<int>();
  p.mesh_ny = j.at("mesh_ny").get<int>();
  p.mic_z1 = j.value("mic1_height_m", p.mic_z1);
  p.mic_z2 = j.value("mic2_height_m", p.mic_z2);
  p.flagged_hz = j.value("flagged_hz", std::vector<double>{});
  return p;
}

namespace {

std::vector<DatasetRecord> solve_records(const std::vector<RecordProvenance>& provs,
                                         const GreenMatrixSet& green,
                                         const std::vector<Eigen::MatrixXcd>& rows,
                                         const FrequencyGrid& grid, const AirProperties& air) {
  std::vector<ScenarioGeometry> geoms;
  std::vector<ImpedanceSpectrum> zs;
  for (const auto& prov : provs) {
    geoms.push_back(prov.geometry());
    zs.push_back(surface_impedance(grid, prov.material(), air, geoms.back().elevation_deg));
  }
  const auto sims = simulate_batch(green, rows, geoms, zs, 1);
  std::vector<DatasetRecord> records;
  records.reserve(provs.size());
  for (std::size_t s = 0; s < provs.size(); ++s) {
    const auto& prov = provs[s];
    DatasetRecord rec;
    rec.re = sims[s].h12.real();
    rec.im = sims[s].h12.imag();
    rec.theta_deg = geoms[s].elevation_deg;
    rec.label = absorption_from_reflection(reference_reflection(zs[s], geoms[s].elevation_deg, air));
    rec.provenance = prov;
    rec.provenance.flagged_hz.clear();
    for (Index f : sims[s].flagged) rec.provenance.flagged_hz.push_back(grid[f]);
    for (Index i = 0; i < rec.label.size(); ++i) {
      if (!(rec.label[i] >= 0.0 && rec.label[i] <= 1.0)) {
        std::ostringstream msg;
        msg << "reference absorption " << rec.label[i] << " outside [0, 1] at " << grid[i]
            << " Hz (base case " << prov.base_case << ", draw " << prov.draw << ")";
        throw std::runtime_error(msg.str());
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

std::vector<DatasetRecord> generate_records(const BaseCase& base, int draws,
                                            const ParameterSpace& space,
                                            const FrequencyGrid& grid, const AirProperties& air,
                                            const GreenCache& cache, const GenerationConfig& cfg) {
  const auto green = cache.get_or_assemble(base.mesh, grid, air, cfg.quadrature, 1);
  const std::vector<Vec3> mics{{0.0, 0.0, cfg.mic_z1}, {0.0, 0.0, cfg.mic_z2}};
  const auto rows = assemble_receiver_rows(base.mesh, mics, grid, air, cfg.quadrature);

  std::vector<RecordProvenance> provs;
  provs.reserve(static_cast<std::size_t>(draws));
  std::set<ParameterDraw> seen;
  for (int j = 0; j < draws; ++j) {
    RecordProvenance prov;
    prov.base_case = base.id;
    prov.draw = j;
    prov.seed = derive_seed(base.seed, "draw", static_cast<std::uint64_t>(j));
    prov.mesh_nx = base.mesh.nx;
    prov.mesh_ny = base.mesh.ny;
    prov.mic_z1 = cfg.mic_z1;
    prov.mic_z2 = cfg.mic_z2;
    Rng rng(prov.seed);
    do {
      prov.params = sample_parameters(space, rng);
      prov.params.lx = base.mesh.lx;
      prov.params.ly = base.mesh.ly;
    } while (!seen.insert(prov.params).second);
    provs.push_back(prov);
  }
  return solve_records(provs, green, rows, grid, air);
}

DatasetRecord reconstruct_record(const RecordProvenance& prov, const FrequencyGrid& grid,
                                 const AirProperties& air, const GenerationConfig& cfg,
                                 const GreenCache& cache) {
  const BemMesh mesh{prov.params.lx, prov.params.ly, prov.mesh_nx, prov.mesh_ny};
  const auto green = cache.get_or_assemble(mesh, grid, air, cfg.quadrature, 1);
  const std::vector<Vec3> mics{{0.0, 0.0, prov.mic_z1}, {0.0, 0.0, prov.mic_z2}};
  const auto rows = assemble_receiver_rows(mesh, mics, grid, air, cfg.quadrature);
  return solve_records({prov}, green, rows, grid, air).front();
}

DatasetSplit make_split(std::string name, const std::vector<DatasetRecord>& records) {
  DatasetSplit s;
  s.name = std::move(name);
  if (records.empty()) {
    s.features.resize(0, 0);
    s.labels.resize(0, 0);
    return s;
  }
  const Index l = records.front().label.size();
  s.features.resize(static_cast<Index>(records.size()), feature_length(l));
  s.labels.resize(static_cast<Index>(records.size()), l);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.re.size() != l || rec.im.size() != l || rec.label.size() != l) {
      throw std::invalid_argument("record lengths disagree");
    }
    const auto row = static_cast<Index>(r);
    s.features.row(row).head(l) = rec.re.transpose();
    s.features.row(row).segment(l, l) = rec.im.transpose();
    s.features(row, 2 * l) = rec.theta_deg;
    s.labels.row(row) = rec.label.transpose();
    s.provenance.push_back(rec.provenance);
  }
  return s;
}

DatasetManifest split_and_finalize(std::vector<DatasetRecord> trainval,
                                   std::vector<DatasetRecord> test, double ratio,
                                   std::uint64_t seed, const FrequencyGrid& grid,
                                   const json& config_echo,
                                   const std::filesystem::path& out_dir) {
  if (trainval.empty()) throw std::invalid_argument("no records to split");
  std::vector<std::size_t> order(trainval.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(trainval.size())));
  if (n_train == 0 || n_train == trainval.size()) throw std::invalid_argument("split leaves an empty partition");
  std::vector<DatasetRecord> train, val;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train : val).push_back(std::move(trainval[order[i]]));
  }

  const std::array<DatasetSplit, 3> splits{make_split("train", train), make_split("val", val),
                                           make_split("test", test)};
  const auto stats = Standardization::fit(splits[0].features);
  stats.validate();

  std::filesystem::create_directories(out_dir);
  const Index l = grid.size();
  DatasetManifest manifest;
  manifest.train_count = splits[0].size();
  manifest.val_count = splits[1].size();
  manifest.test_count = splits[2].size();
  manifest.split_ratio = ratio;
  manifest.config_hash = Fnv1a().text(config_echo.dump()).hex();

  json split_info = json::object();
  for (const auto& s : splits) {
    split_info[s.name] = {{"count", s.size()},
                          {"features", s.name + "_features.f64"},
                          {"labels", s.name + "_labels.f64"},
                          {"feature_length", feature_length(l)},
                          {"label_length", l}};
    write_tensor(out_dir / (s.name + "_features.f64"), s.features);
    write_tensor(out_dir / (s.name + "_labels.f64"), s.labels);
  }
  manifest.header = {{"kind", "header"},
                     {"format", "insitu-dataset"},
                     {"version", 1},
                     {"tool_version", INSITU_VERSION},
                     {"config_hash", manifest.config_hash},
                     {"config", config_echo},
                     {"split_ratio", ratio},
                     {"split_seed", seed},
                     {"grid_hz", to_std(grid.hz())},
                     {"splits", split_info},
                     {"standardization", "stats.json"}};

  std::ofstream out(out_dir / "manifest.jsonl", std::ios::trunc);
  out << manifest.header.dump() << '\n';
  for (const auto& s : splits) {
    for (std::size_t r = 0; r < s.provenance.size(); ++r) {
      json line = s.provenance[r].to_json();
      line["kind"] = "record";
      line["split"] = s.name;
      line["row"] = r;
      out << line.dump() << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed to write manifest");
  std::ofstream st(out_dir / "stats.json", std::ios::trunc);
  st << stats.to_json().dump(2) << '\n';
  return manifest;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.jsonl");
  if (!in) throw std::runtime_error("cannot open " + (dir / "manifest.jsonl").string());
  std::string line;
  std::getline(in, line);
  json header = json::parse(line);
  if (header.value("format", "") != "insitu-dataset") throw std::runtime_error("not a dataset manifest");
  if (header.value("version", 0) != 1) throw std::runtime_error("unsupported dataset version");
  const auto hz = header.at("grid_hz").get<std::vector<double>>();
  FrequencyGrid grid(Eigen::Map<const Eigen::VectorXd>(hz.data(), static_cast<Index>(hz.size())));

  std::map<std::string, std::vector<RecordProvenance>> prov;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    prov[j.at("split").get<std::string>()].push_back(RecordProvenance::from_json(j));
  }
  const auto load_split = [&](const std::string& name) {
    DatasetSplit s;
    s.name = name;
    const auto& info = header.at("splits").at(name);
    const Index count = info.at("count").get<Index>();
    if (count > 0) {
      s.features = read_tensor(dir / info.at("features").get<std::string>(), count,
                               info.at("feature_length").get<Index>());
      s.labels = read_tensor(dir / info.at("labels").get<std::string>(), count,
                             info.at("label_length").get<Index>());
    }
    s.provenance = std::move(prov[name]);
    if (static_cast<Index>(s.provenance.size()) != count) {
      throw std::runtime_error("manifest record count mismatch in split " + name);
    }
    return s;
  };
  std::ifstream st(dir / "stats.json");
  if (!st) throw std::runtime_error("cannot open stats.json");
  auto stats = Standardization::from_json(json::parse(st));
  return {header, grid, load_split("train"), load_split("val"), load_split("test"), std::move(stats)};
}

GenerationReport generate_dataset(const ParameterSpace& space, const GenerationConfig& cfg,
                                  const FrequencyGrid& grid, const AirProperties& air,
                                  const GreenCache& cache, const std::filesystem::path& out_dir,
                                  const std::function<void(const std::string&)>& log) {
  space.validate();
  GenerationReport report;
  int train_assemblies = 0;
  int test_assemblies = 0;
  auto bases = generate_base_cases(cfg.train_base_cases, 0, false, space, cfg, grid, air, cache,
                                   &train_assemblies);
  auto test_bases = generate_base_cases(cfg.test_base_cases, cfg.train_base_cases, true, space,
                                        cfg, grid, air, cache, &test_assemblies);
  report.assemblies = train_assemblies + test_assemblies;
  bases.insert(bases.end(), test_bases.begin(), test_bases.end());
  if (log) {
    log(std::to_string(bases.size()) + " base cases ready (" + std::to_string(report.assemblies) +
        " assembled)");
  }

  std::vector<std::vector<DatasetRecord>> per_case(bases.size());
  std::mutex log_mutex;
  parallel_for(static_cast<Index>(bases.size()), cfg.threads, [&](Index b) {
    const auto& base = bases[static_cast<std::size_t>(b)];
    per_case[static_cast<std::size_t>(b)] =
        generate_records(base, cfg.draws_per_case, space, grid, air, cache, cfg);
    if (log) {
      std::lock_guard lock(log_mutex);
      log("base case " + std::to_string(base.id) + " (" + std::to_string(base.mesh.nx) + "x" +
          std::to_string(base.mesh.ny) + " elements): " + std::to_string(cfg.draws_per_case) +
          " records");
    }
  });

  std::vector<DatasetRecord> trainval, test;
  for (std::size_t b = 0; b < bases.size(); ++b) {
    auto& dst = bases[b].test ? test : trainval;
    for (auto& r : per_case[b]) {
      report.warnings += r.provenance.flagged_hz.size();
      dst.push_back(std::move(r));
    }
  }
  const json echo = {{"parameter_space", space.to_json()},
                     {"generation", cfg.to_json()},
                     {"air", {{"speed_of_sound_m_s", air.c0}, {"density_kg_m3", air.rho0}}},
                     {"grid_hz", to_std(grid.hz())}};
  report.manifest = split_and_finalize(std::move(trainval), std::move(test), cfg.split_ratio,
                                       cfg.seed, grid, echo, out_dir);
  return report;
}

}  // namespace insitu
