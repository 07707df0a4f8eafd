#include "insitu/nn/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace insitu::nn {

static_assert(std::endian::native == std::endian::little, "model files are little-endian");

namespace {

constexpr char kMagic[8] = {'I', 'N', 'S', 'N', 'N', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

void put(std::string& buf, const void* data, std::size_t n) {
  buf.append(static_cast<const char*>(data), n);
}
template <typename T>
void put(std::string& buf, T v) {
  put(buf, &v, sizeof v);
}
void put_doubles(std::string& buf, const double* data, std::size_t n) {
  put(buf, static_cast<std::uint64_t>(n));
  put(buf, data, n * sizeof(double));
}

class Reader {
 public:
  explicit Reader(const std::string& buf) : buf_(buf) {}
  void read(void* out, std::size_t n) {
    if (n > buf_.size() - pos_) throw ModelFormatError("model file is truncated");
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T get() {
    T v;
    read(&v, sizeof v);
    return v;
  }
  std::vector<double> doubles() {
    const auto n = get<std::uint64_t>();
    if (n > (buf_.size() - pos_) / sizeof(double)) throw ModelFormatError("model file is truncated");
    std::vector<double> v(n);
    read(v.data(), n * sizeof(double));
    return v;
  }
  std::size_t position() const { return pos_; }

 private:
  const std::string& buf_;
  std::size_t pos_ = 0;
};

}  // namespace

Eigen::MatrixXd NetworkModel::predict_rows(const Eigen::MatrixXd& raw_features) const {
  if (stats.grid_length() != network.config().input_length) {
    throw std::invalid_argument("model has no standardization statistics for its grid");
  }
  return network.forward(stats.apply(raw_features));
}

AbsorptionSpectrum predict(const NetworkModel& model, const ComplexSpectrum& h12, double theta_deg) {
  const Index l = model.network.config().input_length;
  if (h12.size() != l) {
    throw std::invalid_argument("transfer function has " + std::to_string(h12.size()) +
                                " frequencies, model expects " + std::to_string(l));
  }
  Eigen::MatrixXd row(1, feature_length(l));
  row.leftCols(l) = h12.real().transpose();
  row.middleCols(l, l) = h12.imag().transpose();
  row(0, 2 * l) = theta_deg;
  return {model.predict_rows(row).row(0).transpose(), EstimateMethod::network, {}};
}

void save_model(const std::filesystem::path& path, const NetworkModel& model) {
  const auto& s = model.stats;
  const Index l = model.network.config().input_length;
  if (s.grid_length() != l) throw std::invalid_argument("statistics do not match the network grid");
  std::string buf;
  put(buf, kMagic, sizeof kMagic);
  put(buf, kVersion);
  const std::string cfg = model.network.config().to_json().dump();
  put(buf, static_cast<std::uint64_t>(cfg.size()));
  put(buf, cfg.data(), cfg.size());
  const auto& p = model.network.parameters();
  put_doubles(buf, p.data(), static_cast<std::size_t>(p.size()));
  std::vector<double> st;
  for (const auto* v : {&s.mean_re, &s.std_re, &s.mean_im, &s.std_im}) st.insert(st.end(), v->data(), v->data() + v->size());
  st.push_back(s.mean_theta);
  st.push_back(s.std_theta);
  put_doubles(buf, st.data(), st.size());
  put(buf, crc32(buf.data(), buf.size()));

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("failed to write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

NetworkModel load_model(const std::filesystem::path& path, std::optional<Index> expected_grid_length) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string buf{std::istreambuf_iterator<char>(in), {}};
  if (buf.size() < sizeof kMagic + 4 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw ModelFormatError(path.string() + ": not a model file");
  }
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
  if (crc32(buf.data(), buf.size() - 4) != stored_crc) {
    throw ModelFormatError(path.string() + ": checksum mismatch");
  }
  Reader r(buf);
  char magic[8];
  r.read(magic, sizeof magic);
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw ModelFormatError(path.string() + ": unsupported model version " + std::to_string(version));
  }
  std::string cfg_text(r.get<std::uint64_t>(), '\0');
  if (cfg_text.size() > buf.size()) throw ModelFormatError("model file is truncated");
  r.read(cfg_text.data(), cfg_text.size());
  NetworkConfig cfg;
  try {
    cfg = NetworkConfig::from_json(nlohmann::json::parse(cfg_text));
  } catch (const std::exception& e) {
    throw ModelFormatError(path.string() + ": bad network config: " + e.what());
  }
  if (expected_grid_length && *expected_grid_length != cfg.input_length) {
    throw ModelFormatError(path.string() + ": model grid has " + std::to_string(cfg.input_length) +
                           " frequencies, expected " + std::to_string(*expected_grid_length));
  }
  NetworkModel model{ResidualNetwork<double>(cfg), {}};
  const auto params = r.doubles();
  if (static_cast<Index>(params.size()) != model.network.parameter_count()) {
    throw ModelFormatError(path.string() + ": parameter count does not match the config");
  }
  model.network.parameters() = Eigen::Map<const Eigen::VectorXd>(params.data(), model.network.parameter_count());
  const auto st = r.doubles();
  const Index l = cfg.input_length;
  if (static_cast<Index>(st.size()) != 4 * l + 2) throw ModelFormatError(path.string() + ": bad statistics block");
  const auto seg = [&](Index i) { return Eigen::Map<const Eigen::VectorXd>(st.data() + i * l, l); };
  model.stats.mean_re = seg(0);
  model.stats.std_re = seg(1);
  model.stats.mean_im = seg(2);
  model.stats.std_im = seg(3);
  model.stats.mean_theta = st[static_cast<std::size_t>(4 * l)];
  model.stats.std_theta = st[static_cast<std::size_t>(4 * l + 1)];
  if (r.position() + 4 != buf.size()) throw ModelFormatError(path.string() + ": trailing bytes");
  model.stats.validate();
  return model;
}

}  // namespace insitu::nn
