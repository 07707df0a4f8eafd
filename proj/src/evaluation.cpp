#include "insitu/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace insitu {

using nlohmann::json;

double mse_per_record(const RealSpectrum& prediction, const RealSpectrum& label) {
  if (prediction.size() != label.size() || label.size() == 0) {
    throw std::invalid_argument("spectra lengths differ");
  }
  return (prediction - label).squaredNorm() / static_cast<double>(label.size());
}

Histogram Histogram::log_spaced(const std::vector<double>& values, double lo, double hi, int bins) {
  if (!(lo > 0.0) || !(hi > lo) || bins < 1) throw std::invalid_argument("bad histogram range");
  Histogram h;
  const double a = std::log10(lo);
  const double step = (std::log10(hi) - a) / bins;
  for (int i = 0; i <= bins; ++i) h.edges.push_back(std::pow(10.0, a + step * i));
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    int bin = v > 0.0 ? static_cast<int>(std::floor((std::log10(v) - a) / step)) : 0;
    ++h.counts[static_cast<std::size_t>(std::clamp(bin, 0, bins - 1))];
  }
  return h;
}

std::size_t Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

MethodSummary MethodSummary::of(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("no values to summarize");
  MethodSummary s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  s.max = *std::max_element(values.begin(), values.end());
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  s.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return s;
}

namespace {

json summary_json(const MethodSummary& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"max", s.max}};
}

json histogram_json(const Histogram& h) { return {{"edges", h.edges}, {"counts", h.counts}}; }

}  // namespace

json EvaluationReport::to_json() const {
  return {{"records", records.size()},
          {"network", summary_json(nn)},
          {"two_microphone", summary_json(two_mic)},
          {"mean_ratio", nn.mean / two_mic.mean},
          {"histogram_network", histogram_json(histogram_nn)},
          {"histogram_two_microphone", histogram_json(histogram_2mic)},
          {"metadata", metadata}};
}

void EvaluationReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "base_case,draw,theta_deg,mse_nn,mse_2mic\n" << std::setprecision(17);
  for (const auto& r : records) {
    out << r.base_case << ',' << r.draw << ',' << r.theta_deg << ',' << r.mse_nn << ',' << r.mse_2mic << '\n';
  }
}

EvaluationReport compare_methods(const DatasetSplit& split, const nn::NetworkModel& model,
                                 const FrequencyGrid& grid, const AirProperties& air, int threads) {
  const Index n = split.size();
  const Index l = grid.size();
  if (n == 0) throw std::invalid_argument("evaluation split is empty");
  if (static_cast<Index>(split.provenance.size()) != n) {
    throw std::invalid_argument("records lack geometry provenance");
  }
  if (split.features.cols() != feature_length(l)) throw std::invalid_argument("feature length does not match grid");

  EvaluationReport report;
  report.records.resize(static_cast<std::size_t>(n));
  const Eigen::MatrixXd predicted = model.predict_rows(split.features);
  parallel_for(n, threads, [&](Index i) {
    const auto& prov = split.provenance[static_cast<std::size_t>(i)];
    ComplexSpectrum h12(l);
    h12.real() = split.features.row(i).head(l).transpose();
    h12.imag() = split.features.row(i).segment(l, l).transpose();
    const RealSpectrum label = split.labels.row(i).transpose();
    const auto trad = absorption_two_mic(h12, prov.geometry(), grid, air);
    auto& r = report.records[static_cast<std::size_t>(i)];
    r.base_case = prov.base_case;
    r.draw = prov.draw;
    r.theta_deg = prov.params.elevation_deg;
    r.mse_nn = mse_per_record(predicted.row(i).transpose(), label);
    r.mse_2mic = mse_per_record(trad.alpha, label);
  });

  std::vector<double> nn_mse, tm_mse;
  for (const auto& r : report.records) {
    nn_mse.push_back(r.mse_nn);
    tm_mse.push_back(r.mse_2mic);
  }
  report.nn = MethodSummary::of(nn_mse);
  report.two_mic = MethodSummary::of(tm_mse);
  report.histogram_nn = Histogram::log_spaced(nn_mse);
  report.histogram_2mic = Histogram::log_spaced(tm_mse);
  report.metadata["split"] = split.name;
  return report;
}

std::vector<std::string> check_thresholds(const EvaluationReport& report, const Thresholds& t) {
  std::vector<std::string> out;
  std::ostringstream msg;
  const double ratio = report.nn.mean / report.two_mic.mean;
  if (!(ratio <= t.max_mean_ratio)) {
    msg << "mean MSE ratio network/two-mic " << ratio << " exceeds " << t.max_mean_ratio;
    out.push_back(msg.str());
    msg.str("");
  }
  if (!(report.nn.median < t.max_median_nn)) {
    msg << "median network MSE " << report.nn.median << " is not below " << t.max_median_nn;
    out.push_back(msg.str());
  }
  return out;
}

void export_comparison(const ComparisonSpectra& s, const std::filesystem::path& dir) {
  const Index n = s.hz.size();
  if (s.miki.size() != n || s.two_mic.size() != n || s.nn.size() != n) {
    throw std::invalid_argument("comparison spectra lengths differ");
  }
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / (s.name + ".csv"), std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write comparison CSV");
  csv << "frequency,alpha_miki,alpha_2mic,alpha_nn\n" << std::setprecision(17);
  for (Index i = 0; i < n; ++i) {
    csv << s.hz[i] << ',' << s.miki[i] << ',' << s.two_mic[i] << ',' << s.nn[i] << '\n';
  }
  json summary = {{"name", s.name},
                  {"frequencies", n},
                  {"mse_2mic_vs_miki", mse_per_record(s.two_mic, s.miki)},
                  {"mse_nn_vs_miki", mse_per_record(s.nn, s.miki)},
                  {"metadata", s.metadata}};
  std::ofstream js(dir / (s.name + ".json"), std::ios::trunc);
  js << summary.dump(2) << '\n';
  if (!csv || !js) throw std::runtime_error("failed to write comparison files");
}

ComparisonSpectra read_comparison_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "frequency,alpha_miki,alpha_2mic,alpha_nn") throw std::runtime_error("unexpected comparison header");
  std::vector<std::array<double, 4>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<double, 4> r{};
    std::istringstream cells(line);
    std::string cell;
    for (auto& v : r) {
      if (!std::getline(cells, cell, ',')) throw std::runtime_error("short comparison row");
      v = std::stod(cell);
    }
    rows.push_back(r);
  }
  ComparisonSpectra s;
  s.name = path.stem().string();
  const auto n = static_cast<Index>(rows.size());
  s.hz.resize(n);
  s.miki.resize(n);
  s.two_mic.resize(n);
  s.nn.resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    s.hz[i] = r[0];
    s.miki[i] = r[1];
    s.two_mic[i] = r[2];
    s.nn[i] = r[3];
  }
  return s;
}

}  // namespace insitu
