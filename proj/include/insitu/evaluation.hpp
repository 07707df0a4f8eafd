#ifndef INSITU_EVALUATION_HPP
#define INSITU_EVALUATION_HPP

#include "insitu/dataset.hpp"
#include "insitu/nn/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace insitu {

/// Mean squared error over the frequency grid.
double mse_per_record(const RealSpectrum& prediction, const RealSpectrum& label);

/// Counts over log-spaced bins; values outside [lo, hi] fall into the end
/// bins.
struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;

  static Histogram log_spaced(const std::vector<double>& values, double lo = 1e-8,
                              double hi = 1.0, int bins = 40);
  std::size_t total() const;
};

struct MethodSummary {
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;

  static MethodSummary of(std::vector<double> values);
};

struct RecordEvaluation {
  int base_case = 0;
  int draw = 0;
  double theta_deg = 0.0;
  double mse_nn = 0.0;
  double mse_2mic = 0.0;
};

struct EvaluationReport {
  std::vector<RecordEvaluation> records;
  MethodSummary nn;
  MethodSummary two_mic;
  Histogram histogram_nn;
  Histogram histogram_2mic;
  nlohmann::json metadata = nlohmann::json::object();

  nlohmann::json to_json() const;
  /// One row per record.
  void write_csv(const std::filesystem::path& path) const;
};

/// Network and two-microphone estimates of every record, each scored against
/// its infinite-sample label.
EvaluationReport compare_methods(const DatasetSplit& split, const nn::NetworkModel& model,
                                 const FrequencyGrid& grid, const AirProperties& air,
                                 int threads = 1);

struct Thresholds {
  double max_mean_ratio = 0.1;  // mean MSE_NN / mean MSE_2mic
  double max_median_nn = 1e-2;  // strict upper bound on the median MSE_NN
};

/// Violated thresholds, empty when all hold.
std::vector<std::string> check_thresholds(const EvaluationReport& report, const Thresholds& t);

/// Spectra of one scenario for plotting.
struct ComparisonSpectra {
  std::string name;
  Eigen::VectorXd hz;
  RealSpectrum miki;
  RealSpectrum two_mic;
  RealSpectrum nn;
  nlohmann::json metadata = nlohmann::json::object();
};

/// Writes <dir>/<name>.csv (frequency, alpha_miki, alpha_2mic, alpha_nn) and
/// <dir>/<name>.json (summary: per-method MSE against the Miki column).
void export_comparison(const ComparisonSpectra& spectra, const std::filesystem::path& dir);
ComparisonSpectra read_comparison_csv(const std::filesystem::path& path);

}  // namespace insitu

#endif  // INSITU_EVALUATION_HPP
