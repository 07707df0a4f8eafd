#ifndef INSITU_NN_MODEL_HPP
#define INSITU_NN_MODEL_HPP

#include "insitu/nn/network.hpp"
#include "insitu/standardization.hpp"
#include "insitu/twomic.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>

namespace insitu::nn {

/// Trained network plus the input statistics it was trained with.
struct NetworkModel {
  ResidualNetwork<double> network;
  Standardization stats;

  /// Raw feature rows (rows x 2L+1) to absorption rows (rows x L).
  Eigen::MatrixXd predict_rows(const Eigen::MatrixXd& raw_features) const;
};

/// Network-tagged absorption for one transfer function on the model grid.
AbsorptionSpectrum predict(const NetworkModel& model, const ComplexSpectrum& h12, double theta_deg);

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Little-endian container:
///
///   8 bytes   magic "INSNNMDL"
///   u32       format version (1)
///   u64 + n   network config as JSON text
///   u64 + 8n  parameters (f64, layout order)
///   u64 + 8n  statistics (f64): mean_re, std_re, mean_im, std_im (L each),
///             mean_theta, std_theta
///   u32       CRC-32 of every preceding byte
void save_model(const std::filesystem::path& path, const NetworkModel& model);

/// Throws ModelFormatError on bad magic, version or checksum, and when
/// `expected_grid_length` is given and differs from the stored network.
NetworkModel load_model(const std::filesystem::path& path,
                        std::optional<Index> expected_grid_length = std::nullopt);

}  // namespace insitu::nn

#endif  // INSITU_NN_MODEL_HPP
