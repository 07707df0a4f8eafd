#ifndef INSITU_STANDARDIZATION_HPP
#define INSITU_STANDARDIZATION_HPP

#include "insitu/core.hpp"

#include <json.hpp>

namespace insitu {

/// Feature rows are laid out as [Re H12 (L), Im H12 (L), theta_deg].
inline Index feature_length(Index grid_length) { return 2 * grid_length + 1; }

/// Per-frequency mean/std of the Re and Im channels and scalar mean/std of
/// the elevation, fitted on training rows only (population std).
struct Standardization {
  Eigen::VectorXd mean_re, std_re;
  Eigen::VectorXd mean_im, std_im;
  double mean_theta = 0.0;
  double std_theta = 1.0;

  Index grid_length() const { return mean_re.size(); }

  static Standardization fit(const Eigen::MatrixXd& features);

  /// Throws naming the first feature index with a non-positive or non-finite
  /// standard deviation.
  void validate() const;

  /// Standardized copy of (rows x 2L+1) raw features.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& features) const;

  nlohmann::json to_json() const;
  static Standardization from_json(const nlohmann::json& j);

  bool operator==(const Standardization&) const = default;
};

}  // namespace insitu

#endif  // INSITU_STANDARDIZATION_HPP
