#include "insitu/standardization.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace insitu {

namespace {

Eigen::VectorXd column_std(const Eigen::MatrixXd& block, const Eigen::VectorXd& mean) {
  const auto n = static_cast<double>(block.rows());
  return ((block.rowwise() - mean.transpose()).array().square().colwise().sum() / n).sqrt().transpose();
}

Eigen::VectorXd to_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

Standardization Standardization::fit(const Eigen::MatrixXd& features) {
  if (features.rows() == 0) throw std::invalid_argument("cannot fit standardization on no rows");
  if (features.cols() % 2 != 1) throw std::invalid_argument("feature rows must have length 2L+1");
  const Index l = (features.cols() - 1) / 2;
  Standardization s;
  const auto re = features.leftCols(l);
  const auto im = features.middleCols(l, l);
  s.mean_re = re.colwise().mean().transpose();
  s.mean_im = im.colwise().mean().transpose();
  s.std_re = column_std(re, s.mean_re);
  s.std_im = column_std(im, s.mean_im);
  const auto theta = features.col(2 * l);
  s.mean_theta = theta.mean();
  s.std_theta = std::sqrt((theta.array() - s.mean_theta).square().mean());
  return s;
}

void Standardization::validate() const {
  const Index l = grid_length();
  if (std_re.size() != l || mean_im.size() != l || std_im.size() != l) {
    throw std::invalid_argument("standardization statistics have inconsistent lengths");
  }
  const auto check = [](double s, Index feature) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw std::domain_error("zero or non-finite standard deviation at feature index " +
                              std::to_string(feature));
    }
  };
  for (Index i = 0; i < l; ++i) check(std_re[i], i);
  for (Index i = 0; i < l; ++i) check(std_im[i], l + i);
  check(std_theta, 2 * l);
}

Eigen::MatrixXd Standardization::apply(const Eigen::MatrixXd& features) const {
  validate();
  const Index l = grid_length();
  if (features.cols() != feature_length(l)) {
    throw std::invalid_argument("feature length does not match standardization statistics");
  }
  Eigen::MatrixXd out(features.rows(), features.cols());
  out.leftCols(l) = ((features.leftCols(l).rowwise() - mean_re.transpose()).array().rowwise() /
                     std_re.transpose().array()).matrix();
  out.middleCols(l, l) = ((features.middleCols(l, l).rowwise() - mean_im.transpose()).array().rowwise() /
                          std_im.transpose().array()).matrix();
  out.col(2 * l) = (features.col(2 * l).array() - mean_theta) / std_theta;
  return out;
}

nlohmann::json Standardization::to_json() const {
  return {{"mean_re", to_std(mean_re)}, {"std_re", to_std(std_re)},
          {"mean_im", to_std(mean_im)}, {"std_im", to_std(std_im)},
          {"mean_theta", mean_theta},   {"std_theta", std_theta}};
}

Standardization Standardization::from_json(const nlohmann::json& j) {
  Standardization s;
  s.mean_re = to_vector(j.at("mean_re"));
  s.std_re = to_vector(j.at("std_re"));
  s.mean_im = to_vector(j.at("mean_im"));
  s.std_im = to_vector(j.at("std_im"));
  s.mean_theta = j.at("mean_theta").get<double>();
  s.std_theta = j.at("std_theta").get<double>();
  return s;
}

}  // namespace insitu
