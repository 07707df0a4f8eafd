#ifndef INSITU_QUADRATURE_HPP
#define INSITU_QUADRATURE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace insitu {

template <typename Scalar>
struct QuadratureRule {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nodes;    // on [-1, 1]
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;  // sum to 2
};

/// Gauss-Legendre rule of the given order. Nodes come from the Golub-Welsch
/// eigenproblem and are polished with a few Newton steps on P_n.
template <typename Scalar = double>
QuadratureRule<Scalar> gauss_legendre(int order) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (order < 1) throw std::invalid_argument("quadrature order must be >= 1");
  const int n = order;
  Mat jacobi = Mat::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const Scalar b = Scalar(i) / std::sqrt(Scalar(4) * Scalar(i) * Scalar(i) - Scalar(1));
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(jacobi);
  QuadratureRule<Scalar> rule{eig.eigenvalues(), Vec(n)};
  for (int i = 0; i < n; ++i) {
    Scalar x = rule.nodes[i];
    Scalar dp = Scalar(1);
    for (int it = 0; it < 4; ++it) {
      Scalar p0 = Scalar(1), p1 = x;
      for (int k = 2; k <= n; ++k) {
        const Scalar pk = ((Scalar(2 * k - 1)) * x * p1 - Scalar(k - 1) * p0) / Scalar(k);
        p0 = p1;
        p1 = pk;
      }
      dp = Scalar(n) * (x * p1 - p0) / (x * x - Scalar(1));
      x -= p1 / dp;
    }
    rule.nodes[i] = x;
    rule.weights[i] = Scalar(2) / ((Scalar(1) - x * x) * dp * dp);
  }
  return rule;
}

/// Integral of 1/r over an a-by-b rectangle, observed from one of its corners
/// in the plane: a asinh(b/a) + b asinh(a/b).
inline double rectangle_corner_potential(double a, double b) {
  return a * std::asinh(b / a) + b * std::asinh(a / b);
}

/// Integral of 1/r over an a-by-b rectangle observed from its centroid.
inline double rectangle_centroid_potential(double a, double b) {
  return 4.0 * rectangle_corner_potential(0.5 * a, 0.5 * b);
}

}  // namespace insitu

#endif  // INSITU_QUADRATURE_HPP
