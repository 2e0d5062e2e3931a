#include "fhescale/fhe/activation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

namespace fhescale::fhe {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double ActivationPoly::operator()(double x) const {
  double acc = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
  return acc;
}

ActivationPoly fit_activation_poly(int degree, double lo, double hi, int grid_points) {
  if (degree < 1) throw std::invalid_argument("activation degree must be >= 1");
  if (!(lo < hi)) throw std::invalid_argument("fit interval must satisfy lo < hi");
  if (grid_points < degree + 1) throw std::invalid_argument("fit grid too coarse for degree");

  // Fit in v = x / radius so the Vandermonde columns stay O(1).
  const double radius = std::max(std::fabs(lo), std::fabs(hi));
  const int cols = degree + 1;
  Eigen::MatrixXd vander(grid_points, cols);
  Eigen::VectorXd target(grid_points);
  for (int i = 0; i < grid_points; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / (grid_points - 1);
    const double v = x / radius;
    double power = 1.0;
    for (int k = 0; k < cols; ++k) {
      vander(i, k) = power;
      power *= v;
    }
    target(i) = sigmoid(x);
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(vander);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  if (!(cond <= kMaxFitCondition)) {
    throw IllConditionedFit("degree " + std::to_string(degree) +
                            " fit is ill-conditioned (condition number " +
                            std::to_string(cond) + ")");
  }
  const Eigen::VectorXd scaled = vander.colPivHouseholderQr().solve(target);

  ActivationPoly poly;
  poly.fit_lo = lo;
  poly.fit_hi = hi;
  poly.coefficients.resize(cols);
  double inv = 1.0;
  for (int k = 0; k < cols; ++k) {
    poly.coefficients[k] = scaled(k) * inv;
    inv /= radius;
  }

  const int dense = (grid_points - 1) * 10 + 1;
  double worst = 0.0;
  for (int i = 0; i < dense; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / (dense - 1);
    worst = std::max(worst, std::fabs(poly(x) - sigmoid(x)));
  }
  poly.max_abs_error = worst;
  return poly;
}

}  // namespace fhescale::fhe
