#pragma once

#include <stdexcept>
#include <vector>

namespace fhescale::fhe {

double sigmoid(double x);

/// Polynomial stand-in for the sigmoid, coefficients lowest order first.
struct ActivationPoly {
  std::vector<double> coefficients;
  double fit_lo = -8.0;
  double fit_hi = 8.0;
  double max_abs_error = 0.0;

  int degree() const { return static_cast<int>(coefficients.size()) - 1; }
  double operator()(double x) const;

  bool operator==(const ActivationPoly&) const = default;
};

class IllConditionedFit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kDefaultFitGridPoints = 2001;
inline constexpr double kMaxFitCondition = 1e10;

/// Least-squares fit of the sigmoid on a uniform grid over [lo, hi]. The
/// stored max_abs_error is measured on a grid ten times denser that contains
/// every fit point. Throws IllConditionedFit when the normalized Vandermonde
/// system exceeds kMaxFitCondition.
ActivationPoly fit_activation_poly(int degree, double lo, double hi,
                                   int grid_points = kDefaultFitGridPoints);

}  // namespace fhescale::fhe
