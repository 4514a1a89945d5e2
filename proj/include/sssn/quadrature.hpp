#pragma once

#include <vector>

#include <Eigen/Dense>

namespace sssn {

/// Quadrature rule on a simplex in barycentric coordinates; weights sum to 1
/// and are scaled by the simplex measure at the call site.
template <int Dim>
struct SimplexRule {
  std::vector<Eigen::Matrix<double, Dim + 1, 1>> points;
  std::vector<double> weights;
};

/// Grundmann-Moeller rule of odd degree 2s+1 on the Dim-simplex.
template <int Dim>
SimplexRule<Dim> grundmann_moeller(int s);

/// Cached rules exact for polynomials of the given degree (rounded up to odd).
const SimplexRule<3>& tet_rule(int degree);
const SimplexRule<2>& triangle_rule(int degree);

}  // namespace sssn
