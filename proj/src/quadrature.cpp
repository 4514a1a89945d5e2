#include "sssn/quadrature.hpp"

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>

namespace sssn {

namespace {

// Visits every composition of `total` into Dim+1 nonnegative parts.
template <int Dim, typename F>
void for_each_composition(int total, F&& visit) {
  std::array<int, Dim + 1> beta{};
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == Dim) {
      beta[pos] = left;
      visit(beta);
      return;
    }
    for (int b = left; b >= 0; --b) {
      beta[pos] = b;
      self(self, pos + 1, left - b);
    }
  };
  rec(rec, 0, total);
}

double factorial(int n) { return std::tgamma(n + 1.0); }

}  // namespace

template <int Dim>
SimplexRule<Dim> grundmann_moeller(int s) {
  if (s < 0) throw std::invalid_argument("Grundmann-Moeller index must be nonnegative");
  const int d = 2 * s + 1;
  SimplexRule<Dim> rule;
  for (int i = 0; i <= s; ++i) {
    const double denom = d + Dim - 2 * i;
    const double w = ((i % 2) ? -1.0 : 1.0) * std::pow(2.0, -2 * s) * std::pow(denom, d) /
                     (factorial(i) * factorial(d + Dim - i));
    for_each_composition<Dim>(s - i, [&](const std::array<int, Dim + 1>& beta) {
      Eigen::Matrix<double, Dim + 1, 1> p;
      for (int k = 0; k <= Dim; ++k) p[k] = (2.0 * beta[k] + 1.0) / denom;
      rule.points.push_back(p);
      rule.weights.push_back(w);
    });
  }
  // Normalise to unit measure; the raw weights integrate over the
  // reference simplex of volume 1/Dim!.
  const double sum = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  for (double& w : rule.weights) w /= sum;
  return rule;
}

template SimplexRule<2> grundmann_moeller<2>(int);
template SimplexRule<3> grundmann_moeller<3>(int);

namespace {

template <int Dim>
const SimplexRule<Dim>& cached_rule(int degree) {
  static std::mutex mutex;
  static std::map<int, SimplexRule<Dim>> cache;
  const int s = std::max(0, degree / 2);
  std::lock_guard lock(mutex);
  auto it = cache.find(s);
  if (it == cache.end()) it = cache.emplace(s, grundmann_moeller<Dim>(s)).first;
  return it->second;
}

}  // namespace

const SimplexRule<3>& tet_rule(int degree) { return cached_rule<3>(degree); }
const SimplexRule<2>& triangle_rule(int degree) { return cached_rule<2>(degree); }

}  // namespace sssn
