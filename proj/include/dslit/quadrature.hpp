#pragma once

#include <cstddef>
#include <vector>

namespace dslit {

// Gauss-Legendre rule on [-1, 1]. Nodes are stored in ascending order and are
// exactly antisymmetric: nodes[i] == -nodes[n - 1 - i].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(std::size_t order);

  std::size_t order() const { return nodes.size(); }

  // Integral of f over [a, b].
  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) sum += weights[i] * f(mid + half * nodes[i]);
    return half * sum;
  }
};

// Cached rule for a given order; thread-safe.
const GaussLegendre& gauss_legendre(std::size_t order);

}  // namespace dslit
