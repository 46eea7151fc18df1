#pragma once

#include <vector>

namespace vrelax::quad {

/// Gauss-Legendre rule on [-1, 1]; exact for polynomials of degree 2n-1.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  static GaussLegendre make(int order);
};

/// Uniform periodic trapezoid nodes 2*pi*k/n on [0, 2*pi).
std::vector<double> periodic_nodes(int n);

}  // namespace vrelax::quad
