#pragma once

// Reduced linear model of a 1 x 1 x n column of cubic cells pressed by a
// plane. Four-fold symmetry leaves three unknowns per layer: the outward
// in-plane corner motion s_k, the corner z motion w_k and the cell centre z
// motion v_k. The column stiffness is the Schur complement of the quadratic
// energy onto the imposed surface displacement.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace oracle {

inline double chain_stiffness(int n, double a, double k_struct, double k_diag)
{
  // Unknown layout: s_1..s_{n-1}, w_1..w_{n-1}, v_0..v_{n-1}, then d.
  const int free = 3 * n - 2;
  const int dim = free + 1;
  auto s = [&](int k) { return k == 0 || k == n ? -1 : k - 1; };
  auto w = [&](int k) { return k == 0 ? -1 : k == n ? free : (n - 1) + k - 1; };
  auto v = [&](int k) { return 2 * (n - 1) + k; };

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
  // Adds weight * (sum c_i x_i)^2 with x_n (the surface) = -d.
  auto add = [&](double weight, const std::vector<std::pair<int, double>>& terms) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    for (auto [i, c] : terms) {
      if (i < 0) {
        continue;
      }
      g(i) += i == free ? -c : c;
    }
    H += weight * g * g.transpose();
  };

  const double len = a * std::sqrt(3.0) / 2.0;
  for (int k = 0; k <= n; ++k) {
    add(4.0 * k_struct, {{s(k), 2.0}});
  }
  for (int k = 0; k < n; ++k) {
    add(4.0 * k_struct, {{w(k + 1), 1.0}, {w(k), -1.0}});
    add(4.0 * k_diag, {{s(k), a / len}, {w(k), -0.5 * a / len}, {v(k), 0.5 * a / len}});
    add(4.0 * k_diag, {{s(k + 1), a / len}, {w(k + 1), 0.5 * a / len}, {v(k), -0.5 * a / len}});
  }
  // E = 1/2 sum weight * form^2, so H above is the Hessian.
  const Eigen::MatrixXd Hxx = H.topLeftCorner(free, free);
  const Eigen::VectorXd Hxd = H.topRightCorner(free, 1);
  return H(free, free) - Hxd.dot(Hxx.ldlt().solve(Hxd));
}

} // namespace oracle
