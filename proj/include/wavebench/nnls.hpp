#pragma once

// Non-negative least squares, min ||Ax - b|| subject to x >= 0.
// Lawson & Hanson active-set method; the passive-set subproblems are solved
// with a column-pivoted QR on column-equilibrated data.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace wavebench {

struct NnlsResult {
  Eigen::VectorXd x;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = true;
};

inline NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iter = 0) {
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  if (max_iter <= 0) max_iter = static_cast<int>(3 * n + 10);

  // Column equilibration keeps cubic and constant terms on the same footing.
  Eigen::VectorXd scale = A.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (scale(j) == 0) scale(j) = 1.0;
  }
  const Eigen::MatrixXd As = A * scale.cwiseInverse().asDiagonal();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * As.norm() *
                     static_cast<double>(std::max(m, n));

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    }
    Eigen::MatrixXd Ap(m, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) Ap.col(static_cast<Eigen::Index>(k)) = As.col(idx[k]);
    const Eigen::VectorXd zp = Ap.colPivHouseholderQr().solve(b);
    z.setZero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zp(static_cast<Eigen::Index>(k));
  };

  NnlsResult out;
  Eigen::VectorXd w = As.transpose() * (b - As * x);
  Eigen::VectorXd z(n);
  while (true) {
    Eigen::Index t = -1;
    double wmax = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > wmax) {
        wmax = w(j);
        t = j;
      }
    }
    if (t < 0) break;
    if (++out.iterations > max_iter) {
      out.converged = false;
      break;
    }
    passive[static_cast<std::size_t>(t)] = true;

    for (int inner = 0;; ++inner) {
      solve_passive(z);
      if (inner > max_iter) {
        out.converged = false;
        x = z.cwiseMax(0.0);
        break;
      }
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0) {
          alpha = std::min(alpha, x(j) / (x(j) - z(j)));
        }
      }
      if (!std::isfinite(alpha)) {
        x = z;
        break;
      }
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
    }
    w = As.transpose() * (b - As * x);
  }

  out.x = x.cwiseQuotient(scale);
  out.residual_norm = (A * out.x - b).norm();
  return out;
}

}  // namespace wavebench
