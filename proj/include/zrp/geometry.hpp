#ifndef ZRP_GEOMETRY_HPP
#define ZRP_GEOMETRY_HPP

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <queue>
#include <vector>

#include "zrp/errors.hpp"

namespace zrp {

/// Jump geometry: mean-field (destination uniform over [n]) or an explicit
/// doubly stochastic irreducible matrix P.
class Geometry {
 public:
  static Geometry mean_field() { return Geometry{}; }

  static Geometry matrix(Eigen::MatrixXd p, double tol = 1e-12) {
    const auto n = p.rows();
    if (n < 2 || p.cols() != n) throw InvalidArgument("P must be square, n >= 2");
    if ((p.array() < -tol).any())
      throw InvalidArgument("P has negative entries");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(p.row(i).sum() - 1.0) > tol)
        throw InvalidArgument("P row sums must be 1");
      if (std::abs(p.col(i).sum() - 1.0) > tol)
        throw InvalidArgument("P column sums must be 1");
    }
    if (!strongly_connected(p))
      throw InvalidArgument("P is not irreducible");
    Geometry g;
    g.p_ = std::move(p);
    return g;
  }

  bool is_mean_field() const { return p_.size() == 0; }
  const Eigen::MatrixXd& matrix() const {
    if (is_mean_field()) throw InvalidArgument("mean-field geometry has no matrix");
    return p_;
  }

 private:
  Geometry() = default;

  static bool strongly_connected(const Eigen::MatrixXd& p) {
    auto reaches_all = [&](bool transpose) {
      const auto n = p.rows();
      std::vector<char> seen(static_cast<std::size_t>(n), 0);
      std::queue<Eigen::Index> q;
      q.push(0);
      seen[0] = 1;
      while (!q.empty()) {
        auto i = q.front();
        q.pop();
        for (Eigen::Index j = 0; j < n; ++j) {
          double w = transpose ? p(j, i) : p(i, j);
          if (w > 0.0 && !seen[static_cast<std::size_t>(j)]) {
            seen[static_cast<std::size_t>(j)] = 1;
            q.push(j);
          }
        }
      }
      for (char s : seen)
        if (!s) return false;
      return true;
    };
    return reaches_all(false) && reaches_all(true);
  }

  Eigen::MatrixXd p_;
};

/// Simple random walk on (Z/pZ)^d; n = p^d sites.
inline Eigen::MatrixXd torus_matrix(int p, int d, long cap = 200000) {
  if (p < 3 || d < 1) throw InvalidArgument("torus needs p >= 3, d >= 1");
  double sites = std::pow(static_cast<double>(p), d);
  if (sites > static_cast<double>(cap)) throw CapExceeded("torus exceeds site cap");
  int n = static_cast<int>(std::lround(sites));
  Eigen::MatrixXd pm = Eigen::MatrixXd::Zero(n, n);
  auto decode = [&](int idx, int axis) {
    for (int a = 0; a < axis; ++a) idx /= p;
    return idx % p;
  };
  std::vector<int> stride(static_cast<std::size_t>(d), 1);
  for (int a = 1; a < d; ++a) stride[static_cast<std::size_t>(a)] = stride[static_cast<std::size_t>(a) - 1] * p;
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < d; ++a) {
      int c = decode(i, a);
      int up = i + ((c + 1) % p - c) * stride[static_cast<std::size_t>(a)];
      int dn = i + ((c + p - 1) % p - c) * stride[static_cast<std::size_t>(a)];
      pm(i, up) += 1.0 / (2 * d);
      pm(i, dn) += 1.0 / (2 * d);
    }
  return pm;
}

/// Poincare constant of the torus walk: (1/d)(1 - cos(2 pi / p)).
inline double torus_gap_closed_form(int p, int d) {
  if (p < 3 || d < 1) throw InvalidArgument("torus needs p >= 3, d >= 1");
  return (1.0 - std::cos(2.0 * std::numbers::pi / p)) / d;
}

/// Poincare constant of a doubly stochastic P w.r.t. the uniform law:
/// second-smallest eigenvalue of I - (P + P^T)/2 (the Dirichlet form only
/// sees the symmetric part).
inline double walk_spectral_gap(const Eigen::MatrixXd& p) {
  Eigen::MatrixXd lap =
      Eigen::MatrixXd::Identity(p.rows(), p.cols()) - 0.5 * (p + p.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
  double gap = es.eigenvalues()(1);
  if (gap < 1e-12) throw NumericalError("walk spectral gap ~ 0 (reducible P?)");
  return gap;
}

}  // namespace zrp

#endif
