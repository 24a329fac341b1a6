#pragma once

// Small dense linear-algebra helpers shared by the algebra, GNS and joining
// code. Everything here is expressed over Eigen expressions so that the same
// routine serves real and complex scalars.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace ncjoin {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

/// Largest singular value.
template <typename Derived>
double operator_norm(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return 0.0;
  using Plain = typename Derived::PlainObject;
  Eigen::JacobiSVD<Plain> svd(m.eval());
  return svd.singularValues()(0);
}

template <typename Derived>
typename Derived::PlainObject hermitian_part(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.adjoint()) / 2.0;
}

/// Orthonormal basis (as columns) of the null space of `m`. Singular values
/// below `rel_tol * max(1, sigma_max)` count as zero.
template <typename Derived>
typename Derived::PlainObject null_space(const Eigen::MatrixBase<Derived>& m, double rel_tol = 1e-9) {
  using Plain = typename Derived::PlainObject;
  const Eigen::Index cols = m.cols();
  if (m.rows() == 0) return Plain::Identity(cols, cols);
  // Pad to at least `cols` rows so the full right basis is computed.
  Plain padded = Plain::Zero(std::max(m.rows(), cols), cols);
  padded.topRows(m.rows()) = m;
  Eigen::JacobiSVD<Plain> svd(padded, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cutoff = rel_tol * std::max(1.0, s.size() ? double(s(0)) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) ++rank;
  return svd.matrixV().rightCols(cols - rank);
}

/// Orthonormal basis of the column space of `m`.
template <typename Derived>
typename Derived::PlainObject range_basis(const Eigen::MatrixBase<Derived>& m, double rel_tol = 1e-9) {
  using Plain = typename Derived::PlainObject;
  if (m.cols() == 0) return Plain::Zero(m.rows(), 0);
  Eigen::JacobiSVD<Plain> svd(m.eval(), Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double cutoff = rel_tol * std::max(1.0, s.size() ? double(s(0)) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) ++rank;
  return svd.matrixU().leftCols(rank);
}

/// Euclidean projection of `v` onto the probability simplex.
inline RealVector project_to_simplex(const RealVector& v) {
  const Eigen::Index n = v.size();
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cumulative += sorted[i];
    const double candidate = (cumulative - 1.0) / double(i + 1);
    if (sorted[i] - candidate > 0) theta = candidate;
  }
  return (v.array() - theta).max(0.0).matrix();
}

/// Eigenvalue cluster of a normal matrix: a representative value and an
/// orthonormal basis of the corresponding eigenspace.
struct SpectralAtom {
  Complex value;
  Matrix basis;
};

/// Spectral decomposition of a normal matrix via the complex Schur form.
/// Eigenvalues closer than `cluster_tol` are merged into one atom. Atoms are
/// returned in order of first appearance on the Schur diagonal.
std::vector<SpectralAtom> normal_spectral_atoms(const Matrix& m, double cluster_tol);

/// Deterministic phase: scales `v` so its first entry with modulus above
/// `tol` is real and positive.
void fix_phase(Eigen::Ref<Vector> v, double tol = 1e-10);

}  // namespace ncjoin
