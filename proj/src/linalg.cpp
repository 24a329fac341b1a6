#include "ncjoin/linalg.hpp"

#include <Eigen/Eigenvalues>

namespace ncjoin {

std::vector<SpectralAtom> normal_spectral_atoms(const Matrix& m, double cluster_tol) {
  std::vector<SpectralAtom> atoms;
  if (m.rows() == 0) return atoms;
  Eigen::ComplexSchur<Matrix> schur(m);
  const Matrix& t = schur.matrixT();
  const Matrix& z = schur.matrixU();

  std::vector<std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    const Complex lambda = t(i, i);
    bool placed = false;
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      if (std::abs(atoms[a].value - lambda) < cluster_tol) {
        members[a].push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) {
      atoms.push_back({lambda, Matrix()});
      members.push_back({i});
    }
  }
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    Complex sum = 0.0;
    Matrix basis(m.rows(), Eigen::Index(members[a].size()));
    for (std::size_t j = 0; j < members[a].size(); ++j) {
      basis.col(Eigen::Index(j)) = z.col(members[a][j]);
      sum += t(members[a][j], members[a][j]);
    }
    atoms[a].value = sum / double(members[a].size());
    atoms[a].basis = std::move(basis);
  }
  return atoms;
}

void fix_phase(Eigen::Ref<Vector> v, double tol) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > tol) {
      v *= std::conj(v(i)) / std::abs(v(i));
      v(i) = std::abs(v(i));
      return;
    }
  }
}

}  // namespace ncjoin
