#include "ncjoin/gns.hpp"

#include <Eigen/Eigenvalues>

#include <functional>
#include <sstream>

namespace ncjoin {

namespace {

constexpr double kInvariantTol = 1e-8;
constexpr double kEigenspaceTol = 1e-7;
constexpr double kEpsilonNet = 0.1;

Matrix inverse_adjoint_factor(const Matrix& factor) {
  // factor^{-*}
  const Eigen::Index d = factor.rows();
  return factor.adjoint().triangularView<Eigen::Upper>().solve(Matrix::Identity(d, d));
}

bool characters_close(const std::vector<Complex>& a, const std::vector<Complex>& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

bool is_trivial_character(const std::vector<Complex>& chi) {
  for (Complex c : chi)
    if (std::abs(c - 1.0) > kClusterTol) return false;
  return true;
}

bool character_less(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  constexpr double tol = 1e-9;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i].real() - b[i].real()) > tol) return a[i].real() < b[i].real();
    if (std::abs(a[i].imag() - b[i].imag()) > tol) return a[i].imag() < b[i].imag();
  }
  return false;
}

// Canonical orthonormal basis of the span of `q` (orthonormal columns):
// Gram-Schmidt applied to the projections of the standard basis vectors.
Matrix canonical_basis(const Matrix& q) {
  const Eigen::Index d = q.rows();
  const Eigen::Index r = q.cols();
  Matrix out(d, r);
  Eigen::Index found = 0;
  for (Eigen::Index i = 0; i < d && found < r; ++i) {
    Vector v = q * q.row(i).adjoint();
    for (Eigen::Index j = 0; j < found; ++j) v -= out.col(j) * out.col(j).dot(v);
    const double n = v.norm();
    if (n < 1e-6) continue;
    out.col(found++) = v / n;
  }
  if (found < r) return q;
  return out;
}

struct JointSpace {
  std::vector<Complex> chi;
  Matrix basis;
};

// Joint eigenspaces of commuting unitaries given in orthonormal coordinates.
std::vector<JointSpace> joint_eigenspaces(const std::vector<Matrix>& unitaries, Eigen::Index d) {
  std::vector<JointSpace> spaces{{{}, Matrix::Identity(d, d)}};
  for (const Matrix& u : unitaries) {
    std::vector<JointSpace> next;
    for (const JointSpace& sp : spaces) {
      const Matrix compressed = sp.basis.adjoint() * u * sp.basis;
      for (const SpectralAtom& atom : normal_spectral_atoms(compressed, kClusterTol)) {
        Matrix q = sp.basis * atom.basis;
        Complex lambda = atom.value;
        const Matrix shifted = u * q - lambda * q;
        if (operator_norm(shifted) > kEigenspaceTol) {
          const Matrix local = u * sp.basis - lambda * sp.basis;
          q = sp.basis * null_space(local, kEigenspaceTol);
        }
        if (q.cols() == 0) continue;
        lambda = (q.adjoint() * u * q).trace() / double(q.cols());
        lambda /= std::abs(lambda);
        JointSpace js{sp.chi, q};
        js.chi.push_back(lambda);
        next.push_back(std::move(js));
      }
    }
    spaces = std::move(next);
  }
  return spaces;
}

std::vector<Matrix> orthonormal_unitaries(const GnsResult& g) {
  std::vector<Matrix> out;
  for (const Matrix& u : g.unitaries.generators) out.push_back(g.space.to_orthonormal(u));
  return out;
}

Matrix matrix_power(const Matrix& u, long long n) {
  // u unitary in orthonormal coordinates.
  Matrix base = n < 0 ? Matrix(u.adjoint()) : u;
  unsigned long long e = n < 0 ? static_cast<unsigned long long>(-n) : static_cast<unsigned long long>(n);
  Matrix result = Matrix::Identity(u.rows(), u.cols());
  while (e) {
    if (e & 1ULL) result = result * base;
    base = base * base;
    e >>= 1ULL;
  }
  return result;
}

// Visits every tuple of {lo..hi}^k.
void for_each_tuple(int k, long long lo, long long hi, const std::function<void(const std::vector<long long>&)>& f) {
  if (hi < lo) return;
  std::vector<long long> t(std::size_t(k), lo);
  while (true) {
    f(t);
    int i = k - 1;
    while (i >= 0 && t[std::size_t(i)] == hi) t[std::size_t(i--)] = lo;
    if (i < 0) return;
    ++t[std::size_t(i)];
  }
}

// Orbit sample exponents for the epsilon-net check.
std::vector<std::vector<long long>> orbit_sample_set(const GroupDescriptor& g) {
  std::vector<std::vector<long long>> out;
  switch (g.kind()) {
    case GroupDescriptor::Kind::Integers:
      for (long long n = 0; n < 256; ++n) out.push_back({n});
      break;
    case GroupDescriptor::Kind::IntegerLattice: {
      const int k = g.generator_count();
      long long side = std::max<long long>(2, (long long)std::floor(std::pow(4096.0, 1.0 / k)));
      while (side > 2 && std::pow(double(side), k) > 4096.0) --side;
      for_each_tuple(k, 0, side - 1, [&](const std::vector<long long>& t) { out.push_back(t); });
      break;
    }
    case GroupDescriptor::Kind::FiniteCyclic:
      for (long long n = 0; n < g.order(); ++n) out.push_back({n});
      break;
  }
  return out;
}

Matrix group_matrix(const std::vector<Matrix>& unitaries, const std::vector<long long>& exps) {
  Matrix m = Matrix::Identity(unitaries.at(0).rows(), unitaries.at(0).cols());
  for (std::size_t j = 0; j < exps.size(); ++j) m = m * matrix_power(unitaries[j], exps[j]);
  return m;
}

AlgebraElement density_power(const AlgebraElement& rho, double p) {
  return hermitian_function(rho, [p](double x) { return std::pow(x, p); });
}

Matrix adjoint_index_map(const BlockStructure& s) {
  const int d = s.dimension();
  Matrix k = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    const auto p = s.locate(i);
    k(i, s.index(p.block, p.col, p.row)) = 1.0;
  }
  return k;
}

}  // namespace

// ---------------------------------------------------------------------------
// GnsSpace

Vector GnsSpace::to_orthonormal(const Vector& x) const { return factor.adjoint() * x; }

Vector GnsSpace::from_orthonormal(const Vector& z) const {
  return factor.adjoint().triangularView<Eigen::Upper>().solve(z);
}

Matrix GnsSpace::to_orthonormal(const Matrix& op) const {
  return factor.adjoint() * op * inverse_adjoint_factor(factor);
}

Matrix GnsSpace::from_orthonormal(const Matrix& op) const {
  return inverse_adjoint_factor(factor) * op * factor.adjoint();
}

double GnsSpace::operator_norm(const Matrix& op) const { return ncjoin::operator_norm(to_orthonormal(op)); }

Matrix GnsSpace::adjoint(const Matrix& op) const { return gram.ldlt().solve(op.adjoint() * gram); }

Matrix GnsSpace::left_multiplication(const AlgebraElement& a) const {
  Matrix m(dimension, dimension);
  for (int j = 0; j < dimension; ++j) m.col(j) = (a * AlgebraElement::unit(structure, j)).coordinates();
  return m;
}

Matrix GnsSpace::right_multiplication(const AlgebraElement& a) const {
  Matrix m(dimension, dimension);
  for (int j = 0; j < dimension; ++j) m.col(j) = (AlgebraElement::unit(structure, j) * a).coordinates();
  return m;
}

GnsSpace gns_space(const BlockStructure& s, const FaithfulState& state) {
  GnsSpace g;
  g.structure = s;
  g.dimension = s.dimension();
  const int d = g.dimension;
  g.gram = Matrix::Zero(d, d);
  const AlgebraElement& rho = state.density();
  // e_i^* e_j = E_{sr} E_{pq} = [r == p] E_{sq}, and mu(E_{sq}) = rho_{qs}.
  for (int i = 0; i < d; ++i) {
    const auto pi = s.locate(i);
    for (int j = 0; j < d; ++j) {
      const auto pj = s.locate(j);
      if (pi.block != pj.block || pi.row != pj.row) continue;
      g.gram(i, j) = rho.block(pi.block)(pj.col, pi.col);
    }
  }
  Eigen::LLT<Matrix> llt(g.gram);
  if (llt.info() != Eigen::Success) throw InvalidSystem("Gram matrix is not positive definite; state not faithful");
  g.factor = llt.matrixL();
  for (int i = 0; i < d; ++i) g.left_rep.push_back(g.left_multiplication(AlgebraElement::unit(s, i)));
  g.cyclic_vector = AlgebraElement::identity(s).coordinates();
  return g;
}

GnsResult gns_construct(const FiniteSystem& sys) {
  require_valid(sys);
  GnsResult r{gns_space(sys.structure, sys.state), {}};
  for (const Automorphism& a : sys.generators) {
    Matrix u = a.coordinate_matrix();
    const double omega_res = (u * r.space.cyclic_vector - r.space.cyclic_vector).norm();
    const double unitary_res = (u.adjoint() * r.space.gram * u - r.space.gram).norm();
    if (omega_res > kInvariantTol || unitary_res > kInvariantTol)
      throw InvariantViolation("unitary implementation fails: |U Omega - Omega| = " + std::to_string(omega_res) +
                               ", |U*GU - G| = " + std::to_string(unitary_res));
    r.unitaries.generators.push_back(std::move(u));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Spectrum and classification

std::vector<PointSpectrumEntry> point_spectrum(const FiniteSystem& sys) {
  const GnsResult g = gns_construct(sys);
  std::vector<PointSpectrumEntry> out;
  for (const JointSpace& js : joint_eigenspaces(orthonormal_unitaries(g), g.space.dimension)) {
    PointSpectrumEntry e;
    e.eigenvalue = js.chi;
    e.multiplicity = int(js.basis.cols());
    const Matrix basis = canonical_basis(js.basis);
    e.eigenvectors = Matrix(g.space.dimension, basis.cols());
    for (Eigen::Index c = 0; c < basis.cols(); ++c) {
      Vector x = g.space.from_orthonormal(Vector(basis.col(c)));
      fix_phase(x);
      e.eigenvectors.col(c) = x;
    }
    out.push_back(std::move(e));
  }
  // Merge accidental splits of one eigenvalue.
  std::vector<PointSpectrumEntry> merged;
  for (auto& e : out) {
    auto it = std::find_if(merged.begin(), merged.end(),
                           [&](const PointSpectrumEntry& m) { return characters_close(m.eigenvalue, e.eigenvalue, kClusterTol); });
    if (it == merged.end()) {
      merged.push_back(std::move(e));
    } else {
      Matrix v(it->eigenvectors.rows(), it->eigenvectors.cols() + e.eigenvectors.cols());
      v << it->eigenvectors, e.eigenvectors;
      it->eigenvectors = std::move(v);
      it->multiplicity += e.multiplicity;
    }
  }
  std::sort(merged.begin(), merged.end(),
            [](const PointSpectrumEntry& a, const PointSpectrumEntry& b) { return character_less(a.eigenvalue, b.eigenvalue); });
  return merged;
}

std::vector<AlgebraElement> fixed_point_algebra(const FiniteSystem& sys) {
  const GnsResult g = gns_construct(sys);
  const int d = g.space.dimension;
  const std::vector<Matrix> us = orthonormal_unitaries(g);
  Matrix stacked(Eigen::Index(us.size()) * d, d);
  for (std::size_t j = 0; j < us.size(); ++j)
    stacked.middleRows(Eigen::Index(j) * d, d) = us[j] - Matrix::Identity(d, d);
  Matrix kernel = us.empty() ? Matrix(Matrix::Identity(d, d)) : null_space(stacked, kEigenspaceTol);

  const Vector omega = g.space.to_orthonormal(g.space.cyclic_vector);
  Matrix basis(d, kernel.cols());
  Eigen::Index found = 0;
  if (kernel.cols() > 0) basis.col(found++) = omega / omega.norm();
  const Matrix canon = canonical_basis(kernel);
  for (Eigen::Index c = 0; c < canon.cols() && found < kernel.cols(); ++c) {
    Vector v = canon.col(c);
    for (Eigen::Index j = 0; j < found; ++j) v -= basis.col(j) * basis.col(j).dot(v);
    const double n = v.norm();
    if (n < 1e-6) continue;
    basis.col(found++) = v / n;
  }
  std::vector<AlgebraElement> out;
  for (Eigen::Index c = 0; c < found; ++c) {
    Vector x = g.space.from_orthonormal(Vector(basis.col(c)));
    if (c > 0) fix_phase(x);
    out.push_back(g.space.element(x));
  }
  return out;
}

Classification classify_finite(const FiniteSystem& sys) {
  const GnsResult g = gns_construct(sys);
  const std::vector<PointSpectrumEntry> spectrum = point_spectrum(sys);
  Classification c;
  c.gns_dimension = g.space.dimension;
  c.fixed_algebra_dimension = int(fixed_point_algebra(sys).size());
  for (const auto& e : spectrum) c.h0_dimension += e.multiplicity;
  if (c.h0_dimension != c.gns_dimension)
    throw InvariantViolation("eigenvectors span " + std::to_string(c.h0_dimension) + " of " +
                             std::to_string(c.gns_dimension) + " GNS dimensions");
  int trivial = 0;
  for (const auto& e : spectrum)
    if (is_trivial_character(e.eigenvalue)) trivial = e.multiplicity;
  if (trivial != c.fixed_algebra_dimension)
    throw InvariantViolation("fixed-point dimension " + std::to_string(c.fixed_algebra_dimension) +
                             " disagrees with trivial eigenspace dimension " + std::to_string(trivial));

  c.ergodic = c.fixed_algebra_dimension == 1;
  c.weakly_mixing = c.ergodic && spectrum.size() == 1;
  c.discrete_spectrum = c.h0_dimension == c.gns_dimension;
  c.compact = true;
  c.notes.push_back("finite dimension: every orbit closure is compact and H0 is the whole GNS space");

  // Direct epsilon-net over sampled orbit points.
  const std::vector<Matrix> us = orthonormal_unitaries(g);
  std::vector<Vector> centers;
  int samples = 0;
  if (!us.empty()) {
    std::vector<Vector> starts;
    for (int i = 0; i < g.space.dimension; ++i)
      starts.push_back(g.space.to_orthonormal(Vector(AlgebraElement::unit(sys.structure, i).coordinates())));
    for (const auto& exps : orbit_sample_set(sys.group)) {
      const Matrix m = group_matrix(us, exps);
      for (const Vector& s : starts) {
        const Vector p = m * s;
        ++samples;
        bool covered = false;
        for (const Vector& ctr : centers)
          if ((p - ctr).norm() <= kEpsilonNet) {
            covered = true;
            break;
          }
        if (!covered) centers.push_back(p);
      }
    }
  }
  c.epsilon_net_size = int(centers.size());
  c.orbit_samples = samples;

  if (sys.group.is_abelian()) {
    if (c.discrete_spectrum != c.compact)
      throw InvariantViolation("discrete spectrum and compactness disagree for an abelian group");
    c.abelian_consistency_checked = true;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Ergodic averages

CesaroResult cesaro_correlation(const FiniteSystem& sys, const Vector& x, const Vector& y, int n) {
  if (n < 1) throw PreconditionError("averaging length N must be positive");
  const GnsResult g = gns_construct(sys);
  const int d = g.space.dimension;
  if (x.size() != d || y.size() != d)
    throw DimensionMismatch("GNS vectors must have length " + std::to_string(d));
  const std::vector<Matrix> us = orthonormal_unitaries(g);
  const Vector zx = g.space.to_orthonormal(x);
  const Vector zy = g.space.to_orthonormal(y);

  Complex sum = 0.0;
  long long count = 0;
  const int k = int(us.size());
  if (sys.group.is_finite()) {
    Vector v = zx;
    for (int m = 0; m < sys.group.order(); ++m) {
      sum += v.dot(zy);
      ++count;
      v = us[0] * v;
    }
  } else if (k == 1) {
    Vector v = zx;
    for (int m = 1; m <= n; ++m) {
      v = us[0] * v;
      sum += v.dot(zy);
      ++count;
    }
  } else {
    // Nested loops over the box {1..N}^k.
    std::function<void(int, const Vector&)> rec = [&](int level, const Vector& v) {
      if (level < 0) {
        sum += v.dot(zy);
        ++count;
        return;
      }
      Vector w = v;
      for (int m = 1; m <= n; ++m) {
        w = us[std::size_t(level)] * w;
        rec(level - 1, w);
      }
    };
    rec(k - 1, zx);
  }

  CesaroResult r;
  r.value = sum / double(count);
  const Vector& omega = g.space.cyclic_vector;
  const Complex expected = g.space.inner(x, omega) * g.space.inner(omega, y);
  r.deviation = std::abs(r.value - expected);

  const std::vector<JointSpace> spaces = joint_eigenspaces(us, d);
  int trivial = 0;
  for (const auto& js : spaces)
    if (is_trivial_character(js.chi)) trivial += int(js.basis.cols());
  r.ergodic = trivial == 1;
  if (r.ergodic) {
    const double scale = zx.norm() * zy.norm();
    double worst = 0.0;
    if (!sys.group.is_finite()) {
      for (const auto& js : spaces) {
        if (is_trivial_character(js.chi)) continue;
        double gap = 0.0;
        for (Complex c : js.chi) gap = std::max(gap, std::abs(1.0 - c));
        worst = std::max(worst, std::min(1.0, 2.0 / (double(n) * gap)));
      }
    }
    r.bound = scale * (worst + 1e-12);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Mirror system

Matrix MirrorSystem::embed(const AlgebraElement& f) const {
  return space.right_multiplication(sqrt_density * transpose(f) * inverse_sqrt_density);
}

Complex MirrorSystem::state(const Matrix& x) const { return space.inner(space.cyclic_vector, x * space.cyclic_vector); }

MirrorSystem mirror_system(const FiniteSystem& sys) {
  const GnsResult g = gns_construct(sys);
  const int d = g.space.dimension;
  MirrorSystem m;
  m.space = g.space;

  // Solve X pi(e_i) = pi(e_i) X through the normal equations of the
  // stacked Kronecker system.
  const Matrix id = Matrix::Identity(d, d);
  Matrix normal = Matrix::Zero(d * d, d * d);
  for (const Matrix& l : g.space.left_rep) {
    Matrix kron(d * d, d * d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) kron.block(a * d, b * d, d, d) = l(b, a) * id - (a == b ? l : Matrix::Zero(d, d));
    normal.noalias() += kron.adjoint() * kron;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(normal);
  const double cutoff = 1e-10 * std::max(1.0, es.eigenvalues().maxCoeff());
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()(i) > cutoff) continue;
    m.commutant_basis.push_back(Eigen::Map<const Matrix>(es.eigenvectors().col(i).data(), d, d));
  }
  m.commutant_dimension = int(m.commutant_basis.size());
  if (m.commutant_dimension != d)
    throw InvariantViolation("commutant has dimension " + std::to_string(m.commutant_dimension) + ", expected " +
                             std::to_string(d));

  const AlgebraElement& rho = sys.state.density();
  m.sqrt_density = density_power(rho, 0.5);
  m.inverse_sqrt_density = density_power(rho, -0.5);

  for (int j = 0; j < d; ++j) {
    const Matrix x = m.embed(AlgebraElement::unit(sys.structure, j));
    for (const Matrix& l : g.space.left_rep) m.commutation_residual = std::max(m.commutation_residual, (x * l - l * x).norm());
  }
  for (const Matrix& x : m.commutant_basis)
    for (const Matrix& l : g.space.left_rep) m.commutation_residual = std::max(m.commutation_residual, (x * l - l * x).norm());
  if (m.commutation_residual > kInvariantTol)
    throw InvariantViolation("commutant elements fail to commute: residual " + std::to_string(m.commutation_residual));

  m.system.structure = sys.structure;
  m.system.state = FaithfulState(transpose(rho));
  m.system.group = sys.group;
  for (const Automorphism& a : sys.generators) m.system.generators.push_back(a.conjugate());
  m.system.name = sys.name.empty() ? std::string("mirror") : sys.name + "~";
  const ValidationReport report = validate_system(m.system);
  if (!report.valid()) throw InvariantViolation("mirror system is invalid: " + report.summary());
  return m;
}

// ---------------------------------------------------------------------------
// Eigenoperators and spectral projections

AlgebraElement eigenoperator(const FiniteSystem& sys, const std::vector<Complex>& chi) {
  const Classification c = classify_finite(sys);
  if (!c.ergodic) throw PreconditionError("eigenoperators require an ergodic system");
  if (int(chi.size()) != sys.group.generator_count())
    throw DimensionMismatch("character needs one value per generator");
  const std::vector<PointSpectrumEntry> spectrum = point_spectrum(sys);
  auto it = std::find_if(spectrum.begin(), spectrum.end(),
                         [&](const PointSpectrumEntry& e) { return characters_close(e.eigenvalue, chi, 1e-8); });
  if (it == spectrum.end()) throw NotInSpectrum("character is not in the point spectrum");
  if (it->multiplicity != 1)
    throw AmbiguousEigenvalue("eigenvalue has multiplicity " + std::to_string(it->multiplicity));
  const GnsSpace space = gns_space(sys.structure, sys.state);
  AlgebraElement u = space.element(Vector(it->eigenvectors.col(0)));
  const AlgebraElement modulus = u.adjoint() * u;
  const double scale = sys.state(modulus).real();
  const AlgebraElement diff = modulus - scale * AlgebraElement::identity(sys.structure);
  if (diff.norm() > 1e-8 * std::max(1.0, scale))
    throw NonScalarModulus("u^* u is not a multiple of the unit (residual " + std::to_string(diff.norm()) + ")");
  return u * Complex(1.0 / std::sqrt(scale));
}

std::vector<SpectralAtomElement> spectral_atoms(const AlgebraElement& u, double cluster_tol) {
  const BlockStructure& s = u.structure();
  std::vector<SpectralAtomElement> out;
  for (int k = 0; k < s.block_count(); ++k) {
    for (const SpectralAtom& a : normal_spectral_atoms(u.block(k), cluster_tol)) {
      auto it = std::find_if(out.begin(), out.end(),
                             [&](const SpectralAtomElement& e) { return std::abs(e.value - a.value) < cluster_tol; });
      if (it == out.end()) {
        out.push_back({a.value, AlgebraElement::zero(s)});
        it = out.end() - 1;
      }
      it->projection.block(k) += a.basis * a.basis.adjoint();
    }
  }
  std::sort(out.begin(), out.end(),
            [](const SpectralAtomElement& a, const SpectralAtomElement& b) { return principal_arg(a.value) < principal_arg(b.value); });
  return out;
}

double principal_arg(Complex z) {
  const double a = std::arg(z);
  return a <= -kPi + 1e-12 ? kPi : a;
}

static void require_unitary(const AlgebraElement& u) {
  const AlgebraElement one = AlgebraElement::identity(u.structure());
  const double res = std::max((u.adjoint() * u - one).norm(), (u * u.adjoint() - one).norm());
  if (res > 1e-8) throw PreconditionError("element is not unitary (residual " + std::to_string(res) + ")");
}

AlgebraElement spectral_interval_projection(const FiniteSystem& sys, const AlgebraElement& u, double theta1,
                                            double theta2) {
  if (!(u.structure() == sys.structure)) throw DimensionMismatch("element does not belong to the system algebra");
  require_unitary(u);
  constexpr double edge = 1e-12;
  if (!(theta1 < theta2) || theta1 < -kPi - edge || theta2 > kPi + edge)
    throw PreconditionError("interval must satisfy -pi <= theta1 < theta2 <= pi");
  AlgebraElement p = AlgebraElement::zero(sys.structure);
  for (const auto& atom : spectral_atoms(u)) {
    const double a = principal_arg(atom.value);
    if (a > theta1 + edge && a <= theta2 + edge) p += atom.projection;
  }
  return p;
}

CovarianceReport verify_spectral_covariance(const FiniteSystem& sys, const AlgebraElement& u, Complex chi, long long n,
                                            int grid) {
  if (sys.generators.size() != 1) throw PreconditionError("spectral covariance needs a single generator");
  if (grid < 1) throw PreconditionError("grid must have at least one interval");
  require_unitary(u);
  const Automorphism& alpha = sys.generators[0];
  const double eig_res = (alpha(u) - chi * u).norm();
  if (eig_res > 1e-8)
    throw PreconditionError("alpha(u) != chi u (residual " + std::to_string(eig_res) + ")");

  const Automorphism alpha_n = alpha.power(n);
  const std::vector<SpectralAtomElement> atoms = spectral_atoms(u);
  CovarianceReport r;
  r.atoms = int(atoms.size());
  r.intervals = grid;
  const Complex shift = std::pow(chi, -double(n));
  for (const auto& atom : atoms) {
    const AlgebraElement moved = alpha_n(atom.projection);
    const Complex target = shift * atom.value;
    auto it = std::find_if(atoms.begin(), atoms.end(),
                           [&](const SpectralAtomElement& e) { return std::abs(e.value - target) < 1e-6; });
    const double res = it == atoms.end() ? moved.norm() : (moved - it->projection).norm();
    r.atom_residual = std::max(r.atom_residual, res);
  }
  for (int i = 1; i <= grid; ++i) {
    const double lo = -kPi + 2.0 * kPi * (i - 1) / grid;
    const double hi = -kPi + 2.0 * kPi * i / grid;
    const AlgebraElement p = spectral_interval_projection(sys, u, lo, hi);
    const AlgebraElement q = alpha_n(p);
    r.commutation_residual = std::max(r.commutation_residual, (p * q - q * p).norm());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Modular data

AlgebraElement ModularData::sigma(double t, const AlgebraElement& a) const {
  auto phase = [](double t) {
    return [t](double x) { return std::exp(Complex(0.0, t * std::log(x))); };
  };
  const AlgebraElement forward = hermitian_function(density, phase(t));
  const AlgebraElement backward = hermitian_function(density, phase(-t));
  return forward * a * backward;
}

ModularData modular_data(const FiniteSystem& sys) {
  require_valid(sys);
  const GnsSpace space = gns_space(sys.structure, sys.state);
  const int d = space.dimension;
  // S gamma(a) = gamma(a^*) reads S x = K conj(x). In orthonormal
  // coordinates S z = M conj(z) with M = L^* K L^{-T}.
  const Matrix k = adjoint_index_map(sys.structure);
  const Matrix l_inv_t = space.factor.transpose().triangularView<Eigen::Upper>().solve(Matrix::Identity(d, d));
  const Matrix m = space.factor.adjoint() * k * l_inv_t;
  const Matrix delta_on = hermitian_part(Matrix(m.transpose() * m.conjugate()));
  Eigen::SelfAdjointEigenSolver<Matrix> es(delta_on);
  if (es.eigenvalues().minCoeff() <= 0.0) throw InvariantViolation("modular operator is not positive");
  const Vector inv_sqrt = es.eigenvalues().unaryExpr([](double x) { return Complex(1.0 / std::sqrt(x)); });
  const Matrix delta_inv_sqrt = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().adjoint();
  const Matrix j_on = m * delta_inv_sqrt.conjugate();

  ModularData md;
  md.delta = space.from_orthonormal(delta_on);
  md.conjugation = inverse_adjoint_factor(space.factor) * j_on * space.factor.transpose();
  md.density = sys.state.density();

  const double involution = (md.conjugation * md.conjugation.conjugate() - Matrix::Identity(d, d)).norm();
  const double fixes_omega = (md.apply_conjugation(space.cyclic_vector) - space.cyclic_vector).norm();
  if (involution > kInvariantTol || fixes_omega > kInvariantTol)
    throw InvariantViolation("modular conjugation fails: |J^2 - 1| = " + std::to_string(involution) +
                             ", |J Omega - Omega| = " + std::to_string(fixes_omega));
  return md;
}

ModularInvarianceReport modular_invariance_check(const FiniteSystem& sys, const AlgebraElement& p,
                                                 const std::vector<double>& t_samples) {
  if (!(p.structure() == sys.structure)) throw DimensionMismatch("element does not belong to the system algebra");
  const double proj = std::max((p.adjoint() - p).norm(), (p * p - p).norm());
  if (proj > 1e-8) throw PreconditionError("element is not a projection (residual " + std::to_string(proj) + ")");
  const ModularData md = modular_data(sys);
  const GnsSpace space = gns_space(sys.structure, sys.state);
  ModularInvarianceReport r;
  for (double t : t_samples) r.sigma_residual = std::max(r.sigma_residual, (md.sigma(t, p) - p).norm());
  const Vector x = space.gamma(p);
  r.conjugation_residual = space.norm(md.apply_conjugation(x) - x);
  return r;
}

// ---------------------------------------------------------------------------
// Commutator averages

std::vector<double> asymptotic_abelianness_profile(const FiniteSystem& sys, const AlgebraElement& a,
                                                   const AlgebraElement& b, int n) {
  require_valid(sys);
  if (n < 1) throw PreconditionError("profile length N must be positive");
  if (!(a.structure() == sys.structure) || !(b.structure() == sys.structure))
    throw DimensionMismatch("elements do not belong to the system algebra");
  auto comm = [&](const AlgebraElement& moved) { return (a * moved - moved * a).norm(); };
  std::vector<double> out;
  switch (sys.group.kind()) {
    case GroupDescriptor::Kind::FiniteCyclic: {
      double total = 0.0;
      AlgebraElement moved = b;
      for (int m = 0; m < sys.group.order(); ++m) {
        total += comm(moved);
        moved = sys.generators[0](moved);
      }
      out.assign(std::size_t(n), total / sys.group.order());
      break;
    }
    case GroupDescriptor::Kind::Integers: {
      double total = 0.0;
      AlgebraElement moved = b;
      for (int m = 1; m <= n; ++m) {
        moved = sys.generators[0](moved);
        total += comm(moved);
        out.push_back(total / m);
      }
      break;
    }
    case GroupDescriptor::Kind::IntegerLattice: {
      // Bucket each box point by its largest coordinate (the shell it
      // first appears in).
      const int k = sys.group.generator_count();
      std::vector<double> shell(std::size_t(n) + 1, 0.0);
      for_each_tuple(k, 1, n, [&](const std::vector<long long>& t) {
        const long long top = *std::max_element(t.begin(), t.end());
        shell[std::size_t(top)] += comm(sys.action(t)(b));
      });
      double total = 0.0;
      for (int m = 1; m <= n; ++m) {
        total += shell[std::size_t(m)];
        out.push_back(total / std::pow(double(m), k));
      }
      break;
    }
  }
  return out;
}

}  // namespace ncjoin
