#pragma once

// GNS construction and the spectral side of a finite system: the unitary
// implementation of the dynamics, point spectrum, classification, ergodic
// averages, the commutant ("mirror") system, eigenoperators, spectral
// projections, modular data and commutator averages.

#include "ncjoin/algebra.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ncjoin {

/// GNS space of (A, mu) in canonical coordinates: gamma(a) is the coordinate
/// vector of a and <x, y> = x^* G y with G_ij = mu(e_i^* e_j).
struct GnsSpace {
  BlockStructure structure;
  int dimension = 0;
  Matrix gram;
  /// Lower-triangular Cholesky factor, gram = factor * factor^*.
  Matrix factor;
  std::vector<Matrix> left_rep;
  Vector cyclic_vector;

  Vector gamma(const AlgebraElement& a) const { return a.coordinates(); }
  AlgebraElement element(const Vector& x) const { return AlgebraElement::from_coordinates(structure, x); }

  Complex inner(const Vector& x, const Vector& y) const { return x.dot(gram * y); }
  double norm(const Vector& x) const { return std::sqrt(std::max(0.0, inner(x, x).real())); }

  /// z = factor^* x: coordinates in which the inner product is Euclidean.
  Vector to_orthonormal(const Vector& x) const;
  Vector from_orthonormal(const Vector& z) const;
  /// factor^* op factor^{-*}.
  Matrix to_orthonormal(const Matrix& op) const;
  Matrix from_orthonormal(const Matrix& op) const;

  /// Operator norm with respect to the GNS inner product.
  double operator_norm(const Matrix& op) const;
  /// Hilbert-space adjoint: G^{-1} op^* G.
  Matrix adjoint(const Matrix& op) const;

  /// Matrix of x -> a x and x -> x a on GNS coordinates.
  Matrix left_multiplication(const AlgebraElement& a) const;
  Matrix right_multiplication(const AlgebraElement& a) const;
};

/// U_g gamma(a) = gamma(alpha_g(a)), one matrix per generator.
struct UnitaryRep {
  std::vector<Matrix> generators;
};

struct GnsResult {
  GnsSpace space;
  UnitaryRep unitaries;
};

GnsResult gns_construct(const FiniteSystem& sys);

/// GNS space of a faithful state alone.
GnsSpace gns_space(const BlockStructure& s, const FaithfulState& state);

struct PointSpectrumEntry {
  /// One unimodular value per generator.
  std::vector<Complex> eigenvalue;
  int multiplicity = 0;
  /// Columns orthonormal for the GNS inner product.
  Matrix eigenvectors;
};

struct Classification {
  bool ergodic = false;
  bool weakly_mixing = false;
  bool discrete_spectrum = false;
  bool compact = false;
  int fixed_algebra_dimension = 0;
  int h0_dimension = 0;
  int gns_dimension = 0;
  /// Greedy 0.1-net over sampled orbit points U_g gamma(e_i).
  int epsilon_net_size = 0;
  int orbit_samples = 0;
  /// Discrete spectrum and compactness were checked to coincide (abelian G).
  bool abelian_consistency_checked = false;
  std::vector<std::string> notes;
};

std::vector<PointSpectrumEntry> point_spectrum(const FiniteSystem& sys);
Classification classify_finite(const FiniteSystem& sys);

/// Basis of the fixed-point algebra, orthonormal for <a, b> = mu(a^* b),
/// starting with the unit.
std::vector<AlgebraElement> fixed_point_algebra(const FiniteSystem& sys);

struct CesaroResult {
  Complex value;
  double deviation = 0.0;
  /// Remainder bound, available when the system is ergodic.
  std::optional<double> bound;
  bool ergodic = false;
};

/// Average of <U_g x, y> over the Folner set Lambda_N, compared with
/// <x, Omega><Omega, y>.
CesaroResult cesaro_correlation(const FiniteSystem& sys, const Vector& x, const Vector& y, int n);

/// The commutant pi(A)' in GNS coordinates and the system it carries.
/// `system` is the commutant identified with the block algebra through
/// f -> J pi(f^T)^* J = R(rho^{1/2} f^T rho^{-1/2}); its state has density
/// rho^T and its generators carry the conjugated unitaries.
struct MirrorSystem {
  std::vector<Matrix> commutant_basis;
  /// Dimension of the solution space of [X, pi(e_i)] = 0.
  int commutant_dimension = 0;
  double commutation_residual = 0.0;
  FiniteSystem system;
  AlgebraElement sqrt_density;
  AlgebraElement inverse_sqrt_density;
  GnsSpace space;

  /// The commutant operator representing the mirror element f.
  Matrix embed(const AlgebraElement& f) const;
  /// mu~(X) = <Omega, X Omega>.
  Complex state(const Matrix& x) const;
};

MirrorSystem mirror_system(const FiniteSystem& sys);

struct NotInSpectrum : PreconditionError {
  using PreconditionError::PreconditionError;
};
struct AmbiguousEigenvalue : PreconditionError {
  using PreconditionError::PreconditionError;
};
struct NonScalarModulus : PreconditionError {
  using PreconditionError::PreconditionError;
};

/// Unitary u with alpha_g(u) = chi(g) u, normalized so u^* u = 1.
AlgebraElement eigenoperator(const FiniteSystem& sys, const std::vector<Complex>& chi);

/// Spectral atoms of a normal element: distinct eigenvalues with their
/// spectral projections (summed over blocks).
struct SpectralAtomElement {
  Complex value;
  AlgebraElement projection;
};
std::vector<SpectralAtomElement> spectral_atoms(const AlgebraElement& u, double cluster_tol = kClusterTol);

/// Principal argument in (-pi, pi].
double principal_arg(Complex z);

/// Sum of spectral projections of u whose eigenvalue argument lies in
/// (theta1, theta2].
AlgebraElement spectral_interval_projection(const FiniteSystem& sys, const AlgebraElement& u, double theta1,
                                            double theta2);

struct CovarianceReport {
  /// max_v |alpha^n(E{v}) - E{chi^{-n} v}|
  double atom_residual = 0.0;
  /// max over grid intervals of |P alpha^n(P) - alpha^n(P) P|
  double commutation_residual = 0.0;
  int atoms = 0;
  int intervals = 0;
};

CovarianceReport verify_spectral_covariance(const FiniteSystem& sys, const AlgebraElement& u, Complex chi, long long n,
                                            int grid = 12);

/// Modular objects of (A, mu). `conjugation` is the matrix part of the
/// antiunitary J: J x = conjugation * conj(x) in GNS coordinates.
struct ModularData {
  Matrix delta;
  Matrix conjugation;
  AlgebraElement density;

  /// sigma_t(a) = rho^{it} a rho^{-it}.
  AlgebraElement sigma(double t, const AlgebraElement& a) const;
  Vector apply_conjugation(const Vector& x) const { return conjugation * x.conjugate(); }
};

ModularData modular_data(const FiniteSystem& sys);

struct ModularInvarianceReport {
  double sigma_residual = 0.0;
  /// |J P Omega - P Omega| in the GNS norm.
  double conjugation_residual = 0.0;
};

inline const std::vector<double> kDefaultModularSamples = {0.1, 0.7, 1.3};

ModularInvarianceReport modular_invariance_check(const FiniteSystem& sys, const AlgebraElement& p,
                                                 const std::vector<double>& t_samples = kDefaultModularSamples);

/// A(n) = |Lambda_n|^{-1} sum_{g in Lambda_n} |[a, alpha_g(b)]| for n = 1..N,
/// operator norm.
std::vector<double> asymptotic_abelianness_profile(const FiniteSystem& sys, const AlgebraElement& a,
                                                   const AlgebraElement& b, int n);

}  // namespace ncjoin
