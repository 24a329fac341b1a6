#pragma once

// Finite-dimensional W*-dynamical systems: direct sums of full matrix blocks,
// faithful states given by block-diagonal densities, and automorphisms of the
// form a -> u * pi(a) * u^* where pi permutes blocks of equal size.

#include "ncjoin/linalg.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncjoin {

inline constexpr double kValidationTol = 1e-9;
inline constexpr double kFaithfulFloor = 1e-12;
inline constexpr double kClusterTol = 1e-8;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Malformed dimensions or block data; the message names the offending block.
struct StructuralError : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
/// An operation that requires a valid system was handed an invalid one.
struct InvalidSystem : Error {
  using Error::Error;
};
struct PreconditionError : Error {
  using Error::Error;
};
/// An internal consistency check failed. Never expected on valid input.
struct InvariantViolation : Error {
  using Error::Error;
};

class BlockStructure {
 public:
  struct Position {
    int block;
    int row;
    int col;
  };

  BlockStructure() = default;
  explicit BlockStructure(std::vector<int> sizes);

  const std::vector<int>& sizes() const { return sizes_; }
  int block_count() const { return int(sizes_.size()); }
  int block_size(int k) const { return sizes_.at(std::size_t(k)); }
  /// Sum of n_k^2: the dimension of the algebra and of its GNS space.
  int dimension() const { return dimension_; }
  /// Sum of n_k: the size of the defining block-diagonal representation.
  int representation_size() const { return representation_size_; }

  /// Canonical basis: matrix units, block-major then row-major.
  Position locate(int index) const;
  int index(int block, int row, int col) const;
  int block_offset(int block) const { return offsets_.at(std::size_t(block)); }
  int representation_offset(int block) const { return rep_offsets_.at(std::size_t(block)); }

  /// Block structure of the tensor product: blocks n_k * m_l, k-major.
  BlockStructure tensor(const BlockStructure& other) const;

  bool operator==(const BlockStructure& other) const { return sizes_ == other.sizes_; }

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  std::vector<int> rep_offsets_;
  int dimension_ = 0;
  int representation_size_ = 0;
};

class AlgebraElement {
 public:
  AlgebraElement() = default;
  AlgebraElement(BlockStructure structure, std::vector<Matrix> blocks);

  static AlgebraElement zero(const BlockStructure& s);
  static AlgebraElement identity(const BlockStructure& s);
  /// The canonical matrix unit with the given basis index.
  static AlgebraElement unit(const BlockStructure& s, int index);
  static AlgebraElement from_coordinates(const BlockStructure& s, const Vector& coords);
  /// Block-diagonal matrix of size representation_size(); off-block entries
  /// above `tol` raise StructuralError naming the block.
  static AlgebraElement from_block_diagonal(const BlockStructure& s, const Matrix& full, double tol = 1e-12);

  const BlockStructure& structure() const { return structure_; }
  const std::vector<Matrix>& blocks() const { return blocks_; }
  const Matrix& block(int k) const { return blocks_.at(std::size_t(k)); }
  Matrix& block(int k) { return blocks_.at(std::size_t(k)); }

  /// Coefficients in the canonical basis.
  Vector coordinates() const;
  Matrix to_block_diagonal() const;

  AlgebraElement adjoint() const;
  Complex trace() const;
  /// C*-norm: largest singular value over blocks.
  double norm() const;
  /// Entrywise maximum modulus.
  double max_abs() const;

  AlgebraElement& operator+=(const AlgebraElement& o);
  AlgebraElement& operator-=(const AlgebraElement& o);
  AlgebraElement& operator*=(Complex c);

  friend AlgebraElement operator+(AlgebraElement a, const AlgebraElement& b) { return a += b; }
  friend AlgebraElement operator-(AlgebraElement a, const AlgebraElement& b) { return a -= b; }
  friend AlgebraElement operator*(Complex c, AlgebraElement a) { return a *= c; }
  friend AlgebraElement operator*(AlgebraElement a, Complex c) { return a *= c; }
  friend AlgebraElement operator*(const AlgebraElement& a, const AlgebraElement& b);

 private:
  BlockStructure structure_;
  std::vector<Matrix> blocks_;
};

/// Elementary tensor a (x) b in the algebra over structure().tensor(...).
AlgebraElement tensor(const AlgebraElement& a, const AlgebraElement& b);

/// Blockwise transpose; an anti-automorphism of the block algebra.
AlgebraElement transpose(const AlgebraElement& a);

/// Blockwise f(h) for a Hermitian element h (eigenvalue calculus).
template <typename F>
AlgebraElement hermitian_function(const AlgebraElement& h, F&& f) {
  std::vector<Matrix> out;
  for (const Matrix& b : h.blocks()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(b));
    Vector d = es.eigenvalues().unaryExpr([&](double x) { return Complex(f(x)); });
    out.push_back(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint());
  }
  return AlgebraElement(h.structure(), std::move(out));
}

class FaithfulState {
 public:
  FaithfulState() = default;
  explicit FaithfulState(AlgebraElement density);

  const AlgebraElement& density() const { return density_; }
  const BlockStructure& structure() const { return density_.structure(); }

  /// mu(a) = trace(rho * a).
  Complex operator()(const AlgebraElement& a) const;

 private:
  AlgebraElement density_;
};

Complex state_eval(const FaithfulState& state, const AlgebraElement& a);

class Automorphism {
 public:
  Automorphism() = default;
  /// `permutation[k]` is the block that block k is moved to. `conjugator` is a
  /// block-diagonal unitary applied after the permutation.
  Automorphism(BlockStructure structure, std::vector<int> permutation, AlgebraElement conjugator);

  static Automorphism identity(const BlockStructure& s);

  const BlockStructure& structure() const { return structure_; }
  const std::vector<int>& permutation() const { return permutation_; }
  const AlgebraElement& conjugator() const { return conjugator_; }

  AlgebraElement operator()(const AlgebraElement& a) const;

  /// (this o inner)(a) = this(inner(a)).
  Automorphism compose(const Automorphism& inner) const;
  Automorphism inverse() const;
  Automorphism power(long long n) const;
  /// Same permutation, entrywise conjugated unitary.
  Automorphism conjugate() const;

  /// Matrix of the action in canonical coordinates.
  Matrix coordinate_matrix() const;

 private:
  BlockStructure structure_;
  std::vector<int> permutation_;
  AlgebraElement conjugator_;
};

AlgebraElement apply_automorphism(const Automorphism& alpha, const AlgebraElement& a);

/// Tensor product automorphism acting on structure().tensor(...).
Automorphism tensor(const Automorphism& a, const Automorphism& b);

class GroupDescriptor {
 public:
  enum class Kind { Integers, IntegerLattice, FiniteCyclic };

  static GroupDescriptor integers() { return GroupDescriptor(Kind::Integers, 1, 0); }
  static GroupDescriptor lattice(int rank) { return GroupDescriptor(Kind::IntegerLattice, rank, 0); }
  static GroupDescriptor cyclic(int order) { return GroupDescriptor(Kind::FiniteCyclic, 1, order); }

  Kind kind() const { return kind_; }
  int generator_count() const { return rank_; }
  int order() const { return order_; }
  bool is_finite() const { return kind_ == Kind::FiniteCyclic; }
  bool is_abelian() const { return true; }

  /// Folner set Lambda_N as exponent tuples: {1..N} for Z, {1..N}^k for
  /// Z^k, the whole group {0..m-1} for Z_m.
  std::vector<std::vector<long long>> folner_set(int n) const;

  bool operator==(const GroupDescriptor& o) const {
    return kind_ == o.kind_ && rank_ == o.rank_ && order_ == o.order_;
  }

 private:
  GroupDescriptor(Kind kind, int rank, int order) : kind_(kind), rank_(rank), order_(order) {}
  Kind kind_ = Kind::Integers;
  int rank_ = 1;
  int order_ = 0;
};

struct FiniteSystem {
  BlockStructure structure;
  FaithfulState state;
  GroupDescriptor group = GroupDescriptor::integers();
  std::vector<Automorphism> generators;
  std::string name;

  /// alpha_g for g given as generator exponents, evaluated as the ordered
  /// product of generator powers.
  Automorphism action(const std::vector<long long>& exponents) const;
};

struct Violation {
  enum class Kind {
    StateNotHermitian,
    StateTrace,
    StateNotFaithful,
    ConjugatorNotUnitary,
    StateNotInvariant,
    GeneratorsDoNotCommute,
    GeneratorOrder,
    GeneratorCount,
  };
  Kind kind;
  std::optional<int> generator;
  std::optional<int> basis_index;
  double residual = 0.0;
  std::string message;
};

std::string to_string(Violation::Kind kind);

struct ValidationReport {
  std::vector<Violation> violations;
  bool valid() const { return violations.empty(); }
  double max_residual(Violation::Kind kind) const;
  std::string summary() const;
};

/// Checks every system invariant; structural problems throw StructuralError.
ValidationReport validate_system(const FiniteSystem& sys);

/// Throws InvalidSystem carrying the report summary when `sys` is invalid.
void require_valid(const FiniteSystem& sys);

}  // namespace ncjoin
