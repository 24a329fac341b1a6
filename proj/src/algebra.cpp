#include "ncjoin/algebra.hpp"

#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

namespace ncjoin {

// ---------------------------------------------------------------------------
// BlockStructure

BlockStructure::BlockStructure(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.empty()) throw StructuralError("block structure must contain at least one block");
  for (std::size_t k = 0; k < sizes_.size(); ++k) {
    if (sizes_[k] < 1)
      throw StructuralError("block " + std::to_string(k) + " has non-positive size " + std::to_string(sizes_[k]));
    offsets_.push_back(dimension_);
    rep_offsets_.push_back(representation_size_);
    dimension_ += sizes_[k] * sizes_[k];
    representation_size_ += sizes_[k];
  }
}

BlockStructure::Position BlockStructure::locate(int index) const {
  if (index < 0 || index >= dimension_)
    throw DimensionMismatch("basis index " + std::to_string(index) + " out of range [0, " +
                            std::to_string(dimension_) + ")");
  int k = int(std::upper_bound(offsets_.begin(), offsets_.end(), index) - offsets_.begin()) - 1;
  const int local = index - offsets_[std::size_t(k)];
  const int n = sizes_[std::size_t(k)];
  return {k, local / n, local % n};
}

int BlockStructure::index(int block, int row, int col) const {
  const int n = block_size(block);
  if (row < 0 || row >= n || col < 0 || col >= n)
    throw DimensionMismatch("matrix unit (" + std::to_string(row) + "," + std::to_string(col) +
                            ") outside block " + std::to_string(block));
  return offsets_[std::size_t(block)] + row * n + col;
}

BlockStructure BlockStructure::tensor(const BlockStructure& other) const {
  std::vector<int> out;
  out.reserve(sizes_.size() * other.sizes_.size());
  for (int n : sizes_)
    for (int m : other.sizes_) out.push_back(n * m);
  return BlockStructure(std::move(out));
}

// ---------------------------------------------------------------------------
// AlgebraElement

AlgebraElement::AlgebraElement(BlockStructure structure, std::vector<Matrix> blocks)
    : structure_(std::move(structure)), blocks_(std::move(blocks)) {
  if (int(blocks_.size()) != structure_.block_count())
    throw StructuralError("expected " + std::to_string(structure_.block_count()) + " blocks, got " +
                          std::to_string(blocks_.size()));
  for (int k = 0; k < structure_.block_count(); ++k) {
    const Matrix& b = blocks_[std::size_t(k)];
    const int n = structure_.block_size(k);
    if (b.rows() != n || b.cols() != n)
      throw StructuralError("block " + std::to_string(k) + " is " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()) + ", expected " + std::to_string(n) + "x" +
                            std::to_string(n));
  }
}

AlgebraElement AlgebraElement::zero(const BlockStructure& s) {
  std::vector<Matrix> blocks;
  for (int n : s.sizes()) blocks.push_back(Matrix::Zero(n, n));
  return AlgebraElement(s, std::move(blocks));
}

AlgebraElement AlgebraElement::identity(const BlockStructure& s) {
  std::vector<Matrix> blocks;
  for (int n : s.sizes()) blocks.push_back(Matrix::Identity(n, n));
  return AlgebraElement(s, std::move(blocks));
}

AlgebraElement AlgebraElement::unit(const BlockStructure& s, int index) {
  auto pos = s.locate(index);
  AlgebraElement e = zero(s);
  e.blocks_[std::size_t(pos.block)](pos.row, pos.col) = 1.0;
  return e;
}

AlgebraElement AlgebraElement::from_coordinates(const BlockStructure& s, const Vector& coords) {
  if (coords.size() != s.dimension())
    throw DimensionMismatch("coordinate vector has length " + std::to_string(coords.size()) + ", expected " +
                            std::to_string(s.dimension()));
  std::vector<Matrix> blocks;
  for (int k = 0; k < s.block_count(); ++k) {
    const int n = s.block_size(k);
    Matrix b(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) b(r, c) = coords(s.block_offset(k) + r * n + c);
    blocks.push_back(std::move(b));
  }
  return AlgebraElement(s, std::move(blocks));
}

AlgebraElement AlgebraElement::from_block_diagonal(const BlockStructure& s, const Matrix& full, double tol) {
  const int size = s.representation_size();
  if (full.rows() != size || full.cols() != size)
    throw StructuralError("block-diagonal matrix is " + std::to_string(full.rows()) + "x" +
                          std::to_string(full.cols()) + ", expected " + std::to_string(size) + "x" +
                          std::to_string(size));
  std::vector<Matrix> blocks;
  for (int k = 0; k < s.block_count(); ++k) {
    const int off = s.representation_offset(k);
    const int n = s.block_size(k);
    for (int r = off; r < off + n; ++r)
      for (int c = 0; c < size; ++c)
        if ((c < off || c >= off + n) && std::abs(full(r, c)) > tol)
          throw StructuralError("block " + std::to_string(k) + " has nonzero entry outside its diagonal block at (" +
                                std::to_string(r) + "," + std::to_string(c) + ")");
    blocks.push_back(full.block(off, off, n, n));
  }
  return AlgebraElement(s, std::move(blocks));
}

Vector AlgebraElement::coordinates() const {
  Vector v(structure_.dimension());
  for (int k = 0; k < structure_.block_count(); ++k) {
    const int n = structure_.block_size(k);
    const Matrix& b = blocks_[std::size_t(k)];
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) v(structure_.block_offset(k) + r * n + c) = b(r, c);
  }
  return v;
}

Matrix AlgebraElement::to_block_diagonal() const {
  const int size = structure_.representation_size();
  Matrix full = Matrix::Zero(size, size);
  for (int k = 0; k < structure_.block_count(); ++k) {
    const int off = structure_.representation_offset(k);
    const int n = structure_.block_size(k);
    full.block(off, off, n, n) = blocks_[std::size_t(k)];
  }
  return full;
}

AlgebraElement AlgebraElement::adjoint() const {
  std::vector<Matrix> out;
  for (const Matrix& b : blocks_) out.push_back(b.adjoint());
  return AlgebraElement(structure_, std::move(out));
}

Complex AlgebraElement::trace() const {
  Complex t = 0.0;
  for (const Matrix& b : blocks_) t += b.trace();
  return t;
}

double AlgebraElement::norm() const {
  double n = 0.0;
  for (const Matrix& b : blocks_) n = std::max(n, operator_norm(b));
  return n;
}

double AlgebraElement::max_abs() const {
  double n = 0.0;
  for (const Matrix& b : blocks_)
    if (b.size()) n = std::max(n, b.cwiseAbs().maxCoeff());
  return n;
}

static void require_same(const BlockStructure& a, const BlockStructure& b) {
  if (!(a == b)) throw DimensionMismatch("algebra elements have different block structures");
}

AlgebraElement& AlgebraElement::operator+=(const AlgebraElement& o) {
  require_same(structure_, o.structure_);
  for (std::size_t k = 0; k < blocks_.size(); ++k) blocks_[k] += o.blocks_[k];
  return *this;
}

AlgebraElement& AlgebraElement::operator-=(const AlgebraElement& o) {
  require_same(structure_, o.structure_);
  for (std::size_t k = 0; k < blocks_.size(); ++k) blocks_[k] -= o.blocks_[k];
  return *this;
}

AlgebraElement& AlgebraElement::operator*=(Complex c) {
  for (Matrix& b : blocks_) b *= c;
  return *this;
}

AlgebraElement operator*(const AlgebraElement& a, const AlgebraElement& b) {
  require_same(a.structure(), b.structure());
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < a.blocks().size(); ++k) out.push_back(a.blocks()[k] * b.blocks()[k]);
  return AlgebraElement(a.structure(), std::move(out));
}

AlgebraElement tensor(const AlgebraElement& a, const AlgebraElement& b) {
  std::vector<Matrix> out;
  for (const Matrix& x : a.blocks()) {
    for (const Matrix& y : b.blocks()) {
      Matrix k(x.rows() * y.rows(), x.cols() * y.cols());
      for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index c = 0; c < x.cols(); ++c)
          k.block(r * y.rows(), c * y.cols(), y.rows(), y.cols()) = x(r, c) * y;
      out.push_back(std::move(k));
    }
  }
  return AlgebraElement(a.structure().tensor(b.structure()), std::move(out));
}

AlgebraElement transpose(const AlgebraElement& a) {
  std::vector<Matrix> out;
  for (const Matrix& b : a.blocks()) out.push_back(b.transpose());
  return AlgebraElement(a.structure(), std::move(out));
}

// ---------------------------------------------------------------------------
// FaithfulState

FaithfulState::FaithfulState(AlgebraElement density) : density_(std::move(density)) {}

Complex FaithfulState::operator()(const AlgebraElement& a) const {
  require_same(density_.structure(), a.structure());
  Complex t = 0.0;
  for (std::size_t k = 0; k < a.blocks().size(); ++k)
    t += (density_.blocks()[k].cwiseProduct(a.blocks()[k].transpose())).sum();
  return t;
}

Complex state_eval(const FaithfulState& state, const AlgebraElement& a) { return state(a); }

// ---------------------------------------------------------------------------
// Automorphism

Automorphism::Automorphism(BlockStructure structure, std::vector<int> permutation, AlgebraElement conjugator)
    : structure_(std::move(structure)), permutation_(std::move(permutation)), conjugator_(std::move(conjugator)) {
  const int m = structure_.block_count();
  if (int(permutation_.size()) != m)
    throw StructuralError("block permutation has length " + std::to_string(permutation_.size()) + ", expected " +
                          std::to_string(m));
  std::vector<bool> seen(std::size_t(m), false);
  for (int k = 0; k < m; ++k) {
    const int target = permutation_[std::size_t(k)];
    if (target < 0 || target >= m || seen[std::size_t(target)])
      throw StructuralError("block permutation is not a bijection at block " + std::to_string(k));
    seen[std::size_t(target)] = true;
    if (structure_.block_size(target) != structure_.block_size(k))
      throw StructuralError("block permutation sends block " + std::to_string(k) + " (size " +
                            std::to_string(structure_.block_size(k)) + ") to block " + std::to_string(target) +
                            " (size " + std::to_string(structure_.block_size(target)) + ")");
  }
  if (!(conjugator_.structure() == structure_))
    throw StructuralError("conjugator block structure does not match the algebra");
}

Automorphism Automorphism::identity(const BlockStructure& s) {
  std::vector<int> perm(std::size_t(s.block_count()));
  std::iota(perm.begin(), perm.end(), 0);
  return Automorphism(s, std::move(perm), AlgebraElement::identity(s));
}

AlgebraElement Automorphism::operator()(const AlgebraElement& a) const {
  require_same(structure_, a.structure());
  std::vector<Matrix> out(a.blocks().size());
  for (std::size_t k = 0; k < a.blocks().size(); ++k) {
    const std::size_t j = std::size_t(permutation_[k]);
    const Matrix& u = conjugator_.blocks()[j];
    out[j] = u * a.blocks()[k] * u.adjoint();
  }
  return AlgebraElement(structure_, std::move(out));
}

Automorphism Automorphism::compose(const Automorphism& inner) const {
  require_same(structure_, inner.structure_);
  const std::size_t m = permutation_.size();
  std::vector<int> perm(m);
  std::vector<int> outer_inverse(m);
  for (std::size_t k = 0; k < m; ++k) {
    perm[k] = permutation_[std::size_t(inner.permutation_[k])];
    outer_inverse[std::size_t(permutation_[k])] = int(k);
  }
  std::vector<Matrix> u(m);
  for (std::size_t j = 0; j < m; ++j)
    u[j] = conjugator_.blocks()[j] * inner.conjugator_.blocks()[std::size_t(outer_inverse[j])];
  return Automorphism(structure_, std::move(perm), AlgebraElement(structure_, std::move(u)));
}

Automorphism Automorphism::inverse() const {
  const std::size_t m = permutation_.size();
  std::vector<int> perm(m);
  for (std::size_t k = 0; k < m; ++k) perm[std::size_t(permutation_[k])] = int(k);
  std::vector<Matrix> u(m);
  for (std::size_t k = 0; k < m; ++k) u[k] = conjugator_.blocks()[std::size_t(permutation_[k])].adjoint();
  return Automorphism(structure_, std::move(perm), AlgebraElement(structure_, std::move(u)));
}

Automorphism Automorphism::power(long long n) const {
  Automorphism base = n < 0 ? inverse() : *this;
  unsigned long long e = n < 0 ? static_cast<unsigned long long>(-(n + 1)) + 1ULL : static_cast<unsigned long long>(n);
  Automorphism result = identity(structure_);
  while (e) {
    if (e & 1ULL) result = result.compose(base);
    base = base.compose(base);
    e >>= 1ULL;
  }
  return result;
}

Automorphism Automorphism::conjugate() const {
  std::vector<Matrix> u;
  for (const Matrix& b : conjugator_.blocks()) u.push_back(b.conjugate());
  return Automorphism(structure_, permutation_, AlgebraElement(structure_, std::move(u)));
}

Matrix Automorphism::coordinate_matrix() const {
  const int d = structure_.dimension();
  Matrix m = Matrix::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    auto pos = structure_.locate(j);
    const int target = permutation_[std::size_t(pos.block)];
    const Matrix& u = conjugator_.block(target);
    const int n = structure_.block_size(target);
    // u E_rs u^* = u[:, r] u[:, s]^*
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        m(structure_.block_offset(target) + r * n + c, j) = u(r, pos.row) * std::conj(u(c, pos.col));
  }
  return m;
}

AlgebraElement apply_automorphism(const Automorphism& alpha, const AlgebraElement& a) { return alpha(a); }

Automorphism tensor(const Automorphism& a, const Automorphism& b) {
  const BlockStructure s = a.structure().tensor(b.structure());
  const int mb = b.structure().block_count();
  std::vector<int> perm;
  for (int k : a.permutation())
    for (int l : b.permutation()) perm.push_back(k * mb + l);
  return Automorphism(s, std::move(perm), tensor(a.conjugator(), b.conjugator()));
}

// ---------------------------------------------------------------------------
// GroupDescriptor / FiniteSystem

std::vector<std::vector<long long>> GroupDescriptor::folner_set(int n) const {
  std::vector<std::vector<long long>> out;
  switch (kind_) {
    case Kind::Integers:
      for (long long i = 1; i <= n; ++i) out.push_back({i});
      break;
    case Kind::IntegerLattice: {
      std::vector<long long> cur(std::size_t(rank_), 1);
      if (n < 1) break;
      while (true) {
        out.push_back(cur);
        int pos = rank_ - 1;
        while (pos >= 0 && cur[std::size_t(pos)] == n) cur[std::size_t(pos--)] = 1;
        if (pos < 0) break;
        ++cur[std::size_t(pos)];
      }
      break;
    }
    case Kind::FiniteCyclic:
      for (long long i = 0; i < order_; ++i) out.push_back({i});
      break;
  }
  return out;
}

Automorphism FiniteSystem::action(const std::vector<long long>& exponents) const {
  if (exponents.size() != generators.size())
    throw DimensionMismatch("group element has " + std::to_string(exponents.size()) + " exponents, system has " +
                            std::to_string(generators.size()) + " generators");
  Automorphism result = Automorphism::identity(structure);
  for (std::size_t i = 0; i < generators.size(); ++i) result = result.compose(generators[i].power(exponents[i]));
  return result;
}

// ---------------------------------------------------------------------------
// Validation

std::string to_string(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::StateNotHermitian: return "state_not_hermitian";
    case Violation::Kind::StateTrace: return "state_trace";
    case Violation::Kind::StateNotFaithful: return "state_not_faithful";
    case Violation::Kind::ConjugatorNotUnitary: return "conjugator_not_unitary";
    case Violation::Kind::StateNotInvariant: return "state_not_invariant";
    case Violation::Kind::GeneratorsDoNotCommute: return "generators_do_not_commute";
    case Violation::Kind::GeneratorOrder: return "generator_order";
    case Violation::Kind::GeneratorCount: return "generator_count";
  }
  return "unknown";
}

double ValidationReport::max_residual(Violation::Kind kind) const {
  double r = 0.0;
  for (const auto& v : violations)
    if (v.kind == kind) r = std::max(r, v.residual);
  return r;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const auto& v : violations) os << to_string(v.kind) << ": " << v.message << " (residual " << v.residual << ")\n";
  return os.str();
}

ValidationReport validate_system(const FiniteSystem& sys) {
  ValidationReport report;
  const BlockStructure& s = sys.structure;
  if (!(sys.state.structure() == s)) throw StructuralError("state density does not match the block structure");

  const AlgebraElement& rho = sys.state.density();
  double hermitian_residual = 0.0;
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  for (int k = 0; k < s.block_count(); ++k) {
    const Matrix& b = rho.block(k);
    hermitian_residual = std::max(hermitian_residual, (b - b.adjoint()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(b), Eigen::EigenvaluesOnly);
    min_eigenvalue = std::min(min_eigenvalue, es.eigenvalues().minCoeff());
  }
  if (hermitian_residual > kValidationTol)
    report.violations.push_back({Violation::Kind::StateNotHermitian, {}, {}, hermitian_residual,
                                 "density is not Hermitian"});
  const double trace_residual = std::abs(rho.trace() - 1.0);
  if (trace_residual > kValidationTol)
    report.violations.push_back({Violation::Kind::StateTrace, {}, {}, trace_residual, "density trace differs from 1"});
  if (!(min_eigenvalue > kFaithfulFloor))
    report.violations.push_back({Violation::Kind::StateNotFaithful, {}, {}, min_eigenvalue,
                                 "smallest density eigenvalue " + std::to_string(min_eigenvalue) +
                                     " is not above the faithfulness floor"});

  const int expected = sys.group.generator_count();
  if (int(sys.generators.size()) != expected)
    report.violations.push_back({Violation::Kind::GeneratorCount, {}, {},
                                 double(std::abs(int(sys.generators.size()) - expected)),
                                 "group expects " + std::to_string(expected) + " generators, system has " +
                                     std::to_string(sys.generators.size())});

  for (std::size_t g = 0; g < sys.generators.size(); ++g) {
    const Automorphism& alpha = sys.generators[g];
    if (!(alpha.structure() == s))
      throw StructuralError("generator " + std::to_string(g) + " acts on a different block structure");
    for (int k = 0; k < s.block_count(); ++k) {
      const Matrix& u = alpha.conjugator().block(k);
      const double r = operator_norm(u.adjoint() * u - Matrix::Identity(u.rows(), u.cols()));
      if (r > kValidationTol)
        report.violations.push_back({Violation::Kind::ConjugatorNotUnitary, int(g), {}, r,
                                     "conjugator block " + std::to_string(k) + " of generator " + std::to_string(g) +
                                         " is not unitary"});
    }
    for (int i = 0; i < s.dimension(); ++i) {
      const AlgebraElement e = AlgebraElement::unit(s, i);
      const double r = std::abs(sys.state(alpha(e)) - sys.state(e));
      if (r > kValidationTol)
        report.violations.push_back({Violation::Kind::StateNotInvariant, int(g), i, r,
                                     "mu(alpha_" + std::to_string(g) + "(e_" + std::to_string(i) +
                                         ")) differs from mu(e_" + std::to_string(i) + ")"});
    }
  }

  if (sys.group.kind() == GroupDescriptor::Kind::IntegerLattice) {
    for (std::size_t g = 0; g < sys.generators.size(); ++g) {
      for (std::size_t h = g + 1; h < sys.generators.size(); ++h) {
        const Automorphism gh = sys.generators[g].compose(sys.generators[h]);
        const Automorphism hg = sys.generators[h].compose(sys.generators[g]);
        double r = 0.0;
        for (int i = 0; i < s.dimension(); ++i) {
          const AlgebraElement e = AlgebraElement::unit(s, i);
          r = std::max(r, (gh(e) - hg(e)).max_abs());
        }
        if (r > kValidationTol)
          report.violations.push_back({Violation::Kind::GeneratorsDoNotCommute, int(g), {}, r,
                                       "generators " + std::to_string(g) + " and " + std::to_string(h) +
                                           " do not commute"});
      }
    }
  }
  if (sys.group.kind() == GroupDescriptor::Kind::FiniteCyclic && !sys.generators.empty()) {
    if (sys.group.order() < 1) throw StructuralError("finite cyclic group must have positive order");
    const Automorphism p = sys.generators[0].power(sys.group.order());
    double r = 0.0;
    for (int i = 0; i < s.dimension(); ++i) {
      const AlgebraElement e = AlgebraElement::unit(s, i);
      r = std::max(r, (p(e) - e).max_abs());
    }
    if (r > kValidationTol)
      report.violations.push_back({Violation::Kind::GeneratorOrder, 0, {}, r,
                                   "generator order does not divide " + std::to_string(sys.group.order())});
  }
  return report;
}

void require_valid(const FiniteSystem& sys) {
  const ValidationReport report = validate_system(sys);
  if (!report.valid()) throw InvalidSystem("invalid system" + (sys.name.empty() ? "" : " '" + sys.name + "'") +
                                           ":\n" + report.summary());
}

}  // namespace ncjoin
