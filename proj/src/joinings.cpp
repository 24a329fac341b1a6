#include "ncjoin/joinings.hpp"

#include <Eigen/Eigenvalues>

#include <cstdlib>

namespace ncjoin {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

// Real coordinates of Hermitian elements: per block the diagonal entries,
// then sqrt(2) Re and sqrt(2) Im of each upper entry. The map is an isometry
// from the Frobenius inner product to the Euclidean one.
class HermitianParam {
 public:
  explicit HermitianParam(BlockStructure s) : s_(std::move(s)) {}

  int size() const { return s_.dimension(); }

  RealVector from_element(const AlgebraElement& w) const {
    RealVector v(size());
    int pos = 0;
    for (int b = 0; b < s_.block_count(); ++b) {
      const Matrix& m = w.block(b);
      const int n = s_.block_size(b);
      for (int i = 0; i < n; ++i) v(pos++) = m(i, i).real();
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          const Complex z = (m(i, j) + std::conj(m(j, i))) / 2.0;
          v(pos++) = kSqrt2 * z.real();
          v(pos++) = kSqrt2 * z.imag();
        }
    }
    return v;
  }

  AlgebraElement to_element(const RealVector& v) const {
    std::vector<Matrix> blocks;
    int pos = 0;
    for (int b = 0; b < s_.block_count(); ++b) {
      const int n = s_.block_size(b);
      Matrix m(n, n);
      for (int i = 0; i < n; ++i) m(i, i) = v(pos++);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          const Complex z(v(pos) / kSqrt2, v(pos + 1) / kSqrt2);
          pos += 2;
          m(i, j) = z;
          m(j, i) = std::conj(z);
        }
      blocks.push_back(std::move(m));
    }
    return AlgebraElement(s_, std::move(blocks));
  }

  /// Coefficients c with trace(W x) = c . v for W = to_element(v).
  Vector functional(const AlgebraElement& x) const {
    Vector c(size());
    int pos = 0;
    for (int b = 0; b < s_.block_count(); ++b) {
      const Matrix& m = x.block(b);
      const int n = s_.block_size(b);
      for (int i = 0; i < n; ++i) c(pos++) = m(i, i);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          c(pos++) = (m(i, j) + m(j, i)) / kSqrt2;
          c(pos++) = Complex(0.0, 1.0) * (m(j, i) - m(i, j)) / kSqrt2;
        }
    }
    return c;
  }

 private:
  BlockStructure s_;
};

struct LinearConstraints {
  RealMatrix rows;
  RealVector rhs;
};

void append(std::vector<RealVector>& rows, std::vector<double>& rhs, const Vector& c, Complex value) {
  rows.push_back(c.real());
  rhs.push_back(value.real());
  rows.push_back(c.imag());
  rhs.push_back(value.imag());
}

LinearConstraints joining_constraints(const TensorContext& ctx, const HermitianParam& param) {
  std::vector<RealVector> rows;
  std::vector<double> rhs;
  const BlockStructure& sa = ctx.a().structure;
  const BlockStructure& sb = ctx.b().structure;
  for (int i = 0; i < sa.dimension(); ++i) {
    const AlgebraElement e = AlgebraElement::unit(sa, i);
    append(rows, rhs, param.functional(ctx.embed_a(e)), ctx.a().state(e));
  }
  for (int j = 0; j < sb.dimension(); ++j) {
    const AlgebraElement f = AlgebraElement::unit(sb, j);
    append(rows, rhs, param.functional(ctx.embed_b(f)), ctx.b().state(f));
  }
  append(rows, rhs, param.functional(AlgebraElement::identity(ctx.structure())), 1.0);
  for (const Automorphism& g : ctx.generators()) {
    for (int t = 0; t < ctx.dimension(); ++t) {
      const AlgebraElement u = AlgebraElement::unit(ctx.structure(), t);
      append(rows, rhs, param.functional(g(u) - u), 0.0);
    }
  }
  LinearConstraints out{RealMatrix(Eigen::Index(rows.size()), param.size()), RealVector(Eigen::Index(rhs.size()))};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.rows.row(Eigen::Index(r)) = rows[r].transpose();
    out.rhs(Eigen::Index(r)) = rhs[r];
  }
  return out;
}

// Projection onto {v : rows v = rhs + t e_level}.
class AffineProjector {
 public:
  AffineProjector(const RealMatrix& rows, const RealVector& rhs, std::optional<Eigen::Index> level_row)
      : rows_(rows), rhs_(rhs), level_row_(level_row) {
    Eigen::JacobiSVD<RealMatrix> svd(rows, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RealVector& s = svd.singularValues();
    const double cutoff = 1e-10 * std::max(1.0, s.size() ? s(0) : 0.0);
    Eigen::Index rank = 0;
    while (rank < s.size() && s(rank) > cutoff) ++rank;
    basis_ = svd.matrixV().leftCols(rank);
    const RealMatrix u = svd.matrixU().leftCols(rank);
    const RealVector inv = s.head(rank).cwiseInverse();
    base_ = basis_ * inv.asDiagonal() * (u.transpose() * rhs);
    if (level_row_) {
      RealVector unit = RealVector::Zero(rows.rows());
      unit(*level_row_) = 1.0;
      level_dir_ = basis_ * inv.asDiagonal() * (u.transpose() * unit);
    } else {
      level_dir_ = RealVector::Zero(rows.cols());
    }
  }

  RealVector particular(double t) const { return base_ + t * level_dir_; }

  /// Residual of the least-squares particular solution; nonzero means the
  /// affine set is empty.
  double inconsistency(double t) const {
    RealVector b = rhs_;
    if (level_row_) b(*level_row_) += t;
    return (rows_ * particular(t) - b).norm() / (1.0 + b.norm());
  }

  RealVector project(const RealVector& x, double t) const {
    const RealVector w0 = particular(t);
    return x - basis_ * (basis_.transpose() * (x - w0));
  }

  RealVector row_space_component(const RealVector& d) const { return basis_ * (basis_.transpose() * d); }

 private:
  RealMatrix rows_;
  RealVector rhs_;
  std::optional<Eigen::Index> level_row_;
  RealMatrix basis_;
  RealVector base_;
  RealVector level_dir_;
};

// Projection onto positive unit-trace elements: blockwise eigendecomposition
// followed by a joint simplex projection of the spectrum.
RealVector project_density(const HermitianParam& param, const BlockStructure& s, const RealVector& v) {
  const AlgebraElement h = param.to_element(v);
  std::vector<Eigen::SelfAdjointEigenSolver<Matrix>> solvers;
  std::vector<double> all;
  for (int b = 0; b < s.block_count(); ++b) {
    solvers.emplace_back(h.block(b));
    const RealVector& ev = solvers.back().eigenvalues();
    all.insert(all.end(), ev.data(), ev.data() + ev.size());
  }
  const RealVector projected = project_to_simplex(Eigen::Map<RealVector>(all.data(), Eigen::Index(all.size())));
  std::vector<Matrix> blocks;
  Eigen::Index pos = 0;
  for (int b = 0; b < s.block_count(); ++b) {
    const Eigen::Index n = s.block_size(b);
    const Matrix& q = solvers[std::size_t(b)].eigenvectors();
    const Vector lam = projected.segment(pos, n).cast<Complex>();
    pos += n;
    blocks.push_back(q * lam.asDiagonal() * q.adjoint());
  }
  return param.from_element(AlgebraElement(s, std::move(blocks)));
}

std::pair<double, double> spectral_range(const AlgebraElement& h) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const Matrix& b : h.blocks()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(b), Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues().minCoeff());
    hi = std::max(hi, es.eigenvalues().maxCoeff());
  }
  return {lo, hi};
}

struct OracleState {
  RealVector x;
  RealVector p;
};

FeasibilityResult run_dykstra(const HermitianParam& param, const BlockStructure& s, const AffineProjector& proj,
                              double t, const SolverOptions& options, OracleState& state) {
  FeasibilityResult r;
  if (proj.inconsistency(t) > 1e-10) {
    r.status = FeasibilityStatus::Infeasible;
    return r;
  }
  const RealVector w0 = proj.particular(t);
  RealVector x = state.x;
  RealVector p = RealVector::Zero(x.size());
  RealVector y = proj.project(x, t);
  for (int k = 1; k <= options.max_iterations; ++k) {
    y = proj.project(x, t);
    const RealVector xn = project_density(param, s, y + p);
    p = y + p - xn;
    x = xn;
    const double residual = (x - proj.project(x, t)).norm();
    r.iterations = k;
    r.residual = residual;
    if (residual < options.tol) {
      r.status = FeasibilityStatus::Feasible;
      r.w = param.to_element(x);
      state.x = x;
      return r;
    }
    if (k % options.certificate_interval == 0) {
      // Separating hyperplane normal to the row-space part of y - x.
      RealVector d = proj.row_space_component(y - x);
      const double n = d.norm();
      if (n > 1e-300) {
        d /= n;
        const auto [lo, hi] = spectral_range(param.to_element(d));
        const double level = d.dot(w0);
        constexpr double eps = 1e-11;
        if (level > hi + eps || level < lo - eps) {
          r.status = FeasibilityStatus::Infeasible;
          return r;
        }
      }
    }
  }
  r.status = FeasibilityStatus::Inconclusive;
  return r;
}

struct LevelProblem {
  HermitianParam param;
  AffineProjector proj;
};

LevelProblem level_problem(const TensorContext& ctx, const AlgebraElement& c) {
  HermitianParam param(ctx.structure());
  LinearConstraints lc = joining_constraints(ctx, param);
  const Eigen::Index m = lc.rows.rows();
  RealMatrix rows(m + 1, lc.rows.cols());
  rows.topRows(m) = lc.rows;
  rows.row(m) = param.functional(c).real().transpose();
  RealVector rhs(m + 1);
  rhs.head(m) = lc.rhs;
  rhs(m) = 0.0;
  return {param, AffineProjector(rows, rhs, m)};
}

}  // namespace

// ---------------------------------------------------------------------------
// TensorContext

TensorContext::TensorContext(FiniteSystem a, FiniteSystem b) : a_(std::move(a)), b_(std::move(b)) {
  require_valid(a_);
  require_valid(b_);
  if (!(a_.group == b_.group))
    throw PreconditionError("joined systems must carry the same group descriptor");
  if (a_.generators.size() != b_.generators.size())
    throw DimensionMismatch("joined systems have different generator counts");
  structure_ = a_.structure.tensor(b_.structure);
  for (std::size_t g = 0; g < a_.generators.size(); ++g) generators_.push_back(tensor(a_.generators[g], b_.generators[g]));
}

int TensorContext::index(int i, int j) const {
  const auto pa = a_.structure.locate(i);
  const auto pb = b_.structure.locate(j);
  const int m = b_.structure.block_size(pb.block);
  const int block = pa.block * b_.structure.block_count() + pb.block;
  return structure_.index(block, pa.row * m + pb.row, pa.col * m + pb.col);
}

AlgebraElement TensorContext::basis(int i, int j) const { return AlgebraElement::unit(structure_, index(i, j)); }

AlgebraElement TensorContext::embed_a(const AlgebraElement& a) const {
  return tensor(a, AlgebraElement::identity(b_.structure));
}

AlgebraElement TensorContext::embed_b(const AlgebraElement& b) const {
  return tensor(AlgebraElement::identity(a_.structure), b);
}

// ---------------------------------------------------------------------------
// Residuals and basic constructors

double JoiningResiduals::max() const {
  return std::max({psd, trace, marginal_a, marginal_b, invariance});
}

JoiningResiduals joining_residuals(const TensorContext& ctx, const AlgebraElement& w) {
  if (!(w.structure() == ctx.structure())) throw DimensionMismatch("joining matrix has the wrong block structure");
  JoiningResiduals r;
  for (const Matrix& b : w.blocks()) {
    r.psd = std::max(r.psd, (b - b.adjoint()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(b), Eigen::EigenvaluesOnly);
    r.psd = std::max(r.psd, -es.eigenvalues().minCoeff());
  }
  r.trace = std::abs(w.trace() - 1.0);
  auto value = [&](const AlgebraElement& x) { return (w * x).trace(); };
  for (int i = 0; i < ctx.a().structure.dimension(); ++i) {
    const AlgebraElement e = AlgebraElement::unit(ctx.a().structure, i);
    r.marginal_a = std::max(r.marginal_a, std::abs(value(ctx.embed_a(e)) - ctx.a().state(e)));
  }
  for (int j = 0; j < ctx.b().structure.dimension(); ++j) {
    const AlgebraElement f = AlgebraElement::unit(ctx.b().structure, j);
    r.marginal_b = std::max(r.marginal_b, std::abs(value(ctx.embed_b(f)) - ctx.b().state(f)));
  }
  for (const Automorphism& g : ctx.generators())
    for (int t = 0; t < ctx.dimension(); ++t) {
      const AlgebraElement u = AlgebraElement::unit(ctx.structure(), t);
      r.invariance = std::max(r.invariance, std::abs(value(g(u)) - value(u)));
    }
  return r;
}

bool is_joining(const JoiningResiduals& r, double tol) { return r.max() < tol; }

JoiningMatrix joining_from_values(const TensorContext& ctx, const std::function<Complex(int, int)>& value) {
  // trace(W E_{RC}) = W_{CR}
  AlgebraElement w = AlgebraElement::zero(ctx.structure());
  for (int i = 0; i < ctx.a().structure.dimension(); ++i)
    for (int j = 0; j < ctx.b().structure.dimension(); ++j) {
      const auto p = ctx.structure().locate(ctx.index(i, j));
      w.block(p.block)(p.col, p.row) = value(i, j);
    }
  return {w, joining_residuals(ctx, w)};
}

JoiningMatrix product_joining(const TensorContext& ctx) {
  AlgebraElement w = tensor(ctx.a().state.density(), ctx.b().state.density());
  return {w, joining_residuals(ctx, w)};
}

TensorContext diagonal_context(const FiniteSystem& sys) { return TensorContext(sys, mirror_system(sys).system); }

static Complex diagonal_value(const AlgebraElement& half, const AlgebraElement& a, const AlgebraElement& f) {
  return (half * a * half * transpose(f)).trace();
}

JoiningMatrix diagonal_state(const FiniteSystem& sys) { return graph_joining(sys, 0); }

JoiningMatrix graph_joining(const FiniteSystem& sys, long long n) {
  const TensorContext ctx = diagonal_context(sys);
  const AlgebraElement half = hermitian_function(sys.state.density(), [](double x) { return std::sqrt(x); });
  const Automorphism alpha_n = n == 0 ? Automorphism::identity(sys.structure) : sys.generators[0].power(n);
  std::vector<AlgebraElement> moved;
  for (int i = 0; i < sys.structure.dimension(); ++i) moved.push_back(alpha_n(AlgebraElement::unit(sys.structure, i)));
  return joining_from_values(ctx, [&](int i, int j) {
    return diagonal_value(half, moved[std::size_t(i)], AlgebraElement::unit(sys.structure, j));
  });
}

// ---------------------------------------------------------------------------
// Solver

SolverOptions default_solver_options() {
  SolverOptions o;
  if (const char* env = std::getenv("NCJOIN_MAX_ITER")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) o.max_iterations = int(v);
  }
  return o;
}

FeasibilityResult joining_feasible_at(const TensorContext& ctx, const AlgebraElement& c, double level,
                                      const SolverOptions& options) {
  LevelProblem lp = level_problem(ctx, c);
  OracleState st{lp.param.from_element(product_joining(ctx).w), {}};
  return run_dykstra(lp.param, ctx.structure(), lp.proj, level, options, st);
}

namespace {

struct Bisection {
  double lo = 0.0;
  double hi = 0.0;
  AlgebraElement best;
  int iterations = 0;
  int calls = 0;
  int inconclusive_calls = 0;
  double residual = 0.0;
};

// Maximizes Re trace(W c) starting from the known feasible level `lo`
// carried by `start`. Probes `first_probe` first when given.
Bisection bisect(const TensorContext& ctx, const AlgebraElement& c, const AlgebraElement& start, double lo,
                 const SolverOptions& options, std::optional<double> first_probe = std::nullopt,
                 bool stop_after_infeasible_probe = false) {
  LevelProblem lp = level_problem(ctx, c);
  Bisection b;
  b.lo = lo;
  // Re trace(W c) over densities is bounded by the top eigenvalue of Herm(c).
  b.hi = spectral_range(c).second;
  b.best = start;
  OracleState st{lp.param.from_element(start), {}};
  auto probe = [&](double t) {
    FeasibilityResult r = run_dykstra(lp.param, ctx.structure(), lp.proj, t, options, st);
    ++b.calls;
    b.iterations += r.iterations;
    if (r.status == FeasibilityStatus::Feasible) {
      b.residual = r.residual;
      b.best = *r.w;
      b.lo = std::max(b.lo, t);
    } else {
      if (r.status == FeasibilityStatus::Inconclusive) ++b.inconclusive_calls;
      b.hi = t;
    }
    return r.status;
  };
  if (first_probe && *first_probe < b.hi) {
    const FeasibilityStatus s = probe(*first_probe);
    if (s != FeasibilityStatus::Feasible && stop_after_infeasible_probe) return b;
  }
  while (b.hi - b.lo > options.bisection_width) probe((b.lo + b.hi) / 2.0);
  return b;
}

}  // namespace

FindResult find_joining(const TensorContext& ctx, const std::optional<AlgebraElement>& objective,
                        const SolverOptions& options) {
  FindResult out;
  const JoiningMatrix product = product_joining(ctx);
  if (!objective) {
    out.joining = product;
    out.report.residual = product.residuals.max();
    out.report.notes.push_back("no objective: the product joining is feasible");
    return out;
  }
  if (!(objective->structure() == ctx.structure())) throw DimensionMismatch("objective has the wrong block structure");
  const double start = (product.w * *objective).trace().real();
  Bisection b = bisect(ctx, *objective, product.w, start, options);
  out.joining = {b.best, joining_residuals(ctx, b.best)};
  out.report.iterations = b.iterations;
  out.report.residual = b.residual;
  out.report.oracle_calls = b.calls;
  out.report.inconclusive_calls = b.inconclusive_calls;
  out.report.inconclusive = b.inconclusive_calls > 0;
  out.report.achieved = (b.best * *objective).trace().real();
  out.report.upper_bound = b.hi;
  if (out.report.inconclusive)
    out.report.notes.push_back(std::to_string(b.inconclusive_calls) +
                               " feasibility calls hit the iteration cap without a certificate");
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Disjoint: return "disjoint";
    case Verdict::NotDisjoint: return "not_disjoint";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

DisjointnessCertificate disjointness_test(const TensorContext& ctx, const SolverOptions& options,
                                          const std::vector<AlgebraElement>& extra_directions) {
  DisjointnessCertificate cert;
  cert.threshold = 10.0 * options.tol;
  const JoiningMatrix product = product_joining(ctx);

  struct Direction {
    int i, j;
    Complex mult;
    AlgebraElement c;
  };
  std::vector<Direction> dirs;
  const Complex units[] = {1.0, Complex(0, 1), -1.0, Complex(0, -1)};
  for (int i = 0; i < ctx.a().structure.dimension(); ++i)
    for (int j = 0; j < ctx.b().structure.dimension(); ++j) {
      const AlgebraElement x = ctx.basis(i, j);
      const bool self_adjoint = (x.adjoint() - x).max_abs() == 0.0;
      for (Complex m : units) {
        dirs.push_back({i, j, m, m * x});
        if (self_adjoint) break;
      }
    }
  for (std::size_t k = 0; k < extra_directions.size(); ++k) dirs.push_back({-1, int(k), 1.0, extra_directions[k]});

  bool any_inconclusive = false;
  for (const Direction& d : dirs) {
    const double base = (product.w * d.c).trace().real();
    Bisection b = bisect(ctx, d.c, product.w, base, options, base + cert.threshold, true);
    DirectionGap g;
    g.i = d.i;
    g.j = d.j;
    g.multiplier = d.mult;
    g.product_value = base;
    g.max_value = (b.best * d.c).trace().real();
    g.gap = g.max_value - base;
    g.inconclusive = b.inconclusive_calls > 0;
    cert.oracle_calls += b.calls;
    cert.iterations += b.iterations;
    any_inconclusive = any_inconclusive || g.inconclusive;
    cert.max_gap = std::max(cert.max_gap, g.gap);
    if (g.gap > cert.threshold && (!cert.witness || g.gap > cert.witness->gap + options.bisection_width)) {
      cert.witness = g;
      cert.witness_joining = JoiningMatrix{b.best, joining_residuals(ctx, b.best)};
    }
    cert.gaps.push_back(g);
  }
  if (cert.witness) {
    if (!is_joining(cert.witness_joining->residuals))
      throw InvariantViolation("witness joining fails the joining invariants");
    cert.verdict = Verdict::NotDisjoint;
  } else {
    cert.verdict = any_inconclusive ? Verdict::Inconclusive : Verdict::Disjoint;
  }
  return cert;
}

// ---------------------------------------------------------------------------
// Conditional expectations and faces

ConditionalExpectation conditional_expectation(const TensorContext& ctx, const JoiningMatrix& w) {
  const JoiningResiduals res = joining_residuals(ctx, w.w);
  if (!is_joining(res)) throw PreconditionError("matrix is not a joining (residual " + std::to_string(res.max()) + ")");
  const GnsResult ga = gns_construct(ctx.a());
  const GnsResult gb = gns_construct(ctx.b());
  const int da = ga.space.dimension;
  const int db = gb.space.dimension;
  Matrix values(da, db);
  for (int i = 0; i < da; ++i)
    for (int j = 0; j < db; ++j) values(i, j) = w(ctx.basis(i, j));
  // Row idx(e_i^*) of G_A M carries omega(e_i (x) f_j).
  Matrix swapped(da, db);
  for (int i = 0; i < da; ++i) {
    const auto p = ctx.a().structure.locate(i);
    swapped.row(ctx.a().structure.index(p.block, p.col, p.row)) = values.row(i);
  }
  ConditionalExpectation ce;
  ce.op = ga.space.gram.ldlt().solve(swapped);
  const Matrix inv_b = gb.space.factor.adjoint().triangularView<Eigen::Upper>().solve(Matrix::Identity(db, db));
  ce.norm = operator_norm(ga.space.factor.adjoint() * ce.op * inv_b);
  for (std::size_t g = 0; g < ga.unitaries.generators.size(); ++g) {
    const Matrix diff = ga.unitaries.generators[g] * ce.op - ce.op * gb.unitaries.generators[g];
    ce.intertwining = std::max(ce.intertwining, operator_norm(ga.space.factor.adjoint() * diff * inv_b));
  }
  return ce;
}

int joining_face_dimension(const TensorContext& ctx, const JoiningMatrix& w, double rank_tol) {
  const BlockStructure& s = ctx.structure();
  HermitianParam param(s);
  const LinearConstraints lc = joining_constraints(ctx, param);

  std::vector<Matrix> ranges;
  int params = 0;
  for (int b = 0; b < s.block_count(); ++b) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(w.w.block(b)));
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()(i) > rank_tol) keep.push_back(i);
    Matrix q(s.block_size(b), Eigen::Index(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) q.col(Eigen::Index(k)) = es.eigenvectors().col(keep[k]);
    params += int(keep.size() * keep.size());
    ranges.push_back(std::move(q));
  }
  if (params == 0) return 0;

  // Columns: parameter vectors of Q E Q^* for a Hermitian basis E.
  RealMatrix lift(param.size(), params);
  int col = 0;
  for (int b = 0; b < s.block_count(); ++b) {
    const Matrix& q = ranges[std::size_t(b)];
    const Eigen::Index r = q.cols();
    auto emit = [&](const Matrix& e) {
      AlgebraElement d = AlgebraElement::zero(s);
      d.block(b) = q * e * q.adjoint();
      lift.col(col++) = param.from_element(d);
    };
    for (Eigen::Index i = 0; i < r; ++i) {
      Matrix e = Matrix::Zero(r, r);
      e(i, i) = 1.0;
      emit(e);
    }
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = i + 1; j < r; ++j) {
        Matrix e = Matrix::Zero(r, r);
        e(i, j) = e(j, i) = 1.0;
        emit(e);
        e(i, j) = Complex(0, 1);
        e(j, i) = Complex(0, -1);
        emit(e);
      }
  }
  const RealMatrix reduced = lc.rows * lift;
  return int(null_space(reduced, 1e-9).cols());
}

// ---------------------------------------------------------------------------
// Averages and Ornstein scans

CesaroJoiningAverage cesaro_diagonal_average(const FiniteSystem& sys, int n) {
  if (n < 1) throw PreconditionError("averaging length N must be positive");
  const MirrorSystem mirror = mirror_system(sys);
  const BlockStructure& s = sys.structure;
  const int d = s.dimension();
  const AlgebraElement half = hermitian_function(sys.state.density(), [](double x) { return std::sqrt(x); });
  CesaroJoiningAverage out;
  out.values = Matrix::Zero(d, d);
  const auto folner = sys.group.folner_set(n);
  for (const auto& g : folner) {
    const Automorphism alpha = sys.action(g);
    for (int i = 0; i < d; ++i) {
      const AlgebraElement moved = alpha(AlgebraElement::unit(s, i));
      for (int j = 0; j < d; ++j) out.values(i, j) += diagonal_value(half, moved, AlgebraElement::unit(s, j));
    }
  }
  out.values /= double(folner.size());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const Complex prod = sys.state(AlgebraElement::unit(s, i)) * mirror.system.state(AlgebraElement::unit(s, j));
      out.deviation = std::max(out.deviation, std::abs(out.values(i, j) - prod));
    }
  out.ergodic = classify_finite(sys).ergodic;
  if (!out.ergodic) out.warnings.push_back("system is not ergodic: the averages need not approach the product state");
  return out;
}

std::optional<long long> recurrence_period(const FiniteSystem& sys, long long cap) {
  if (sys.generators.size() != 1) return std::nullopt;
  const Matrix step = sys.generators[0].coordinate_matrix();
  const Eigen::Index d = step.rows();
  Matrix power = step;
  for (long long p = 1; p <= cap; ++p) {
    if ((power - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-10) return p;
    power = step * power;
  }
  return std::nullopt;
}

OrnsteinScan ornstein_ratio_scan(const FiniteSystem& sys, const std::vector<OrnsteinTestElement>& tests, long long first,
                                 long long last) {
  if (sys.group.kind() != GroupDescriptor::Kind::Integers) throw PreconditionError("Ornstein scans need the group Z");
  if (last < first) throw PreconditionError("empty scan window");
  const TensorContext ctx = diagonal_context(sys);
  const JoiningMatrix product = product_joining(ctx);
  OrnsteinScan scan;
  scan.first = first;
  scan.last = last;
  std::vector<AlgebraElement> squares;
  for (const auto& t : tests) {
    if (!(t.c.structure() == ctx.structure())) throw DimensionMismatch("test element '" + t.label + "' has the wrong structure");
    OrnsteinRow row;
    row.label = t.label;
    squares.push_back(t.c.adjoint() * t.c);
    row.product_value = product(squares.back()).real();
    if (row.product_value <= 1e-12) {
      row.skipped = true;
      scan.notes.push_back("skipped '" + t.label + "': product value of c^* c vanishes");
    }
    scan.rows.push_back(std::move(row));
  }
  for (long long n = first; n <= last; ++n) {
    const JoiningMatrix delta = graph_joining(sys, n);
    for (std::size_t k = 0; k < tests.size(); ++k) {
      OrnsteinRow& row = scan.rows[k];
      if (row.skipped) continue;
      const double ratio = delta(squares[k]).real() / row.product_value;
      row.ratios.push_back(ratio);
      row.sup = row.ratios.size() == 1 ? ratio : std::max(row.sup, ratio);
    }
  }
  scan.recurrence_period = recurrence_period(sys);
  scan.strongly_mixing = sys.structure.dimension() == 1;
  if (scan.recurrence_period)
    scan.notes.push_back("Delta_n repeats with period " + std::to_string(*scan.recurrence_period) +
                         "; a finite system is strongly mixing only when it is one-dimensional");
  return scan;
}

}  // namespace ncjoin
