#pragma once

// Joinings of two finite systems as states on the tensor algebra A (x) B.
// A state omega is stored as a positive unit-trace element W of A (x) B with
// omega(x) = trace(W x).

#include "ncjoin/gns.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ncjoin {

class TensorContext {
 public:
  TensorContext(FiniteSystem a, FiniteSystem b);

  const FiniteSystem& a() const { return a_; }
  const FiniteSystem& b() const { return b_; }
  const BlockStructure& structure() const { return structure_; }
  int dimension() const { return structure_.dimension(); }
  /// alpha_g (x) beta_g, one per generator.
  const std::vector<Automorphism>& generators() const { return generators_; }

  /// Canonical index in the tensor algebra of e_i (x) f_j.
  int index(int i, int j) const;
  AlgebraElement basis(int i, int j) const;
  AlgebraElement embed_a(const AlgebraElement& a) const;
  AlgebraElement embed_b(const AlgebraElement& b) const;

 private:
  FiniteSystem a_;
  FiniteSystem b_;
  BlockStructure structure_;
  std::vector<Automorphism> generators_;
};

struct JoiningResiduals {
  /// max(0, -lambda_min(W))
  double psd = 0.0;
  double trace = 0.0;
  double marginal_a = 0.0;
  double marginal_b = 0.0;
  double invariance = 0.0;
  double max() const;
};

struct JoiningMatrix {
  AlgebraElement w;
  JoiningResiduals residuals;
  Complex operator()(const AlgebraElement& x) const { return (w * x).trace(); }
};

inline constexpr double kJoiningTol = 1e-8;

JoiningResiduals joining_residuals(const TensorContext& ctx, const AlgebraElement& w);
bool is_joining(const JoiningResiduals& r, double tol = kJoiningTol);

/// W determined by its values omega(e_i (x) f_j).
JoiningMatrix joining_from_values(const TensorContext& ctx, const std::function<Complex(int, int)>& value);

JoiningMatrix product_joining(const TensorContext& ctx);

/// The context (A, mirror of A).
TensorContext diagonal_context(const FiniteSystem& sys);
/// mu_diag(a (x) f) = <Omega, a f~ Omega>, f~ the commutant operator of f.
JoiningMatrix diagonal_state(const FiniteSystem& sys);
/// Delta_n(a (x) f) = mu_diag(alpha^n(a) (x) f), alpha the first generator
/// (the group element n e_1 for Z^k).
JoiningMatrix graph_joining(const FiniteSystem& sys, long long n);

struct SolverOptions {
  double tol = 1e-9;
  int max_iterations = 50000;
  double bisection_width = 1e-6;
  /// Iterations between infeasibility certificate checks.
  int certificate_interval = 50;
};

/// Default options with NCJOIN_MAX_ITER applied when set.
SolverOptions default_solver_options();

struct SolveReport {
  int iterations = 0;
  double residual = 0.0;
  int oracle_calls = 0;
  int inconclusive_calls = 0;
  bool inconclusive = false;
  /// Re omega(c) of the returned joining and the certified/assumed upper end.
  std::optional<double> achieved;
  std::optional<double> upper_bound;
  std::vector<std::string> notes;
};

struct FindResult {
  JoiningMatrix joining;
  SolveReport report;
};

/// Without objective returns a feasible joining; with objective c maximizes
/// Re omega(c) by bisection over the level Re omega(c) = t.
FindResult find_joining(const TensorContext& ctx, const std::optional<AlgebraElement>& objective = std::nullopt,
                        const SolverOptions& options = default_solver_options());

enum class FeasibilityStatus { Feasible, Infeasible, Inconclusive };

struct FeasibilityResult {
  FeasibilityStatus status = FeasibilityStatus::Inconclusive;
  std::optional<AlgebraElement> w;
  int iterations = 0;
  double residual = 0.0;
};

/// Is there a joining with Re omega(c) = level?
FeasibilityResult joining_feasible_at(const TensorContext& ctx, const AlgebraElement& c, double level,
                                      const SolverOptions& options = default_solver_options());

enum class Verdict { Disjoint, NotDisjoint, Inconclusive };
std::string to_string(Verdict v);

struct DirectionGap {
  int i = 0;
  int j = 0;
  /// Direction = multiplier * (e_i (x) f_j).
  Complex multiplier = 1.0;
  double product_value = 0.0;
  double max_value = 0.0;
  double gap = 0.0;
  bool inconclusive = false;
};

struct DisjointnessCertificate {
  Verdict verdict = Verdict::Inconclusive;
  double threshold = 0.0;
  double max_gap = 0.0;
  std::vector<DirectionGap> gaps;
  std::optional<DirectionGap> witness;
  std::optional<JoiningMatrix> witness_joining;
  int oracle_calls = 0;
  int iterations = 0;
};

DisjointnessCertificate disjointness_test(const TensorContext& ctx, const SolverOptions& options = default_solver_options(),
                                          const std::vector<AlgebraElement>& extra_directions = {});

/// P* : H_nu -> H_mu with <gamma(a^*), P* gamma(b)> = omega(a (x) b).
struct ConditionalExpectation {
  Matrix op;
  double norm = 0.0;
  double intertwining = 0.0;
};

ConditionalExpectation conditional_expectation(const TensorContext& ctx, const JoiningMatrix& w);

/// Dimension of the set of Hermitian D with range(D) inside range(W) that
/// the homogeneous joining constraints send to zero.
int joining_face_dimension(const TensorContext& ctx, const JoiningMatrix& w, double rank_tol = 1e-8);

struct CesaroJoiningAverage {
  /// omega_N(e_i (x) f_j), row i, column j.
  Matrix values;
  double deviation = 0.0;
  bool ergodic = false;
  std::vector<std::string> warnings;
};

CesaroJoiningAverage cesaro_diagonal_average(const FiniteSystem& sys, int n);

struct OrnsteinRow {
  std::string label;
  bool skipped = false;
  double product_value = 0.0;
  std::vector<double> ratios;
  double sup = 0.0;
};

struct OrnsteinScan {
  long long first = 0;
  long long last = 0;
  std::vector<OrnsteinRow> rows;
  std::optional<long long> recurrence_period;
  bool strongly_mixing = false;
  std::vector<std::string> notes;
};

struct OrnsteinTestElement {
  std::string label;
  AlgebraElement c;
};

/// Delta_n(c^* c) / (mu (x) mu~)(c^* c) for n in [first, last].
OrnsteinScan ornstein_ratio_scan(const FiniteSystem& sys, const std::vector<OrnsteinTestElement>& tests, long long first,
                                 long long last);

/// Smallest p >= 1 with alpha^p = id, searched up to `cap`.
std::optional<long long> recurrence_period(const FiniteSystem& sys, long long cap = 1000);

}  // namespace ncjoin
