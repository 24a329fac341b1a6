// Acceptance suite: one PASS/FAIL line per criterion.

#include "ncjoin/dual.hpp"
#include "ncjoin/joinings.hpp"
#include "oracle/transport_polytope.hpp"
#include "support.hpp"

#include <cstdio>
#include <functional>
#include <sstream>

using namespace ncjoin;
using testing_support::corpus;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "failed: ";
      else detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

const std::vector<std::string> kFiniteCorpus = {"c2", "c3", "c5", "identity2", "identity3", "pauli", "gibbs"};

Eigen::VectorXd diagonal_weights(const FiniteSystem& sys) {
  Eigen::VectorXd w(sys.structure.dimension());
  for (int i = 0; i < w.size(); ++i) w(i) = sys.state(AlgebraElement::unit(sys.structure, i)).real();
  return w;
}

/// The permutation of minimal projections induced by a commutative system's generator.
std::vector<int> point_map(const FiniteSystem& sys) {
  std::vector<int> m(std::size_t(sys.structure.dimension()));
  for (int i = 0; i < sys.structure.dimension(); ++i) {
    const AlgebraElement moved = sys.generators[0](AlgebraElement::unit(sys.structure, i));
    for (int j = 0; j < sys.structure.dimension(); ++j)
      if (std::abs(moved.coordinates()(j) - 1.0) < 1e-12) m[std::size_t(i)] = j;
  }
  return m;
}

oracle::TransportProblem transport(const FiniteSystem& a, const FiniteSystem& b) {
  return {diagonal_weights(a), diagonal_weights(b), {{point_map(a), point_map(b)}}};
}

void gaps_against_oracle(const TensorContext& ctx, const DisjointnessCertificate& cert, Outcome& o) {
  const oracle::TransportProblem p = transport(ctx.a(), ctx.b());
  double worst = 0.0;
  for (const DirectionGap& g : cert.gaps) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(ctx.a().structure.dimension(), ctx.b().structure.dimension());
    c(g.i, g.j) = g.multiplier.real();
    worst = std::max(worst, std::abs(g.max_value - oracle::max_linear(p, c)));
  }
  o.detail << "solver vs LP oracle max deviation " << worst << "; ";
  o.require(worst <= 1e-5, "direction maxima disagree with the transportation LP");
}

// ---------------------------------------------------------------------------

Outcome ergodic_vs_identity() {
  Outcome o;
  const TensorContext ctx(corpus("c5"), corpus("identity3"));
  const DisjointnessCertificate cert = disjointness_test(ctx);
  double worst = 0.0;
  for (const DirectionGap& g : cert.gaps) worst = std::max(worst, g.gap);
  o.require(cert.verdict == Verdict::Disjoint, "verdict " + to_string(cert.verdict));
  o.require(worst <= 1e-5, "a direction gap exceeds 1e-5");
  o.require(cert.gaps.size() == 15, "expected 15 scanned directions");
  const auto vertices = oracle::vertices(transport(ctx.a(), ctx.b()));
  o.require(vertices.size() == 1, "oracle polytope is not a single point");
  o.detail << "verdict " << to_string(cert.verdict) << ", " << cert.gaps.size() << " directions, max gap " << worst
           << ", oracle vertices " << vertices.size() << "; ";
  gaps_against_oracle(ctx, cert, o);
  return o;
}

Outcome disjoint_spectra() {
  Outcome o;
  const FiniteSystem c2 = corpus("c2"), c3 = corpus("c3");
  int common = 0;
  bool unit_common = false;
  for (const auto& x : point_spectrum(c2))
    for (const auto& y : point_spectrum(c3))
      if (std::abs(x.eigenvalue[0] - y.eigenvalue[0]) < 1e-8) {
        ++common;
        unit_common = std::abs(x.eigenvalue[0] - 1.0) < 1e-8;
      }
  o.require(common == 1 && unit_common, "point spectra intersect beyond {1}");

  const TensorContext mixed(c2, c3);
  const DisjointnessCertificate d = disjointness_test(mixed);
  double worst = 0.0;
  for (const DirectionGap& g : d.gaps) worst = std::max(worst, g.gap);
  o.require(d.verdict == Verdict::Disjoint, "C2 vs C3 verdict " + to_string(d.verdict));
  o.require(worst <= 1e-5, "C2 vs C3 gap exceeds 1e-5");
  gaps_against_oracle(mixed, d, o);

  const TensorContext same(c2, c2);
  const DisjointnessCertificate s = disjointness_test(same);
  Eigen::MatrixXd e00 = Eigen::MatrixXd::Zero(2, 2);
  e00(0, 0) = 1.0;
  const double oracle_gap = oracle::max_linear(transport(c2, c2), e00) - 0.25;
  o.require(s.verdict == Verdict::NotDisjoint, "C2 vs C2 verdict " + to_string(s.verdict));
  o.require(s.witness && s.witness->i == 0 && s.witness->j == 0, "witness not at e_1 (x) f_1");
  o.require(s.witness && std::abs(s.witness->gap - 0.25) <= 1e-4, "witness gap not 0.25");
  o.require(std::abs(oracle_gap - 0.25) < 1e-12, "oracle gap not 0.25");
  o.detail << "common spectrum {1}; C2/C3 " << to_string(d.verdict) << " max gap " << worst << "; C2/C2 "
           << to_string(s.verdict) << " witness gap " << (s.witness ? s.witness->gap : -1.0) << " (oracle "
           << oracle_gap << ")";
  return o;
}

Outcome cesaro_rates() {
  Outcome o;
  const FiniteSystem c3 = corpus("c3");
  const GnsSpace space = gns_construct(c3).space;
  std::vector<Vector> unit_vectors = {space.cyclic_vector};
  for (int i = 0; i < 3; ++i) {
    const Vector e = AlgebraElement::unit(c3.structure, i).coordinates();
    unit_vectors.push_back(e / space.norm(e));
  }
  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss;
  for (int k = 0; k < 4; ++k) {
    Vector v(3);
    for (int i = 0; i < 3; ++i) v(i) = Complex(gauss(rng), gauss(rng));
    unit_vectors.push_back(v / space.norm(v));
  }
  double exact = 0.0;
  for (int n : {3, 30, 999})
    for (const Vector& x : unit_vectors)
      for (const Vector& y : unit_vectors) exact = std::max(exact, cesaro_correlation(c3, x, y, n).deviation);
  o.require(exact < 1e-9, "deviation at N = 3k is not below 1e-9");
  o.detail << "N = 3k max deviation " << exact;
  for (int n : {10, 100, 1000}) {
    double worst = 0.0;
    for (const Vector& x : unit_vectors)
      for (const Vector& y : unit_vectors) worst = std::max(worst, cesaro_correlation(c3, x, y, n).deviation);
    o.require(worst <= 2.0 / n, "deviation above 2/N at N = " + std::to_string(n));
    o.detail << "; N = " << n << ": " << worst << " <= " << 2.0 / n;
  }
  return o;
}

Outcome joining_battery() {
  Outcome o;
  int checked = 0;
  double worst = 0.0;
  auto record = [&](const JoiningMatrix& w, const std::string& what) {
    ++checked;
    worst = std::max(worst, w.residuals.max());
    o.require(w.residuals.max() < 1e-8, what);
  };
  std::vector<FiniteSystem> systems;
  for (const auto& n : kFiniteCorpus) systems.push_back(corpus(n));
  for (const FiniteSystem& s : systems) {
    record(diagonal_state(s), "diagonal " + s.name);
    for (long long n = 0; n <= 6; ++n) record(graph_joining(s, n), "graph " + std::to_string(n) + " " + s.name);
  }
  for (const FiniteSystem& a : systems)
    for (const FiniteSystem& b : systems) {
      if (!(a.group == b.group) || a.generators.size() != b.generators.size()) continue;
      const TensorContext ctx(a, b);
      record(product_joining(ctx), "product " + a.name + "/" + b.name);
      const FindResult plain = find_joining(ctx);
      record(plain.joining, "solver " + a.name + "/" + b.name);
      const FindResult best = find_joining(ctx, ctx.basis(0, b.structure.dimension() - 1));
      o.require(!best.report.inconclusive, "inconclusive solve " + a.name + "/" + b.name);
      record(best.joining, "solver objective " + a.name + "/" + b.name);
    }
  o.detail << checked << " joinings, max residual " << worst;
  return o;
}

Outcome face_dimensions() {
  Outcome o;
  const FiniteSystem c2 = corpus("c2");
  const TensorContext ctx(c2, c2);
  const JoiningMatrix diag =
      joining_from_values(ctx, [](int i, int j) { return i == j ? Complex(0.5) : Complex(0.0); });
  const int d_diag = joining_face_dimension(ctx, diag);
  const int d_prod = joining_face_dimension(ctx, product_joining(ctx));
  o.require(d_diag == 0, "diagonal joining is not extreme");
  o.require(d_prod >= 1, "product joining reported extreme");

  const auto vertices = oracle::vertices(transport(c2, c2));
  bool diag_vertex = false, product_vertex = false;
  Eigen::MatrixXd dm(2, 2);
  dm << 0.5, 0, 0, 0.5;
  for (const auto& v : vertices) {
    diag_vertex = diag_vertex || (v - dm).cwiseAbs().maxCoeff() < 1e-12;
    product_vertex = product_vertex || (v.array() - 0.25).abs().maxCoeff() < 1e-12;
  }
  o.require(diag_vertex, "oracle: diagonal coupling is not a vertex");
  o.require(!product_vertex, "oracle: product coupling is a vertex");
  o.require(vertices.size() == 2, "oracle: polytope is not a segment");
  o.detail << "diagonal face dim " << d_diag << ", product face dim " << d_prod << "; oracle " << vertices.size()
           << " vertices, diagonal is one, product is not";
  return o;
}

DualSystem dual(const char* name) { return load_dual_system(testing_support::corpus_path(name)); }

Outcome dual_classification() {
  Outcome o;
  const DualClassification s = classify_dual(dual("dual_shift"));
  o.require(s.ergodic && s.strongly_mixing && !s.compact, "all-shift classification");
  const DualClassification c = classify_dual(dual("dual_cycle2"));
  o.require(c.compact && !c.ergodic, "all-cycle classification");
  const DualSystem mixed = dual("dual_mixed");
  const DualClassification m = classify_dual(mixed);
  o.require(!m.ergodic && !m.compact, "mixed classification");

  const FiniteOrbitSubsystem e = finite_orbit_subsystem(mixed);
  o.require(classify_dual(e.restricted).compact, "restricted system not compact");
  bool tracks_ok = e.restricted.tracks().size() == 1 && e.restricted.tracks()[0].kind == Track::Kind::Cycle;
  o.require(tracks_ok, "restricted system is not the cycle-letter subgroup");
  std::mt19937_64 rng(17);
  int members = 0;
  for (int k = 0; k < 2000; ++k) {
    const DualElement g = mixed.sample(rng, 5);
    bool cycle_letters_only = true;
    for (const Letter& s : mixed.letters_of(g))
      cycle_letters_only = cycle_letters_only && mixed.tracks()[std::size_t(s.track)].kind == Track::Kind::Cycle;
    o.require(e.contains(g) == cycle_letters_only, "membership differs from the cycle-letter subgroup");
    if (e.contains(g)) {
      ++members;
      o.require(e.restricted.format(e.restricted.parse(mixed.format(g))) == mixed.format(g),
                "member not expressible in the restricted system");
    }
  }
  int checks = 0;
  for (const char* name : {"dual_shift", "dual_cycle2", "dual_mixed", "dual_finperm_shift"}) {
    const DualPropertyReport r = dual_property_checks(dual(name), 2024, 1000);
    checks += r.checks;
    for (const auto& f : r.failures) o.require(false, std::string(name) + ": " + f);
  }
  o.detail << "shift ergodic+mixing, cycle2 compact, mixed neither; E membership agreed on 2000 samples (" << members
           << " members); " << checks << " exact property checks";
  return o;
}

Outcome dual_graph_limits() {
  Outcome o;
  const DualSystem shift = dual("dual_shift");
  std::mt19937_64 rng(99);
  int pairs = 0, evaluations = 0;
  for (int k = 0; k < 1000; ++k) {
    const DualElement g = shift.sample(rng, 4);
    const DualElement h = k % 5 == 0 ? shift.apply_T(g, k % 7) : shift.sample(rng, 4);
    const long long s = index_span(shift, {g, h});
    const bool target = shift.is_identity(g) && shift.is_identity(h);
    ++pairs;
    for (long long n = s + 1; n <= 64; ++n) {
      ++evaluations;
      o.require(delta_indicator(shift, g, h, n) == target, "all-shift Delta_n differs from [g=1][h=1] past the span");
    }
  }
  const DualSystem cyc = dual("dual_cycle2");
  int periodic = 0;
  for (int k = 0; k < 1000; ++k) {
    const DualElement g = cyc.sample(rng, 4);
    const DualElement h = k % 2 == 0 ? g : cyc.sample(rng, 4);
    const long long p = orbit_length(cyc, g).period;
    for (long long n = 0; n + p <= 64; ++n)
      o.require(delta_indicator(cyc, g, h, n) == delta_indicator(cyc, g, h, n + p), "cycle series not periodic");
    if (!cyc.is_identity(g) && g == h) {
      ++periodic;
      for (long long n = 0; n <= 64; n += p)
        o.require(delta_indicator(cyc, g, g, n), "cycle series settles to the product value");
    }
  }
  o.detail << pairs << " all-shift pairs, " << evaluations << " exact evaluations past the span; " << periodic
           << " cycle pairs return to 1 at every period over n = 0..64";
  return o;
}

Outcome dual_ornstein() {
  Outcome o;
  const DualSystem shift = dual("dual_shift");
  std::mt19937_64 rng(5);
  std::vector<DualTestElement> tests;
  for (int k = 0; k < 10; ++k) {
    PairCombination c = sample_pair_combination(shift, rng, 4);
    tests.push_back({format(shift, c), c});
  }
  const DualOrnsteinScan s = ornstein_scan_dual(shift, tests, 0, 64);
  o.require(s.strongly_mixing && s.consistent, "all-shift scan flags");
  long long max_bound = 0;
  for (const DualOrnsteinRow& row : s.rows) {
    o.require(!row.skipped, "degenerate random test element");
    o.require(row.limsup == 1, "all-shift limsup is not 1");
    max_bound = std::max(max_bound, row.escape_bound);
    for (long long n = row.escape_bound + 1; n <= 64; ++n)
      o.require(row.ratios[std::size_t(n)] == 1, "ratio differs from 1 past the escape bound");
  }
  const DualSystem cyc = dual("dual_cycle2");
  const DualOrnsteinScan c = ornstein_scan_dual(cyc, {{"two", parse_pair_combination(cyc, "x0|x0; x1|x1")}}, 0, 64);
  o.require(c.rows[0].limsup == 2, "cycle(2) limsup is not 2");
  o.require(!c.strongly_mixing, "cycle(2) reported strongly mixing");
  o.detail << "10 random all-shift elements: ratio exactly 1 past escape bounds (max bound " << max_bound
           << "), limsup 1; cycle(2) limsup " << to_string(c.rows[0].limsup) << ", strongly_mixing false";
  return o;
}

Outcome lemma_components() {
  Outcome o;
  const FiniteSystem c3 = corpus("c3");
  const Complex omega = std::polar(1.0, 2.0 * M_PI / 3.0);
  const AlgebraElement u = eigenoperator(c3, {std::conj(omega)});
  const Vector expected = Vector{{1.0, omega, omega * omega}};
  const Complex phase = u.coordinates()(0);
  const double shape = (u.coordinates() - phase * expected).cwiseAbs().maxCoeff();
  const double unitarity = (u.adjoint() * u - AlgebraElement::identity(c3.structure)).max_abs();
  o.require(shape < 1e-10, "eigenoperator is not diag(1, w, w^2) up to phase");
  o.require(unitarity < 1e-10, "eigenoperator not unitary");
  double atom = 0.0, comm = 0.0;
  for (long long n = 1; n <= 6; ++n) {
    const CovarianceReport r = verify_spectral_covariance(c3, u, std::conj(omega), n, 12);
    atom = std::max(atom, r.atom_residual);
    comm = std::max(comm, r.commutation_residual);
  }
  o.require(atom < 1e-10, "atom permutation residual");
  o.require(comm == 0.0, "interval projections do not commute exactly");

  const FiniteSystem pauli = corpus("pauli");
  const AlgebraElement plus(pauli.structure, {(Matrix(2, 2) << 0.5, 0.5, 0.5, 0.5).finished()});
  const double tracial = std::max(modular_invariance_check(pauli, plus).sigma_residual,
                                  modular_invariance_check(c3, AlgebraElement::unit(c3.structure, 1)).sigma_residual);
  o.require(tracial < 1e-10, "tracial modular residual");
  const double control = modular_invariance_check(corpus("gibbs"), plus).sigma_residual;
  o.require(control > 0.1, "Gibbs negative control did not fire");
  o.detail << "unitarity " << unitarity << ", atom residual " << atom << ", commutation " << comm
           << ", tracial sigma " << tracial << ", Gibbs control " << control;
  return o;
}

Outcome conditional_expectations() {
  Outcome o;
  struct Case {
    const char* a;
    const char* b;
    int i, j;
  };
  const std::vector<Case> cases = {
      {"c2", "c2", 0, 0},       {"c2", "c2", 0, 1},       {"c3", "c3", 0, 0},       {"c3", "c3", 1, 2},
      {"c2", "c3", 0, 0},       {"c5", "identity3", 2, 1}, {"gibbs", "gibbs", 0, 0}, {"gibbs", "gibbs", 1, 2},
      {"gibbs", "gibbs", 3, 3}, {"pauli", "pauli", 0, 0}, {"pauli", "pauli", 1, 2}, {"pauli", "pauli", 0, 3},
      {"c3", "gibbs", 0, 0},    {"identity2", "c2", 0, 1}, {"gibbs", "identity2", 1, 0}, {"c5", "c5", 0, 0},
      {"c5", "c5", 0, 2},       {"identity3", "identity3", 0, 0}, {"c2", "gibbs", 1, 3}, {"gibbs", "c3", 0, 2},
  };
  double worst_norm = 0.0, worst_int = 0.0;
  for (const Case& c : cases) {
    const TensorContext ctx(corpus(c.a), corpus(c.b));
    const FindResult r = find_joining(ctx, ctx.basis(c.i, c.j));
    o.require(!r.report.inconclusive, std::string("inconclusive solve ") + c.a + "/" + c.b);
    const ConditionalExpectation ce = conditional_expectation(ctx, r.joining);
    worst_norm = std::max(worst_norm, ce.norm);
    worst_int = std::max(worst_int, ce.intertwining);
  }
  o.require(worst_norm <= 1.0 + 1e-8, "norm above 1 + 1e-8");
  o.require(worst_int < 1e-6, "intertwining residual above 1e-6");

  double rank_one = 0.0;
  for (const char* a : {"c2", "gibbs", "pauli"}) {
    const FiniteSystem sys = corpus(a);
    const TensorContext ctx(sys, sys);
    const ConditionalExpectation p = conditional_expectation(ctx, product_joining(ctx));
    const Vector omega = AlgebraElement::identity(sys.structure).coordinates();
    Matrix expected(omega.size(), omega.size());
    for (int j = 0; j < sys.structure.dimension(); ++j)
      expected.col(j) = sys.state(AlgebraElement::unit(sys.structure, j)) * omega;
    rank_one = std::max(rank_one, (p.op - expected).cwiseAbs().maxCoeff());
  }
  o.require(rank_one < 1e-14, "product joining is not the rank-one map b -> nu(b) Omega");
  o.detail << cases.size() << " solver joinings: max norm " << worst_norm << ", max intertwining " << worst_int
           << "; product rank-one deviation " << rank_one;
  return o;
}

Outcome finite_dimensional_facts() {
  Outcome o;
  int n = 0, scanned = 0;
  for (const auto& name : kFiniteCorpus) {
    const FiniteSystem sys = corpus(name);
    const Classification c = classify_finite(sys);
    o.require(c.compact && c.discrete_spectrum, name + " not compact with discrete spectrum");
    o.require(c.weakly_mixing == (c.gns_dimension == 1), name + " weak mixing differs from dim 1");
    ++n;
    if (sys.group.kind() != GroupDescriptor::Kind::Integers) continue;
    ++scanned;
    const TensorContext ctx = diagonal_context(sys);
    std::vector<OrnsteinTestElement> tests = {{"1 (x) 1", AlgebraElement::identity(ctx.structure())}};
    for (int i = 0; i < sys.structure.dimension(); ++i) tests.push_back({"e (x) e", ctx.basis(i, i)});
    const OrnsteinScan s = ornstein_ratio_scan(sys, tests, 0, 64);
    o.require(s.strongly_mixing == (sys.structure.dimension() == 1), name + " strong mixing differs from dim 1");
  }
  FiniteSystem one;
  one.structure = BlockStructure({1});
  one.state = FaithfulState(AlgebraElement::identity(one.structure));
  one.generators.push_back(Automorphism::identity(one.structure));
  one.name = "one-point";
  const Classification c = classify_finite(one);
  o.require(c.weakly_mixing && c.ergodic && c.compact, "one-dimensional system not weakly mixing");
  const TensorContext ctx = diagonal_context(one);
  o.require(ornstein_ratio_scan(one, {{"unit", ctx.basis(0, 0)}}, 0, 64).strongly_mixing,
            "one-dimensional system not strongly mixing");
  o.detail << n + 1 << " systems: compact with discrete spectrum, weakly mixing exactly when one-dimensional; "
           << scanned + 1 << " Z-systems scanned, strongly mixing exactly when one-dimensional; "
           << "universal and infinite-dimensional statements are covered only through these component checks";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"ergodic rotation C5 is disjoint from the identity system C3", ergodic_vs_identity},
      {"disjoint point spectra give disjointness; C2 with itself is not disjoint", disjoint_spectra},
      {"Cesaro averages of the C3 rotation", cesaro_rates},
      {"joining residual battery over the corpus", joining_battery},
      {"extremality via face dimension", face_dimensions},
      {"exact classification of dual systems", dual_classification},
      {"graph joinings of dual systems", dual_graph_limits},
      {"Ornstein scan on dual systems", dual_ornstein},
      {"eigenoperator, spectral projections and modular invariance", lemma_components},
      {"conditional expectations of solver joinings", conditional_expectations},
      {"finite-dimensional substitutes for infinite-dimensional claims", finite_dimensional_facts},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    if (!o.pass) ++failures;
    std::printf("%s  %2zu  %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), o.detail.str().c_str());
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
