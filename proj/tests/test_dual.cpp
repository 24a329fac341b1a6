#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ncjoin/dual.hpp"
#include "ncjoin/system_io.hpp"
#include "oracle/regular_rep.hpp"
#include "support.hpp"

using namespace ncjoin;

namespace {

DualSystem load(const char* name) { return load_dual_system(testing_support::corpus_path(name)); }

DualSystem tracks(DualFamily f, std::vector<Track> t) { return DualSystem(f, std::move(t)); }

Track shift(const char* id) { return {id, Track::Kind::Shift, 0}; }
Track cycle(const char* id, long long m) { return {id, Track::Kind::Cycle, m}; }

Rational q(long long a, long long b = 1) { return Rational(a, b); }

}  // namespace

TEST_CASE("exact arithmetic") {
  CHECK(parse_rational("-3/6") == q(-1, 2));
  CHECK(to_string(q(4, 6)) == "2/3");
  CHECK(parse_gaussian("1/2+3i") == GaussianRational(q(1, 2), 3));
  CHECK(parse_gaussian("-i") == GaussianRational(0, -1));
  CHECK(parse_gaussian("2-1/3i") == GaussianRational(2, q(-1, 3)));
  CHECK(to_string(GaussianRational(q(1, 2), -1)) == "1/2-i");
  GaussianRational z(1, 1);
  CHECK(z * z.conj() == GaussianRational(2));
  CHECK(z.norm() == 2);
  CHECK_THROWS_AS(parse_rational("1/0"), InputError);
  CHECK_THROWS_AS(parse_gaussian("abc"), InputError);
}

TEST_CASE("free word arithmetic") {
  DualSystem s = tracks(DualFamily::FreeGroup, {shift("x"), shift("y"), shift("z")});
  CHECK(s.is_identity(s.multiply(s.parse("x0"), s.parse("x0^-1"))));
  CHECK(s.multiply(s.parse("x0 y0"), s.parse("y0^-1 z0")) == s.parse("x0 z0"));
  CHECK(s.format(s.inverse(s.parse("x0 y0"))) == "y0^-1 x0^-1");
  CHECK(s.parse("x1^3") == s.parse("x1 x1 x1"));
  CHECK(s.parse("x1^-2 x1^2").index() == 0);
  CHECK(s.is_identity(s.parse("x1^-2 x1^2")));
  CHECK(s.format(s.parse("x-3 y2^-1")) == "x-3 y2^-1");
  CHECK_THROWS_AS(s.parse("w0"), InputError);
  CHECK_THROWS_AS(s.parse("x"), InputError);
}

TEST_CASE("apply_T") {
  DualSystem s = tracks(DualFamily::FreeGroup, {shift("x")});
  CHECK(s.apply_T(s.parse("x0"), 5) == s.parse("x5"));
  DualSystem c = tracks(DualFamily::FreeGroup, {cycle("x", 3)});
  CHECK(c.apply_T(c.parse("x0 x1"), 3) == c.parse("x0 x1"));
  CHECK(c.apply_T(c.parse("x0 x1"), 1) == c.parse("x1 x2"));

  DualSystem f = load("dual_finperm_shift");
  CHECK(f.apply_T(f.parse("(x0 x1)"), 2) == f.parse("(x2 x3)"));
  // Independent composition: s^2 g s^-2 with s the shift, evaluated pointwise.
  const auto g = std::get<FinitaryPermutation>(f.parse("(x0 x1 x5)"));
  const auto t2 = std::get<FinitaryPermutation>(f.apply_T(g, 2));
  for (long long i = -3; i < 10; ++i) {
    const Letter moved = g(f.letter(0, i - 2));
    CHECK(t2(f.letter(0, i)) == f.letter(0, moved.index + 2));
  }
  CHECK(f.apply_T(f.apply_T(f.parse("(x0 x3)(x1 x2)"), 4), 3) == f.apply_T(f.parse("(x0 x3)(x1 x2)"), 7));
}

TEST_CASE("orbit certificates") {
  DualSystem s = tracks(DualFamily::FreeGroup, {cycle("x", 2), cycle("y", 3), shift("z")});
  OrbitCertificate id = orbit_length(s, s.identity());
  CHECK(id.finite);
  CHECK(id.period == 1);

  OrbitCertificate six = orbit_length(s, s.parse("x0 y0"));
  CHECK(six.finite);
  CHECK(six.period == 6);
  // Explicit iteration.
  long long first_return = 0;
  for (long long n = 1; n <= 6 && !first_return; ++n)
    if (s.apply_T(s.parse("x0 y0"), n) == s.parse("x0 y0")) first_return = n;
  CHECK(first_return == 6);

  OrbitCertificate esc = orbit_length(s, s.parse("z0"));
  CHECK_FALSE(esc.finite);
  CHECK(*esc.escaping == s.letter(2, 0));
  for (long long n = 1; n <= 50; ++n) CHECK(s.apply_T(s.parse("z0"), n) == s.parse("z" + std::to_string(n)));

  OrbitCertificate mixed = orbit_length(s, s.parse("x1 z4^-1 y2"));
  CHECK_FALSE(mixed.finite);
  CHECK(*mixed.escaping == s.letter(2, 4));

  // The permutation (y0 y2) on a 4-cycle returns after two steps, not four.
  DualSystem p = tracks(DualFamily::FinitaryPermutations, {cycle("y", 4)});
  OrbitCertificate half = orbit_length(p, p.parse("(y0 y2)"));
  CHECK(half.finite);
  CHECK(half.period == 2);
  CHECK(orbit_length(p, p.parse("(y0 y1)")).period == 4);
}

TEST_CASE("classification of the dual corpus") {
  DualClassification shift_c = classify_dual(load("dual_shift"));
  CHECK(shift_c.ergodic);
  CHECK(shift_c.strongly_mixing);
  CHECK(shift_c.weakly_mixing);
  CHECK_FALSE(shift_c.compact);

  DualClassification cyc = classify_dual(load("dual_cycle2"));
  CHECK(cyc.compact);
  CHECK_FALSE(cyc.ergodic);
  CHECK_FALSE(cyc.group_finite);

  DualClassification mixed = classify_dual(load("dual_mixed"));
  CHECK_FALSE(mixed.ergodic);
  CHECK_FALSE(mixed.compact);

  DualClassification fp = classify_dual(load("dual_finperm_shift"));
  CHECK(fp.ergodic);
  CHECK_FALSE(fp.compact);

  DualSystem s3 = tracks(DualFamily::FinitaryPermutations, {cycle("y", 3)});
  DualClassification finite = classify_dual(s3);
  CHECK(finite.group_finite);
  CHECK(*finite.group_order == 6);
  CHECK_FALSE(finite.ergodic);
  CHECK(finite.compact);
}

TEST_CASE("finite-orbit subsystem") {
  DualSystem mixed = load("dual_mixed");
  FiniteOrbitSubsystem e = finite_orbit_subsystem(mixed);
  CHECK_FALSE(e.trivial);
  CHECK(e.contains(mixed.parse("y0 y1^-1 y0")));
  CHECK_FALSE(e.contains(mixed.parse("y0 x3")));
  CHECK(e.restricted.tracks().size() == 1);
  CHECK(e.restricted.tracks()[0].id == "y");
  CHECK(classify_dual(e.restricted).compact);
  CHECK(e.restricted.format(e.restricted.parse("y0 y1^-1")) == "y0 y1^-1");

  FiniteOrbitSubsystem t = finite_orbit_subsystem(load("dual_shift"));
  CHECK(t.trivial);
  CHECK(t.restricted.tracks().empty());
  CHECK(classify_dual(load("dual_shift")).ergodic);
}

TEST_CASE("correlation series") {
  DualSystem x = tracks(DualFamily::FreeGroup, {shift("x")});
  CorrelationSeries s = correlation_series(x, parse_combination(x, "x0"), parse_combination(x, "x5^-1"), 0, 12);
  for (long long n = 0; n <= 12; ++n) CHECK(s.values[std::size_t(n)] == GaussianRational(n == 5 ? 1 : 0));
  CHECK(s.product == GaussianRational(0));
  REQUIRE(s.escape_bound.has_value());
  CHECK(*s.escape_bound == 5);

  CorrelationSeries unit = correlation_series(x, parse_combination(x, "1"), parse_combination(x, "1"), 0, 5);
  for (const auto& v : unit.centered) CHECK(v.is_zero());

  DualSystem c3 = tracks(DualFamily::FreeGroup, {cycle("x", 3)});
  CorrelationSeries p = correlation_series(c3, parse_combination(c3, "x0"), parse_combination(c3, "x0^-1"), 0, 12);
  for (long long n = 0; n <= 12; ++n) CHECK(p.values[std::size_t(n)] == GaussianRational(n % 3 == 0 ? 1 : 0));
  CHECK_FALSE(p.escape_bound.has_value());

  // Mixed coefficients, checked against the hand expansion.
  Combination a = parse_combination(x, "1/2:1; i:x0");
  Combination b = parse_combination(x, "2:1; 3:x2^-1");
  CorrelationSeries m = correlation_series(x, a, b, 0, 4);
  CHECK(m.product == GaussianRational(1));
  CHECK(m.values[2] == GaussianRational(1, 3));
  CHECK(m.centered[3].is_zero());
  CHECK(m.cauchy_schwarz_squared == q(5, 4) * 13);
  CHECK_THROWS_AS(correlation_series(x, Combination(), b, 0, 1), PreconditionError);
}

TEST_CASE("Delta_n evaluation") {
  DualSystem x = tracks(DualFamily::FreeGroup, {shift("x")});
  PairCombination gg = parse_pair_combination(x, "x0 x1^-1|x0 x1^-1");
  CHECK(delta_n_eval(x, gg, 0).value == GaussianRational(1));
  PairCombination c = parse_pair_combination(x, "x0|x0");
  for (long long n = 1; n < 10; ++n) CHECK(delta_n_eval(x, c, n).value.is_zero());
  PairCombination one = parse_pair_combination(x, "1|1");
  for (long long n = 0; n < 10; ++n) CHECK(delta_n_eval(x, one, n).value == GaussianRational(1));

  PairCombination two = parse_pair_combination(x, "x0|x0; x1|x1");
  for (long long n = 0; n < 12; ++n) {
    DeltaValue d = delta_n_eval(x, two, n);
    CHECK(d.product == 2);
    CHECK(d.value_cstar_c == (n == 0 ? 4 : 2));
  }
}

TEST_CASE("Delta_n(c^* c) against the regular representation of S_3") {
  DualSystem s3 = tracks(DualFamily::FinitaryPermutations, {cycle("y", 3)});
  oracle::SymmetricGroup grp(3);
  auto perm_of = [&](const DualElement& g) {
    oracle::Perm p(3);
    const auto& fp = std::get<FinitaryPermutation>(g);
    for (int i = 0; i < 3; ++i) p[std::size_t(i)] = int(fp(s3.letter(0, i)).index);
    return p;
  };
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    PairCombination c = sample_pair_combination(s3, rng, 4);
    std::vector<oracle::PairTerm> terms;
    for (const auto& [gh, coef] : c.terms)
      terms.push_back({{coef.real().convert_to<double>(), coef.imag().convert_to<double>()},
                       perm_of(gh.first),
                       perm_of(gh.second)});
    for (int n = 0; n < 7; ++n) {
      CAPTURE(format(s3, c));
      CAPTURE(n);
      const double exact = delta_n_eval(s3, c, n).value_cstar_c.convert_to<double>();
      CHECK(exact == doctest::Approx(oracle::delta_cstar_c(grp, terms, n)).epsilon(1e-12));
    }
  }
}

TEST_CASE("Ornstein scan on dual systems") {
  DualSystem shift_sys = load("dual_shift");
  DualOrnsteinScan s = ornstein_scan_dual(
      shift_sys,
      {{"two", parse_pair_combination(shift_sys, "x0|x0; x1|x1")}, {"unit", parse_pair_combination(shift_sys, "1|1")}}, 0,
      16);
  CHECK(s.strongly_mixing);
  CHECK(s.consistent);
  CHECK(s.rows[0].escape_bound == 1);
  for (long long n = 2; n <= 16; ++n) CHECK(s.rows[0].ratios[std::size_t(n)] == 1);
  CHECK(s.rows[0].ratios[0] == 2);
  CHECK(s.rows[0].limsup == 1);
  for (const auto& r : s.rows[1].ratios) CHECK(r == 1);

  DualSystem cyc = load("dual_cycle2");
  DualOrnsteinScan c = ornstein_scan_dual(cyc, {{"two", parse_pair_combination(cyc, "x0|x0; x1|x1")}}, 0, 9);
  CHECK_FALSE(c.strongly_mixing);
  for (long long n = 0; n <= 9; ++n) CHECK(c.rows[0].ratios[std::size_t(n)] == (n % 2 == 0 ? 2 : 1));
  CHECK(c.rows[0].limsup == 2);
  CHECK(c.rows[0].period == 2);

  DualOrnsteinScan z = ornstein_scan_dual(cyc, {{"zero", PairCombination()}}, 0, 3);
  CHECK(z.rows[0].skipped);
}

TEST_CASE("opposite-group joining") {
  OppositeGroupJoining t = opposite_group_joining(load("dual_shift"));
  CHECK(t.trivial);
  CHECK_FALSE(t.witness.has_value());
  CHECK(t.consistent_with_classification);
  CHECK(t.invariance_failures == 0);

  DualSystem mixed = load("dual_mixed");
  OppositeGroupJoining j = opposite_group_joining(mixed);
  CHECK_FALSE(j.trivial);
  REQUIRE(j.witness.has_value());
  CHECK(j.witness_value == 1);
  CHECK(j.witness_product_value == 0);
  CHECK(j(mixed.identity(), mixed.identity()) == 1);
  CHECK(j(mixed.parse("y0"), mixed.parse("y0")) == 1);
  CHECK(j(mixed.parse("y1"), mixed.parse("y0")) == 0);
  CHECK_THROWS_AS(j(mixed.parse("y0"), mixed.parse("x0")), PreconditionError);
  CHECK(j.opposite_multiply(mixed.parse("y0"), mixed.parse("y1")) == mixed.parse("y1 y0"));
  CHECK(j.invariance_failures == 0);
  CHECK(j.consistent_with_classification);
}

TEST_CASE("2-norm commutator profile") {
  DualSystem x = tracks(DualFamily::FreeGroup, {shift("x")});
  auto prof = commutator_profile_2norm(x, parse_combination(x, "x0"), parse_combination(x, "x0"), 4);
  // [x0, xk] = x0 xk - xk x0: two distinct reduced words.
  for (const auto& v : prof) CHECK(v == 2);
  DualSystem c = tracks(DualFamily::FreeGroup, {cycle("x", 2)});
  auto per = commutator_profile_2norm(c, parse_combination(c, "x0"), parse_combination(c, "x0"), 4);
  CHECK(per[0] == 2);
  CHECK(per[1] == 0);
}

TEST_CASE("property checks over the dual corpus") {
  for (const char* name : {"dual_shift", "dual_cycle2", "dual_mixed", "dual_finperm_shift"}) {
    CAPTURE(name);
    DualPropertyReport r = dual_property_checks(load(name), 7, 1000);
    CHECK(r.failures.empty());
    for (const auto& f : r.failures) MESSAGE(f);
    CHECK(r.checks > 10000);
  }
}

TEST_CASE("dual system files") {
  DualSystem relabelled = dual_system_from_json(nlohmann::json::parse(
      R"({"family":"free","tracks":[{"id":"x","kind":"shift"}],"h":{"cycles":[["a","b","c"]]}})"));
  CHECK(relabelled.apply_T(relabelled.parse("a b^-1"), 1) == relabelled.parse("b c^-1"));
  CHECK(relabelled.format(relabelled.parse("c x2")) == "c x2");
  CHECK_FALSE(classify_dual(relabelled).ergodic);
  DualSystem back = dual_system_from_json(dual_system_to_json(relabelled));
  CHECK(back.format(back.parse("a c x1")) == "a c x1");

  CHECK_THROWS_AS(dual_system_from_json(nlohmann::json::parse(R"({"family":"free","tracks":[]})")), InputError);
  CHECK_THROWS_AS(dual_system_from_json(nlohmann::json::parse(R"({"family":"group","tracks":[]})")), InputError);
  CHECK_THROWS_AS(
      dual_system_from_json(nlohmann::json::parse(R"({"family":"free","tracks":[{"id":"x1","kind":"shift"}]})")),
      InputError);
  CHECK_THROWS_AS(dual_system_from_json(nlohmann::json::parse(
                      R"({"family":"free","tracks":[{"id":"x","kind":"cycle","m":0}]})")),
                  InputError);
  for (const char* name : {"dual_shift", "dual_cycle2", "dual_mixed", "dual_finperm_shift"}) CHECK_NOTHROW(load(name));
}
